//! Minimal SVG rendering for plans, time series and sweep tables.

use std::fmt::Write;

use crate::geometry::Vec2;
use crate::scene::Scene;
use crate::trajectory::Trajectory;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn header(out: &mut String, width: f64, height: f64, metadata: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    if !metadata.is_empty() {
        let _ = writeln!(out, "<metadata>{}</metadata>", escape(metadata));
    }
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn points_attr(pts: impl Iterator<Item = (f64, f64)>) -> String {
    pts.map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ")
}

/// Scene overlay: static polygons, obstacle boxes sampled every
/// `obstacle_dt` seconds up to the longest trajectory, and the trajectories.
pub fn plan_svg(scene: &Scene, trajectories: &[(&str, &Trajectory)], obstacle_dt: f64, metadata: &str) -> String {
    let b = scene.bounds();
    let scale = 600.0 / b.width().max(b.height());
    let (w, h) = (b.width() * scale + 40.0, b.height() * scale + 40.0);
    let map = |p: Vec2| (20.0 + (p.x - b.min.x) * scale, 20.0 + (b.max.y - p.y) * scale);
    let mut out = String::new();
    header(&mut out, w, h, metadata);
    let (x0, y0) = map(Vec2::new(b.min.x, b.max.y));
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        b.width() * scale,
        b.height() * scale
    );
    for poly in &scene.map.polygons {
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="#999" stroke="#555"/>"##,
            points_attr(poly.vertices().iter().map(|&p| map(p)))
        );
    }
    let t_end = trajectories.iter().map(|(_, t)| t.end().t).fold(0.0, f64::max);
    let frames = if obstacle_dt > 0.0 { (t_end / obstacle_dt).floor() as usize } else { 0 };
    for obstacle in &scene.obstacles {
        for k in 0..=frames {
            let t = k as f64 * obstacle_dt;
            let opacity = 0.15 + 0.6 * (1.0 - k as f64 / (frames + 1) as f64);
            let corners = obstacle.footprint_at(t).corners();
            let _ = writeln!(
                out,
                r##"<polygon points="{}" fill="#f4a261" fill-opacity="{opacity:.2}" stroke="#e76f51"/>"##,
                points_attr(corners.iter().map(|&p| map(p)))
            );
        }
    }
    for (i, (label, traj)) in trajectories.iter().enumerate() {
        let c = color(i);
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            points_attr(traj.positions().into_iter().map(map))
        );
        for s in traj.states() {
            let (x, y) = map(Vec2::new(s.x, s.y));
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{c}"/>"#);
        }
        let _ = writeln!(
            out,
            r#"<text x="30" y="{:.1}" font-size="14" fill="{c}">{}</text>"#,
            40.0 + 18.0 * i as f64,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Line chart of named `(x, y)` series.
pub fn series_svg(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], metadata: &str) -> String {
    let (w, h, m) = (720.0, 420.0, 60.0);
    let all = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut out = String::new();
    header(&mut out, w, h, metadata);
    let _ = writeln!(out, r#"<text x="{:.1}" y="25" font-size="16" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        out,
        r##"<polyline points="{m},{m} {m},{:.1} {:.1},{:.1}" fill="none" stroke="#333"/>"##,
        h - m,
        w - m,
        h - m
    );
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#, w / 2.0, h - 15.0, escape(x_label));
    let _ = writeln!(out, r#"<text x="15" y="{:.1}" font-size="12" transform="rotate(-90 15 {:.1})" text-anchor="middle">{}</text>"#, h / 2.0, h / 2.0, escape(y_label));
    let _ = writeln!(out, r#"<text x="{m}" y="{:.1}" font-size="10">{x0:.3}</text>"#, h - m + 15.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{x1:.3}</text>"#, w - m, h - m + 15.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{y0:.3}</text>"#, m - 4.0, h - m);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{m}" font-size="10" text-anchor="end">{y1:.3}</text>"#, m - 4.0);
    for (i, (label, pts)) in series.iter().enumerate() {
        let c = color(i);
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            points_attr(pts.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).map(|&(x, y)| (px(x), py(y))))
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{c}">{}</text>"#,
            w - m - 120.0,
            m + 15.0 * (i + 1) as f64,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Table heatmap; each row is shaded relative to its own range.
pub fn heatmap_svg(title: &str, columns: &[String], rows: &[(String, Vec<f64>)], metadata: &str) -> String {
    let (cw, ch, left, top) = (90.0, 32.0, 170.0, 50.0);
    let w = left + cw * columns.len() as f64 + 20.0;
    let h = top + ch * rows.len() as f64 + 20.0;
    let mut out = String::new();
    header(&mut out, w, h, metadata);
    let _ = writeln!(out, r#"<text x="10" y="20" font-size="16">{}</text>"#, escape(title));
    for (j, c) in columns.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            left + cw * (j as f64 + 0.5),
            top - 8.0,
            escape(c)
        );
    }
    for (i, (name, values)) in rows.iter().enumerate() {
        let y = top + ch * i as f64;
        let _ = writeln!(out, r#"<text x="10" y="{:.1}" font-size="12">{}</text>"#, y + ch * 0.65, escape(name));
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, f64::min);
        let hi = finite.fold(f64::NEG_INFINITY, f64::max);
        for (j, &v) in values.iter().enumerate() {
            let x = left + cw * j as f64;
            let shade = if v.is_finite() && hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            let fill = if v.is_finite() {
                let g = (230.0 - 170.0 * shade) as u8;
                format!("rgb(255,{g},{g})")
            } else {
                "#ccc".to_string()
            };
            let _ = writeln!(out, r##"<rect x="{x:.1}" y="{y:.1}" width="{cw}" height="{ch}" fill="{fill}" stroke="#fff"/>"##);
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
                x + cw / 2.0,
                y + ch * 0.65,
                if v.is_finite() { format!("{v:.4}") } else { "n/a".into() }
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
