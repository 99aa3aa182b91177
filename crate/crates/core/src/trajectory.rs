//! Time-stamped SE(2) trajectories: A* initialization, time redistribution,
//! segment interpolation, path metrics and CSV exchange.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{lerp_angle, unwrap_near, wrap_angle, Pose, State, Vec2};
use crate::scene::{OccupancyGrid, Scene};

pub type TrajectoryState = State;

/// Segments shorter than this are ignored by cusp detection.
pub const MIN_CUSP_SEGMENT: f64 = 0.01;

/// Lower bound on any time step.
pub const DT_MIN: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("a trajectory needs at least 2 states, got {0}")]
    TooShort(usize),
    #[error("state {0} is not finite")]
    NonFinite(usize),
    #[error("time stamps must be strictly increasing (state {0})")]
    NonMonotonicTime(usize),
    #[error("no path: {0}")]
    NoPath(String),
    #[error("malformed trajectory CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    states: Vec<State>,
}

impl Trajectory {
    /// Validates finiteness and strictly increasing time.
    pub fn new(states: Vec<State>) -> Result<Self, TrajectoryError> {
        if states.len() < 2 {
            return Err(TrajectoryError::TooShort(states.len()));
        }
        if let Some(i) = states.iter().position(|s| !s.is_finite()) {
            return Err(TrajectoryError::NonFinite(i));
        }
        if let Some(i) = states.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(TrajectoryError::NonMonotonicTime(i + 1));
        }
        Ok(Self { states })
    }

    pub(crate) fn from_states_unchecked(states: Vec<State>) -> Self {
        Self { states }
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    /// Number of segments `N` (states are indexed `0..=N`).
    pub fn segments(&self) -> usize {
        self.states.len() - 1
    }

    pub fn start(&self) -> State {
        self.states[0]
    }

    pub fn end(&self) -> State {
        *self.states.last().expect("non-empty")
    }

    pub fn duration(&self) -> f64 {
        self.end().t - self.start().t
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.states.iter().map(|s| Vec2::new(s.x, s.y)).collect()
    }

    /// Uniform time stamps `t_i = i·t_N/N`; poses untouched.
    pub fn redistribute_times(&self) -> Trajectory {
        let n = self.segments() as f64;
        let t_n = self.end().t;
        assert!(t_n > 0.0, "redistribution needs t_N > 0");
        let mut states = self.states.clone();
        let last = states.len() - 1;
        for (i, s) in states.iter_mut().enumerate() {
            s.t = if i == last { t_n } else { i as f64 * t_n / n };
        }
        Trajectory { states }
    }

    /// Pose at fraction `u` of segment `i`: linear in x, y and shortest arc in θ.
    pub fn interpolate(&self, i: usize, u: f64) -> Pose {
        assert!(i < self.segments(), "segment index out of range");
        let a = self.states[i];
        let b = self.states[i + 1];
        Pose::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), lerp_angle(a.theta, b.theta, u))
    }

    /// State at absolute time `t`, clamped to the trajectory span.
    pub fn state_at_time(&self, t: f64) -> State {
        let first = self.start();
        let last = self.end();
        if t <= first.t {
            return first;
        }
        if t >= last.t {
            return last;
        }
        let k = self.states.partition_point(|s| s.t <= t);
        let a = self.states[k - 1];
        let b = self.states[k];
        let u = (t - a.t) / (b.t - a.t);
        let p = self.interpolate(k - 1, u);
        State::new(p.x, p.y, p.theta, t)
    }

    pub fn length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }

    /// Path-group metrics; `computation_time` is left at zero for the caller.
    pub fn path_metrics(&self) -> PathMetrics {
        path_metrics(&self.positions())
    }

    /// Equal-arclength positions with uniform time stamps over `[0, t_N]`.
    pub fn reparameterize(&self) -> Trajectory {
        self.resample(self.segments()).redistribute_times()
    }

    /// Resamples to `n_segments` equal-arclength segments with times
    /// interpolated along arclength; endpoint states are kept exactly.
    pub fn resample(&self, n_segments: usize) -> Trajectory {
        assert!(n_segments >= 1);
        let pos = self.positions();
        let mut cum = vec![0.0];
        for w in pos.windows(2) {
            cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
        }
        let total = *cum.last().unwrap();
        if total <= 0.0 {
            // zero-length path: spread time only
            let a = self.start();
            let b = self.end();
            let states = (0..=n_segments)
                .map(|i| {
                    let u = i as f64 / n_segments as f64;
                    State::new(a.x, a.y, lerp_angle(a.theta, b.theta, u), a.t + u * (b.t - a.t))
                })
                .collect();
            return Trajectory { states };
        }
        let mut states = Vec::with_capacity(n_segments + 1);
        let mut k = 0;
        for i in 0..=n_segments {
            if i == 0 {
                states.push(self.start());
                continue;
            }
            if i == n_segments {
                states.push(self.end());
                continue;
            }
            let s = total * i as f64 / n_segments as f64;
            while k + 1 < cum.len() - 1 && cum[k + 1] < s {
                k += 1;
            }
            let seg = cum[k + 1] - cum[k];
            let u = if seg > 0.0 { (s - cum[k]) / seg } else { 0.0 };
            let p = self.interpolate(k, u);
            let a = self.states[k];
            let b = self.states[k + 1];
            states.push(State::new(p.x, p.y, p.theta, a.t + u * (b.t - a.t)));
        }
        Trajectory { states }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,theta,t\n");
        for s in &self.states {
            let _ = writeln!(out, "{},{},{},{}", s.x, s.y, s.theta, s.t);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, TrajectoryError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h.trim().replace(' ', "") == "x,y,theta,t" => {}
            Some((i, _)) => {
                return Err(TrajectoryError::Csv {
                    line: i + 1,
                    reason: "expected header x,y,theta,t".into(),
                })
            }
            None => {
                return Err(TrajectoryError::Csv {
                    line: 1,
                    reason: "empty file".into(),
                })
            }
        }
        let mut states = Vec::new();
        for (i, line) in lines {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| TrajectoryError::Csv {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            let [x, y, theta, t] = vals[..] else {
                return Err(TrajectoryError::Csv {
                    line: i + 1,
                    reason: format!("expected 4 columns, got {}", vals.len()),
                });
            };
            states.push(State::new(x, y, theta, t));
        }
        Trajectory::new(states)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PathMetrics {
    pub length: f64,
    pub cusps: usize,
    pub max_curvature: f64,
    pub normalized_curvature: f64,
    /// Total heading change per meter (rad/m).
    pub angle_over_length: f64,
    pub computation_time: f64,
}

/// Menger curvature of three points; `None` when two of them coincide.
pub fn menger_curvature(a: Vec2, b: Vec2, c: Vec2) -> Option<f64> {
    let ab = (b - a).norm();
    let bc = (c - b).norm();
    let ca = (a - c).norm();
    let denom = ab * bc * ca;
    if denom <= 1e-15 {
        return None;
    }
    Some(2.0 * (b - a).cross(c - b).abs() / denom)
}

pub fn path_metrics(points: &[Vec2]) -> PathMetrics {
    let segs: Vec<Vec2> = points.windows(2).map(|w| w[1] - w[0]).collect();
    let length: f64 = segs.iter().map(|d| d.norm()).sum();

    let moving: Vec<Vec2> = segs.iter().copied().filter(|d| d.norm() >= MIN_CUSP_SEGMENT).collect();
    let cusps = moving.windows(2).filter(|w| w[0].dot(w[1]) < 0.0).count();

    // curvature over distinct consecutive points
    let distinct: Vec<Vec2> = points.iter().fold(Vec::new(), |mut acc: Vec<Vec2>, &p| {
        if acc.last().map_or(true, |&q| (p - q).norm() > 1e-12) {
            acc.push(p);
        }
        acc
    });
    let mut max_curvature = 0.0f64;
    let mut normalized_curvature = 0.0;
    for w in distinct.windows(3) {
        if let Some(k) = menger_curvature(w[0], w[1], w[2]) {
            max_curvature = max_curvature.max(k);
            let ds = 0.5 * ((w[1] - w[0]).norm() + (w[2] - w[1]).norm());
            normalized_curvature += k * ds;
        }
    }
    let headings: Vec<f64> = distinct.windows(2).map(|w| (w[1] - w[0]).y.atan2((w[1] - w[0]).x)).collect();
    let turning: f64 = headings.windows(2).map(|h| wrap_angle(h[1] - h[0]).abs()).sum();
    let angle_over_length = if length > 0.0 { turning / length } else { 0.0 };

    PathMetrics {
        length,
        cusps,
        max_curvature,
        normalized_curvature,
        angle_over_length,
        computation_time: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    h: f64,
    cell: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Occupancy grid dilated by `radius`, with a `radius` band along the map
/// border also blocked.
pub fn inflated_grid(scene: &Scene, resolution: f64, radius: f64) -> OccupancyGrid {
    let raw = scene.map.rasterize(resolution);
    let mut grid = raw.clone();
    let reach = (radius / resolution).ceil() as isize;
    let b = scene.bounds();
    for row in 0..raw.rows {
        for col in 0..raw.cols {
            let c = raw.center(col, row);
            let near_border =
                c.x - b.min.x < radius || b.max.x - c.x < radius || c.y - b.min.y < radius || b.max.y - c.y < radius;
            if near_border {
                grid.set(col, row, true);
                continue;
            }
            if raw.occupied(col, row) {
                continue;
            }
            'search: for dr in -reach..=reach {
                for dc in -reach..=reach {
                    let (r2, c2) = (row as isize + dr, col as isize + dc);
                    if r2 < 0 || c2 < 0 || r2 >= raw.rows as isize || c2 >= raw.cols as isize {
                        continue;
                    }
                    if raw.occupied(c2 as usize, r2 as usize) && (raw.center(c2 as usize, r2 as usize) - c).norm() <= radius {
                        grid.set(col, row, true);
                        break 'search;
                    }
                }
            }
        }
    }
    grid
}

/// 8-connected A* between two cells on `grid`; returns the cell sequence.
pub fn astar_cells(grid: &OccupancyGrid, from: (usize, usize), to: (usize, usize)) -> Option<Vec<(usize, usize)>> {
    let idx = |(c, r): (usize, usize)| r * grid.cols + c;
    let total = grid.cols * grid.rows;
    let goal = idx(to);
    let heuristic = |cell: usize| {
        let (c, r) = (cell % grid.cols, cell / grid.cols);
        let dx = (c as f64 - to.0 as f64).abs();
        let dy = (r as f64 - to.1 as f64).abs();
        (dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)) * grid.resolution
    };
    let mut g = vec![f64::INFINITY; total];
    let mut parent = vec![usize::MAX; total];
    let mut closed = vec![false; total];
    let mut open = BinaryHeap::new();
    let s = idx(from);
    g[s] = 0.0;
    open.push(Open {
        f: heuristic(s),
        h: heuristic(s),
        cell: s,
    });
    while let Some(Open { cell, .. }) = open.pop() {
        if closed[cell] {
            continue;
        }
        closed[cell] = true;
        if cell == goal {
            let mut path = vec![cell];
            let mut cur = cell;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path.into_iter().map(|i| (i % grid.cols, i / grid.cols)).collect());
        }
        let (c, r) = ((cell % grid.cols) as isize, (cell / grid.cols) as isize);
        for (dc, dr) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
            let (nc, nr) = (c + dc, r + dr);
            if nc < 0 || nr < 0 || nc >= grid.cols as isize || nr >= grid.rows as isize {
                continue;
            }
            let next = nr as usize * grid.cols + nc as usize;
            if closed[next] || grid.occupied(nc as usize, nr as usize) {
                continue;
            }
            let step = if dc != 0 && dr != 0 {
                std::f64::consts::SQRT_2
            } else {
                1.0
            } * grid.resolution;
            let cand = g[cell] + step;
            if cand < g[next] {
                g[next] = cand;
                parent[next] = cell;
                let h = heuristic(next);
                open.push(Open { f: cand + h, h, cell: next });
            }
        }
    }
    None
}

/// Seed trajectory from an A* search on the inflated static grid.
///
/// The cell path (with its end cells replaced by the exact endpoints) is
/// resampled to `n_segments` equal-length segments; headings follow the
/// segments, times follow arclength at speed `v_e`.
pub fn astar_seed(scene: &Scene, start: Pose, goal: Pose, resolution: f64, v_e: f64, n_segments: usize) -> Result<Trajectory, TrajectoryError> {
    assert!(v_e > 0.0 && resolution > 0.0 && n_segments >= 1);
    if scene.in_static_collision(goal.x, goal.y, goal.theta) {
        return Err(TrajectoryError::NoPath("goal is in collision".into()));
    }
    if scene.in_static_collision(start.x, start.y, start.theta) {
        return Err(TrajectoryError::NoPath("start is in collision".into()));
    }
    if (start.x - goal.x).hypot(start.y - goal.y) < 1e-9 {
        let theta_n = unwrap_near(goal.theta, start.theta);
        return Trajectory::new(vec![
            start.at(0.0),
            State::new(goal.x, goal.y, theta_n, DT_MIN),
        ]);
    }
    let mut grid = inflated_grid(scene, resolution, scene.robot.circumscribed_radius());
    let from = grid.cell_of(Vec2::new(start.x, start.y));
    let to = grid.cell_of(Vec2::new(goal.x, goal.y));
    grid.set(from.0, from.1, false);
    grid.set(to.0, to.1, false);
    let cells = astar_cells(&grid, from, to).ok_or_else(|| TrajectoryError::NoPath("A* frontier exhausted".into()))?;

    let mut points = vec![Vec2::new(start.x, start.y)];
    if cells.len() > 2 {
        points.extend(cells[1..cells.len() - 1].iter().map(|&(c, r)| grid.center(c, r)));
    }
    points.push(Vec2::new(goal.x, goal.y));
    let poly = Trajectory::from_states_unchecked(points.iter().map(|p| State::new(p.x, p.y, 0.0, 0.0)).collect());
    let resampled = poly.resample(n_segments).positions();

    let mut states = Vec::with_capacity(n_segments + 1);
    let mut theta_prev = start.theta;
    let mut t = 0.0;
    for i in 0..=n_segments {
        let p = resampled[i];
        if i > 0 {
            t += (p - resampled[i - 1]).norm() / v_e;
        }
        let theta = if i == 0 {
            start.theta
        } else if i == n_segments {
            unwrap_near(goal.theta, theta_prev)
        } else {
            let d = resampled[i + 1] - p;
            unwrap_near(d.y.atan2(d.x), theta_prev)
        };
        theta_prev = theta;
        states.push(State::new(p.x, p.y, theta, t));
    }
    Trajectory::new(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConvexPolygon, Rect};
    use crate::scene::{RobotFootprint, StaticMap};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn traj(xs: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(
            xs.iter()
                .enumerate()
                .map(|(i, &(x, y))| State::new(x, y, 0.0, i as f64))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        assert_eq!(Trajectory::new(vec![State::new(0.0, 0.0, 0.0, 0.0)]).unwrap_err(), TrajectoryError::TooShort(1));
        let bad = vec![State::new(0.0, 0.0, 0.0, 0.0), State::new(1.0, 0.0, 0.0, 0.0)];
        assert_eq!(Trajectory::new(bad).unwrap_err(), TrajectoryError::NonMonotonicTime(1));
    }

    #[test]
    fn redistribution_examples() {
        let t = Trajectory::new(
            [0.0, 0.1, 0.9, 1.0]
                .iter()
                .enumerate()
                .map(|(i, &t)| State::new(i as f64, 0.0, 0.0, t))
                .collect(),
        )
        .unwrap();
        let r = t.redistribute_times();
        let expect = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (s, e) in r.states().iter().zip(expect) {
            assert_relative_eq!(s.t, e, epsilon = 1e-15);
        }
        assert_eq!(r.states()[1].x, 1.0);
        let again = r.redistribute_times();
        for (a, b) in again.states().iter().zip(r.states()) {
            assert!((a.t - b.t).abs() < 1e-12);
        }
        let five = Trajectory::new((0..=5).map(|i| State::new(i as f64, 0.0, 0.0, 7.5 * (i as f64 / 5.0).powi(2))).collect()).unwrap();
        let r = five.redistribute_times();
        for w in r.states().windows(2) {
            assert_relative_eq!(w[1].t - w[0].t, 1.5, epsilon = 1e-12);
        }
        assert_eq!(r.end().t, 7.5);
    }

    #[test]
    fn interpolation_examples() {
        let t = Trajectory::new(vec![State::new(0.0, 0.0, 0.0, 0.0), State::new(2.0, 2.0, 0.0, 1.0)]).unwrap();
        assert_eq!(t.interpolate(0, 0.0), Pose::new(0.0, 0.0, 0.0));
        assert_eq!(t.interpolate(0, 0.5), Pose::new(1.0, 1.0, 0.0));
        let t = Trajectory::new(vec![State::new(0.0, 0.0, 3.0, 0.0), State::new(0.0, 0.0, -3.0, 1.0)]).unwrap();
        let mid = t.interpolate(0, 0.5).theta;
        // heading-vector oracle
        let oracle = (3.0f64.sin() + (-3.0f64).sin()).atan2(3.0f64.cos() + (-3.0f64).cos());
        assert_relative_eq!(mid.cos(), oracle.cos(), epsilon = 1e-9);
        assert_relative_eq!(wrap_angle(mid).abs(), PI, epsilon = 1e-9);
    }

    #[test]
    fn metrics_straight_circle_and_cusp() {
        let line = traj(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        let m = line.path_metrics();
        assert_eq!(m.cusps, 0);
        assert_eq!(m.max_curvature, 0.0);
        assert_eq!(m.normalized_curvature, 0.0);
        assert_eq!(m.angle_over_length, 0.0);
        assert_relative_eq!(m.length, 3.0 * 2f64.sqrt(), epsilon = 1e-12);

        let circle: Vec<(f64, f64)> = (0..12).map(|k| {
            let a = k as f64 * 0.3;
            (2.0 * a.cos(), 2.0 * a.sin())
        }).collect();
        let pts: Vec<Vec2> = circle.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        for w in pts.windows(3) {
            assert_relative_eq!(menger_curvature(w[0], w[1], w[2]).unwrap(), 0.5, epsilon = 1e-9);
        }
        assert_relative_eq!(traj(&circle).path_metrics().max_curvature, 0.5, epsilon = 1e-9);

        let spike = traj(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (1.5, 0.0), (1.0, 0.0)]);
        assert_eq!(spike.path_metrics().cusps, 1);
    }

    #[test]
    fn duplicate_points_are_skipped() {
        let t = traj(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let m = t.path_metrics();
        assert_eq!(m.max_curvature, 0.0);
        assert_eq!(m.cusps, 0);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let t = traj(&[(0.0, 0.0), (1.5, -2.25), (3.125, 0.1)]);
        assert_eq!(Trajectory::from_csv(&t.to_csv()).unwrap(), t);
        assert!(matches!(Trajectory::from_csv("a,b\n1,2"), Err(TrajectoryError::Csv { .. })));
        assert!(matches!(Trajectory::from_csv("x,y,theta,t\n1,2,3"), Err(TrajectoryError::Csv { .. })));
        assert!(matches!(Trajectory::from_csv("x,y,theta,t\n0,0,0,1\n1,0,0,0.5"), Err(TrajectoryError::NonMonotonicTime(1))));
    }

    #[test]
    fn state_at_time_interpolates() {
        let t = traj(&[(0.0, 0.0), (2.0, 0.0), (2.0, 4.0)]);
        let s = t.state_at_time(1.5);
        assert_relative_eq!(s.x, 2.0);
        assert_relative_eq!(s.y, 2.0);
        assert_eq!(t.state_at_time(-3.0), t.start());
        assert_eq!(t.state_at_time(30.0), t.end());
    }

    fn small_robot() -> RobotFootprint {
        RobotFootprint {
            length: 0.4,
            width: 0.2,
            rear_to_center: 0.0,
        }
    }

    fn empty(size: f64) -> Scene {
        let map = StaticMap {
            bounds: Rect::new(0.0, 0.0, size, size),
            polygons: vec![],
        };
        Scene::new(map, vec![], small_robot(), 10.0).unwrap()
    }

    #[test]
    fn astar_seed_basics() {
        let scene = empty(10.0);
        let seed = astar_seed(&scene, Pose::new(1.0, 1.0, PI / 4.0), Pose::new(9.0, 9.0, PI / 4.0), 0.25, 2.0, 20).unwrap();
        assert_eq!(seed.segments(), 20);
        assert_eq!(seed.start(), State::new(1.0, 1.0, PI / 4.0, 0.0));
        assert_relative_eq!(seed.length(), 8.0 * 2f64.sqrt(), max_relative = 0.05);
        assert_relative_eq!(seed.end().t, seed.length() / 2.0, max_relative = 1e-9);

        let same = astar_seed(&scene, Pose::new(5.0, 5.0, 0.0), Pose::new(5.0, 5.0, 0.0), 0.25, 2.0, 20).unwrap();
        assert_eq!(same.states().len(), 2);
        assert_eq!(same.length(), 0.0);
    }

    #[test]
    fn astar_goal_inside_obstacle_fails() {
        let map = StaticMap {
            bounds: Rect::new(0.0, 0.0, 10.0, 10.0),
            polygons: vec![ConvexPolygon::rectangle(6.0, 6.0, 9.5, 9.5)],
        };
        let scene = Scene::new(map, vec![], small_robot(), 10.0).unwrap();
        let err = astar_seed(&scene, Pose::new(1.0, 1.0, 0.0), Pose::new(8.0, 8.0, 0.0), 0.25, 2.0, 20).unwrap_err();
        assert!(matches!(err, TrajectoryError::NoPath(_)));
    }

    #[test]
    fn astar_walled_off_goal_exhausts_frontier() {
        // wall across the whole map
        let map = StaticMap {
            bounds: Rect::new(0.0, 0.0, 10.0, 10.0),
            polygons: vec![ConvexPolygon::rectangle(0.0, 4.5, 10.0, 5.5)],
        };
        let scene = Scene::new(map, vec![], small_robot(), 10.0).unwrap();
        let err = astar_seed(&scene, Pose::new(2.0, 2.0, 0.0), Pose::new(8.0, 8.0, 0.0), 0.25, 2.0, 20).unwrap_err();
        assert_eq!(err, TrajectoryError::NoPath("A* frontier exhausted".into()));
    }
}
