//! Kinematic bicycle follower and driving-dynamics metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, State};
use crate::scene::Scene;
use crate::trajectory::Trajectory;

pub const GRAVITY: f64 = 9.81;

/// Stiffness rows: (stiffness, brake multiplier, throttle multiplier).
pub const STIFFNESS_TABLE: [(f64, f64, f64); 5] = [
    (0.1, 0.1, 0.05),
    (0.2, 0.2, 0.08),
    (0.5, 0.5, 0.12),
    (0.7, 0.7, 0.22),
    (1.0, 1.0, 1.0),
];

pub const DEFAULT_BINS: [f64; 2] = [3.5, 5.0];

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error("invalid follower config: {0}")]
    Config(String),
    #[error("empty drive log")]
    EmptyLog,
}

/// Brake and throttle multipliers for stiffness `s`, linear between rows.
///
/// Below the lowest row both multipliers scale linearly toward zero.
pub fn stiffness_multipliers(s: f64) -> (f64, f64) {
    let (s0, b0, t0) = STIFFNESS_TABLE[0];
    if s <= s0 {
        let k = s / s0;
        return (b0 * k, t0 * k);
    }
    for w in STIFFNESS_TABLE.windows(2) {
        let (sa, ba, ta) = w[0];
        let (sb, bb, tb) = w[1];
        if s <= sb {
            let u = (s - sa) / (sb - sa);
            return (ba + u * (bb - ba), ta + u * (tb - ta));
        }
    }
    (1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowerConfig {
    pub wheelbase: f64,
    /// Planned positions ahead of the current one used as the steering target.
    pub lookahead: usize,
    pub stiffness: f64,
    /// Longitudinal limit at stiffness 1, m/s².
    pub max_accel: f64,
    pub dt_sim: f64,
    pub max_steer: f64,
    /// Speed error gain, 1/s.
    pub speed_gain: f64,
    /// Along-track position error gain, 1/s.
    pub position_gain: f64,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        Self {
            wheelbase: 2.7,
            lookahead: 3,
            stiffness: 1.0,
            max_accel: GRAVITY,
            dt_sim: 0.01,
            max_steer: 0.6,
            speed_gain: 4.0,
            position_gain: 2.0,
        }
    }
}

impl FollowerConfig {
    pub fn with_stiffness(stiffness: f64) -> Self {
        Self {
            stiffness,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if !(self.wheelbase > 0.0 && self.wheelbase.is_finite()) {
            return bad("wheelbase must be positive");
        }
        if !(self.stiffness > 0.0 && self.stiffness <= 1.0) {
            return bad("stiffness must lie in (0, 1]");
        }
        if !(self.dt_sim > 0.0 && self.max_accel > 0.0 && self.max_steer > 0.0) {
            return bad("dt_sim, max_accel and max_steer must be positive");
        }
        if self.lookahead == 0 {
            return bad("lookahead must be at least 1");
        }
        if !(self.speed_gain >= 0.0 && self.position_gain >= 0.0) {
            return bad("gains must be non-negative");
        }
        Ok(())
    }

    /// (max deceleration, max acceleration), both positive.
    pub fn limits(&self) -> (f64, f64) {
        let (brake, throttle) = stiffness_multipliers(self.stiffness);
        (self.max_accel * brake, self.max_accel * throttle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub a_long: f64,
    pub a_lat: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriveLog {
    pub samples: Vec<DriveSample>,
    /// Times at which the executed footprint overlapped the scene.
    pub collisions: Vec<f64>,
}

impl DriveLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,theta,v,a_long,a_lat,error\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                s.t, s.x, s.y, s.theta, s.v, s.a_long, s.a_lat, s.error
            ));
        }
        out
    }

    pub fn max_error(&self) -> f64 {
        self.samples.iter().map(|s| s.error).fold(0.0, f64::max)
    }
}

/// Planned speed on the segment containing `t`.
fn planned_speed(states: &[State], t: f64) -> f64 {
    let k = states.partition_point(|s| s.t <= t).clamp(1, states.len() - 1);
    let (a, b) = (states[k - 1], states[k]);
    (b.x - a.x).hypot(b.y - a.y) / (b.t - a.t)
}

fn position_error(traj: &Trajectory, s: &DriveSample) -> f64 {
    let p = traj.state_at_time(s.t);
    (p.x - s.x).hypot(p.y - s.y)
}

/// Tracks `traj` with pure pursuit and proportional speed control.
///
/// The vehicle spawns on the first planned state at the first segment's
/// planned speed and runs until the plan's final time stamp.
pub fn follow(traj: &Trajectory, config: &FollowerConfig, scene: Option<&Scene>) -> Result<DriveLog, HarnessError> {
    config.validate()?;
    let states = traj.states();
    let (max_brake, max_throttle) = config.limits();
    let start = traj.start();
    let t_end = traj.end().t;
    let steps = ((t_end - start.t) / config.dt_sim).ceil() as usize;
    let l = config.wheelbase;

    let (mut x, mut y, mut th) = (start.x, start.y, start.theta);
    let mut v = planned_speed(states, start.t);
    let mut log = DriveLog::default();
    for k in 0..=steps {
        let t = start.t + k as f64 * config.dt_sim;
        let idx = states.partition_point(|s| s.t <= t).saturating_sub(1);
        let target = states[(idx + config.lookahead).min(states.len() - 1)];
        let dx = target.x - x;
        let dy = target.y - y;
        let ld = dx.hypot(dy);
        let steer = if ld > 1e-6 {
            let alpha = wrap_angle(dy.atan2(dx) - th);
            (2.0 * l * alpha.sin() / ld).atan().clamp(-config.max_steer, config.max_steer)
        } else {
            0.0
        };

        let plan = traj.state_at_time(t);
        let along = (plan.x - x) * th.cos() + (plan.y - y) * th.sin();
        let v_cmd = (planned_speed(states, t) + config.position_gain * along).max(0.0);
        let a = (config.speed_gain * (v_cmd - v)).clamp(-max_brake, max_throttle);
        let a = if v <= 0.0 && a < 0.0 { 0.0 } else { a };
        let kappa = steer.tan() / l;

        let mut sample = DriveSample {
            t,
            x,
            y,
            theta: th,
            v,
            a_long: a,
            a_lat: v * v * kappa,
            error: 0.0,
        };
        sample.error = position_error(traj, &sample);
        if let Some(scene) = scene {
            if scene.in_collision(State::new(x, y, th, t)) {
                log.collisions.push(t);
            }
        }
        log.samples.push(sample);

        let dt = config.dt_sim;
        x += v * th.cos() * dt;
        y += v * th.sin() * dt;
        th += v * kappa * dt;
        v = (v + a * dt).max(0.0);
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsMetrics {
    pub max_a_long: f64,
    pub min_a_long: f64,
    pub max_abs_a_lat: f64,
    pub iqr_a_long: f64,
    pub iqr_a_lat: f64,
    pub max_error: f64,
    pub mean_error: f64,
    /// Upper bin edges; the last bin is open.
    pub bin_edges: Vec<f64>,
    /// Time fraction with combined |a| in each bin.
    pub bin_fractions: Vec<f64>,
    pub collisions: usize,
}

/// Centered moving average with a window of `window` seconds.
pub fn smooth(values: &[f64], dt: f64, window: f64) -> Vec<f64> {
    let half = ((window / dt) / 2.0).round() as usize;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Central differences; one-sided at the ends.
pub fn central_diff(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            (values[hi] - values[lo]) / ((hi - lo) as f64 * dt)
        })
        .collect()
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.75) - quantile(&v, 0.25)
}

pub fn bin_fractions(magnitudes: &[f64], edges: &[f64]) -> Vec<f64> {
    let mut counts = vec![0usize; edges.len() + 1];
    for &a in magnitudes {
        counts[edges.partition_point(|&e| e <= a)] += 1;
    }
    let n = magnitudes.len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

pub const SMOOTHING_WINDOW: f64 = 0.2;

/// Accelerations from the logged speed (0.2 s smoothing, central
/// differences), following error against the plan, and |a| bins.
pub fn dynamics_metrics(log: &DriveLog, traj: &Trajectory, edges: &[f64]) -> Result<DynamicsMetrics, HarnessError> {
    let samples = &log.samples;
    if samples.is_empty() {
        return Err(HarnessError::EmptyLog);
    }
    let dt = if samples.len() > 1 { samples[1].t - samples[0].t } else { 1.0 };
    let v: Vec<f64> = samples.iter().map(|s| s.v).collect();
    let a_long = central_diff(&smooth(&v, dt, SMOOTHING_WINDOW), dt);
    let a_lat: Vec<f64> = smooth(&samples.iter().map(|s| s.a_lat).collect::<Vec<_>>(), dt, SMOOTHING_WINDOW);
    let errors: Vec<f64> = samples.iter().map(|s| position_error(traj, s)).collect();
    let magnitudes: Vec<f64> = a_long.iter().zip(&a_lat).map(|(a, b)| a.hypot(*b)).collect();
    Ok(DynamicsMetrics {
        max_a_long: a_long.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_a_long: a_long.iter().copied().fold(f64::INFINITY, f64::min),
        max_abs_a_lat: a_lat.iter().fold(0.0, |m, a| m.max(a.abs())),
        iqr_a_long: iqr(&a_long),
        iqr_a_lat: iqr(&a_lat),
        max_error: errors.iter().copied().fold(0.0, f64::max),
        mean_error: errors.iter().sum::<f64>() / errors.len() as f64,
        bin_edges: edges.to_vec(),
        bin_fractions: bin_fractions(&magnitudes, edges),
        collisions: log.collisions.len(),
    })
}

/// Largest smoothed planned deceleration, m/s².
///
/// The plan is sampled every `dt` seconds; speed and acceleration come from
/// central differences with the metric smoothing window applied to speed.
pub fn deceleration_proxy(traj: &Trajectory, dt: f64) -> f64 {
    let t0 = traj.start().t;
    let steps = (traj.duration() / dt).round() as usize;
    if steps < 2 {
        return 0.0;
    }
    let dt = traj.duration() / steps as f64;
    let pts: Vec<State> = (0..=steps).map(|k| traj.state_at_time(t0 + k as f64 * dt)).collect();
    let vx = central_diff(&pts.iter().map(|s| s.x).collect::<Vec<_>>(), dt);
    let vy = central_diff(&pts.iter().map(|s| s.y).collect::<Vec<_>>(), dt);
    let speed: Vec<f64> = vx.iter().zip(&vy).map(|(a, b)| a.hypot(*b)).collect();
    let a = central_diff(&smooth(&speed, dt, SMOOTHING_WINDOW), dt);
    a.iter().fold(0.0, |m, &x| m.max(-x))
}
