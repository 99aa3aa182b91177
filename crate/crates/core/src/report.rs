//! Trajectory quality figures shared by the command line and the tests.

use serde::{Deserialize, Serialize};

use crate::harness::deceleration_proxy;
use crate::losses::velocity_deltas_value;
use crate::scene::Scene;
use crate::trajectory::Trajectory;

/// Interpolated states per segment for the dense collision check.
pub const DENSE_SUBSTEPS: usize = 100;

pub const PROXY_DT: f64 = 0.05;

/// Timing-free summary of a trajectory; deterministic for a given input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub segments: usize,
    pub length: f64,
    pub duration: f64,
    pub cusps: usize,
    pub max_curvature: f64,
    pub normalized_curvature: f64,
    pub angle_over_length: f64,
    /// max |δ_i| / (v_e·dt_i).
    pub max_rel_delta: f64,
    pub dt_mean: f64,
    pub dt_variance: f64,
    pub dt_cv: f64,
    /// Largest over smallest consecutive spacing.
    pub clustering_index: f64,
    pub deceleration_proxy: f64,
    pub collision_free: bool,
    pub first_collision: Option<[f64; 4]>,
}

pub fn dt_stats(traj: &Trajectory) -> (f64, f64, f64) {
    let dts: Vec<f64> = traj.states().windows(2).map(|w| w[1].t - w[0].t).collect();
    let n = dts.len() as f64;
    let mean = dts.iter().sum::<f64>() / n;
    let var = dts.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    (mean, var, var.sqrt() / mean)
}

pub fn max_rel_delta(traj: &Trajectory, v_e: f64) -> f64 {
    let deltas = velocity_deltas_value(traj.states(), v_e);
    traj.states()
        .windows(2)
        .zip(&deltas)
        .map(|(w, d)| d.abs() / (v_e * (w[1].t - w[0].t)))
        .fold(0.0, f64::max)
}

pub fn clustering_index(traj: &Trajectory) -> f64 {
    let gaps: Vec<f64> = traj.positions().windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(0.0, f64::max);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

pub fn trajectory_report(scene: &Scene, traj: &Trajectory, v_e: f64) -> TrajectoryReport {
    let pm = traj.path_metrics();
    let (dt_mean, dt_variance, dt_cv) = dt_stats(traj);
    let hit = scene.first_collision(traj.states(), DENSE_SUBSTEPS);
    TrajectoryReport {
        segments: traj.segments(),
        length: pm.length,
        duration: traj.duration(),
        cusps: pm.cusps,
        max_curvature: pm.max_curvature,
        normalized_curvature: pm.normalized_curvature,
        angle_over_length: pm.angle_over_length,
        max_rel_delta: max_rel_delta(traj, v_e),
        dt_mean,
        dt_variance,
        dt_cv,
        clustering_index: clustering_index(traj),
        deceleration_proxy: deceleration_proxy(traj, PROXY_DT),
        collision_free: hit.is_none(),
        first_collision: hit.map(|s| [s.x, s.y, s.theta, s.t]),
    }
}
