//! Trajectory loss terms and their weighted sum.
//!
//! Every term is built on an autodiff [`Tape`] from per-state variables so
//! the optimizer can differentiate the total with respect to the trajectory.
//! The `*_value` helpers evaluate the same graphs on constants.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sum, AutodiffError, Tape, Var};
use crate::field::NeuralField;
use crate::geometry::State;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub w_dist: f64,
    pub w_col: f64,
    pub w_constr: f64,
    pub w_vel: f64,
    pub w_time: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_dist: 5e1,
            w_col: 5e4,
            w_constr: 5e1,
            w_vel: 1e2,
            w_time: 1e2,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            w_dist: 0.0,
            w_col: 0.0,
            w_constr: 0.0,
            w_vel: 0.0,
            w_time: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.w_dist, self.w_col, self.w_constr, self.w_vel, self.w_time]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeMultipliers {
    pub vel: Vec<f64>,
    pub nh: Vec<f64>,
}

impl LagrangeMultipliers {
    pub fn zeros(n: usize) -> Self {
        Self {
            vel: vec![0.0; n],
            nh: vec![0.0; n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.vel.iter().chain(&self.nh).all(|v| v.is_finite())
    }
}

/// One trajectory state on a tape.
#[derive(Debug, Clone, Copy)]
pub struct StateVars<'t> {
    pub x: Var<'t>,
    pub y: Var<'t>,
    pub theta: Var<'t>,
    pub t: Var<'t>,
}

impl<'t> StateVars<'t> {
    pub fn constant(tape: &'t Tape, s: &State) -> Self {
        Self {
            x: tape.constant(s.x),
            y: tape.constant(s.y),
            theta: tape.constant(s.theta),
            t: tape.constant(s.t),
        }
    }

    pub fn variable(tape: &'t Tape, s: &State) -> Self {
        Self {
            x: tape.var(s.x),
            y: tape.var(s.y),
            theta: tape.var(s.theta),
            t: tape.var(s.t),
        }
    }
}

pub fn constants<'t>(tape: &'t Tape, states: &[State]) -> Vec<StateVars<'t>> {
    states.iter().map(|s| StateVars::constant(tape, s)).collect()
}

/// `δ_i = v_e·(t_{i+1} − t_i) − ‖(Δx, Δy, Δθ)‖`, θ unwrapped.
pub fn velocity_deltas<'t>(s: &[StateVars<'t>], v_e: f64) -> Vec<Var<'t>> {
    s.windows(2)
        .map(|w| {
            let d = ((w[1].x - w[0].x).square() + (w[1].y - w[0].y).square() + (w[1].theta - w[0].theta).square()).sqrt();
            (w[1].t - w[0].t) * v_e - d
        })
        .collect()
}

/// Lateral slip of each segment: `ν_i = Δx·sin θ_i − Δy·cos θ_i`.
pub fn nonholonomic_deltas<'t>(s: &[StateVars<'t>]) -> Vec<Var<'t>> {
    s.windows(2)
        .map(|w| (w[1].x - w[0].x) * w[0].theta.sin() - (w[1].y - w[0].y) * w[0].theta.cos())
        .collect()
}

/// `(1/N)·Σ(r_i² − λ_i·r_i)`, shared by the velocity and non-holonomic terms.
pub fn lagrangian_loss<'t>(residuals: &[Var<'t>], lambda: &[f64]) -> Var<'t> {
    assert_eq!(residuals.len(), lambda.len(), "multiplier length mismatch");
    assert!(!residuals.is_empty());
    let terms: Vec<Var<'t>> = residuals.iter().zip(lambda).map(|(&r, &l)| r.square() - r * l).collect();
    sum(&terms) * (1.0 / residuals.len() as f64)
}

pub fn time_regularization<'t>(s: &[StateVars<'t>]) -> Var<'t> {
    let terms: Vec<Var<'t>> = s.windows(2).map(|w| (w[1].t - w[0].t).square()).collect();
    sum(&terms) * (1.0 / terms.len() as f64)
}

pub fn distance_loss<'t>(s: &[StateVars<'t>]) -> Var<'t> {
    let terms: Vec<Var<'t>> = s
        .windows(2)
        .map(|w| (w[1].x - w[0].x).square() + (w[1].y - w[0].y).square() + (w[1].theta - w[0].theta).square())
        .collect();
    sum(&terms) * (1.0 / terms.len() as f64)
}

/// Fresh interpolation fractions `u_i ∈ [0, 1)`, one per segment.
pub fn draw_fractions(rng: &mut impl Rng, segments: usize) -> Vec<f64> {
    (0..segments).map(|_| rng.gen::<f64>()).collect()
}

/// Shortest-arc interpolation of segment `i` at fraction `u`.
pub fn interpolate_vars<'t>(a: &StateVars<'t>, b: &StateVars<'t>, u: f64) -> (Var<'t>, Var<'t>, Var<'t>) {
    let raw = b.theta.value() - a.theta.value();
    let turns = ((raw + PI) / TAU).floor();
    let dtheta = (b.theta - a.theta) - turns * TAU;
    (a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u, a.theta + dtheta * u)
}

/// `(1/N)·Σ softplus(F(p̃_i, i·t_N/N))` with `p̃_i` interpolated at `u_i`.
///
/// Headings are shifted by a constant multiple of 2π into `[−π, π)` before
/// reaching the field, which only saw that range in training.
pub fn collision_loss<'t>(tape: &'t Tape, s: &[StateVars<'t>], field: &NeuralField, fractions: &[f64]) -> Result<Var<'t>, AutodiffError> {
    let n = s.len() - 1;
    assert_eq!(fractions.len(), n, "one fraction per segment");
    let t_n = s[n].t;
    let inputs: Vec<[Var<'t>; 4]> = (0..n)
        .map(|i| {
            let (x, y, theta) = interpolate_vars(&s[i], &s[i + 1], fractions[i]);
            let shift = ((theta.value() + PI) / TAU).floor() * TAU;
            [x, y, theta - shift, t_n * (i as f64 / n as f64)]
        })
        .collect();
    let logits = field.logits_on_tape(tape, &inputs)?;
    let terms = (0..n)
        .map(|i| tape.element(logits, i, 0).map(Var::softplus))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sum(&terms) * (1.0 / n as f64))
}

#[derive(Debug, Clone)]
pub struct LossGraph<'t> {
    pub dist: Var<'t>,
    pub col: Var<'t>,
    pub constr: Var<'t>,
    pub vel: Var<'t>,
    pub time: Var<'t>,
    pub total: Var<'t>,
    pub deltas: Vec<Var<'t>>,
    pub nu: Vec<Var<'t>>,
}

impl LossGraph<'_> {
    pub fn breakdown(&self) -> LossBreakdown {
        LossBreakdown {
            dist: self.dist.value(),
            col: self.col.value(),
            constr: self.constr.value(),
            vel: self.vel.value(),
            time: self.time.value(),
            total: self.total.value(),
        }
    }
}

/// Unweighted term values plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub dist: f64,
    pub col: f64,
    pub constr: f64,
    pub vel: f64,
    pub time: f64,
    pub total: f64,
}

pub fn total_loss_graph<'t>(
    tape: &'t Tape,
    s: &[StateVars<'t>],
    field: &NeuralField,
    weights: &LossWeights,
    lambda: &LagrangeMultipliers,
    v_e: f64,
    fractions: &[f64],
) -> Result<LossGraph<'t>, AutodiffError> {
    assert!(s.len() >= 2, "loss needs at least one segment");
    let deltas = velocity_deltas(s, v_e);
    let nu = nonholonomic_deltas(s);
    let dist = distance_loss(s);
    let col = collision_loss(tape, s, field, fractions)?;
    let constr = lagrangian_loss(&nu, &lambda.nh);
    let vel = lagrangian_loss(&deltas, &lambda.vel);
    let time = time_regularization(s);
    let total = dist * weights.w_dist + col * weights.w_col + constr * weights.w_constr + vel * weights.w_vel + time * weights.w_time;
    Ok(LossGraph {
        dist,
        col,
        constr,
        vel,
        time,
        total,
        deltas,
        nu,
    })
}

/// Value-only evaluation of [`total_loss_graph`].
pub fn total_loss(states: &[State], field: &NeuralField, weights: &LossWeights, lambda: &LagrangeMultipliers, v_e: f64, fractions: &[f64]) -> Result<LossBreakdown, AutodiffError> {
    let tape = Tape::new();
    let s = constants(&tape, states);
    Ok(total_loss_graph(&tape, &s, field, weights, lambda, v_e, fractions)?.breakdown())
}

pub fn velocity_deltas_value(states: &[State], v_e: f64) -> Vec<f64> {
    let tape = Tape::new();
    velocity_deltas(&constants(&tape, states), v_e).iter().map(Var::value).collect()
}

pub fn nonholonomic_deltas_value(states: &[State]) -> Vec<f64> {
    let tape = Tape::new();
    nonholonomic_deltas(&constants(&tape, states)).iter().map(Var::value).collect()
}
