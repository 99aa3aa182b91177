//! The planning loop: online field training alternating with preconditioned
//! Adam steps on the trajectory, multiplier ascent, cyclic learning rate and
//! periodic time redistribution. Also hosts the continuous-replanning
//! baseline.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adam::{Adam, CyclicLr};
use crate::autodiff::Tape;
use crate::field::{FieldError, FieldTrainConfig, NeuralField, Normalizer, RefitConfig, ReplanHorizon, TimeInput};
use crate::geometry::{Pose, State, Vec2};
use crate::losses::{draw_fractions, total_loss_graph, LagrangeMultipliers, LossBreakdown, LossWeights, StateVars};
use crate::scene::{LabeledState, SampleRegion, Scene};
use crate::trajectory::{astar_seed, Trajectory, TrajectoryError};

pub use crate::trajectory::DT_MIN;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid planning input: {0}")]
    Invalid(String),
    #[error("no path: {0}")]
    NoPath(String),
    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { iteration: usize, what: String },
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl From<TrajectoryError> for PlanError {
    fn from(e: TrajectoryError) -> Self {
        match e {
            TrajectoryError::NoPath(m) => PlanError::NoPath(m),
            other => PlanError::Invalid(other.to_string()),
        }
    }
}

/// Symmetric tridiagonal matrix stored by its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i + 1 < n {
                m[i][i + 1] = self.off[i];
                m[i + 1][i] = self.off[i];
            }
        }
        m
    }

    /// `A·x = rhs` by the Thomas algorithm.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Vec::new();
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = if n > 1 { self.off[0] / self.diag[0] } else { 0.0 };
        d[0] = rhs[0] / self.diag[0];
        for i in 1..n {
            let denom = self.diag[i] - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }

    pub fn dense_inverse(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut inv = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv[i][j] = v;
            }
            e[j] = 0.0;
        }
        inv
    }
}

/// Hessian of `w_dist·L_dist` for one coordinate over the interior states
/// `1..N−1`.
pub fn spatial_hessian(n_segments: usize, w_dist: f64) -> SymTridiag {
    assert!(n_segments >= 2);
    let k = 2.0 * w_dist / n_segments as f64;
    let m = n_segments - 1;
    SymTridiag {
        diag: vec![2.0 * k; m],
        off: vec![-k; m.saturating_sub(1)],
    }
}

/// Hessian of `w_time·L_time` over the free times `t_1..t_N`.
pub fn temporal_hessian(n_segments: usize, w_time: f64) -> SymTridiag {
    assert!(n_segments >= 2);
    let k = 2.0 * w_time / n_segments as f64;
    let mut diag = vec![2.0 * k; n_segments];
    diag[n_segments - 1] = k;
    SymTridiag {
        diag,
        off: vec![-k; n_segments - 1],
    }
}

fn shifted(h: &SymTridiag, alpha: f64) -> SymTridiag {
    SymTridiag {
        diag: h.diag.iter().map(|d| alpha * d + 1.0).collect(),
        off: h.off.iter().map(|o| alpha * o).collect(),
    }
}

/// `M = η·(αH + I)⁻¹` for the spatial and temporal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    pub eta: f64,
    pub alpha: f64,
    /// `αH_P + I`, shared by x, y and θ.
    pub spatial: SymTridiag,
    /// `αH_T + I`.
    pub temporal: SymTridiag,
}

impl Preconditioner {
    pub fn new(n_segments: usize, weights: &LossWeights, alpha: f64, eta: f64) -> Self {
        assert!(alpha >= 0.0 && eta > 0.0);
        Self {
            eta,
            alpha,
            spatial: shifted(&spatial_hessian(n_segments, weights.w_dist), alpha),
            temporal: shifted(&temporal_hessian(n_segments, weights.w_time), alpha),
        }
    }

    pub fn apply_spatial(&self, g: &[f64]) -> Vec<f64> {
        self.scaled(self.spatial.solve(g))
    }

    pub fn apply_temporal(&self, g: &[f64]) -> Vec<f64> {
        self.scaled(self.temporal.solve(g))
    }

    fn scaled(&self, mut v: Vec<f64>) -> Vec<f64> {
        if self.eta != 1.0 {
            v.iter_mut().for_each(|x| *x *= self.eta);
        }
        v
    }

    pub fn spatial_matrix(&self) -> Vec<Vec<f64>> {
        self.dense(&self.spatial)
    }

    pub fn temporal_matrix(&self) -> Vec<Vec<f64>> {
        self.dense(&self.temporal)
    }

    fn dense(&self, a: &SymTridiag) -> Vec<Vec<f64>> {
        let mut m = a.dense_inverse();
        m.iter_mut().flatten().for_each(|x| *x *= self.eta);
        m
    }
}

pub fn build_preconditioner(n_segments: usize, weights: &LossWeights, alpha: f64, eta: f64) -> Preconditioner {
    Preconditioner::new(n_segments, weights, alpha, eta)
}

/// `λ_i ← λ_i − lr·r_i` for each multiplier/residual pair.
pub fn lagrange_ascent_step(lambda: &mut LagrangeMultipliers, deltas: &[f64], nu: &[f64], lr: f64) {
    assert_eq!(lambda.vel.len(), deltas.len());
    assert_eq!(lambda.nh.len(), nu.len());
    for (l, d) in lambda.vel.iter_mut().zip(deltas) {
        *l -= lr * d;
    }
    for (l, d) in lambda.nh.iter_mut().zip(nu) {
        *l -= lr * d;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub iterations: usize,
    pub n_segments: usize,
    pub v_e: f64,
    pub grid_resolution: f64,
    pub weights: LossWeights,
    pub alpha: f64,
    pub eta: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    pub lr_period: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda_lr: f64,
    pub redistribute_every: usize,
    /// Reparameterization also moves interior poses to equal arclength.
    pub resample_positions: bool,
    pub dt_min: f64,
    /// Time variables move `1/time_scale` seconds per unit Adam step;
    /// `None` uses `10·v_e`, so a unit step moves a stamp by a tenth of a
    /// meter of travel.
    pub time_scale: Option<f64>,
    /// Fraction of the iterations before best-loss tracking starts. Only
    /// iterates right before a reparameterization are tracked.
    pub best_after: f64,
    pub seed: u64,
    pub field_lr: f64,
    pub field_batch: usize,
    pub tube_radius: f64,
    pub uniform_fraction: f64,
    pub time_jitter: f64,
    /// Field training steps before the first trajectory step.
    pub field_warmup: usize,
    pub replan_period: f64,
    /// Upper bound on replans after the first plan (baseline only).
    pub replan_steps: usize,
    pub replan_iterations: usize,
    pub refit_steps: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            n_segments: 30,
            v_e: 11.11,
            grid_resolution: 0.5,
            weights: LossWeights::default(),
            alpha: 5.0,
            eta: 1.0,
            lr_min: 1e-2,
            lr_max: 1e-1,
            lr_period: 50,
            beta1: 0.9,
            beta2: 0.9,
            lambda_lr: 1e-1,
            redistribute_every: 10,
            resample_positions: true,
            dt_min: DT_MIN,
            time_scale: None,
            best_after: 0.5,
            seed: 0,
            field_lr: 1e-1,
            field_batch: 512,
            tube_radius: 10.0,
            uniform_fraction: 0.25,
            time_jitter: 0.2,
            field_warmup: 0,
            replan_period: 1.0,
            replan_steps: 20,
            replan_iterations: 1000,
            refit_steps: 100,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::Invalid(m.to_string()));
        if self.n_segments < 2 {
            return bad("n_segments must be at least 2");
        }
        if !(self.v_e > 0.0 && self.v_e.is_finite()) {
            return bad("v_e must be positive");
        }
        if !(self.grid_resolution > 0.0) {
            return bad("grid_resolution must be positive");
        }
        if !self.weights.is_valid() {
            return bad("weights must be finite and non-negative");
        }
        if !(self.alpha >= 0.0 && self.eta > 0.0) {
            return bad("alpha must be >= 0 and eta > 0");
        }
        if !(self.lr_min > 0.0 && self.lr_max >= self.lr_min) {
            return bad("learning-rate bounds must satisfy 0 < lr_min <= lr_max");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.field_lr > 0.0) || self.field_batch == 0 {
            return bad("field learning rate and batch size must be positive");
        }
        if !(self.dt_min > 0.0) || self.redistribute_every == 0 {
            return bad("dt_min and redistribute_every must be positive");
        }
        if !(0.0..=1.0).contains(&self.uniform_fraction) || !(0.0..=1.0).contains(&self.best_after) {
            return bad("uniform_fraction and best_after must lie in [0, 1]");
        }
        if !(self.replan_period > 0.0) {
            return bad("replan_period must be positive");
        }
        Ok(())
    }

    pub fn field_config(&self) -> FieldTrainConfig {
        FieldTrainConfig {
            lr: self.field_lr,
            betas: (0.9, 0.9),
            batch_size: self.field_batch,
            samples_per_iteration: self.field_batch,
            seed: self.seed,
            tube_radius: self.tube_radius,
            uniform_fraction: self.uniform_fraction,
            time_jitter: self.time_jitter,
        }
    }

    fn time_scale(&self) -> f64 {
        self.time_scale.unwrap_or(10.0 * self.v_e)
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub loss_history: Vec<f64>,
    /// Terms at the returned trajectory's iteration.
    pub final_loss: LossBreakdown,
    pub field: NeuralField,
    pub lambda: LagrangeMultipliers,
    pub planning_time: f64,
    pub iterations: usize,
    /// Iteration whose trajectory was returned.
    pub best_iteration: usize,
    /// Per-replan trajectories (baseline only), times relative to each replan.
    pub replans: Vec<Trajectory>,
}

/// How ground-truth labels for online field training are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelTime {
    /// Obstacles posed at each sample's own time.
    Dynamic,
    /// Obstacles frozen at a fixed time.
    FrozenAt(f64),
}

fn label(scene: &Scene, s: State, mode: LabelTime) -> bool {
    match mode {
        LabelTime::Dynamic => scene.in_collision(s),
        LabelTime::FrozenAt(t) => scene.in_collision_with_obstacles_at(s, t),
    }
}

/// Training batch: a tube around `states` plus a uniform share of the scene.
pub fn sample_training_batch(scene: &Scene, states: &[State], config: &PlannerConfig, mode: LabelTime, rng: &mut ChaCha8Rng) -> Vec<LabeledState> {
    let b = scene.bounds();
    let t_n = states.last().map_or(0.0, |s| s.t);
    let count = config.field_batch;
    let uniform = (config.uniform_fraction * count as f64).round() as usize;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let state = if k < uniform {
            State::new(
                rng.gen_range(b.min.x..b.max.x),
                rng.gen_range(b.min.y..b.max.y),
                rng.gen_range(-PI..PI),
                rng.gen_range(0.0..scene.t_max),
            )
        } else {
            let anchor = states[rng.gen_range(0..states.len())];
            let r = config.tube_radius * rng.gen::<f64>().sqrt();
            let a = rng.gen_range(-PI..PI);
            let jitter = config.time_jitter * t_n * rng.gen_range(-1.0..1.0);
            State::new(
                (anchor.x + r * a.cos()).clamp(b.min.x, b.max.x),
                (anchor.y + r * a.sin()).clamp(b.min.y, b.max.y),
                rng.gen_range(-PI..PI),
                (anchor.t + jitter).clamp(0.0, scene.t_max),
            )
        };
        out.push(LabeledState {
            state,
            collision: label(scene, state, mode),
        });
    }
    out
}

/// Mutable optimization state of one planning run.
pub struct Planner<'a> {
    scene: &'a Scene,
    config: PlannerConfig,
    states: Vec<State>,
    lambda: LagrangeMultipliers,
    adam: Adam,
    precond: Preconditioner,
    lr: CyclicLr,
    field: NeuralField,
    rng: ChaCha8Rng,
    labels: LabelTime,
    iteration: usize,
    history: Vec<f64>,
    best: Option<(f64, usize, Vec<State>, LossBreakdown)>,
    last_breakdown: LossBreakdown,
}

impl<'a> Planner<'a> {
    pub fn new(scene: &'a Scene, seed: Trajectory, field: NeuralField, config: PlannerConfig, labels: LabelTime) -> Result<Self, PlanError> {
        config.validate()?;
        let n = seed.segments();
        if n < 2 {
            return Err(PlanError::Invalid("the planner needs at least 2 segments".into()));
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1));
        Ok(Self {
            scene,
            states: seed.states().to_vec(),
            lambda: LagrangeMultipliers::zeros(n),
            adam: Adam::new(3 * (n - 1) + n, config.beta1, config.beta2),
            precond: Preconditioner::new(n, &config.weights, config.alpha, config.eta),
            lr: CyclicLr {
                min: config.lr_min,
                max: config.lr_max,
                period: config.lr_period,
            },
            field,
            rng,
            labels,
            iteration: 0,
            history: Vec::new(),
            best: None,
            last_breakdown: LossBreakdown::default(),
            config,
        })
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn field(&self) -> &NeuralField {
        &self.field
    }

    pub fn lambda(&self) -> &LagrangeMultipliers {
        &self.lambda
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn train_field(&mut self) -> Result<f64, PlanError> {
        let batch = sample_training_batch(self.scene, &self.states, &self.config, self.labels, &mut self.rng);
        Ok(self.field.train_step(&batch)?)
    }

    /// One full iteration; returns the total loss before the update.
    pub fn step(&mut self) -> Result<f64, PlanError> {
        let k = self.iteration;
        self.train_field()?;

        let n = self.states.len() - 1;
        let fractions = draw_fractions(&mut self.rng, n);
        let tape = Tape::new();
        let vars: Vec<StateVars> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if i == 0 {
                    StateVars::constant(&tape, s)
                } else if i == n {
                    StateVars {
                        t: tape.var(s.t),
                        ..StateVars::constant(&tape, s)
                    }
                } else {
                    StateVars::variable(&tape, s)
                }
            })
            .collect();
        let graph = total_loss_graph(&tape, &vars, &self.field, &self.config.weights, &self.lambda, self.config.v_e, &fractions)
            .map_err(|e| PlanError::NonFinite {
                iteration: k,
                what: format!("loss graph ({e})"),
            })?;
        let loss = graph.total.value();
        if !loss.is_finite() {
            return Err(PlanError::NonFinite {
                iteration: k,
                what: "trajectory loss".into(),
            });
        }
        let grads = tape.backward(graph.total);
        let deltas: Vec<f64> = graph.deltas.iter().map(|d| d.value()).collect();
        let nu: Vec<f64> = graph.nu.iter().map(|d| d.value()).collect();
        let breakdown = graph.breakdown();

        let interior = &vars[1..n];
        let gx: Vec<f64> = interior.iter().map(|v| grads.wrt(v.x)).collect();
        let gy: Vec<f64> = interior.iter().map(|v| grads.wrt(v.y)).collect();
        let gth: Vec<f64> = interior.iter().map(|v| grads.wrt(v.theta)).collect();
        let gt: Vec<f64> = vars[1..].iter().map(|v| grads.wrt(v.t)).collect();
        let mut g = Vec::with_capacity(3 * (n - 1) + n);
        g.extend(self.precond.apply_spatial(&gx));
        g.extend(self.precond.apply_spatial(&gy));
        g.extend(self.precond.apply_spatial(&gth));
        g.extend(self.precond.apply_temporal(&gt));
        if g.iter().any(|v| !v.is_finite()) {
            return Err(PlanError::NonFinite {
                iteration: k,
                what: "trajectory gradient".into(),
            });
        }

        self.history.push(loss);
        self.last_breakdown = breakdown;
        // iterates about to be reparameterized compete
        let r = self.config.redistribute_every;
        let tracking = k % r == r - 1 && k as f64 >= self.config.best_after * self.config.iterations as f64;
        if tracking && self.best.as_ref().map_or(true, |b| loss < b.0) {
            self.best = Some((loss, k, self.states.clone(), breakdown));
        }

        let lr = self.lr.at(k);
        let dir = self.adam.direction(&g);
        let m = n - 1;
        let time_step = lr / self.config.time_scale();
        for j in 0..m {
            let s = &mut self.states[j + 1];
            s.x -= lr * dir[j];
            s.y -= lr * dir[m + j];
            s.theta -= lr * dir[2 * m + j];
        }
        for j in 0..n {
            self.states[j + 1].t -= time_step * dir[3 * m + j];
        }
        lagrange_ascent_step(&mut self.lambda, &deltas, &nu, self.config.lambda_lr);

        self.iteration += 1;
        if self.iteration % self.config.redistribute_every == 0 && self.states[n].t > 0.0 {
            let traj = Trajectory::from_states_unchecked(std::mem::take(&mut self.states));
            let traj = if self.config.resample_positions {
                traj.reparameterize()
            } else {
                traj.redistribute_times()
            };
            self.states = traj.states().to_vec();
        }
        self.states[0].t = 0.0;
        for i in 1..=n {
            let floor = self.states[i - 1].t + self.config.dt_min;
            if self.states[i].t < floor {
                self.states[i].t = floor;
            }
        }
        if !self.lambda.is_finite() || self.states.iter().any(|s| !s.is_finite()) {
            return Err(PlanError::NonFinite {
                iteration: k,
                what: "trajectory state".into(),
            });
        }
        Ok(loss)
    }

    /// Runs `iterations` steps and returns the best-loss trajectory.
    pub fn run(mut self, started: Instant) -> Result<PlanResult, PlanError> {
        for _ in 0..self.config.field_warmup {
            self.train_field()?;
        }
        for _ in 0..self.config.iterations {
            self.step()?;
        }
        let (states, best_iteration, final_loss) = match self.best.take() {
            Some((_, k, s, b)) => (s, k, b),
            None => (self.states.clone(), self.iteration, self.last_breakdown),
        };
        Ok(PlanResult {
            trajectory: Trajectory::new(states)?,
            loss_history: self.history,
            final_loss,
            field: self.field,
            lambda: self.lambda,
            planning_time: started.elapsed().as_secs_f64(),
            iterations: self.iteration,
            best_iteration,
            replans: Vec::new(),
        })
    }
}

fn check_endpoints(scene: &Scene, start: Pose, goal: Pose) -> Result<(), PlanError> {
    let finite = [start.x, start.y, start.theta, goal.x, goal.y, goal.theta].iter().all(|v| v.is_finite());
    if !finite {
        return Err(PlanError::Invalid("start and goal must be finite".into()));
    }
    let b = scene.bounds();
    for (name, p) in [("start", start), ("goal", goal)] {
        if !b.contains(Vec2::new(p.x, p.y)) {
            return Err(PlanError::Invalid(format!("{name} lies outside the map")));
        }
    }
    Ok(())
}

fn trivial_result(traj: Trajectory, field: NeuralField, started: Instant) -> PlanResult {
    let n = traj.segments();
    PlanResult {
        trajectory: traj,
        loss_history: Vec::new(),
        final_loss: LossBreakdown::default(),
        field,
        lambda: LagrangeMultipliers::zeros(n),
        planning_time: started.elapsed().as_secs_f64(),
        iterations: 0,
        best_iteration: 0,
        replans: Vec::new(),
    }
}

/// Plans from `start` to `goal` against the time-dependent scene.
pub fn plan(scene: &Scene, start: Pose, goal: Pose, config: &PlannerConfig) -> Result<PlanResult, PlanError> {
    let started = Instant::now();
    config.validate()?;
    check_endpoints(scene, start, goal)?;
    let seed = astar_seed(scene, start, goal, config.grid_resolution, config.v_e, config.n_segments)?;
    let field = NeuralField::new(Normalizer::for_scene(scene), &config.field_config(), config.seed);
    if seed.segments() < 2 {
        return Ok(trivial_result(seed, field, started));
    }
    Planner::new(scene, seed, field, config.clone(), LabelTime::Dynamic)?.run(started)
}

/// Remainder of `traj` after time `t0`, re-timed to start at zero.
fn remainder_after(traj: &Trajectory, t0: f64, n_segments: usize) -> Option<Trajectory> {
    let head = traj.state_at_time(t0);
    let mut states = vec![State::new(head.x, head.y, head.theta, 0.0)];
    states.extend(traj.states().iter().filter(|s| s.t > t0 + 1e-9).map(|s| State::new(s.x, s.y, s.theta, s.t - t0)));
    let rest = Trajectory::new(states).ok()?;
    (rest.segments() >= 1 && rest.duration() > 0.0).then(|| rest.resample(n_segments))
}

/// Continuous-replanning baseline.
///
/// Every `replan_period` seconds the robot is assumed to have reached the
/// planned state; the field is refit with obstacles frozen at that time and
/// its time input pinned, and a static plan is re-optimized from the reached
/// state, warm-started from the rest of the previous plan. The returned
/// trajectory stitches the executed prefix of every plan.
pub fn plan_replanning_baseline(scene: &Scene, start: Pose, goal: Pose, config: &PlannerConfig) -> Result<PlanResult, PlanError> {
    let started = Instant::now();
    config.validate()?;
    check_endpoints(scene, start, goal)?;
    let mut field = NeuralField::new(Normalizer::for_scene(scene), &config.field_config(), config.seed);
    field.set_time_input(TimeInput::Frozen);
    let seed = astar_seed(scene, start, goal, config.grid_resolution, config.v_e, config.n_segments)?;
    if seed.segments() < 2 {
        return Ok(trivial_result(seed, field, started));
    }
    let period = config.replan_period;
    let horizon = ReplanHorizon {
        period,
        steps: config.replan_steps,
    };
    let refit = RefitConfig {
        steps: config.refit_steps,
        batch_size: config.field_batch,
        seed: config.seed,
    };

    let mut executed: Vec<State> = Vec::new();
    let mut replans = Vec::new();
    let mut history = Vec::new();
    let mut warm = seed;
    let mut last_loss = LossBreakdown::default();
    let mut lambda = LagrangeMultipliers::zeros(config.n_segments);
    let mut total_iterations = 0;
    for j in 0..=config.replan_steps {
        let t_offset = j as f64 * period;
        let region = tube_region(scene, warm.states(), config.tube_radius);
        field.refit_at_slice(scene, j, &horizon, &refit, Some(region))?;
        let step_config = PlannerConfig {
            iterations: config.replan_iterations,
            seed: config.seed.wrapping_add(j as u64),
            ..config.clone()
        };
        let planner = Planner::new(scene, warm.clone(), field, step_config, LabelTime::FrozenAt(t_offset))?;
        let result = planner.run(started)?;
        field = result.field;
        history.extend(result.loss_history);
        last_loss = result.final_loss;
        lambda = result.lambda;
        total_iterations += result.iterations;
        let plan_j = result.trajectory;
        replans.push(plan_j.clone());

        let last_step = j == config.replan_steps || plan_j.duration() <= period;
        let cut = if last_step { plan_j.duration() } else { period };
        for s in plan_j.states() {
            if s.t < cut - 1e-9 || (last_step && s.t <= cut) {
                let t = s.t + t_offset;
                if executed.last().map_or(true, |p: &State| t > p.t) {
                    executed.push(State::new(s.x, s.y, s.theta, t));
                }
            }
        }
        if last_step {
            break;
        }
        let reached = plan_j.state_at_time(period);
        executed.push(State::new(reached.x, reached.y, reached.theta, t_offset + period));
        warm = match remainder_after(&plan_j, period, config.n_segments) {
            Some(w) => w,
            None => break,
        };
    }
    Ok(PlanResult {
        trajectory: Trajectory::new(executed)?,
        loss_history: history,
        final_loss: last_loss,
        field,
        lambda,
        planning_time: started.elapsed().as_secs_f64(),
        iterations: total_iterations,
        best_iteration: total_iterations,
        replans,
    })
}

/// Bounding box of the trajectory grown by `margin`, clipped to the scene.
fn tube_region(scene: &Scene, states: &[State], margin: f64) -> SampleRegion {
    let b = scene.bounds();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in states {
        x0 = x0.min(s.x);
        x1 = x1.max(s.x);
        y0 = y0.min(s.y);
        y1 = y1.max(s.y);
    }
    SampleRegion {
        x: ((x0 - margin).max(b.min.x), (x1 + margin).min(b.max.x)),
        y: ((y0 - margin).max(b.min.y), (y1 + margin).min(b.max.y)),
        theta: (-PI, PI),
        t: (0.0, scene.t_max),
    }
}
