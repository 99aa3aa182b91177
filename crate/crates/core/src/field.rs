//! Spatio-temporal collision field: an MLP mapping a normalized
//! `(x, y, θ, t)` to a collision logit, trained online with BCE-with-logits
//! against labels from the exact collision function.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adam::Adam;
use crate::autodiff::{AutodiffError, MatVar, Tape, Var};
use crate::geometry::{Rect, State};
use crate::scene::{LabeledState, SampleRegion, Scene, SceneError};

/// Layer widths: 4 inputs, three hidden layers of 128 ReLU units, one logit.
pub const LAYER_SIZES: [usize; 5] = [4, 128, 128, 128, 1];

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("field parameters became non-finite")]
    NonFinite,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("time slice {slice} is beyond the replanning horizon {horizon}")]
    SliceOutOfHorizon { slice: usize, horizon: usize },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("cannot access checkpoint: {0}")]
    Io(#[from] std::io::Error),
}

/// Affine map of `bounds × [-π, π] × [0, t_max]` onto `[-1, 1]⁴`.
///
/// θ is not wrapped: a heading shifted by 2π maps to a different input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub bounds: Rect,
    pub t_max: f64,
}

impl Normalizer {
    pub fn for_scene(scene: &Scene) -> Self {
        Self {
            bounds: scene.bounds(),
            t_max: scene.t_max,
        }
    }

    fn coefficients(&self) -> [(f64, f64); 4] {
        let b = self.bounds;
        let sx = 2.0 / b.width();
        let sy = 2.0 / b.height();
        [
            (sx, -1.0 - b.min.x * sx),
            (sy, -1.0 - b.min.y * sy),
            (1.0 / PI, 0.0),
            (2.0 / self.t_max, -1.0),
        ]
    }

    pub fn apply(&self, s: &State) -> [f64; 4] {
        let c = self.coefficients();
        let raw = [s.x, s.y, s.theta, s.t];
        std::array::from_fn(|k| c[k].0 * raw[k] + c[k].1)
    }

    pub fn apply_vars<'t>(&self, raw: [Var<'t>; 4]) -> [Var<'t>; 4] {
        let c = self.coefficients();
        std::array::from_fn(|k| raw[k] * c[k].0 + c[k].1)
    }
}

/// Whether the time input is live or pinned (continuous-replanning mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeInput {
    Dynamic,
    /// The normalized time input is fed as 0 regardless of the state.
    Frozen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrainConfig {
    pub lr: f64,
    pub betas: (f64, f64),
    pub batch_size: usize,
    pub samples_per_iteration: usize,
    pub seed: u64,
    /// Half-width of the sampling tube around the current trajectory (m).
    pub tube_radius: f64,
    /// Fraction of each draw taken uniformly over the whole scene.
    pub uniform_fraction: f64,
    /// Relative time jitter of tube samples (fraction of the trajectory duration).
    pub time_jitter: f64,
}

impl Default for FieldTrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-1,
            betas: (0.9, 0.9),
            batch_size: 256,
            samples_per_iteration: 256,
            seed: 0,
            tube_radius: 10.0,
            uniform_fraction: 0.25,
            time_jitter: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NeuralField {
    params: Vec<Array2<f64>>,
    normalizer: Normalizer,
    time_input: TimeInput,
    adam: Adam,
    lr: f64,
}

impl NeuralField {
    /// Uniform init in `±1/√fan_in` for weights and biases.
    pub fn new(normalizer: Normalizer, config: &FieldTrainConfig, seed: u64) -> Self {
        assert!(config.lr > 0.0, "field learning rate must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(2 * (LAYER_SIZES.len() - 1));
        for w in LAYER_SIZES.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            params.push(Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound)));
            params.push(Array2::from_shape_fn((1, fan_out), |_| rng.gen_range(-bound..bound)));
        }
        Self::from_params(normalizer, params, config)
    }

    /// All-zero network: logit 0 everywhere.
    pub fn zeros(normalizer: Normalizer, config: &FieldTrainConfig) -> Self {
        let params = LAYER_SIZES
            .windows(2)
            .flat_map(|w| [Array2::zeros((w[0], w[1])), Array2::zeros((1, w[1]))])
            .collect();
        Self::from_params(normalizer, params, config)
    }

    fn from_params(normalizer: Normalizer, params: Vec<Array2<f64>>, config: &FieldTrainConfig) -> Self {
        let count = params.iter().map(Array2::len).sum();
        Self {
            params,
            normalizer,
            time_input: TimeInput::Dynamic,
            adam: Adam::new(count, config.betas.0, config.betas.1),
            lr: config.lr,
        }
    }

    pub fn normalizer(&self) -> Normalizer {
        self.normalizer
    }

    pub fn time_input(&self) -> TimeInput {
        self.time_input
    }

    pub fn set_time_input(&mut self, mode: TimeInput) {
        self.time_input = mode;
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Array2::len).sum()
    }

    /// Moves the parameters toward `source`: `p ← decay·p + (1 − decay)·q`.
    pub fn parameters_finite(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    fn input_row(&self, s: &State) -> [f64; 4] {
        let mut row = self.normalizer.apply(s);
        if self.time_input == TimeInput::Frozen {
            row[3] = 0.0;
        }
        row
    }

    fn forward_plain(&self, input: Array2<f64>) -> Array2<f64> {
        let mut h = input;
        let layers = self.params.len() / 2;
        for l in 0..layers {
            h = h.dot(&self.params[2 * l]) + &self.params[2 * l + 1];
            if l + 1 < layers {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    pub fn logit(&self, state: &State) -> f64 {
        self.logits(std::slice::from_ref(state))[0]
    }

    pub fn logits(&self, states: &[State]) -> Vec<f64> {
        if states.is_empty() {
            return Vec::new();
        }
        let flat: Vec<f64> = states.iter().flat_map(|s| self.input_row(s)).collect();
        let input = Array2::from_shape_vec((states.len(), 4), flat).expect("rows of 4");
        self.forward_plain(input).column(0).to_vec()
    }

    fn forward_tape<'t>(&self, tape: &'t Tape, input: MatVar<'t>, params: &[MatVar<'t>]) -> Result<MatVar<'t>, AutodiffError> {
        let layers = params.len() / 2;
        let mut h = input;
        for l in 0..layers {
            h = tape.matmul(h, params[2 * l])?;
            h = tape.add_row_bias(h, params[2 * l + 1])?;
            if l + 1 < layers {
                h = tape.relu_matrix(h)?;
            }
        }
        Ok(h)
    }

    /// Logits of raw `(x, y, θ, t)` vars with the network frozen.
    ///
    /// Returns a `(n, 1)` matrix; gradients reach the input vars only.
    pub fn logits_on_tape<'t>(&self, tape: &'t Tape, inputs: &[[Var<'t>; 4]]) -> Result<MatVar<'t>, AutodiffError> {
        let rows: Vec<Vec<Var<'t>>> = inputs
            .iter()
            .map(|raw| {
                let mut n = self.normalizer.apply_vars(*raw);
                if self.time_input == TimeInput::Frozen {
                    n[3] = tape.constant(0.0);
                }
                n.to_vec()
            })
            .collect();
        let input = tape.stack(&rows)?;
        let params: Vec<MatVar<'t>> = self.params.iter().map(|p| tape.matrix_constant(p.clone())).collect();
        self.forward_tape(tape, input, &params)
    }

    /// Mean BCE-with-logits over `batch`, then one Adam step on the parameters.
    pub fn train_step(&mut self, batch: &[LabeledState]) -> Result<f64, FieldError> {
        if batch.is_empty() {
            return Err(FieldError::EmptyBatch);
        }
        let flat: Vec<f64> = batch.iter().flat_map(|s| self.input_row(&s.state)).collect();
        let labels: Vec<f64> = batch.iter().map(|s| f64::from(u8::from(s.collision))).collect();
        let tape = Tape::new();
        let input = tape.matrix_constant(Array2::from_shape_vec((batch.len(), 4), flat).expect("rows of 4"));
        let params: Vec<MatVar> = self.params.iter().map(|p| tape.matrix_var(p.clone())).collect();
        let logits = self.forward_tape(&tape, input, &params)?;
        let loss = tape.bce_mean(logits, &labels)?;
        let grads = tape.backward(loss);
        let flat_grads: Vec<f64> = params
            .iter()
            .flat_map(|p| grads.wrt_matrix(*p).into_iter())
            .collect();
        let dir = self.adam.direction(&flat_grads);
        let mut offset = 0;
        for p in &mut self.params {
            for v in p.iter_mut() {
                *v -= self.lr * dir[offset];
                offset += 1;
            }
        }
        if !self.parameters_finite() {
            return Err(FieldError::NonFinite);
        }
        Ok(loss.value())
    }

    /// Mean BCE-with-logits without updating anything.
    pub fn loss(&self, batch: &[LabeledState]) -> f64 {
        let states: Vec<State> = batch.iter().map(|s| s.state).collect();
        let logits = self.logits(&states);
        logits
            .iter()
            .zip(batch)
            .map(|(&l, s)| crate::autodiff::bce_with_logits(l, f64::from(u8::from(s.collision))))
            .sum::<f64>()
            / batch.len().max(1) as f64
    }

    /// Fraction of samples whose sign of logit matches the label.
    pub fn accuracy(&self, batch: &[LabeledState]) -> f64 {
        if batch.is_empty() {
            return 1.0;
        }
        let states: Vec<State> = batch.iter().map(|s| s.state).collect();
        let hits = self
            .logits(&states)
            .iter()
            .zip(batch)
            .filter(|(&l, s)| (l > 0.0) == s.collision)
            .count();
        hits as f64 / batch.len() as f64
    }

    /// Continues training against obstacles frozen at `slice` of the
    /// replanning horizon, with the time input pinned.
    ///
    /// Samples come from `region` (whole scene when `None`) and are labelled
    /// with obstacles posed at `slice * period`.
    pub fn refit_at_slice(&mut self, scene: &Scene, slice: usize, horizon: &ReplanHorizon, refit: &RefitConfig, region: Option<SampleRegion>) -> Result<f64, FieldError> {
        if slice > horizon.steps {
            return Err(FieldError::SliceOutOfHorizon {
                slice,
                horizon: horizon.steps,
            });
        }
        self.time_input = TimeInput::Frozen;
        let slice_time = slice as f64 * horizon.period;
        let region = region.unwrap_or_else(|| scene.full_region());
        let mut loss = 0.0;
        for step in 0..refit.steps {
            let seed = refit.seed ^ ((slice as u64) << 32) ^ step as u64;
            let mut batch = scene.sample_labeled_batch(&region, refit.batch_size, seed)?;
            for s in &mut batch {
                s.collision = scene.in_collision_with_obstacles_at(s.state, slice_time);
            }
            loss = self.train_step(&batch)?;
        }
        Ok(loss)
    }

    /// Plain-text checkpoint: header lines, then one line per tensor.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::from("dynfield-checkpoint 1\n");
        let sizes: Vec<String> = LAYER_SIZES.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "layers {}", sizes.join(" "));
        let b = self.normalizer.bounds;
        let _ = writeln!(
            out,
            "normalizer {:?} {:?} {:?} {:?} {:?}",
            b.min.x, b.min.y, b.max.x, b.max.y, self.normalizer.t_max
        );
        let mode = match self.time_input {
            TimeInput::Dynamic => "dynamic",
            TimeInput::Frozen => "frozen",
        };
        let _ = writeln!(out, "time_input {mode}");
        for p in &self.params {
            let (r, c) = p.dim();
            let vals: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "tensor {r} {c} {}", vals.join(" "));
        }
        out
    }

    pub fn from_checkpoint(text: &str, config: &FieldTrainConfig) -> Result<Self, FieldError> {
        let bad = |m: &str| FieldError::Checkpoint(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("dynfield-checkpoint 1") {
            return Err(bad("missing header"));
        }
        let layers: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("layers "))
            .ok_or_else(|| bad("missing layers line"))?
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad layer size"))?;
        if layers != LAYER_SIZES {
            return Err(bad("unsupported layer sizes"));
        }
        let norm: Vec<f64> = lines
            .next()
            .and_then(|l| l.strip_prefix("normalizer "))
            .ok_or_else(|| bad("missing normalizer line"))?
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad normalizer value"))?;
        let [x0, y0, x1, y1, t_max] = norm[..] else {
            return Err(bad("normalizer needs 5 values"));
        };
        let time_input = match lines.next() {
            Some("time_input dynamic") => TimeInput::Dynamic,
            Some("time_input frozen") => TimeInput::Frozen,
            _ => return Err(bad("missing time_input line")),
        };
        let mut params = Vec::new();
        for w in LAYER_SIZES.windows(2) {
            for shape in [(w[0], w[1]), (1, w[1])] {
                let line = lines.next().ok_or_else(|| bad("missing tensor"))?;
                let mut it = line.split_whitespace();
                if it.next() != Some("tensor") {
                    return Err(bad("expected tensor line"));
                }
                let r: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("tensor rows"))?;
                let c: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("tensor cols"))?;
                if (r, c) != shape {
                    return Err(bad("tensor shape mismatch"));
                }
                let vals: Vec<f64> = it.map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("bad tensor value"))?;
                let arr = Array2::from_shape_vec(shape, vals).map_err(|_| bad("tensor length mismatch"))?;
                params.push(arr);
            }
        }
        let mut field = Self::from_params(
            Normalizer {
                bounds: Rect::new(x0, y0, x1, y1),
                t_max,
            },
            params,
            config,
        );
        field.time_input = time_input;
        if !field.parameters_finite() {
            return Err(FieldError::NonFinite);
        }
        Ok(field)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FieldError> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, config: &FieldTrainConfig) -> Result<Self, FieldError> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?, config)
    }
}

/// Replanning schedule of the continuous-replanning baseline: slices
/// `0..=steps`, each `period` seconds apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanHorizon {
    pub period: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefitConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for RefitConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            batch_size: 256,
            seed: 0,
        }
    }
}
