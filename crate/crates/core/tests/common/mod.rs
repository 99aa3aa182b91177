#![allow(dead_code)]

use std::path::PathBuf;

use dynfield::autodiff::Tape;
use dynfield::field::{FieldTrainConfig, NeuralField, Normalizer};
use dynfield::geometry::{ConvexPolygon, Pose, Rect, State};
use dynfield::losses::{
    collision_loss, distance_loss, lagrangian_loss, nonholonomic_deltas, time_regularization, total_loss_graph, velocity_deltas,
    LagrangeMultipliers, LossWeights, StateVars,
};
use dynfield::scene::{MovingObstacle, RobotFootprint, Scene, StaticMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const FD_FLOOR: f64 = 1e-3;

pub fn scene_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenes").join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> Scene {
    Scene::load(scene_path(name)).expect("fixture loads")
}

pub fn endpoints(scene: &Scene) -> (Pose, Pose) {
    (scene.start.expect("fixture start"), scene.goal.expect("fixture goal"))
}

pub fn car() -> RobotFootprint {
    RobotFootprint {
        length: 4.5,
        width: 1.9,
        rear_to_center: 1.35,
    }
}

pub fn open_scene(bounds: Rect, polygons: Vec<ConvexPolygon>, obstacles: Vec<MovingObstacle>, robot: RobotFootprint) -> Scene {
    Scene::new(StaticMap { bounds, polygons }, obstacles, robot, 8.0).expect("valid scene")
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_FLOOR)
}

/// Central differences at `h` and `h/2` agree to O(h²) on smooth functions.
/// A ReLU kink inside the stencil breaks that, and the point is skipped.
pub const KINK_TOL: f64 = 1e-6;

pub fn straddles_kink(wide: f64, narrow: f64) -> bool {
    rel_err(wide, narrow) > KINK_TOL
}

/// Random states with strictly increasing times inside a 50 m square.
pub fn random_states(rng: &mut ChaCha8Rng, n_states: usize) -> Vec<State> {
    let mut t = 0.0;
    (0..n_states)
        .map(|i| {
            if i > 0 {
                t += rng.gen_range(0.1..1.0);
            }
            State::new(rng.gen_range(5.0..45.0), rng.gen_range(5.0..45.0), rng.gen_range(-3.0..3.0), t)
        })
        .collect()
}

pub fn flat(states: &[State]) -> Vec<f64> {
    states.iter().flat_map(|s| [s.x, s.y, s.theta, s.t]).collect()
}

pub fn unflat(v: &[f64]) -> Vec<State> {
    v.chunks(4).map(|c| State::new(c[0], c[1], c[2], c[3])).collect()
}

pub const TERMS: [&str; 6] = ["dist", "col", "constr", "vel", "time", "total"];

pub struct LossCase {
    pub states: Vec<State>,
    pub field: NeuralField,
    pub weights: LossWeights,
    pub lambda: LagrangeMultipliers,
    pub v_e: f64,
    pub fractions: Vec<f64>,
}

impl LossCase {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..8);
        let states = random_states(&mut rng, n + 1);
        let normalizer = Normalizer {
            bounds: Rect::new(0.0, 0.0, 50.0, 50.0),
            t_max: 8.0,
        };
        let field = NeuralField::new(normalizer, &FieldTrainConfig::default(), seed);
        let weights = LossWeights {
            w_dist: rng.gen_range(0.1..10.0),
            w_col: rng.gen_range(0.1..10.0),
            w_constr: rng.gen_range(0.1..10.0),
            w_vel: rng.gen_range(0.1..10.0),
            w_time: rng.gen_range(0.1..10.0),
        };
        let lambda = LagrangeMultipliers {
            vel: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            nh: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        };
        let v_e = rng.gen_range(1.0..15.0);
        let fractions = (0..n).map(|_| rng.gen::<f64>()).collect();
        Self {
            states,
            field,
            weights,
            lambda,
            v_e,
            fractions,
        }
    }

    /// Term values and the gradient of each term with respect to every
    /// `(x, y, θ, t)` variable.
    pub fn evaluate(&self, states: &[State]) -> ([f64; 6], Vec<[f64; 6]>) {
        let tape = Tape::new();
        let s: Vec<StateVars> = states.iter().map(|st| StateVars::variable(&tape, st)).collect();
        let g = total_loss_graph(&tape, &s, &self.field, &self.weights, &self.lambda, self.v_e, &self.fractions).expect("graph");
        let vel = lagrangian_loss(&velocity_deltas(&s, self.v_e), &self.lambda.vel);
        let constr = lagrangian_loss(&nonholonomic_deltas(&s), &self.lambda.nh);
        let roots = [
            distance_loss(&s),
            collision_loss(&tape, &s, &self.field, &self.fractions).expect("collision term"),
            constr,
            vel,
            time_regularization(&s),
            g.total,
        ];
        let values = roots.map(|r| r.value());
        let mut grads = vec![[0.0; 6]; 4 * states.len()];
        for (k, root) in roots.iter().enumerate() {
            let gr = tape.backward(*root);
            for (i, v) in s.iter().enumerate() {
                for (c, var) in [v.x, v.y, v.theta, v.t].into_iter().enumerate() {
                    grads[4 * i + c][k] = gr.wrt(var);
                }
            }
        }
        (values, grads)
    }

    /// Worst relative error per term between the tape gradient and central
    /// differences, and the number of skipped (variable, term) pairs.
    pub fn worst_errors(&self) -> ([f64; 6], usize) {
        let (_, analytic) = self.evaluate(&self.states);
        let base = flat(&self.states);
        let mut worst = [0.0f64; 6];
        let mut kinks = 0;
        for (j, a) in analytic.iter().enumerate() {
            let h = FD_STEP * base[j].abs().max(1.0);
            let at = |d: f64| {
                let mut v = base.clone();
                v[j] += d;
                self.evaluate(&unflat(&v)).0
            };
            let (fp, fm, fp2, fm2) = (at(h), at(-h), at(0.5 * h), at(-0.5 * h));
            for k in 0..6 {
                let fd = (fp[k] - fm[k]) / (2.0 * h);
                if straddles_kink(fd, (fp2[k] - fm2[k]) / h) {
                    kinks += 1;
                    continue;
                }
                worst[k] = worst[k].max(rel_err(a[k], fd));
            }
        }
        (worst, kinks)
    }
}

/// Worst relative error of the logit gradient at `count` random states, and
/// the number of skipped (state, input) pairs.
pub fn logit_gradient_error(seed: u64, count: usize) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normalizer = Normalizer {
        bounds: Rect::new(0.0, 0.0, 50.0, 50.0),
        t_max: 8.0,
    };
    let field = NeuralField::new(normalizer, &FieldTrainConfig::default(), seed);
    let mut worst = 0.0f64;
    let mut kinks = 0;
    for _ in 0..count {
        let s = State::new(rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0), rng.gen_range(-3.1..3.1), rng.gen_range(0.0..8.0));
        let tape = Tape::new();
        let vars = [tape.var(s.x), tape.var(s.y), tape.var(s.theta), tape.var(s.t)];
        let out = field.logits_on_tape(&tape, &[vars]).expect("forward");
        let logit = tape.element(out, 0, 0).expect("element");
        let g = tape.backward(logit);
        let base = [s.x, s.y, s.theta, s.t];
        for c in 0..4 {
            let h = FD_STEP * base[c].abs().max(1.0);
            let at = |d: f64| {
                let mut v = base;
                v[c] += d;
                field.logit(&State::new(v[0], v[1], v[2], v[3]))
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            if straddles_kink(fd, (at(0.5 * h) - at(-0.5 * h)) / h) {
                kinks += 1;
                continue;
            }
            worst = worst.max(rel_err(g.wrt(vars[c]), fd));
        }
    }
    (worst, kinks)
}

/// Straight run at 15 m/s that slows to 3 m/s within half a second.
pub fn braking_trajectory() -> dynfield::trajectory::Trajectory {
    let dt = 0.05;
    let speed = |t: f64| {
        if t < 2.0 {
            15.0
        } else if t < 2.5 {
            15.0 - 24.0 * (t - 2.0)
        } else {
            3.0
        }
    };
    let (mut x, mut states) = (0.0, Vec::new());
    for k in 0..=120 {
        let t = k as f64 * dt;
        states.push(State::new(x, 0.0, 0.0, t));
        x += speed(t + 0.5 * dt) * dt;
    }
    dynfield::trajectory::Trajectory::new(states).expect("valid")
}

pub fn straight_trajectory(speed: f64, duration: f64) -> dynfield::trajectory::Trajectory {
    let states = (0..=(duration * 10.0) as usize)
        .map(|k| {
            let t = k as f64 * 0.1;
            State::new(5.0 + speed * t, 25.0, 0.0, t)
        })
        .collect();
    dynfield::trajectory::Trajectory::new(states).expect("valid")
}

/// Following error per stiffness on the braking run.
pub fn stiffness_errors(stiffness: &[f64]) -> Vec<f64> {
    let traj = braking_trajectory();
    stiffness
        .iter()
        .map(|&s| {
            dynfield::harness::follow(&traj, &dynfield::harness::FollowerConfig::with_stiffness(s), None)
                .expect("valid follower")
                .max_error()
        })
        .collect()
}
