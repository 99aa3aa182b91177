//! Command-line entry points: plan, evaluate, sweep and compare.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, Overrides, RunConfig};
use crate::geometry::Pose;
use crate::harness::{dynamics_metrics, follow, DynamicsMetrics, FollowerConfig, HarnessError, DEFAULT_BINS};
use crate::optimizer::{plan, plan_replanning_baseline, PlanError, PlanResult};
use crate::report::{trajectory_report, TrajectoryReport};
use crate::scene::{Scene, SceneError};
use crate::svg::{heatmap_svg, plan_svg, series_svg};
use crate::trajectory::{Trajectory, TrajectoryError};

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NO_PATH: i32 = 3;
pub const EXIT_NON_FINITE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Io { .. } => EXIT_INVALID,
            CliError::Plan(PlanError::Invalid(_)) => EXIT_INVALID,
            CliError::Plan(PlanError::NoPath(_)) => EXIT_NO_PATH,
            CliError::Plan(_) => EXIT_NON_FINITE,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Invalid(format!("config: {e}"))
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        CliError::Invalid(format!("scene: {e}"))
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        CliError::Invalid(format!("trajectory: {e}"))
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "dynfield", version, about = "Neural-field trajectory optimization among moving obstacles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan one trajectory.
    Plan {
        #[command(flatten)]
        common: PlanArgs,
        /// Run the continuous-replanning baseline instead.
        #[arg(long)]
        baseline: bool,
    },
    /// Track a trajectory CSV with the bicycle follower at several stiffness values.
    Evaluate {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// Comma-separated control stiffness values in (0, 1].
        #[arg(long, default_value = "1.0,0.7,0.5,0.2,0.1")]
        stiffness: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Plan over a grid of w_time/w_vel ratios.
    Sweep {
        #[command(flatten)]
        common: PlanArgs,
        /// Comma-separated w_time/w_vel ratios.
        #[arg(long, default_value = "0.01,0.1,1,10,100")]
        grid: String,
        /// Seeded runs per cell.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Plan with both the dynamic field and the replanning baseline.
    Compare {
        #[command(flatten)]
        common: PlanArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Start pose "x,y,theta"; defaults to the scene's start.
    #[arg(long)]
    pub start: Option<String>,
    /// Goal pose "x,y,theta"; defaults to the scene's goal.
    #[arg(long)]
    pub goal: Option<String>,
    /// JSON or key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Weight overrides, e.g. "w_dist=50,w_col=5e4".
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Any config key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

pub fn parse_pose(text: &str) -> Result<Pose, CliError> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Invalid(format!("pose '{text}': {e}")))?;
    match vals[..] {
        [x, y, th] if vals.iter().all(|v| v.is_finite()) => Ok(Pose::new(x, y, th)),
        _ => Err(CliError::Invalid(format!("pose '{text}' must be \"x,y,theta\""))),
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    let vals: Vec<f64> = text
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Invalid(format!("list '{text}': {e}")))?;
    if vals.is_empty() {
        return Err(CliError::Invalid("empty list".into()));
    }
    Ok(vals)
}

fn resolve_config(file: Option<&Path>, set: &[String], weights: Option<&str>, iterations: Option<usize>, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut o = match file {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::Invalid(format!("config {}: {e}", p.display())))?,
        None => Overrides::default(),
    };
    for pair in set {
        o.set_pair(pair)?;
    }
    if let Some(w) = weights {
        o.set_weights(w)?;
    }
    if let Some(n) = iterations {
        o.set("iterations", json!(n));
    }
    if let Some(s) = seed {
        o.set("seed", json!(s));
    }
    Ok(RunConfig::resolve(&o)?)
}

struct Job {
    scene_path: PathBuf,
    scene: Scene,
    start: Pose,
    goal: Pose,
    config: RunConfig,
    out: PathBuf,
}

impl Job {
    fn from_args(a: &PlanArgs) -> Result<Self, CliError> {
        let scene = Scene::load(&a.scene)?;
        let pick = |arg: &Option<String>, fallback: Option<Pose>, what: &str| match arg {
            Some(text) => parse_pose(text),
            None => fallback.ok_or_else(|| CliError::Invalid(format!("no --{what} given and the scene has no default"))),
        };
        Ok(Self {
            start: pick(&a.start, scene.start, "start")?,
            goal: pick(&a.goal, scene.goal, "goal")?,
            config: resolve_config(a.config.as_deref(), &a.set, a.weights.as_deref(), a.iterations, a.seed)?,
            scene_path: a.scene.clone(),
            scene,
            out: a.out.clone(),
        })
    }

    fn manifest(&self, command: &str) -> Value {
        json!({
            "command": command,
            "scene": self.scene_path.display().to_string(),
            "start": [self.start.x, self.start.y, self.start.theta],
            "goal": [self.goal.x, self.goal.y, self.goal.theta],
            "seed": self.config.planner.seed,
            "config": self.config.to_json(),
        })
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

/// CSV with the manifest as leading `#` comment lines.
fn csv_with_manifest(manifest: &Value, body: &str) -> String {
    format!("# seed: {}\n# manifest: {}\n{body}", manifest["seed"], manifest)
}

fn with(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

#[derive(Serialize)]
struct PlanSummary<'a> {
    report: &'a TrajectoryReport,
    final_loss: &'a crate::losses::LossBreakdown,
    iterations: usize,
    best_iteration: usize,
}

fn plan_artifacts(job: &Job, manifest: &Value, result: &PlanResult, report: &TrajectoryReport, prefix: &str) -> Result<(), CliError> {
    let summary = serde_json::to_value(PlanSummary {
        report,
        final_loss: &result.final_loss,
        iterations: result.iterations,
        best_iteration: result.best_iteration,
    })
    .expect("summary serializes");
    write(&job.out.join(format!("{prefix}trajectory.csv")), &csv_with_manifest(manifest, &result.trajectory.to_csv()))?;
    write(&job.out.join(format!("{prefix}metrics.json")), &pretty(&with(manifest.clone(), summary.clone())))?;
    let replans: Vec<Value> = result.replans.iter().map(|t| json!(t.states().iter().map(|s| [s.x, s.y, s.theta, s.t]).collect::<Vec<_>>())).collect();
    let full = with(
        manifest.clone(),
        with(
            summary,
            json!({
                "loss_history": result.loss_history,
                "planning_time": result.planning_time,
                "replans": replans,
            }),
        ),
    );
    write(&job.out.join(format!("{prefix}result.json")), &pretty(&full))?;
    Ok(())
}

pub fn cmd_plan(args: &PlanArgs, baseline: bool) -> Result<Value, CliError> {
    let job = Job::from_args(args)?;
    ensure_dir(&job.out)?;
    let manifest = job.manifest(if baseline { "plan --baseline" } else { "plan" });
    let p = &job.config.planner;
    let result = if baseline {
        plan_replanning_baseline(&job.scene, job.start, job.goal, p)?
    } else {
        plan(&job.scene, job.start, job.goal, p)?
    };
    let report = trajectory_report(&job.scene, &result.trajectory, p.v_e);
    plan_artifacts(&job, &manifest, &result, &report, "")?;
    let svg = plan_svg(&job.scene, &[("plan", &result.trajectory)], 1.0, &manifest.to_string());
    write(&job.out.join("plan.svg"), &svg)?;
    Ok(serde_json::to_value(&report).expect("report serializes"))
}

pub struct EvaluateArgs<'a> {
    pub trajectory: &'a Path,
    pub scene: &'a Path,
    pub stiffness: &'a str,
    pub config: Option<&'a Path>,
    pub set: &'a [String],
    pub seed: Option<u64>,
    pub out: &'a Path,
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<Value, CliError> {
    let stiffness = parse_list(a.stiffness)?;
    let text = fs::read_to_string(a.trajectory).map_err(|source| CliError::Io {
        path: a.trajectory.to_path_buf(),
        source,
    })?;
    let traj = Trajectory::from_csv(&text)?;
    let scene = Scene::load(a.scene)?;
    let config = resolve_config(a.config, a.set, None, None, a.seed)?;
    for &s in &stiffness {
        FollowerConfig {
            stiffness: s,
            ..config.follower.clone()
        }
        .validate()?;
    }
    ensure_dir(a.out)?;
    let manifest = json!({
        "command": "evaluate",
        "trajectory": a.trajectory.display().to_string(),
        "scene": a.scene.display().to_string(),
        "stiffness": stiffness,
        "seed": config.planner.seed,
        "config": config.to_json(),
    });
    let mut rows: Vec<(f64, DynamicsMetrics)> = Vec::new();
    let mut errors = Vec::new();
    let mut accels = Vec::new();
    for &s in &stiffness {
        let follower = FollowerConfig {
            stiffness: s,
            ..config.follower.clone()
        };
        let log = follow(&traj, &follower, Some(&scene))?;
        let m = dynamics_metrics(&log, &traj, &DEFAULT_BINS)?;
        write(&a.out.join(format!("drive_s{s}.csv")), &csv_with_manifest(&manifest, &log.to_csv()))?;
        errors.push((format!("s = {s}"), log.samples.iter().map(|x| (x.t, x.error)).collect()));
        accels.push((format!("s = {s}"), log.samples.iter().map(|x| (x.t, x.a_long)).collect()));
        rows.push((s, m));
    }
    let table: Vec<Value> = rows.iter().map(|(s, m)| with(json!({ "stiffness": s }), serde_json::to_value(m).expect("metrics serialize"))).collect();
    let out = with(manifest.clone(), json!({ "results": table }));
    write(&a.out.join("metrics.json"), &pretty(&out))?;
    let meta = manifest.to_string();
    write(&a.out.join("error.svg"), &series_svg("Following error", "t [s]", "error [m]", &errors, &meta))?;
    write(&a.out.join("accel.svg"), &series_svg("Longitudinal acceleration", "t [s]", "a_long [m/s^2]", &accels, &meta))?;
    Ok(out)
}

/// Per-cell weights: w_time/w_vel = ratio at the base geometric mean.
pub fn sweep_weights(base: &crate::losses::LossWeights, ratio: f64) -> crate::losses::LossWeights {
    let g = (base.w_time * base.w_vel).sqrt();
    crate::losses::LossWeights {
        w_time: g * ratio.sqrt(),
        w_vel: g / ratio.sqrt(),
        ..*base
    }
}

/// One planning run of a sweep cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRun {
    pub seed: u64,
    pub report: Option<TrajectoryReport>,
    pub error: Option<String>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

/// Cell means over the successful runs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepMeans {
    pub normalized_curvature: f64,
    pub max_rel_delta: f64,
    pub dt_variance: f64,
    pub clustering_index: f64,
    pub cusps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub ratio: f64,
    pub weights: crate::losses::LossWeights,
    pub runs: Vec<SweepRun>,
    pub mean: Option<SweepMeans>,
}

fn means(runs: &[SweepRun]) -> Option<SweepMeans> {
    let ok: Vec<&TrajectoryReport> = runs.iter().filter_map(|r| r.report.as_ref()).collect();
    if ok.is_empty() {
        return None;
    }
    let n = ok.len() as f64;
    let avg = |f: fn(&TrajectoryReport) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n;
    Some(SweepMeans {
        normalized_curvature: avg(|r| r.normalized_curvature),
        max_rel_delta: avg(|r| r.max_rel_delta),
        dt_variance: avg(|r| r.dt_variance),
        clustering_index: avg(|r| r.clustering_index),
        cusps: avg(|r| r.cusps as f64),
    })
}

/// Plans every `(ratio, repeat)` pair in parallel. Cell `i`, repeat `r`
/// uses seed `base.seed + i + r·cells`, so the first repeat of each cell
/// uses `base.seed + i`.
pub fn run_sweep(scene: &Scene, start: Pose, goal: Pose, base: &crate::optimizer::PlannerConfig, ratios: &[f64], repeats: usize) -> Vec<SweepCell> {
    let cells = ratios.len();
    let jobs: Vec<(usize, usize)> = (0..repeats).flat_map(|r| (0..cells).map(move |i| (i, r))).collect();
    let mut runs: Vec<(usize, usize, SweepRun)> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let seed = base.seed.wrapping_add((i + r * cells) as u64);
            let cfg = crate::optimizer::PlannerConfig {
                weights: sweep_weights(&base.weights, ratios[i]),
                seed,
                ..base.clone()
            };
            let run = match plan(scene, start, goal, &cfg) {
                Ok(p) => SweepRun {
                    seed,
                    report: Some(trajectory_report(scene, &p.trajectory, cfg.v_e)),
                    error: None,
                    trajectory: Some(p.trajectory),
                },
                Err(e) => SweepRun {
                    seed,
                    report: None,
                    error: Some(e.to_string()),
                    trajectory: None,
                },
            };
            (i, r, run)
        })
        .collect();
    runs.sort_by_key(|&(i, r, _)| (i, r));
    let mut out: Vec<SweepCell> = ratios
        .iter()
        .map(|&ratio| SweepCell {
            ratio,
            weights: sweep_weights(&base.weights, ratio),
            runs: Vec::new(),
            mean: None,
        })
        .collect();
    for (i, _, run) in runs {
        out[i].runs.push(run);
    }
    for cell in &mut out {
        cell.mean = means(&cell.runs);
    }
    out
}

pub fn cmd_sweep(args: &PlanArgs, grid: &str, repeats: usize) -> Result<Value, CliError> {
    let ratios = parse_list(grid)?;
    if ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(CliError::Invalid("ratios must be positive".into()));
    }
    if repeats == 0 {
        return Err(CliError::Invalid("repeats must be at least 1".into()));
    }
    let job = Job::from_args(args)?;
    ensure_dir(&job.out)?;
    let manifest = with(job.manifest("sweep"), json!({ "grid": ratios, "repeats": repeats }));
    let cells = run_sweep(&job.scene, job.start, job.goal, &job.config.planner, &ratios, repeats);
    let mut csv = String::from("ratio,seed,w_time,w_vel,normalized_curvature,max_rel_delta,dt_variance,clustering_index,cusps,collision_free,error\n");
    for (i, cell) in cells.iter().enumerate() {
        let w = &cell.weights;
        for (r, run) in cell.runs.iter().enumerate() {
            match (&run.report, &run.trajectory) {
                (Some(rep), Some(traj)) => {
                    if r == 0 {
                        let meta = with(manifest.clone(), json!({ "seed": run.seed, "ratio": cell.ratio }));
                        write(&job.out.join(format!("cell{i}_trajectory.csv")), &csv_with_manifest(&meta, &traj.to_csv()))?;
                    }
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{},\n",
                        cell.ratio, run.seed, w.w_time, w.w_vel, rep.normalized_curvature, rep.max_rel_delta, rep.dt_variance, rep.clustering_index, rep.cusps, rep.collision_free
                    ));
                }
                _ => csv.push_str(&format!(
                    "{},{},{},{},,,,,,,{}\n",
                    cell.ratio,
                    run.seed,
                    w.w_time,
                    w.w_vel,
                    run.error.as_deref().unwrap_or("").replace(',', ";")
                )),
            }
        }
    }
    let out = with(manifest.clone(), json!({ "cells": cells }));
    write(&job.out.join("sweep.json"), &pretty(&out))?;
    write(&job.out.join("sweep.csv"), &csv_with_manifest(&manifest, &csv))?;
    let columns: Vec<String> = ratios.iter().map(|r| format!("{r}")).collect();
    let metric = |f: fn(&SweepMeans) -> f64| -> Vec<f64> { cells.iter().map(|c| c.mean.as_ref().map_or(f64::NAN, f)).collect() };
    let rows = vec![
        ("normalized curvature".to_string(), metric(|m| m.normalized_curvature)),
        ("max |delta| / v_e dt".to_string(), metric(|m| m.max_rel_delta)),
        ("dt variance".to_string(), metric(|m| m.dt_variance)),
        ("clustering index".to_string(), metric(|m| m.clustering_index)),
    ];
    write(&job.out.join("sweep.svg"), &heatmap_svg("w_time / w_vel sweep (cell means)", &columns, &rows, &manifest.to_string()))?;
    Ok(out)
}

pub fn cmd_compare(args: &PlanArgs) -> Result<Value, CliError> {
    let job = Job::from_args(args)?;
    ensure_dir(&job.out)?;
    let manifest = job.manifest("compare");
    let p = &job.config.planner;
    let dynamic = plan(&job.scene, job.start, job.goal, p)?;
    let replan = plan_replanning_baseline(&job.scene, job.start, job.goal, p)?;
    let rd = trajectory_report(&job.scene, &dynamic.trajectory, p.v_e);
    let rb = trajectory_report(&job.scene, &replan.trajectory, p.v_e);
    plan_artifacts(&job, &manifest, &dynamic, &rd, "dynamic_")?;
    plan_artifacts(&job, &manifest, &replan, &rb, "baseline_")?;
    let flagged = !rb.collision_free || rb.deceleration_proxy > 2.0 * rd.deceleration_proxy;
    let out = with(
        manifest.clone(),
        json!({
            "dynamic": rd,
            "baseline": rb,
            "baseline_flagged": flagged,
            "dynamic_clean": rd.collision_free,
        }),
    );
    write(&job.out.join("compare.json"), &pretty(&out))?;
    let svg = plan_svg(&job.scene, &[("dynamic field", &dynamic.trajectory), ("replanning baseline", &replan.trajectory)], 1.0, &manifest.to_string());
    write(&job.out.join("compare.svg"), &svg)?;
    Ok(out)
}

pub fn run(cli: Cli) -> Result<Value, CliError> {
    match cli.command {
        Command::Plan { common, baseline } => cmd_plan(&common, baseline),
        Command::Evaluate {
            trajectory,
            scene,
            stiffness,
            config,
            set,
            seed,
            out,
        } => cmd_evaluate(&EvaluateArgs {
            trajectory: &trajectory,
            scene: &scene,
            stiffness: &stiffness,
            config: config.as_deref(),
            set: &set,
            seed,
            out: &out,
        }),
        Command::Sweep { common, grid, repeats } => cmd_sweep(&common, &grid, repeats),
        Command::Compare { common } => cmd_compare(&common),
    }
}

/// Parses and runs without printing. Returns the summary or the exit code.
pub fn run_args<I, T>(args: I) -> Result<Value, i32>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| if e.use_stderr() { EXIT_INVALID } else { 0 })?;
    run(cli).map_err(|e| e.exit_code())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { 0 };
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
