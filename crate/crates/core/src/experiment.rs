//! Experiment orchestration: config resolution, training runs, frozen-policy
//! evaluation, fleet-size sweeps and the algorithm comparison grid.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! config.json                  resolved config of the invocation
//! seed_<s>/config.json         same, per run directory
//! seed_<s>/pdc_<d>.json        trained network of PDC d (1-based)
//! seed_<s>/curve.csv           per-episode training curve
//! curve_summary.csv            across-seed mean and standard error
//! report.json, eval.csv        evaluation
//! sweep.csv                    violation versus fleet size
//! compare.csv                  algorithm x pattern grid
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrivals::{ArrivalConfig, ArrivalPattern, PhaseClock};
use crate::controllers::{
    static_allocate, Controller, ControllerKind, EpochView, QueueProportionalController,
    StaticController, ThresholdController,
};
use crate::env::{FleetEnv, Scenario};
use crate::geography::{District, GeoError};
use crate::metrics::{summarize, MetricsReport, RunTrace};
use crate::rlagent::{
    action_delta, argmax, encode_state, train_agents, Checkpoint, CheckpointError, EpisodeStats,
    Mlp, RewardParams, TrainConfig, TrainError, LAYER_SIZES,
};
use crate::rng::derive_seed;
use crate::simcore::{SimError, SlotRecord, TraceWriter};

/// Bernoulli batch probability of the stationary preset.
pub const BERNOULLI_P: f64 = 0.22;

/// Seed index reserved for evaluation runs, disjoint from training episodes.
const EVAL_STREAM: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Geography(#[from] GeoError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

impl ExperimentError {
    /// Process exit code: 2 for config problems, 3 for checkpoint problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Geography(_) => 2,
            ExperimentError::Train(TrainError::Config(_)) => 2,
            ExperimentError::Checkpoint(_) => 3,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Csv {
        path: path.display().to_string(),
        source,
    }
}

/// A district given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistrictSource {
    Path(PathBuf),
    Inline(District),
}

impl Default for DistrictSource {
    fn default() -> Self {
        DistrictSource::Inline(District::synthetic())
    }
}

impl DistrictSource {
    pub fn load(&self) -> Result<District, GeoError> {
        match self {
            DistrictSource::Path(p) => District::load(p),
            DistrictSource::Inline(d) => {
                d.validate()?;
                Ok(d.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub q_ub: Vec<f64>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda: 4.0,
            epsilon: 0.1,
            q_ub: vec![85.0, 80.0, 120.0, 150.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub district: DistrictSource,
    /// Overrides the district's fleet size.
    pub total_uavs: Option<usize>,
    pub arrivals: ArrivalConfig,
    pub controller: ControllerKind,
    /// Slots between action epochs.
    pub update_period_mins: usize,
    /// The queue-proportional baseline re-apportions every this many epochs.
    pub ql_update_epochs: u64,
    pub reward: RewardConfig,
    pub delta: i32,
    /// Starting allocation; population-proportional when absent.
    pub initial_allocation: Option<Vec<usize>>,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    /// Evaluation slots counted in the statistics.
    pub horizon: usize,
    /// Evaluation slots simulated before statistics start.
    pub warmup: usize,
    pub output_dir: PathBuf,
    /// Directory with `seed_<s>/pdc_<d>.json` networks for the RL controller.
    pub checkpoints: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset("bernoulli").expect("known preset")
    }
}

pub const PATTERNS: [&str; 3] = ["bernoulli", "tvb", "mmb"];

impl ExperimentConfig {
    /// The bundled scenario for one arrival type.
    pub fn preset(pattern: &str) -> Option<Self> {
        let (pattern, q_ub) = match pattern {
            "bernoulli" => (
                ArrivalPattern::Bernoulli { p: BERNOULLI_P },
                vec![85.0, 80.0, 120.0, 150.0],
            ),
            "tvb" => (
                ArrivalPattern::Tvb {
                    p_high: 0.9,
                    p_low: 0.1,
                    period_mins: 300,
                },
                vec![120.0, 110.0, 165.0, 200.0],
            ),
            "mmb" => (
                ArrivalPattern::Mmb {
                    p_high: 0.9,
                    p_low: 0.1,
                    p_high_to_low: 0.15,
                    p_low_to_high: 0.15,
                    phase_clock: PhaseClock::Slot,
                },
                vec![120.0, 110.0, 165.0, 200.0],
            ),
            _ => return None,
        };
        Some(Self {
            district: DistrictSource::default(),
            total_uavs: None,
            arrivals: ArrivalConfig {
                pattern,
                truck_interval_mins: 30,
                batch_mean: vec![55, 50, 75, 90],
                batch_half_width: 15,
            },
            controller: ControllerKind::Rl,
            update_period_mins: 60,
            ql_update_epochs: 5,
            reward: RewardConfig {
                q_ub,
                ..RewardConfig::default()
            },
            delta: 5,
            initial_allocation: None,
            train: TrainConfig::default(),
            seeds: vec![1, 2, 3, 4, 5],
            horizon: 100_000,
            warmup: 1000,
            output_dir: PathBuf::from("out"),
            checkpoints: None,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        // district paths are relative to the config file
        if let (DistrictSource::Path(p), Some(dir)) = (&cfg.district, path.parent()) {
            if p.is_relative() {
                cfg.district = DistrictSource::Path(dir.join(p));
            }
        }
        Ok(cfg)
    }

    /// Builds and validates the simulation scenario.
    pub fn scenario(&self) -> Result<Scenario, ExperimentError> {
        let mut district = self.district.load()?;
        if let Some(n) = self.total_uavs {
            district.total_uavs = n;
            district.validate()?;
        }
        let d = district.num_pdcs();
        let cfg = |msg: String| ExperimentError::Config(msg);
        self.arrivals.validate(d).map_err(cfg)?;
        if self.reward.q_ub.len() != d {
            return Err(cfg(format!(
                "q_ub has {} entries for {d} PDCs",
                self.reward.q_ub.len()
            )));
        }
        if self
            .reward
            .q_ub
            .iter()
            .any(|q| !(q.is_finite() && *q > 0.0))
        {
            return Err(cfg("q_ub entries must be positive".into()));
        }
        if self.delta <= 0 {
            return Err(cfg(format!("delta must be positive, got {}", self.delta)));
        }
        if self.ql_update_epochs == 0 {
            return Err(cfg("ql_update_epochs must be at least 1".into()));
        }
        let reward = RewardParams {
            lambda: self.reward.lambda,
            epsilon: self.reward.epsilon,
            period: self.update_period_mins,
        };
        reward.validate().map_err(cfg)?;
        let initial_allocation = match &self.initial_allocation {
            Some(a) => {
                if a.len() != d || a.iter().sum::<usize>() > district.total_uavs {
                    return Err(cfg(format!(
                        "initial_allocation {a:?} does not fit {d} PDCs and {} UAVs",
                        district.total_uavs
                    )));
                }
                a.clone()
            }
            None => static_allocate(&district.populations(), district.total_uavs)
                .map_err(|e| cfg(e.to_string()))?,
        };
        Ok(Scenario {
            district,
            arrivals: self.arrivals.clone(),
            q_ub: self.reward.q_ub.clone(),
            reward,
            delta: self.delta,
            initial_allocation,
        })
    }

    /// The config with the district inlined and every default made explicit,
    /// so that it re-runs identically on its own.
    pub fn resolved(&self) -> Result<Self, ExperimentError> {
        let scenario = self.scenario()?;
        self.train.validate().map_err(ExperimentError::Config)?;
        if self.seeds.is_empty() {
            return Err(ExperimentError::Config("no seeds given".into()));
        }
        Ok(Self {
            district: DistrictSource::Inline(scenario.district),
            total_uavs: None,
            initial_allocation: Some(scenario.initial_allocation),
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn write_config(cfg: &ExperimentConfig, dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).map_err(io_err(&path))
}

/// Greedy policy of trained per-PDC networks.
pub struct PolicyController {
    pub nets: Vec<Mlp>,
    pub delta: i32,
}

impl Controller for PolicyController {
    fn decide(&mut self, view: &EpochView<'_>) -> Vec<i32> {
        self.nets
            .iter()
            .zip(view.states)
            .map(|(net, &(n, q))| {
                action_delta(argmax(&net.forward(&encode_state(n, q))), self.delta)
            })
            .collect()
    }
}

pub fn checkpoint_path(root: &Path, seed: u64, pdc: usize) -> PathBuf {
    root.join(format!("seed_{seed}"))
        .join(format!("pdc_{}.json", pdc + 1))
}

pub fn load_policy(
    root: &Path,
    seed: u64,
    num_pdcs: usize,
    delta: i32,
) -> Result<PolicyController, CheckpointError> {
    let nets = (0..num_pdcs)
        .map(|d| Checkpoint::load_network(&checkpoint_path(root, seed, d), &LAYER_SIZES))
        .collect::<Result<_, _>>()?;
    Ok(PolicyController { nets, delta })
}

pub fn build_controller(
    cfg: &ExperimentConfig,
    kind: ControllerKind,
    scenario: &Scenario,
    seed: u64,
) -> Result<Box<dyn Controller + Send>, ExperimentError> {
    Ok(match kind {
        ControllerKind::Static => Box::new(StaticController),
        ControllerKind::Threshold => Box::new(ThresholdController {
            q_ub: scenario.q_ub.clone(),
            delta: scenario.delta,
        }),
        ControllerKind::Ql => Box::new(QueueProportionalController {
            every: cfg.ql_update_epochs,
        }),
        ControllerKind::Rl => {
            let root = cfg.checkpoints.as_ref().ok_or_else(|| {
                ExperimentError::Config("the rl controller needs a checkpoint directory".into())
            })?;
            Box::new(load_policy(
                root,
                seed,
                scenario.num_pdcs(),
                scenario.delta,
            )?)
        }
    })
}

/// Runs `controller` for `warmup + horizon` slots and summarises the last
/// `horizon`. Every slot, including warm-up, is passed to `on_slot`.
pub fn run_controller_with(
    scenario: &Scenario,
    controller: &mut dyn Controller,
    seed: u64,
    horizon: usize,
    warmup: usize,
    mut on_slot: impl FnMut(&SlotRecord),
) -> Result<MetricsReport, ExperimentError> {
    if horizon == 0 {
        return Err(ExperimentError::Config("horizon must be positive".into()));
    }
    let mut env = FleetEnv::new(scenario, derive_seed(seed, EVAL_STREAM))?;
    let fleet = scenario.district.total_uavs;
    let end = (warmup + horizon) as u64;
    let mut trace = RunTrace::new(scenario.q_ub.clone());
    while env.sim().t() < end {
        let states = env.states();
        let requests = controller.decide(&EpochView {
            epoch: env.epoch(),
            states: &states,
            fleet,
        });
        env.run_epoch(&requests, |rec| {
            if rec.t >= warmup as u64 && rec.t < end {
                trace.record(rec);
            }
            if rec.t < end {
                on_slot(rec);
            }
        })?;
    }
    Ok(summarize(&trace))
}

pub fn run_controller(
    scenario: &Scenario,
    controller: &mut dyn Controller,
    seed: u64,
    horizon: usize,
    warmup: usize,
) -> Result<MetricsReport, ExperimentError> {
    run_controller_with(scenario, controller, seed, horizon, warmup, |_| {})
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub curve: Vec<EpisodeStats>,
}

fn write_curve(
    path: &Path,
    curve: &[EpisodeStats],
    num_pdcs: usize,
) -> Result<(), ExperimentError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<String> = [
        "episode",
        "steps",
        "mean_reward",
        "mean_uavs",
        "epsilon",
        "saturated",
        "p_max",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=num_pdcs).map(|d| format!("violation_{d}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for s in curve {
        let mut row = vec![
            s.episode.to_string(),
            s.steps.to_string(),
            s.mean_reward.to_string(),
            s.mean_uavs.to_string(),
            s.epsilon.to_string(),
            (s.saturated as u8).to_string(),
            s.max_violation().to_string(),
        ];
        row.extend(s.violation.iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_curve_summary(path: &Path, runs: &[SeedRun]) -> Result<(), ExperimentError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record([
        "episode",
        "seeds",
        "reward_mean",
        "reward_stderr",
        "uavs_mean",
        "uavs_stderr",
        "p_max_mean",
        "p_max_stderr",
    ])
    .map_err(csv_err(path))?;
    let episodes = runs.iter().map(|r| r.curve.len()).min().unwrap_or(0);
    for e in 0..episodes {
        let col = |f: &dyn Fn(&EpisodeStats) -> f64| -> Vec<f64> {
            runs.iter().map(|r| f(&r.curve[e])).collect()
        };
        let (rm, rs) = mean_stderr(&col(&|s| s.mean_reward));
        let (um, us) = mean_stderr(&col(&|s| s.mean_uavs));
        let (pm, ps) = mean_stderr(&col(&|s| s.max_violation()));
        w.write_record([
            e.to_string(),
            runs.len().to_string(),
            rm.to_string(),
            rs.to_string(),
            um.to_string(),
            us.to_string(),
            pm.to_string(),
            ps.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Trains one agent group per seed and writes checkpoints and curves.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>, ExperimentError> {
    let cfg = cfg.resolved()?;
    let scenario = cfg.scenario()?;
    write_config(&cfg, &cfg.output_dir)?;
    let echo = serde_json::to_value(&cfg).expect("config serializes");
    let runs: Vec<SeedRun> = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<SeedRun, ExperimentError> {
            let dir = cfg.output_dir.join(format!("seed_{seed}"));
            write_config(&cfg, &dir)?;
            let agents = crate::rlagent::train::new_agents(&scenario, &cfg.train, seed);
            let outcome = train_agents(&scenario, &cfg.train, seed, agents, |s| {
                if s.episode % 10 == 9 {
                    log::info!(
                        "seed {seed} episode {}: reward {:.2}, uavs {:.1}, p_max {:.3}",
                        s.episode + 1,
                        s.mean_reward,
                        s.mean_uavs,
                        s.max_violation()
                    );
                }
            })?;
            for (d, agent) in outcome.agents.iter().enumerate() {
                Checkpoint::from_network(
                    &agent.online,
                    agent.optimizer_steps(),
                    d + 1,
                    seed,
                    echo.clone(),
                )
                .save(&checkpoint_path(&cfg.output_dir, seed, d))?;
            }
            write_curve(&dir.join("curve.csv"), &outcome.curves, scenario.num_pdcs())?;
            Ok(SeedRun {
                seed,
                curve: outcome.curves,
            })
        })
        .collect::<Result<_, _>>()?;
    write_curve_summary(&cfg.output_dir.join("curve_summary.csv"), &runs)?;
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub report: MetricsReport,
}

fn eval_seeds(
    cfg: &ExperimentConfig,
    kind: ControllerKind,
    scenario: &Scenario,
) -> Result<Vec<SeedReport>, ExperimentError> {
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let mut controller = build_controller(cfg, kind, scenario, seed)?;
            let report =
                run_controller(scenario, controller.as_mut(), seed, cfg.horizon, cfg.warmup)?;
            Ok(SeedReport { seed, report })
        })
        .collect()
}

const METRIC_COLUMNS: [&str; 6] = ["p_max", "q_mean", "w_mean", "sigma_w", "sigma_q", "n_mean"];

fn metric_values(r: &MetricsReport) -> [f64; 6] {
    [r.p_max, r.q_mean, r.w_mean, r.sigma_w, r.sigma_q, r.n_mean]
}

/// Seed-averaged metrics in `METRIC_COLUMNS` order.
pub fn average_metrics(reports: &[SeedReport]) -> [f64; 6] {
    let mut sum = [0.0; 6];
    for r in reports {
        for (s, v) in sum.iter_mut().zip(metric_values(&r.report)) {
            *s += v;
        }
    }
    sum.map(|s| s / reports.len().max(1) as f64)
}

/// Evaluates the configured controller on every seed.
pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<Vec<SeedReport>, ExperimentError> {
    let cfg = cfg.resolved()?;
    let scenario = cfg.scenario()?;
    write_config(&cfg, &cfg.output_dir)?;
    let reports = eval_seeds(&cfg, cfg.controller, &scenario)?;

    let path = cfg.output_dir.join("report.json");
    let text = serde_json::to_string_pretty(&reports).expect("report serializes");
    std::fs::write(&path, text).map_err(io_err(&path))?;

    let path = cfg.output_dir.join("eval.csv");
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["algorithm", "pattern", "seed"];
    header.extend(METRIC_COLUMNS);
    w.write_record(&header).map_err(csv_err(&path))?;
    for r in &reports {
        let mut row = vec![
            cfg.controller.name().to_string(),
            cfg.arrivals.pattern.name().to_string(),
            r.seed.to_string(),
        ];
        row.extend(metric_values(&r.report).iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub total_uavs: usize,
    pub seed: u64,
    pub report: MetricsReport,
}

/// Evaluates the configured controller for every fleet size in `sizes`.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    sizes: &[usize],
) -> Result<Vec<SweepPoint>, ExperimentError> {
    if sizes.is_empty() {
        return Err(ExperimentError::Config("no fleet sizes to sweep".into()));
    }
    let base = cfg.resolved()?;
    write_config(&base, &base.output_dir)?;
    let cells: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&n| base.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let points: Vec<SweepPoint> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let cell = ExperimentConfig {
                total_uavs: Some(n),
                initial_allocation: None,
                ..cfg.clone()
            };
            let scenario = cell.scenario()?;
            let mut controller = build_controller(&cell, cell.controller, &scenario, seed)?;
            let report = run_controller(
                &scenario,
                controller.as_mut(),
                seed,
                cell.horizon,
                cell.warmup,
            )?;
            Ok(SweepPoint {
                total_uavs: n,
                seed,
                report,
            })
        })
        .collect::<Result<_, ExperimentError>>()?;

    let path = base.output_dir.join("sweep.csv");
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let d = base.reward.q_ub.len();
    let mut header: Vec<String> = ["total_uavs", "seed", "p_max", "n_mean", "q_mean", "w_mean"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=d).map(|i| format!("violation_{i}")));
    w.write_record(&header).map_err(csv_err(&path))?;
    for p in &points {
        let r = &p.report;
        let mut row = vec![p.total_uavs.to_string(), p.seed.to_string()];
        row.extend(
            [r.p_max, r.n_mean, r.q_mean, r.w_mean]
                .iter()
                .map(f64::to_string),
        );
        row.extend(r.violation.iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub algorithm: ControllerKind,
    pub pattern: String,
    /// Seed-averaged metrics in `METRIC_COLUMNS` order.
    pub metrics: [f64; 6],
}

/// Runs every controller on every arrival preset. RL networks are read from
/// `<checkpoints>/<pattern>/seed_<s>/`.
pub fn cmd_compare(
    cfg: &ExperimentConfig,
    controllers: &[ControllerKind],
    patterns: &[String],
) -> Result<Vec<CompareRow>, ExperimentError> {
    let mut cells = Vec::new();
    for &kind in controllers {
        for pattern in patterns {
            let preset = ExperimentConfig::preset(pattern).ok_or_else(|| {
                ExperimentError::Config(format!("unknown arrival pattern '{pattern}'"))
            })?;
            let cell = ExperimentConfig {
                arrivals: preset.arrivals,
                reward: RewardConfig {
                    q_ub: preset.reward.q_ub,
                    ..cfg.reward.clone()
                },
                controller: kind,
                checkpoints: cfg.checkpoints.as_ref().map(|c| c.join(pattern)),
                ..cfg.clone()
            }
            .resolved()?;
            cells.push((kind, pattern.clone(), cell));
        }
    }
    let out = cells
        .first()
        .map(|c| c.2.output_dir.clone())
        .ok_or_else(|| ExperimentError::Config("nothing to compare".into()))?;
    write_config(&cfg.resolved()?, &out)?;

    let rows: Vec<CompareRow> = cells
        .par_iter()
        .map(|(kind, pattern, cell)| {
            let scenario = cell.scenario()?;
            let reports = eval_seeds(cell, *kind, &scenario)?;
            Ok(CompareRow {
                algorithm: *kind,
                pattern: pattern.clone(),
                metrics: average_metrics(&reports),
            })
        })
        .collect::<Result<_, ExperimentError>>()?;

    let path = out.join("compare.csv");
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["algorithm", "pattern"];
    header.extend(METRIC_COLUMNS);
    w.write_record(&header).map_err(csv_err(&path))?;
    for r in &rows {
        let mut row = vec![r.algorithm.name().to_string(), r.pattern.clone()];
        row.extend(r.metrics.iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(rows)
}

/// Streams the per-slot trace of one evaluation run to CSV.
pub fn write_trace(
    cfg: &ExperimentConfig,
    seed: u64,
    path: &Path,
) -> Result<MetricsReport, ExperimentError> {
    let cfg = cfg.resolved()?;
    let scenario = cfg.scenario()?;
    let mut controller = build_controller(&cfg, cfg.controller, &scenario, seed)?;
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer =
        TraceWriter::new(BufWriter::new(file), scenario.num_pdcs()).map_err(csv_err(path))?;
    let mut failure = None;
    let report = run_controller_with(
        &scenario,
        controller.as_mut(),
        seed,
        cfg.horizon,
        cfg.warmup,
        |rec| {
            if failure.is_none() {
                failure = writer.write(rec).err();
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(csv_err(path)(e));
    }
    writer.flush().map_err(io_err(path))?;
    Ok(report)
}
