//! dronefleet: train, evaluate, compare and sweep UAV allocation controllers.
//!
//! Exit codes: 0 success, 2 config error, 3 checkpoint error, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dronefleet::controllers::ControllerKind;
use dronefleet::experiment::{
    cmd_compare, cmd_eval, cmd_sweep, cmd_train, write_trace, ExperimentConfig, ExperimentError,
    PATTERNS,
};

#[derive(Parser)]
#[command(
    name = "dronefleet",
    version,
    about = "Dynamic UAV-to-PDC allocation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Without it the named preset is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset arrival pattern when no config is given.
    #[arg(long, default_value = "bernoulli")]
    pattern: String,
    /// Comma-separated seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long, env = "DRONEFLEET_OUT")]
    out: Option<PathBuf>,
    /// Evaluation slots after warm-up.
    #[arg(long)]
    horizon: Option<usize>,
    /// Fleet size override (comma-separated list for `sweep`).
    #[arg(long = "n-uavs", value_delimiter = ',')]
    n_uavs: Option<Vec<usize>>,
    /// Directory of trained networks for the rl controller.
    #[arg(long)]
    checkpoints: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one DDQN agent per PDC for every seed.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training episodes, overriding the config.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evaluate a controller over the evaluation horizon.
    Eval {
        #[command(flatten)]
        common: Common,
        /// static, threshold, ql or rl.
        #[arg(long)]
        controller: Option<ControllerKind>,
        /// Also stream the per-slot trace of the first seed to this CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run controllers on the arrival presets and emit the comparison table.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "static,threshold,ql,rl")]
        controllers: Vec<ControllerKind>,
        #[arg(long, value_delimiter = ',', default_value = "bernoulli,tvb,mmb")]
        patterns: Vec<String>,
    },
    /// Violation versus fleet size (default 30 to 70 in steps of 5).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: Option<ControllerKind>,
    },
}

fn config_error(msg: String) -> anyhow::Error {
    ExperimentError::Config(msg).into()
}

fn load_config(common: &Common, allow_fleet_list: bool) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::preset(&common.pattern).ok_or_else(|| {
            config_error(format!(
                "unknown pattern '{}', expected one of {}",
                common.pattern,
                PATTERNS.join(", ")
            ))
        })?,
    };
    if let Some(seeds) = &common.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(h) = common.horizon {
        cfg.horizon = h;
    }
    if let Some(c) = &common.checkpoints {
        cfg.checkpoints = Some(c.clone());
    }
    if let (false, Some(n)) = (allow_fleet_list, &common.n_uavs) {
        match n.as_slice() {
            [n] => cfg.total_uavs = Some(*n),
            _ => return Err(config_error("--n-uavs takes a single value here".into())),
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, episodes } => {
            let mut cfg = load_config(&common, false)?;
            if let Some(e) = episodes {
                cfg.train.episodes = e;
            }
            let runs = cmd_train(&cfg)?;
            for r in runs {
                if let Some(last) = r.curve.last() {
                    println!(
                        "seed {}: {} episodes, final reward {:.3}, uavs {:.2}, p_max {:.4}",
                        r.seed,
                        r.curve.len(),
                        last.mean_reward,
                        last.mean_uavs,
                        last.max_violation()
                    );
                }
            }
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Eval {
            common,
            controller,
            trace,
        } => {
            let mut cfg = load_config(&common, false)?;
            if let Some(c) = controller {
                cfg.controller = c;
            }
            if let Some(path) = trace {
                let seed = *cfg
                    .seeds
                    .first()
                    .ok_or_else(|| config_error("no seeds given".into()))?;
                write_trace(&cfg, seed, &path).with_context(|| format!("tracing seed {seed}"))?;
            }
            for r in cmd_eval(&cfg)? {
                let m = r.report;
                println!(
                    "seed {}: p_max {:.4}, q {:.2}, w {:.2}, n {:.2}",
                    r.seed, m.p_max, m.q_mean, m.w_mean, m.n_mean
                );
            }
        }
        Command::Compare {
            common,
            controllers,
            patterns,
        } => {
            let cfg = load_config(&common, false)?;
            println!("algorithm,pattern,p_max,q_mean,w_mean,sigma_w,sigma_q,n_mean");
            for row in cmd_compare(&cfg, &controllers, &patterns)? {
                let m = row.metrics.map(|v| format!("{v:.4}"));
                println!("{},{},{}", row.algorithm.name(), row.pattern, m.join(","));
            }
        }
        Command::Sweep { common, controller } => {
            let mut cfg = load_config(&common, true)?;
            if let Some(c) = controller {
                cfg.controller = c;
            }
            let sizes = common
                .n_uavs
                .clone()
                .unwrap_or_else(|| (30..=70).step_by(5).collect());
            for p in cmd_sweep(&cfg, &sizes)? {
                println!(
                    "N {} seed {}: p_max {:.4}, n {:.2}",
                    p.total_uavs, p.seed, p.report.p_max, p.report.n_mean
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<ExperimentError>()
                .map_or(1, ExperimentError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
