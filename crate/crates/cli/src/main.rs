//! `irlab`: expert -> demos -> irl -> rl -> eval pipeline runner with
//! tournaments, reward grids, and OFAT hyperparameter sweeps.
//!
//! Exit codes: 0 success, 2 configuration error, 1 runtime failure.

mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use irlab_core::config::{load_config, parse_seeds, ExperimentConfig};
use irlab_core::error::{Error, Result};
use irlab_core::eval::significance;

#[derive(Parser)]
#[command(name = "irlab", version, about = "AIRL / Hybrid-AIRL reward-inference lab")]
struct Cli {
    /// TOML experiment config (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory root (overrides the config's experiment.out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed list, e.g. `0,1,2` or `0..10` (overrides experiment.seeds).
    #[arg(long, global = true)]
    seeds: Option<String>,
    /// Repeatable dotted-path override, e.g. `--set irl.alpha=0.5`.
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,
    /// Parallel seed workers (each seed is an independent run).
    #[arg(long, global = true, default_value_t = 2)]
    workers: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the expert agent on the true env reward (with quality gate).
    Expert,
    /// Record expert demonstrations into demos.jsonl.
    Demos,
    /// Run reward inference (AIRL or Hybrid-AIRL per experiment.algo).
    Irl,
    /// Train an RL agent on the learned reward from the irl stage.
    Rl,
    /// Aggregate curves across seeds and compute per-seed summaries.
    Eval,
    /// Mirrored-deal Leduc tournament between two trained agents.
    Tournament {
        /// Stage directory with per-seed nets (e.g. runs/rl) or `random`.
        #[arg(long)]
        agent_a: String,
        /// Second agent spec, same format.
        #[arg(long)]
        agent_b: String,
        /// Hands per seed (even; deals are mirrored across seat swaps).
        #[arg(long)]
        hands: Option<usize>,
    },
    /// Emit the learned-reward argmax grid over the MountainCar state
    /// space.
    Grid,
    /// One-factor-at-a-time sweep of a hybrid hyperparameter.
    Sweep {
        /// One of: alpha, beta, sigma_start, sigma_end.
        #[arg(long)]
        param: String,
        /// Comma-separated values in [0,1]; defaults per parameter.
        #[arg(long)]
        values: Option<String>,
    },
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = load_config(cli.config.as_deref(), &cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.experiment.out = out.display().to_string();
    }
    if let Some(seeds) = &cli.seeds {
        cfg.experiment.seeds = parse_seeds(seeds)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Fans the per-seed closure out to a bounded worker pool; every seed runs
/// to completion before the first error (if any) is reported.
fn for_each_seed<F>(cfg: &ExperimentConfig, workers: usize, f: F) -> Result<()>
where
    F: Fn(u64) -> Result<()> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let results: Vec<(u64, Result<()>)> = pool.install(|| {
        use rayon::prelude::*;
        cfg.experiment
            .seeds
            .par_iter()
            .map(|&seed| (seed, f(seed)))
            .collect()
    });
    let mut first_err = None;
    for (seed, r) in results {
        if let Err(e) = r {
            eprintln!("seed {seed}: {e}");
            if first_err.is_none() {
                first_err = Some(e);
            }
        }
    }
    match first_err {
        None => Ok(()),
        Some(e) => Err(e),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    match &cli.cmd {
        Cmd::Expert => for_each_seed(&cfg, cli.workers, |s| {
            stages::run_expert(&cfg, s)?;
            println!("expert seed {s}: ok");
            Ok(())
        }),
        Cmd::Demos => for_each_seed(&cfg, cli.workers, |s| {
            stages::run_demos(&cfg, s)?;
            println!("demos seed {s}: ok");
            Ok(())
        }),
        Cmd::Irl => for_each_seed(&cfg, cli.workers, |s| {
            stages::run_irl(&cfg, s)?;
            println!("irl seed {s}: ok");
            Ok(())
        }),
        Cmd::Rl => for_each_seed(&cfg, cli.workers, |s| {
            stages::run_rl(&cfg, s)?;
            println!("rl seed {s}: ok");
            Ok(())
        }),
        Cmd::Eval => {
            for_each_seed(&cfg, cli.workers, |s| {
                let points = stages::run_eval_seed(&cfg, s)?;
                for p in &points {
                    println!("eval seed {s}: {} = {:.3}", p.metric, p.value);
                }
                Ok(())
            })?;
            stages::run_eval_aggregate(&cfg)?;
            println!("eval: aggregated curves written");
            Ok(())
        }
        Cmd::Tournament { agent_a, agent_b, hands } => {
            let hands = hands.unwrap_or(cfg.eval.tournament_hands);
            let payoffs = stages::run_tournament_stage(&cfg, agent_a, agent_b, hands)?;
            for (seed, p) in cfg.experiment.seeds.iter().zip(&payoffs) {
                println!("tournament seed {seed}: {p:+.1} mbb/h");
            }
            if payoffs.len() >= 2 {
                let sig = significance(&payoffs)?;
                println!(
                    "mean {:+.1} mbb/h, stderr {:.1}, p = {:.3e}{}",
                    sig.mean,
                    sig.stderr,
                    sig.p_value,
                    if sig.significant { " (significant at 0.0025)" } else { "" }
                );
            }
            Ok(())
        }
        Cmd::Grid => for_each_seed(&cfg, cli.workers, |s| {
            stages::run_grid(&cfg, s)?;
            println!("grid seed {s}: ok");
            Ok(())
        }),
        Cmd::Sweep { param, values } => {
            let values = match values {
                Some(v) => v
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::config(format!("bad sweep value '{x}'")))
                    })
                    .collect::<Result<Vec<f64>>>()?,
                None => stages::default_sweep_values(param)?,
            };
            for &value in &values {
                let point = stages::sweep_point_config(&cfg, param, value)?;
                println!(
                    "sweep {param} = {value}: irl + rl over {} seeds",
                    point.experiment.seeds.len()
                );
                for_each_seed(&point, cli.workers, |s| {
                    stages::run_irl(&point, s)?;
                    stages::run_rl(&point, s)?;
                    Ok(())
                })?;
                stages::aggregate_sweep_point(&cfg, &point, param, value)?;
            }
            println!("sweep {param}: {} aggregated curves written", values.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
