//! Command-line benchmark harness.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use iopea::algo;
use iopea::harness::config::ExperimentConfig;
use iopea::harness::oracle::{eval_seeds, grid_optimum};
use iopea::harness::runner::{self, HarnessError};

#[derive(Parser)]
#[command(name = "iopea", about = "Policy-elimination benchmark harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's replicate count.
    #[arg(long)]
    replicates: Option<u32>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the CSV downsampling factor.
    #[arg(long)]
    downsample: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment: all replicates, CSV rows plus a JSON summary.
    Run(CommonOpts),
    /// Run several experiment configs in sequence.
    Sweep {
        /// Experiment config files (TOML), run in order.
        #[arg(long, required = true, num_args = 1..)]
        config: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<u32>,
        #[arg(long)]
        downsample: Option<f64>,
    },
    /// Evaluate the grid optimum for a config and print it.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Override the evaluation horizon.
        #[arg(long)]
        eval_horizon: Option<u64>,
        /// Override the number of evaluation seeds.
        #[arg(long)]
        seeds: Option<u32>,
    },
    /// Report the information-order width for a config's policy grid.
    Width {
        #[arg(long)]
        config: PathBuf,
    },
}

fn apply_overrides(
    mut cfg: ExperimentConfig,
    seed: Option<u64>,
    replicates: Option<u32>,
    downsample: Option<f64>,
) -> ExperimentConfig {
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(r) = replicates {
        cfg.replicates = r;
    }
    if let Some(d) = downsample {
        cfg.downsample_factor = d;
    }
    cfg
}

fn run_one(opts: &CommonOpts) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::load(&opts.config)?;
    let cfg = apply_overrides(cfg, opts.seed, opts.replicates, opts.downsample);
    cfg.validate()?;
    let artifacts = runner::run_experiment(&cfg, &opts.out)?;
    println!(
        "{}: {} on {} | g*={:.4} final={:.4} gap={:.2}% | {} rows -> {}",
        cfg.name,
        artifacts.summary.algorithm,
        artifacts.summary.env,
        artifacts.summary.g_star,
        artifacts.summary.mean_final_gain,
        100.0 * artifacts.summary.relative_gap,
        artifacts.rows.len(),
        artifacts.csv_path.display(),
    );
    Ok(())
}

fn run_oracle(
    config: &Path,
    eval_horizon: Option<u64>,
    seeds: Option<u32>,
) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::load(config)?;
    let icfg = cfg.iopea_config();
    let r = cfg.oracle.grid_r.unwrap_or_else(|| icfg.discretization_radius());
    let grid = algo::epsilon_net(&icfg.box_hi, r)?;
    let horizon = eval_horizon.unwrap_or(cfg.oracle.eval_horizon);
    let seed_list = eval_seeds(cfg.base_seed, seeds.unwrap_or(cfg.oracle.eval_seeds));
    macro_rules! report {
        ($env:expr) => {{
            let (theta, g, se) = grid_optimum(&$env, &grid, horizon, &seed_list);
            println!(
                "grid optimum over {} policies: theta*={} g*={:.6} (se {:.6})",
                grid.len(),
                theta,
                g,
                se
            );
        }};
    }
    match &cfg.env {
        iopea::harness::EnvConfig::Inventory { .. } => {
            report!(cfg.env.build_inventory().expect("inventory config"))
        }
        iopea::harness::EnvConfig::DualSourcing { .. } => {
            report!(cfg.env.build_dual_sourcing().expect("dual sourcing config"))
        }
        iopea::harness::EnvConfig::Queue { .. } => {
            report!(cfg.env.build_queue().expect("queue config"))
        }
    }
    Ok(())
}

fn run_width(config: &Path) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::load(config)?;
    let w = runner::order_width(&cfg)?;
    println!("information-order width on the configured grid: {w}");
    Ok(())
}

fn exit_code_for(err: &HarnessError) -> ExitCode {
    match err {
        HarnessError::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(opts) => run_one(opts),
        Command::Sweep { config, out, seed, replicates, downsample } => {
            let mut res = Ok(());
            for path in config {
                let opts = CommonOpts {
                    config: path.clone(),
                    seed: *seed,
                    replicates: *replicates,
                    out: out.clone(),
                    downsample: *downsample,
                };
                res = run_one(&opts);
                if res.is_err() {
                    break;
                }
            }
            res
        }
        Command::Oracle { config, eval_horizon, seeds } => {
            run_oracle(config, *eval_horizon, *seeds)
        }
        Command::Width { config } => run_width(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
