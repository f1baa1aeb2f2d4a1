//! Experiment orchestration: replicates in parallel, one CSV of downsampled
//! rows plus one JSON summary per experiment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::algo::{self, IopeaConfig, RunKey, StepInfo};
use crate::baselines;
use crate::harness::config::{AlgorithmId, ConfigError, EnvConfig, ExperimentConfig};
use crate::harness::oracle::{eval_seeds, grid_optimum, mean_and_se, oracle_gain};
use crate::harness::report::{
    median, regret_slope, rows_to_csv, Downsampler, ResultRow, Summary,
};
use crate::mdp::{Environment, PolicyParam};
use crate::order::PolicyOrder;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run failed: {0}")]
    Run(#[from] algo::RunError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentArtifacts {
    pub summary: Summary,
    pub rows: Vec<ResultRow>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Run all replicates of an experiment and write its CSV and JSON outputs
/// under `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ExperimentArtifacts, HarnessError> {
    cfg.validate()?;
    let (rows, summary) = match &cfg.env {
        EnvConfig::Inventory { .. } => {
            let env = cfg.env.build_inventory().expect("inventory config");
            execute(&env, |grid| env.order(grid), cfg)?
        }
        EnvConfig::DualSourcing { .. } => {
            let env = cfg.env.build_dual_sourcing().expect("dual sourcing config");
            let icfg = cfg.iopea_config();
            let t_h = icfg.t_h_value.unwrap_or_else(|| env.t_h_default());
            execute(&env, |grid| env.order(grid, t_h), cfg)?
        }
        EnvConfig::Queue { .. } => {
            let env = cfg.env.build_queue().expect("queue config");
            let icfg = cfg.iopea_config();
            let t_h = icfg.t_h_value.unwrap_or_else(|| env.t_h_default());
            execute(&env, |grid| env.order(grid, t_h), cfg)?
        }
    };

    std::fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let csv_path = out_dir.join(&cfg.output.csv);
    let summary_path = out_dir.join(&cfg.output.summary);
    std::fs::write(&csv_path, rows_to_csv(&rows)).map_err(|source| HarnessError::Io {
        path: csv_path.display().to_string(),
        source,
    })?;
    let json = serde_json::to_string_pretty(&summary).expect("serializable summary");
    std::fs::write(&summary_path, json).map_err(|source| HarnessError::Io {
        path: summary_path.display().to_string(),
        source,
    })?;
    Ok(ExperimentArtifacts { summary, rows, csv_path, summary_path })
}

struct ReplicateOutcome {
    samples: Vec<(u64, u32, usize, f64)>,
    final_policy: PolicyParam,
    final_cum_cost: f64,
    trailing_gain: f64,
    degenerate: bool,
}

struct Collector {
    sampler: Downsampler,
    samples: Vec<(u64, u32, usize, f64)>,
    t90: u64,
    cum_at_t90: f64,
}

impl Collector {
    fn new(factor: f64, horizon: u64) -> Self {
        Self {
            sampler: Downsampler::new(factor, horizon),
            samples: Vec::new(),
            t90: ((horizon as f64) * 0.9).ceil() as u64,
            cum_at_t90: 0.0,
        }
    }

    fn observe(&mut self, info: StepInfo) {
        if info.t == self.t90 {
            self.cum_at_t90 = info.cum_true_cost;
        }
        if self.sampler.fire(info.t) {
            self.samples.push((info.t, info.epoch, info.active, info.cum_true_cost));
        }
    }

    fn finish(self, horizon: u64, final_policy: PolicyParam, degenerate: bool) -> ReplicateOutcome {
        let final_cum = self.samples.last().map(|s| s.3).unwrap_or(0.0);
        let window = (horizon - self.t90).max(1) as f64;
        let trailing_gain = (final_cum - self.cum_at_t90) / window;
        ReplicateOutcome {
            samples: self.samples,
            final_policy,
            final_cum_cost: final_cum,
            trailing_gain,
            degenerate,
        }
    }
}

/// Run every replicate of one experiment against a concrete environment.
pub fn execute<E, F>(
    env: &E,
    build_order: F,
    cfg: &ExperimentConfig,
) -> Result<(Vec<ResultRow>, Summary), HarnessError>
where
    E: Environment + Sync,
    E::State: Send,
    F: Fn(Vec<PolicyParam>) -> PolicyOrder<E::State, E::Action, E::Obs> + Sync,
{
    let icfg = cfg.iopea_config();
    let grid = algo::epsilon_net(&icfg.box_hi, icfg.discretization_radius())?;
    if grid.is_empty() {
        return Err(ConfigError::Invalid("policy grid is empty".into()).into());
    }
    let seeds = eval_seeds(cfg.base_seed, cfg.oracle.eval_seeds);

    // Optimum search grid (may be coarser than the learning grid).
    let oracle_grid = match cfg.oracle.grid_r {
        Some(r) => algo::epsilon_net(&icfg.box_hi, r)?,
        None => grid.clone(),
    };
    let (_theta_star, g_star, g_star_se) =
        grid_optimum(env, &oracle_grid, cfg.oracle.eval_horizon, &seeds);

    let outcomes: Vec<Result<ReplicateOutcome, HarnessError>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| run_replicate(env, &build_order, cfg, &icfg, rep, g_star))
        .collect();

    let mut replicates = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        replicates.push(o?);
    }

    // Fresh-rollout evaluation of each committed policy, cached per policy.
    let mut gain_cache: BTreeMap<PolicyParam, f64> = BTreeMap::new();
    for r in &replicates {
        gain_cache.entry(r.final_policy.clone()).or_insert_with(|| {
            oracle_gain(env, &r.final_policy, cfg.oracle.eval_horizon, &seeds).0
        });
    }

    let mut rows = Vec::new();
    let mut final_gains = Vec::new();
    let mut trailing = Vec::new();
    let mut final_regrets = Vec::new();
    let mut slopes = Vec::new();
    for (rep, outcome) in replicates.iter().enumerate() {
        let gain_est = gain_cache[&outcome.final_policy];
        final_gains.push(gain_est);
        trailing.push(outcome.trailing_gain);
        final_regrets.push(outcome.final_cum_cost - cfg.horizon as f64 * g_star);
        let coords = outcome
            .final_policy
            .coords()
            .iter()
            .map(|c| format!("{c}"))
            .collect::<Vec<_>>()
            .join(";");
        let regret_points: Vec<(u64, f64)> = outcome
            .samples
            .iter()
            .map(|&(t, _, _, cum)| (t, cum - t as f64 * g_star))
            .collect();
        if let Ok(s) = regret_slope(&regret_points, cfg.horizon) {
            slopes.push(s);
        }
        for &(t, epoch, active, cum) in &outcome.samples {
            rows.push(ResultRow {
                replicate: rep as u32,
                epoch,
                timestep: t,
                cum_true_cost: cum,
                cum_regret: cum - t as f64 * g_star,
                active_set_size: active,
                policy_coords: coords.clone(),
                gain_estimate: gain_est,
            });
        }
    }

    let (mean_final_gain, final_gain_se) = mean_and_se(&final_gains);
    let (trailing_mean, _) = mean_and_se(&trailing);
    let (mean_final_regret, _) = mean_and_se(&final_regrets);
    let summary = Summary {
        algorithm: cfg.algorithm.name().to_string(),
        env: cfg.env.name().to_string(),
        horizon: cfg.horizon,
        replicates: cfg.replicates,
        base_seed: cfg.base_seed,
        seeds,
        g_star,
        g_star_se,
        mean_final_gain,
        final_gain_se,
        trailing_window_gain: trailing_mean,
        relative_gap: (mean_final_gain - g_star) / g_star,
        mean_final_regret,
        regret_slope_median: median(&mut slopes),
        evaluation_note: "mean_final_gain is a fresh-rollout evaluation of the committed policy; \
                          trailing_window_gain averages the last 10% of the training run"
            .to_string(),
    };
    if replicates.iter().any(|r| r.degenerate) {
        eprintln!(
            "warning: horizon too short for one full first epoch; degenerate runs played the first grid policy throughout"
        );
    }
    Ok((rows, summary))
}

fn run_replicate<E, F>(
    env: &E,
    build_order: &F,
    cfg: &ExperimentConfig,
    icfg: &IopeaConfig,
    rep: u32,
    g_star: f64,
) -> Result<ReplicateOutcome, HarnessError>
where
    E: Environment + Sync,
    F: Fn(Vec<PolicyParam>) -> PolicyOrder<E::State, E::Action, E::Obs> + Sync,
{
    let grid = algo::epsilon_net(&icfg.box_hi, icfg.discretization_radius())?;
    let key = RunKey { seed: cfg.base_seed, replicate: rep };
    let mut collector = Collector::new(cfg.downsample_factor, cfg.horizon);
    let outcome = match cfg.algorithm {
        AlgorithmId::Iopea => {
            let order = build_order(grid);
            let out = algo::run_with_observer(env, &order, icfg, key, g_star, |i| {
                collector.observe(i)
            })?;
            collector.finish(cfg.horizon, out.committed, out.degenerate)
        }
        AlgorithmId::Trivial => {
            let out = baselines::run_trivial_elimination(env, &grid, icfg, key, g_star, |i| {
                collector.observe(i)
            })?;
            collector.finish(cfg.horizon, out.committed, out.degenerate)
        }
        AlgorithmId::Random => {
            let out = baselines::run_random(env, &grid, icfg, key, g_star, |i| {
                collector.observe(i)
            });
            collector.finish(cfg.horizon, out.final_policy, false)
        }
        AlgorithmId::Erm => {
            let out = baselines::run_full_feedback_erm(env, &grid, icfg, key, g_star, |i| {
                collector.observe(i)
            });
            collector.finish(cfg.horizon, out.final_policy, false)
        }
    };
    Ok(outcome)
}

/// Width of the configured environment's information order on its grid.
pub fn order_width(cfg: &ExperimentConfig) -> Result<usize, HarnessError> {
    let icfg = cfg.iopea_config();
    let grid = algo::epsilon_net(&icfg.box_hi, icfg.discretization_radius())?;
    let w = match &cfg.env {
        EnvConfig::Inventory { .. } => {
            let env = cfg.env.build_inventory().expect("inventory config");
            // recompute exactly rather than trusting the declared width
            env.order(grid).with_width_cap(crate::order::DEFAULT_WIDTH_CAP).recompute_width()
        }
        EnvConfig::DualSourcing { .. } => {
            let env = cfg.env.build_dual_sourcing().expect("dual sourcing config");
            let t_h = icfg.t_h_value.unwrap_or_else(|| env.t_h_default());
            env.order(grid, t_h).recompute_width()
        }
        EnvConfig::Queue { .. } => {
            let env = cfg.env.build_queue().expect("queue config");
            let t_h = icfg.t_h_value.unwrap_or_else(|| env.t_h_default());
            env.order(grid, t_h).recompute_width()
        }
    };
    w.map_err(|e| HarnessError::Run(algo::RunError::Order(e)))
}
