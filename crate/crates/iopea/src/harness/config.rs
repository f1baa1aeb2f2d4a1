//! Experiment configuration: one human-readable TOML file per experiment,
//! mirroring the benchmark parameter tables.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algo::IopeaConfig;
use crate::demand::{DemandKind, DemandModel};
use crate::env::dualsource::{DsParams, DualSourceEnv};
use crate::env::inventory::{InvParams, InventoryEnv};
use crate::env::queue::{ArrivalMode, QueueEnv, QueueParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    Iopea,
    Random,
    Trivial,
    Erm,
}

impl AlgorithmId {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Iopea => "iopea",
            AlgorithmId::Random => "random",
            AlgorithmId::Trivial => "trivial",
            AlgorithmId::Erm => "erm",
        }
    }
}

/// Environment description, field names following the parameter tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvConfig {
    Inventory {
        lead_time: usize,
        holding_cost: f64,
        lost_sales_penalty: f64,
        prob_zero_demand: f64,
        demand_support: f64,
        demand: DemandKind,
        /// Policy box upper bound; defaults to the demand support.
        policy_box: Option<f64>,
    },
    DualSourcing {
        lead_time_regular: usize,
        lead_time_expedited: usize,
        holding_cost: f64,
        lost_sales_penalty: f64,
        cost_regular: f64,
        cost_expedited: f64,
        prob_zero_demand: f64,
        demand_support: f64,
        demand: DemandKind,
        policy_box: Option<f64>,
    },
    Queue {
        buffer: usize,
        lambda: f64,
        mu: f64,
        lambda_max: f64,
        mu_max: f64,
        a_max: u32,
        /// Power cost per unit time, indexed by service speed.
        power_cost: Vec<f64>,
        deadline_penalty: f64,
        arrival_mode: ArrivalMode,
        /// Uniformization constant; defaults to λ_max + L·μ_max + A_max.
        uniformization: Option<f64>,
    },
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Inventory { .. } => "inventory",
            EnvConfig::DualSourcing { .. } => "dual_sourcing",
            EnvConfig::Queue { .. } => "queue",
        }
    }

    /// Per-dimension policy-box bounds.
    pub fn box_hi(&self) -> Vec<f64> {
        match self {
            EnvConfig::Inventory { demand_support, policy_box, .. } => {
                vec![policy_box.unwrap_or(*demand_support)]
            }
            EnvConfig::DualSourcing { demand_support, policy_box, .. } => {
                let hi = policy_box.unwrap_or(*demand_support);
                vec![hi, hi]
            }
            EnvConfig::Queue { buffer, a_max, .. } => vec![*a_max as f64; buffer + 1],
        }
    }

    pub fn build_inventory(&self) -> Option<InventoryEnv> {
        match self {
            EnvConfig::Inventory {
                lead_time,
                holding_cost,
                lost_sales_penalty,
                prob_zero_demand,
                demand_support,
                demand,
                policy_box,
            } => Some(InventoryEnv::new(InvParams {
                lead_time: *lead_time,
                holding: *holding_cost,
                lost_sales: *lost_sales_penalty,
                demand: DemandModel::new(*prob_zero_demand, *demand_support, *demand),
                policy_box: policy_box.unwrap_or(*demand_support),
            })),
            _ => None,
        }
    }

    pub fn build_dual_sourcing(&self) -> Option<DualSourceEnv> {
        match self {
            EnvConfig::DualSourcing {
                lead_time_regular,
                lead_time_expedited,
                holding_cost,
                lost_sales_penalty,
                cost_regular,
                cost_expedited,
                prob_zero_demand,
                demand_support,
                demand,
                policy_box,
            } => Some(DualSourceEnv::new(DsParams {
                lead_time_regular: *lead_time_regular,
                lead_time_expedited: *lead_time_expedited,
                holding: *holding_cost,
                lost_sales: *lost_sales_penalty,
                cost_regular: *cost_regular,
                cost_expedited: *cost_expedited,
                demand: DemandModel::new(*prob_zero_demand, *demand_support, *demand),
                policy_box: policy_box.unwrap_or(*demand_support),
            })),
            _ => None,
        }
    }

    pub fn build_queue(&self) -> Option<QueueEnv> {
        match self {
            EnvConfig::Queue {
                buffer,
                lambda,
                mu,
                lambda_max,
                mu_max,
                a_max,
                power_cost,
                deadline_penalty,
                arrival_mode,
                uniformization,
            } => Some(QueueEnv::new(QueueParams {
                buffer: *buffer,
                lambda: *lambda,
                mu: *mu,
                lambda_max: *lambda_max,
                mu_max: *mu_max,
                a_max: *a_max,
                power_cost: power_cost.clone(),
                deadline_penalty: *deadline_penalty,
                arrival_mode: *arrival_mode,
                uniformization: uniformization.unwrap_or_else(|| {
                    QueueParams::default_uniformization(*buffer, *lambda_max, *mu_max, *a_max)
                }),
            })),
            _ => None,
        }
    }
}

/// Algorithm tuning block.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct AlgoConfig {
    /// Policy-grid spacing; defaults to T^{-1/2}.
    pub discretization_r: Option<f64>,
    pub delta: Option<f64>,
    pub c_beta: Option<f64>,
    pub span_h: Option<f64>,
    pub alpha: Option<f64>,
    pub t_h: Option<u64>,
    pub restart_cap: Option<u64>,
}

/// Gain-oracle tuning block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleConfig {
    pub eval_horizon: u64,
    pub eval_seeds: u32,
    /// Separate grid spacing for the optimum search; defaults to the
    /// algorithm's grid.
    pub grid_r: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { eval_horizon: 1_000_000, eval_seeds: 20, grid_r: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    pub csv: String,
    pub summary: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { csv: "results.csv".into(), summary: "summary.json".into() }
    }
}

/// One experiment: environment, algorithm, horizon, replication plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub algorithm: AlgorithmId,
    pub horizon: u64,
    pub replicates: u32,
    pub base_seed: u64,
    #[serde(default = "default_downsample")]
    pub downsample_factor: f64,
    pub env: EnvConfig,
    #[serde(default)]
    pub algo: AlgoConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_downsample() -> f64 {
    1.2
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replicates < 1 {
            return Err(ConfigError::Invalid("replicate count must be at least 1".into()));
        }
        if self.horizon < 3 {
            return Err(ConfigError::Invalid("horizon must be at least 3".into()));
        }
        if self.downsample_factor.is_nan() || self.downsample_factor <= 1.0 {
            return Err(ConfigError::Invalid("downsample factor must exceed 1".into()));
        }
        if let Some(r) = self.algo.discretization_r {
            if r.is_nan() || r <= 0.0 {
                return Err(ConfigError::Invalid("discretization radius must be positive".into()));
            }
        }
        if let EnvConfig::Queue { power_cost, a_max, buffer, .. } = &self.env {
            if power_cost.len() != *a_max as usize + 1 {
                return Err(ConfigError::Invalid(format!(
                    "power_cost must list {} entries (a_max + 1)",
                    a_max + 1
                )));
            }
            if *buffer == 0 {
                return Err(ConfigError::Invalid("queue buffer must be positive".into()));
            }
        }
        Ok(())
    }

    /// The algorithm config resolved against this experiment.
    pub fn iopea_config(&self) -> IopeaConfig {
        IopeaConfig {
            horizon: self.horizon,
            delta: self.algo.delta.unwrap_or(0.05),
            r: self.algo.discretization_r,
            span_h: self.algo.span_h,
            alpha: self.algo.alpha,
            t_h_value: self.algo.t_h,
            c_beta: self.algo.c_beta.unwrap_or(1.0),
            box_hi: self.env.box_hi(),
            restart_cap: self.algo.restart_cap,
        }
    }
}
