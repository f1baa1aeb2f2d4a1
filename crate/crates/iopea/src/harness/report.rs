//! Result rows, CSV/JSON emission, and the regret-shape fit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("degenerate-regret: fewer than {min} usable points with positive regret")]
    DegenerateRegret { min: usize },
}

pub const CSV_HEADER: &str =
    "replicate,epoch,timestep,cum_true_cost,cum_regret,active_set_size,policy_coords,gain_estimate";

/// One downsampled observation of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub replicate: u32,
    pub epoch: u32,
    pub timestep: u64,
    pub cum_true_cost: f64,
    pub cum_regret: f64,
    pub active_set_size: usize,
    /// Coordinates of the replicate's committed policy, ';'-joined.
    pub policy_coords: String,
    /// Fresh-rollout gain estimate of the committed policy.
    pub gain_estimate: f64,
}

impl ResultRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{},{},{:.6}",
            self.replicate,
            self.epoch,
            self.timestep,
            self.cum_true_cost,
            self.cum_regret,
            self.active_set_size,
            self.policy_coords,
            self.gain_estimate
        )
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

/// Geometric timestep sampler: fires at t = 1, then at factor-spaced
/// thresholds, and always at the horizon.
#[derive(Debug, Clone)]
pub struct Downsampler {
    next: u64,
    factor: f64,
    horizon: u64,
}

impl Downsampler {
    pub fn new(factor: f64, horizon: u64) -> Self {
        assert!(factor > 1.0);
        Self { next: 1, factor, horizon }
    }

    /// Whether to emit a row at timestep `t` (1-based), advancing the
    /// schedule when it fires.
    pub fn fire(&mut self, t: u64) -> bool {
        if t == self.horizon {
            return true;
        }
        if t < self.next {
            return false;
        }
        let mut n = self.next.max(1);
        while n <= t {
            n = ((n as f64 * self.factor).ceil() as u64).max(n + 1);
        }
        self.next = n;
        true
    }
}

/// Least-squares slope of log(cumulative regret) against log(t) over the
/// second half of the horizon. Nonpositive regret values are excluded; at
/// least 10 usable points are required.
pub fn regret_slope(points: &[(u64, f64)], horizon: u64) -> Result<f64, ReportError> {
    const MIN_POINTS: usize = 10;
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, r)| *t >= horizon / 2 && *r > 0.0)
        .map(|(t, r)| ((*t as f64).ln(), r.ln()))
        .collect();
    if usable.len() < MIN_POINTS {
        return Err(ReportError::DegenerateRegret { min: MIN_POINTS });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Machine-readable summary of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub env: String,
    pub horizon: u64,
    pub replicates: u32,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    /// Grid-optimum gain and its standard error.
    pub g_star: f64,
    pub g_star_se: f64,
    /// Mean fresh-rollout gain of the committed policies across replicates.
    pub mean_final_gain: f64,
    pub final_gain_se: f64,
    /// Mean realized true-cost average over the trailing 10% of training.
    pub trailing_window_gain: f64,
    /// (mean_final_gain - g_star) / g_star.
    pub relative_gap: f64,
    pub mean_final_regret: f64,
    /// Median log-log regret slope across replicates, when computable.
    pub regret_slope_median: Option<f64>,
    /// Both evaluation protocols are reported because the benchmark tables
    /// do not pin one down: `mean_final_gain` is a fresh-rollout evaluation
    /// of the committed policy and `trailing_window_gain` averages the
    /// tail of the training run itself.
    pub evaluation_note: String,
}

pub fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) })
}
