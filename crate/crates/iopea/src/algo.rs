//! The epoch-based policy elimination algorithm.
//!
//! Each epoch plays only the maximal policies of the surviving set, restarts
//! to the initial state, counterfactually estimates every survivor from the
//! maximal trajectories, and eliminates policies whose estimate exceeds the
//! running minimum by more than twice the epoch's confidence radius.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mdp::{Environment, PolicyParam, RegretLedger, Trajectory};
use crate::order::{OrderError, PolicyOrder, RadiusCtx};
use crate::rng::{Purpose, StreamKey};

type TrajectoryMap<E> = BTreeMap<
    PolicyParam,
    Trajectory<<E as Environment>::State, <E as Environment>::Action, <E as Environment>::Obs>,
>;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("order error: {0}")]
    Order(#[from] OrderError),
    #[error("restart-cap-exceeded: restart policy ran {cap} steps without reaching the initial state")]
    RestartCapExceeded { cap: u64 },
    #[error("ground set does not equal the configured discretization net")]
    GridMismatch,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Tuning surface for one run.
#[derive(Debug, Clone)]
pub struct IopeaConfig {
    /// Total interaction budget T.
    pub horizon: u64,
    /// Confidence level δ.
    pub delta: f64,
    /// Discretization radius; `None` selects T^{-1/2}.
    pub r: Option<f64>,
    /// Span bound override; `None` takes the environment's.
    pub span_h: Option<f64>,
    /// Order factor override; `None` takes the environment's.
    pub alpha: Option<f64>,
    /// Practical horizon-threshold override; `None` takes the environment's.
    pub t_h_value: Option<u64>,
    /// Scale on the confidence radius (1 = the raw theory constant).
    pub c_beta: f64,
    /// Per-dimension upper bounds of the policy box.
    pub box_hi: Vec<f64>,
    /// Cap on each restart phase; `None` selects 10·N₁.
    pub restart_cap: Option<u64>,
}

impl IopeaConfig {
    pub fn new(horizon: u64, delta: f64, box_hi: Vec<f64>) -> Self {
        Self {
            horizon,
            delta,
            r: None,
            span_h: None,
            alpha: None,
            t_h_value: None,
            c_beta: 1.0,
            box_hi,
            restart_cap: None,
        }
    }

    pub fn discretization_radius(&self) -> f64 {
        self.r.unwrap_or_else(|| (self.horizon as f64).powf(-0.5))
    }
}

/// Axis-aligned grid over `[0, hi_d]` with spacing `r` per dimension,
/// including both endpoints (the last cell may be shorter). Every point of
/// the box is within ℓ∞ distance r of some grid point.
pub fn epsilon_net(box_hi: &[f64], r: f64) -> Result<Vec<PolicyParam>, RunError> {
    if r.is_nan() || r <= 0.0 {
        return Err(RunError::InvalidConfig(format!("discretization radius must be positive, got {r}")));
    }
    let axes: Vec<Vec<f64>> = box_hi
        .iter()
        .map(|&hi| {
            assert!(hi >= 0.0, "box bound must be nonnegative");
            let mut axis = Vec::new();
            let mut k = 0u64;
            loop {
                let v = k as f64 * r;
                if v > hi * (1.0 + 1e-12) + 1e-12 {
                    break;
                }
                axis.push(v.min(hi));
                k += 1;
            }
            if *axis.last().unwrap() < hi {
                axis.push(hi);
            }
            axis
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(points.len() * axis.len());
        for p in &points {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }
    Ok(points.into_iter().map(PolicyParam::new).collect())
}

/// Epoch sample count: ceil(4^k · T_h · ln T / α).
pub fn schedule_n_k(k: u32, t_h_value: u64, alpha: f64, horizon: u64) -> u64 {
    debug_assert!(k >= 1);
    debug_assert!(horizon >= 3, "horizon must give ln T >= 1");
    let raw = 4f64.powi(k as i32) * t_h_value as f64 * (horizon as f64).ln() / alpha;
    raw.ceil() as u64
}

/// Default confidence radius:
/// c_β · [ H/(α n_k) + (H+2)·sqrt( 2 ln(4·|grid|·K/δ) / (α n_k) ) ].
pub fn beta_k(
    n_k: u64,
    grid_size: usize,
    cap_k: u32,
    delta: f64,
    c_beta: f64,
    span: f64,
    alpha: f64,
) -> f64 {
    let an = alpha * n_k as f64;
    let log_term = (4.0 * grid_size as f64 * cap_k as f64 / delta).ln();
    c_beta * (span / an + (span + 2.0) * (2.0 * log_term / an).sqrt())
}

/// Survivors of one elimination round: policies whose estimate is within
/// 2β of the minimum (inclusive).
pub fn survivors(estimates: &BTreeMap<PolicyParam, f64>, beta: f64) -> Vec<PolicyParam> {
    let min = estimates.values().fold(f64::INFINITY, |m, &v| m.min(v));
    estimates
        .iter()
        .filter(|(_, &v)| v - min <= 2.0 * beta)
        .map(|(p, _)| p.clone())
        .collect()
}

/// Argmin of the estimates; ties break to the lexicographically smallest
/// parameter (BTreeMap iteration order).
pub fn argmin(estimates: &BTreeMap<PolicyParam, f64>) -> Option<PolicyParam> {
    let mut best: Option<(&PolicyParam, f64)> = None;
    for (p, &v) in estimates {
        match best {
            Some((_, bv)) if v >= bv => {}
            _ => best = Some((p, v)),
        }
    }
    best.map(|(p, _)| p.clone())
}

/// Snapshot of one epoch, after elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSnapshot {
    pub k: u32,
    pub n_k: u64,
    pub beta: f64,
    /// Estimates computed this epoch, in canonical parameter order.
    pub estimates: Vec<(PolicyParam, f64)>,
    /// Surviving set Θ_{k+1}.
    pub surviving: Vec<PolicyParam>,
    /// Budget consumed through the end of this epoch (exploration + restarts).
    pub steps_used: u64,
}

/// Per-step callback payload for downstream recording.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    /// 1-based global step index.
    pub t: u64,
    /// Epoch the step belongs to (commit steps carry the last epoch + 1).
    pub epoch: u32,
    /// Size of the surviving set when the step was taken.
    pub active: usize,
    /// Cumulative true cost including this step.
    pub cum_true_cost: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ledger: RegretLedger,
    pub history: Vec<EpochSnapshot>,
    pub committed: PolicyParam,
    /// Set when the horizon could not fit one full first epoch and the run
    /// fell back to playing the canonical first grid policy throughout.
    pub degenerate: bool,
}

/// Identifies one run for stream derivation.
#[derive(Debug, Clone, Copy)]
pub struct RunKey {
    pub seed: u64,
    pub replicate: u32,
}

/// Execute the full algorithm for exactly `cfg.horizon` environment steps.
pub fn run<E: Environment>(
    env: &E,
    order: &PolicyOrder<E::State, E::Action, E::Obs>,
    cfg: &IopeaConfig,
    key: RunKey,
    g_star: f64,
) -> Result<RunOutput, RunError> {
    run_with_observer(env, order, cfg, key, g_star, |_| {})
}

pub fn run_with_observer<E: Environment>(
    env: &E,
    order: &PolicyOrder<E::State, E::Action, E::Obs>,
    cfg: &IopeaConfig,
    key: RunKey,
    g_star: f64,
    mut observe: impl FnMut(StepInfo),
) -> Result<RunOutput, RunError> {
    let grid = order.ground_set().to_vec();
    let net = epsilon_net(&cfg.box_hi, cfg.discretization_radius())?;
    if grid != net {
        return Err(RunError::GridMismatch);
    }

    let t_total = cfg.horizon;
    let alpha = cfg.alpha.unwrap_or_else(|| env.order_alpha());
    let span = cfg.span_h.unwrap_or_else(|| env.span_bound());
    let t_h = cfg.t_h_value.unwrap_or_else(|| env.t_h_default());
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(RunError::InvalidConfig(format!("alpha must lie in (0,1], got {alpha}")));
    }
    let width = order.width()?;
    let n_1 = schedule_n_k(1, t_h, alpha, t_total);
    let restart_cap = cfg.restart_cap.unwrap_or(10 * n_1);

    // Largest K with sum_{j<=K} w·N_j <= T; feeds the union-bound log term.
    let cap_k = {
        let mut k = 1u32;
        let mut used = 0u64;
        loop {
            let n = schedule_n_k(k, t_h, alpha, t_total);
            let block = n.saturating_mul(width as u64);
            if used.saturating_add(block) > t_total {
                break;
            }
            used += block;
            k += 1;
            if k > 64 {
                break;
            }
        }
        k.saturating_sub(1).max(1)
    };

    let mut ledger = RegretLedger::new(g_star);
    let mut history: Vec<EpochSnapshot> = Vec::new();

    let emit = |ledger: &RegretLedger, epoch: u32, active: usize, observe: &mut dyn FnMut(StepInfo)| {
        observe(StepInfo {
            t: ledger.timesteps,
            epoch,
            active,
            cum_true_cost: ledger.total_true_cost,
        });
    };

    // Degenerate horizon: not even one full first epoch fits.
    if (width as u64) * n_1 > t_total {
        let theta = grid[0].clone();
        let mut rng = StreamKey::new(key.seed, key.replicate, 0, 0, Purpose::Commit).rng();
        let mut state = env.initial_state();
        while ledger.timesteps < t_total {
            let a = env.action(&theta, &state);
            let tr = env.step(&state, &a, &mut rng);
            state = tr.state_after.clone();
            ledger.record_step(&tr);
            emit(&ledger, 1, grid.len(), &mut observe);
        }
        return Ok(RunOutput { ledger, history, committed: theta, degenerate: true });
    }

    let mut active = grid.clone();
    let mut last_estimates: BTreeMap<PolicyParam, f64> = BTreeMap::new();
    let mut k = 1u32;
    let mut state = env.initial_state();
    let restart_param = env.restart_param();

    loop {
        let remaining = t_total - ledger.timesteps;
        if remaining == 0 {
            break;
        }
        let n_k = schedule_n_k(k, t_h, alpha, t_total);
        let maxima = order.maximal_set(&active)?;
        debug_assert!(maxima.len() <= width);

        let mut trajs: TrajectoryMap<E> = BTreeMap::new();
        let mut complete = true;
        for (slot, theta) in maxima.iter().enumerate() {
            let mut rng =
                StreamKey::new(key.seed, key.replicate, k, slot as u32, Purpose::Explore).rng();
            let mut traj = Trajectory::new(state.clone(), theta.clone());
            // Exploration block.
            let mut played = 0u64;
            while played < n_k && ledger.timesteps < t_total {
                let a = env.action(theta, &state);
                let tr = env.step(&state, &a, &mut rng);
                state = tr.state_after.clone();
                ledger.record_step(&tr);
                emit(&ledger, k, active.len(), &mut observe);
                traj.push(tr);
                played += 1;
            }
            if played < n_k {
                complete = false;
                break;
            }
            trajs.insert(theta.clone(), traj);
            // Restart block: drive the system back to the initial state.
            let mut restart_steps = 0u64;
            while state != env.initial_state() && ledger.timesteps < t_total {
                if restart_steps >= restart_cap {
                    return Err(RunError::RestartCapExceeded { cap: restart_cap });
                }
                let a = env.action(&restart_param, &state);
                let tr = env.step(&state, &a, &mut rng);
                state = tr.state_after.clone();
                ledger.record_step(&tr);
                emit(&ledger, k, active.len(), &mut observe);
                restart_steps += 1;
            }
            if state != env.initial_state() {
                complete = false; // horizon expired mid-restart
                break;
            }
        }

        if !complete {
            break;
        }

        // Counterfactual estimates for every survivor via its assigned
        // maximal policy's trajectory.
        let assignment = order.assign_estimators(&active, &maxima)?;
        let mut estimates: BTreeMap<PolicyParam, f64> = BTreeMap::new();
        let mut informative = true;
        for (theta, target) in assignment.iter() {
            let traj = &trajs[target];
            match order.estimate(theta, traj) {
                Ok(v) => {
                    estimates.insert(theta.clone(), v);
                }
                Err(OrderError::InsufficientCoverage) => {
                    // No usable observations this epoch; skip elimination and
                    // let the 4x larger next epoch try again.
                    informative = false;
                    break;
                }
                Err(_) => {
                    return Err(RunError::Order(OrderError::OrderViolated(theta.clone())))
                }
            }
        }

        let ctx = RadiusCtx {
            k,
            n_k,
            grid_size: grid.len(),
            cap_k,
            delta: cfg.delta,
            c_beta: cfg.c_beta,
            span,
            alpha,
        };
        let beta = order
            .radius(&ctx)
            .unwrap_or_else(|| beta_k(n_k, grid.len(), cap_k, cfg.delta, cfg.c_beta, span, alpha));

        if informative {
            let surv = survivors(&estimates, beta);
            debug_assert!(!surv.is_empty());
            last_estimates = estimates.clone();
            active = surv;
        }
        history.push(EpochSnapshot {
            k,
            n_k,
            beta,
            estimates: if informative {
                last_estimates.iter().map(|(p, v)| (p.clone(), *v)).collect()
            } else {
                Vec::new()
            },
            surviving: active.clone(),
            steps_used: ledger.timesteps,
        });
        k += 1;
    }

    // The final epoch runs truncated against the budget, so the loop exits
    // with the horizon already exhausted; the minimum-estimate survivor is
    // the committed answer (and would absorb any remaining steps).
    let committed = argmin(&last_estimates).unwrap_or_else(|| grid[0].clone());
    if ledger.timesteps < t_total {
        let mut rng = StreamKey::new(key.seed, key.replicate, k, 0, Purpose::Commit).rng();
        while ledger.timesteps < t_total {
            let a = env.action(&committed, &state);
            let tr = env.step(&state, &a, &mut rng);
            state = tr.state_after.clone();
            ledger.record_step(&tr);
            emit(&ledger, k, active.len(), &mut observe);
        }
    }

    debug_assert_eq!(ledger.timesteps, t_total);
    Ok(RunOutput { ledger, history, committed, degenerate: false })
}
