//! Lost-sales dual-sourcing inventory: a cheap regular channel with lead
//! time `L_r` and an expensive expedited channel with lead time `L_e < L_r`.
//!
//! Dual index policies carry two order-up-to levels: `z_e` for the expedited
//! inventory position and `z_r` for the total position. No exact replay
//! exists here; instead, steps where the post-arrival available stock equals
//! `z_r` censor demand at exactly `z_r`, so the sales recorded at those
//! *hitting times* form valid demand samples for any policy whose total
//! level is at most `z_r`. The estimator simulates the lower policy on the
//! first `ceil(α·T)` such samples (and returns 0 when too few exist).
//!
//! With `L_e = 0` (the reduction used by all shipped configurations) the
//! expedited order placed in a period is available in that same period and
//! the expedited pipeline is empty.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::DemandModel;
use crate::env::SaleObservation;
use crate::mdp::{CostNormalizer, Environment, PolicyParam, Transition, Trajectory};
use crate::order::{OrderError, OrderKind, PolicyOrder};
use crate::rng::StreamRng;

/// Tolerance for recognizing "available stock equals z_r" through float
/// arithmetic.
const HIT_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DsError {
    #[error("negative input: {0}")]
    NegativeInput(&'static str),
}

/// On-hand inventory plus both pipelines, oldest order first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsState {
    pub on_hand: f64,
    pub regular: Vec<f64>,
    pub expedited: Vec<f64>,
}

impl DsState {
    pub fn initial(l_r: usize, l_e: usize) -> Self {
        Self { on_hand: 0.0, regular: vec![0.0; l_r], expedited: vec![0.0; l_e] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsParams {
    pub lead_time_regular: usize,
    pub lead_time_expedited: usize,
    pub holding: f64,
    pub lost_sales: f64,
    pub cost_regular: f64,
    pub cost_expedited: f64,
    pub demand: DemandModel,
    /// Upper end of the (z_e, z_r) policy box per coordinate.
    pub policy_box: f64,
}

impl DsParams {
    pub fn normalizer(&self) -> CostNormalizer {
        // Pseudo-costs range over [-p·U_d, h·z_max + (c_r+c_e)·U_d-order scale].
        let hi = self.holding * self.policy_box
            + (self.cost_regular + self.cost_expedited) * self.policy_box;
        CostNormalizer::from_range(-self.lost_sales * self.demand.support, hi)
    }

    /// Order informativeness factor α = (1−γ)/2 · γ^{L_r}.
    pub fn alpha(&self) -> f64 {
        ds_alpha(self.demand.gamma, self.lead_time_regular)
    }
}

/// α = (1−γ)/2 · γ^{L_r}: the guaranteed asymptotic fraction of steps whose
/// sales are usable demand samples.
pub fn ds_alpha(gamma: f64, lead_time_regular: usize) -> f64 {
    assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0,1)");
    (1.0 - gamma) / 2.0 * gamma.powi(lead_time_regular as i32)
}

/// Dual index policy levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualIndexParam {
    pub z_e: f64,
    pub z_r: f64,
}

impl DualIndexParam {
    pub fn from_param(p: &PolicyParam) -> Self {
        assert_eq!(p.dim(), 2, "dual index parameters are two-dimensional");
        Self { z_e: p.coords()[0], z_r: p.coords()[1] }
    }
}

/// One transition under known orders and demand. Both pipelines shift; the
/// oldest entry of each (or the fresh order itself when the lead time is
/// zero) arrives before demand strikes.
pub fn ds_step(
    s: &DsState,
    q_r: f64,
    q_e: f64,
    demand: f64,
    params: &DsParams,
) -> Result<(DsState, f64, f64, SaleObservation), DsError> {
    if q_r < 0.0 || q_e < 0.0 {
        return Err(DsError::NegativeInput("order quantity"));
    }
    if demand < 0.0 {
        return Err(DsError::NegativeInput("demand"));
    }
    let arriving_r = if params.lead_time_regular == 0 { q_r } else { s.regular[0] };
    let arriving_e = if params.lead_time_expedited == 0 { q_e } else { s.expedited[0] };
    let available = s.on_hand + arriving_r + arriving_e;
    let sale = available.min(demand);
    let censored = demand >= available;
    let on_hand = available - sale;
    let mut regular = Vec::with_capacity(params.lead_time_regular);
    if params.lead_time_regular > 0 {
        regular.extend_from_slice(&s.regular[1..]);
        regular.push(q_r);
    }
    let mut expedited = Vec::with_capacity(params.lead_time_expedited);
    if params.lead_time_expedited > 0 {
        expedited.extend_from_slice(&s.expedited[1..]);
        expedited.push(q_e);
    }
    let true_cost = params.holding * (available - demand).max(0.0)
        + params.lost_sales * (demand - available).max(0.0)
        + params.cost_regular * q_r
        + params.cost_expedited * q_e;
    let pseudo_cost = true_cost - params.lost_sales * demand;
    Ok((
        DsState { on_hand, regular, expedited },
        true_cost,
        pseudo_cost,
        SaleObservation { sale, censored },
    ))
}

/// Dual index orders: first bring the expedited position (on-hand, expedited
/// pipeline, and the tail of the regular pipeline arriving within `L_e`
/// periods) up to `z_e`, then top the total position up to `z_r` with a
/// regular order.
pub fn dual_index_action(theta: DualIndexParam, s: &DsState, params: &DsParams) -> (f64, f64) {
    let l_e = params.lead_time_expedited;
    let expedited_pipeline: f64 = s.expedited.iter().sum();
    let regular_tail: f64 = s.regular.iter().take(l_e + 1).sum();
    let expedited_position = s.on_hand + expedited_pipeline + regular_tail;
    let q_e = (theta.z_e - expedited_position).max(0.0);
    let total_position =
        s.on_hand + expedited_pipeline + s.regular.iter().sum::<f64>() + q_e;
    let q_r = (theta.z_r - total_position).max(0.0);
    (q_e, q_r)
}

fn available_stock(step: &Transition<DsState, (f64, f64), SaleObservation>) -> f64 {
    step.state_after.on_hand + step.observation.sale
}

/// Indices (0-based) of the steps whose post-arrival available stock equals
/// `z_r`: exactly the steps where demand is censored at level `z_r`.
pub fn hitting_indices(
    traj: &Trajectory<DsState, (f64, f64), SaleObservation>,
    z_r: f64,
) -> Vec<usize> {
    traj.steps
        .iter()
        .enumerate()
        .filter(|(_, step)| (available_stock(step) - z_r).abs() <= HIT_EPS * z_r.max(1.0))
        .map(|(i, _)| i)
        .collect()
}

/// The hitting-time counterfactual estimate of a dominated policy's
/// pseudo-cost gain: take the sales at the first `ceil(α·T)` hitting times
/// as a demand stream, simulate `θ'` on it from the initial state, and
/// average; return 0 when too few hitting times exist.
pub fn ds_counterfactual(
    theta_prime: DualIndexParam,
    traj: &Trajectory<DsState, (f64, f64), SaleObservation>,
    alpha: f64,
    params: &DsParams,
) -> Result<f64, OrderError> {
    let theta = DualIndexParam::from_param(&traj.policy);
    if theta_prime.z_r > theta.z_r + HIT_EPS {
        return Err(OrderError::NotDominated);
    }
    let horizon = traj.steps.len();
    let needed = (alpha * horizon as f64).ceil() as usize;
    let hits = hitting_indices(traj, theta.z_r);
    if hits.len() < needed || needed == 0 {
        return Ok(0.0);
    }
    let demands: Vec<f64> =
        hits[..needed].iter().map(|&i| traj.steps[i].observation.sale).collect();
    let mut s = DsState::initial(params.lead_time_regular, params.lead_time_expedited);
    let mut sum = 0.0;
    for &d in &demands {
        let (q_e, q_r) = dual_index_action(theta_prime, &s, params);
        let (next, _, pseudo, _) = ds_step(&s, q_r, q_e, d, params)
            .map_err(|_| OrderError::InsufficientCoverage)?;
        sum += pseudo;
        s = next;
    }
    Ok(sum / needed as f64)
}

/// The dual-sourcing environment.
#[derive(Debug, Clone)]
pub struct DualSourceEnv {
    pub params: DsParams,
    normalizer: CostNormalizer,
}

impl DualSourceEnv {
    pub fn new(params: DsParams) -> Self {
        assert!(
            params.lead_time_regular > params.lead_time_expedited,
            "regular lead time must exceed expedited lead time"
        );
        let normalizer = params.normalizer();
        Self { params, normalizer }
    }

    /// The width-one information order over a dual-index grid.
    ///
    /// The underlying guarantee relates policies whenever `z_r' ≤ z_r`, which
    /// is only a preorder (equal `z_r`, different `z_e` would be mutually
    /// dominated); ties are refined lexicographically by `z_e` to keep the
    /// relation antisymmetric. The estimator is unaffected: it only needs
    /// `z_r' ≤ z_r`.
    pub fn order(
        &self,
        grid: Vec<PolicyParam>,
        t_h_value: u64,
    ) -> PolicyOrder<DsState, (f64, f64), SaleObservation> {
        let params = self.params.clone();
        let normalizer = self.normalizer;
        let alpha = params.alpha();
        PolicyOrder::new(
            grid,
            OrderKind::Distributional,
            alpha,
            move |_| t_h_value,
            |a, b| {
                let (a, b) = (DualIndexParam::from_param(a), DualIndexParam::from_param(b));
                a.z_r < b.z_r || (a.z_r == b.z_r && a.z_e <= b.z_e)
            },
            move |theta, traj| {
                ds_counterfactual(DualIndexParam::from_param(theta), traj, alpha, &params)
                    .map(|raw| normalizer.apply(raw))
            },
        )
        .with_known_width(1)
    }
}

impl Environment for DualSourceEnv {
    type State = DsState;
    type Action = (f64, f64); // (q_e, q_r)
    type Obs = SaleObservation;

    fn initial_state(&self) -> DsState {
        DsState::initial(self.params.lead_time_regular, self.params.lead_time_expedited)
    }

    fn action(&self, theta: &PolicyParam, s: &DsState) -> (f64, f64) {
        dual_index_action(DualIndexParam::from_param(theta), s, &self.params)
    }

    fn step(
        &self,
        s: &DsState,
        a: &(f64, f64),
        rng: &mut StreamRng,
    ) -> Transition<DsState, (f64, f64), SaleObservation> {
        let demand = self.params.demand.sample(rng);
        let (q_e, q_r) = *a;
        let (next, true_cost, pseudo, obs) =
            ds_step(s, q_r, q_e, demand, &self.params).expect("nonnegative inputs");
        Transition {
            state_before: s.clone(),
            action: *a,
            observed_cost: self.normalizer.apply(pseudo),
            reported_cost: true_cost,
            observation: obs,
            state_after: next,
        }
    }

    fn restart_param(&self) -> PolicyParam {
        PolicyParam::new(vec![0.0, 0.0])
    }

    fn span_bound(&self) -> f64 {
        // 2/((1−γ)·γ^{L_r}) for unit-bounded costs, already the normalized scale.
        let g = self.params.demand.gamma;
        2.0 / ((1.0 - g) * g.powi(self.params.lead_time_regular as i32))
    }

    fn order_alpha(&self) -> f64 {
        self.params.alpha()
    }

    fn t_h_default(&self) -> u64 {
        50
    }

    fn cost_normalizer(&self) -> CostNormalizer {
        self.normalizer
    }
}
