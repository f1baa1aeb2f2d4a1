//! M/M/1/L queue with impatient jobs and a controllable service rate.
//!
//! Jobs arrive at rate λ (optionally decaying with queue length), each
//! carries an exponential deadline at rate μ, and the controller picks an
//! integer service speed per queue length, paying a power cost `w(a)` per
//! unit time plus a fixed penalty `C` per missed deadline.
//!
//! The discrete MDP is the uniformized chain at rate `U`: one step per tick,
//! with per-tick expected cost `w(a)/U + C·sμ/U`. Stepping samples the tick
//! category directly and accumulates exact `Exp(U)` tick durations, so the
//! synthesized holding intervals between real events are exponential with
//! the true total rate — exactly what the arrival/deadline rate estimators
//! need.
//!
//! Counterfactual estimation is plug-in: any trajectory identifies λ̂ and μ̂
//! (from the empty-queue and full-buffer holding times), which feed a
//! birth-death stationary distribution and the per-state expected cost for
//! *any* policy. The information order is therefore complete; it is refined
//! to the lexicographic total order on rate vectors so the maximal element
//! of an active set is its lexicographically largest member.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{CostNormalizer, Environment, PolicyParam, Transition, Trajectory};
use crate::order::{OrderError, OrderKind, PolicyOrder};
use crate::rng::StreamRng;

#[derive(Debug, Error, PartialEq)]
pub enum QueueError {
    #[error("absorbing-state: no event has positive rate in state {0}")]
    AbsorbingState(usize),
    #[error("insufficient-coverage: no completed holding interval in state {0}")]
    InsufficientCoverage(usize),
    #[error("non-ergodic: zero transition denominator below a reachable state")]
    NonErgodic,
    #[error("policy coordinate {0} is not an integer service rate within range")]
    BadPolicy(f64),
}

/// Arrival-rate shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalMode {
    /// λ_s = λ·(1 − s/L).
    Decaying,
    /// λ_s = λ for s < L (a full buffer drops arrivals in both modes).
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueParams {
    /// Buffer size L.
    pub buffer: usize,
    pub lambda: f64,
    pub mu: f64,
    pub lambda_max: f64,
    pub mu_max: f64,
    pub a_max: u32,
    /// Power cost per unit time, indexed by service speed (length a_max+1).
    pub power_cost: Vec<f64>,
    /// Penalty per missed deadline.
    pub deadline_penalty: f64,
    pub arrival_mode: ArrivalMode,
    /// Uniformization constant U; must dominate every state's total rate.
    pub uniformization: f64,
}

impl QueueParams {
    /// The textbook uniformization constant λ_max + L·μ_max + A_max.
    pub fn default_uniformization(buffer: usize, lambda_max: f64, mu_max: f64, a_max: u32) -> f64 {
        lambda_max + buffer as f64 * mu_max + a_max as f64
    }

    pub fn validate(&self) -> Result<(), QueueError> {
        assert_eq!(self.power_cost.len(), self.a_max as usize + 1);
        assert!(self.lambda <= self.lambda_max && self.mu <= self.mu_max);
        let worst = self.lambda + self.buffer as f64 * self.mu + self.a_max as f64;
        assert!(
            self.uniformization >= worst - 1e-9,
            "uniformization constant {} below the worst-case total rate {}",
            self.uniformization,
            worst
        );
        Ok(())
    }

    /// State-dependent arrival rate; zero at a full buffer in both modes.
    pub fn arrival_rate(&self, s: usize) -> f64 {
        if s >= self.buffer {
            return 0.0;
        }
        match self.arrival_mode {
            ArrivalMode::Decaying => self.lambda * (1.0 - s as f64 / self.buffer as f64),
            ArrivalMode::Fixed => self.lambda,
        }
    }

    pub fn power(&self, a: u32) -> f64 {
        self.power_cost[a as usize]
    }
}

/// Integer service speeds per queue length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueuePolicy {
    pub rates: Vec<u32>,
}

impl QueuePolicy {
    pub fn from_param(p: &PolicyParam, params: &QueueParams) -> Result<Self, QueueError> {
        let mut rates = Vec::with_capacity(p.dim());
        for &c in p.coords() {
            let r = c.round();
            if (c - r).abs() > 1e-9 || r < 0.0 || r > params.a_max as f64 {
                return Err(QueueError::BadPolicy(c));
            }
            rates.push(r as u32);
        }
        assert_eq!(rates.len(), params.buffer + 1);
        Ok(Self { rates })
    }

    pub fn rate(&self, s: usize) -> u32 {
        self.rates[s]
    }
}

/// What happened at one real jump of the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpEvent {
    Arrival,
    DeadlineMiss,
    ServiceCompletion,
}

/// One completed sojourn in a state, ended by a real event.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub state: usize,
    pub holding_time: f64,
    pub event: JumpEvent,
    pub accrued_cost: f64,
}

/// Competing event rates in a state under a policy: (arrival, deadline,
/// service). Deadlines fire at rate s·μ; service completions at the policy
/// speed, but only when jobs are present.
pub fn event_rates(s: usize, policy: &QueuePolicy, params: &QueueParams) -> (f64, f64, f64) {
    let arr = params.arrival_rate(s);
    let dead = s as f64 * params.mu;
    let srv = if s > 0 { policy.rate(s) as f64 } else { 0.0 };
    (arr, dead, srv)
}

/// Simulate one real jump with competing exponential clocks.
pub fn queue_jump(
    s: usize,
    policy: &QueuePolicy,
    params: &QueueParams,
    rng: &mut StreamRng,
) -> Result<JumpRecord, QueueError> {
    let (arr, dead, srv) = event_rates(s, policy, params);
    let total = arr + dead + srv;
    if total <= 0.0 {
        return Err(QueueError::AbsorbingState(s));
    }
    let holding_time = Exp::new(total).expect("positive rate").sample(rng);
    let u: f64 = rng.gen::<f64>() * total;
    let event = if u < arr {
        JumpEvent::Arrival
    } else if u < arr + dead {
        JumpEvent::DeadlineMiss
    } else {
        JumpEvent::ServiceCompletion
    };
    let accrued_cost = params.power(policy.rate(s)) * holding_time
        + if event == JumpEvent::DeadlineMiss { params.deadline_penalty } else { 0.0 };
    Ok(JumpRecord { state: s, holding_time, event, accrued_cost })
}

/// λ̂ from the empty-queue sojourns, μ̂ from the full-buffer sojourns
/// (whose exit rate is L·μ + θ_L), both clamped to their known bounds.
pub fn estimate_rates(
    jumps: &[JumpRecord],
    policy: &QueuePolicy,
    params: &QueueParams,
) -> Result<(f64, f64), QueueError> {
    let l = params.buffer;
    let (mut n0, mut t0, mut nl, mut tl) = (0u64, 0.0f64, 0u64, 0.0f64);
    for j in jumps {
        if j.state == 0 {
            n0 += 1;
            t0 += j.holding_time;
        } else if j.state == l {
            nl += 1;
            tl += j.holding_time;
        }
    }
    if n0 == 0 {
        return Err(QueueError::InsufficientCoverage(0));
    }
    if nl == 0 {
        return Err(QueueError::InsufficientCoverage(l));
    }
    let lambda_hat = (n0 as f64 / t0).clamp(0.0, params.lambda_max);
    let exit_rate_l = nl as f64 / tl;
    let mu_hat = ((exit_rate_l - policy.rate(l) as f64) / l as f64).clamp(0.0, params.mu_max);
    Ok((lambda_hat, mu_hat))
}

/// Birth-death stationary distribution under the given rates and policy:
/// m(s+1)/m(s) = λ_s / ((s+1)·μ + θ_{s+1}).
pub fn stationary_dist(
    lambda: f64,
    mu: f64,
    policy: &QueuePolicy,
    params: &QueueParams,
) -> Result<Vec<f64>, QueueError> {
    let l = params.buffer;
    let mut weights = vec![0.0f64; l + 1];
    weights[0] = 1.0;
    for s in 0..l {
        let up = match params.arrival_mode {
            ArrivalMode::Decaying => lambda * (1.0 - s as f64 / l as f64),
            ArrivalMode::Fixed => lambda,
        };
        let down = (s + 1) as f64 * mu + policy.rate(s + 1) as f64;
        if up == 0.0 {
            // states above s are unreachable
            continue;
        }
        if down == 0.0 {
            return Err(QueueError::NonErgodic);
        }
        weights[s + 1] = weights[s] * up / down;
    }
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Stationary distribution through the generator matrix: solve m·Q = 0 with
/// Σm = 1 by Gaussian elimination. Kept as the independent oracle for the
/// product form.
#[allow(clippy::needless_range_loop)]
pub fn stationary_dist_generator(
    lambda: f64,
    mu: f64,
    policy: &QueuePolicy,
    params: &QueueParams,
) -> Result<Vec<f64>, QueueError> {
    let n = params.buffer + 1;
    // Build Qᵀ, then replace the last equation with the normalization row.
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for s in 0..n {
        let up = if s < params.buffer {
            match params.arrival_mode {
                ArrivalMode::Decaying => lambda * (1.0 - s as f64 / params.buffer as f64),
                ArrivalMode::Fixed => lambda,
            }
        } else {
            0.0
        };
        let down = if s > 0 { s as f64 * mu + policy.rate(s) as f64 } else { 0.0 };
        // column s of Q scatters into rows of Qᵀ
        if s < params.buffer {
            a[s + 1][s] += up;
        }
        if s > 0 {
            a[s - 1][s] += down;
        }
        a[s][s] -= up + down;
    }
    for col in 0..n {
        a[n - 1][col] = 1.0;
    }
    a[n - 1][n] = 1.0;

    // Gaussian elimination with partial pivoting.
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-14 {
            return Err(QueueError::NonErgodic);
        }
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Expected cost of one uniformized step: w(a)/U + C·sμ/U.
pub fn expected_step_cost(s: usize, a: u32, mu: f64, params: &QueueParams) -> f64 {
    params.power(a) / params.uniformization
        + params.deadline_penalty * s as f64 * mu / params.uniformization
}

/// Plug-in long-run average cost per uniformized step of `policy` under the
/// given (estimated or true) rates. Independent of which policy produced
/// the data the rates came from.
pub fn plugin_gain(
    lambda: f64,
    mu: f64,
    policy: &QueuePolicy,
    params: &QueueParams,
) -> Result<f64, QueueError> {
    let m = stationary_dist(lambda, mu, policy, params)?;
    Ok(m.iter()
        .enumerate()
        .map(|(s, &p)| p * expected_step_cost(s, policy.rate(s), mu, params))
        .sum())
}

/// Per-tick observation: the exact tick duration and what the tick did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickObs {
    pub dt: f64,
    pub event: Option<JumpEvent>,
}

/// The uniformized queue environment. One environment step is one tick of
/// the rate-U clock.
#[derive(Debug, Clone)]
pub struct QueueEnv {
    pub params: QueueParams,
    normalizer: CostNormalizer,
}

impl QueueEnv {
    pub fn new(params: QueueParams) -> Self {
        params.validate().expect("invalid queue parameters");
        let w_max = params
            .power_cost
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        let normalizer = CostNormalizer::from_range(
            0.0,
            params.deadline_penalty + w_max / params.uniformization,
        );
        Self { params, normalizer }
    }

    /// The complete information order over a policy grid (any trajectory
    /// estimates any policy), refined to the lexicographic total order so
    /// antisymmetry holds and the maximal element is unique.
    ///
    /// The estimator works in raw gain units, so the order installs the
    /// matching plug-in radius c_β·L³·sqrt(ln(1/δ)/(α·n_k)) in place of the
    /// default normalized-cost formula.
    pub fn order(
        &self,
        grid: Vec<PolicyParam>,
        t_h_value: u64,
    ) -> PolicyOrder<usize, u32, TickObs> {
        let l = self.params.buffer as f64;
        let params = self.params.clone();
        PolicyOrder::new(
            grid,
            OrderKind::Distributional,
            1.0,
            move |_| t_h_value,
            |a, b| a <= b,
            move |theta, traj| {
                let played = QueuePolicy::from_param(&traj.policy, &params)
                    .map_err(|_| OrderError::NotDominated)?;
                let jumps = jumps_from_ticks(traj, &params);
                let (lh, mh) = match estimate_rates(&jumps, &played, &params) {
                    Ok(r) => r,
                    Err(QueueError::InsufficientCoverage(_)) => {
                        return Err(OrderError::InsufficientCoverage)
                    }
                    Err(_) => return Err(OrderError::NotDominated),
                };
                let target = QueuePolicy::from_param(theta, &params)
                    .map_err(|_| OrderError::NotDominated)?;
                plugin_gain(lh, mh, &target, &params)
                    .map_err(|_| OrderError::InsufficientCoverage)
            },
        )
        .with_known_width(1)
        .with_radius(move |ctx| {
            ctx.c_beta * l.powi(3) * ((1.0 / ctx.delta).ln() / (ctx.alpha * ctx.n_k as f64)).sqrt()
        })
    }
}

/// Fold per-tick records into completed holding intervals between real
/// events. The state (hence the action and its power rate) is constant
/// between real events, so the interval's accrued cost is just
/// `power·holding` plus the deadline penalty when the closing event is a
/// miss. A trailing interval not yet ended by an event is dropped.
pub fn jumps_from_ticks(
    traj: &Trajectory<usize, u32, TickObs>,
    params: &QueueParams,
) -> Vec<JumpRecord> {
    let mut jumps = Vec::new();
    let mut acc = 0.0f64;
    for step in &traj.steps {
        acc += step.observation.dt;
        if let Some(event) = step.observation.event {
            let accrued = params.power(step.action) * acc
                + if event == JumpEvent::DeadlineMiss { params.deadline_penalty } else { 0.0 };
            jumps.push(JumpRecord {
                state: step.state_before,
                holding_time: acc,
                event,
                accrued_cost: accrued,
            });
            acc = 0.0;
        }
    }
    jumps
}

impl Environment for QueueEnv {
    type State = usize;
    type Action = u32;
    type Obs = TickObs;

    fn initial_state(&self) -> usize {
        0
    }

    fn action(&self, theta: &PolicyParam, s: &usize) -> u32 {
        let c = theta.coords()[*s];
        c.round() as u32
    }

    fn step(&self, s: &usize, a: &u32, rng: &mut StreamRng) -> Transition<usize, u32, TickObs> {
        let p = &self.params;
        let u: f64 = rng.gen();
        let dt = Exp::new(p.uniformization).expect("positive rate").sample(rng);
        let arr = p.arrival_rate(*s);
        let dead = *s as f64 * p.mu;
        let srv = if *s > 0 { *a as f64 } else { 0.0 };
        let x = u * p.uniformization;
        let (event, next) = if x < arr {
            (Some(JumpEvent::Arrival), s + 1)
        } else if x < arr + dead {
            (Some(JumpEvent::DeadlineMiss), s - 1)
        } else if x < arr + dead + srv {
            (Some(JumpEvent::ServiceCompletion), s - 1)
        } else {
            (None, *s)
        };
        let miss = event == Some(JumpEvent::DeadlineMiss);
        let reported = p.power(*a) / p.uniformization
            + if miss { p.deadline_penalty } else { 0.0 };
        Transition {
            state_before: *s,
            action: *a,
            observed_cost: self.normalizer.apply(reported),
            reported_cost: reported,
            observation: TickObs { dt, event },
            state_after: next,
        }
    }

    fn restart_param(&self) -> PolicyParam {
        PolicyParam::new(vec![self.params.a_max as f64; self.params.buffer + 1])
    }

    fn span_bound(&self) -> f64 {
        let l = self.params.buffer as f64;
        l * l.ln().max(0.0) + 1.0
    }

    fn order_alpha(&self) -> f64 {
        1.0
    }

    fn t_h_default(&self) -> u64 {
        1
    }

    fn cost_normalizer(&self) -> CostNormalizer {
        self.normalizer
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamKey};

    fn small_params(mode: ArrivalMode) -> QueueParams {
        QueueParams {
            buffer: 2,
            lambda: 6.0,
            mu: 3.0,
            lambda_max: 10.0,
            mu_max: 10.0,
            a_max: 3,
            power_cost: vec![0.0, 1.0, 4.0, 9.0],
            deadline_penalty: 100.0,
            arrival_mode: mode,
            uniformization: 23.0,
        }
    }

    fn policy(rates: &[u32]) -> QueuePolicy {
        QueuePolicy { rates: rates.to_vec() }
    }

    fn rng(seed: u64) -> StreamRng {
        StreamKey::new(seed, 0, 0, 0, Purpose::Explore).rng()
    }

    #[test]
    fn jump_at_empty_queue_is_always_arrival() {
        let p = small_params(ArrivalMode::Fixed);
        let pol = policy(&[3, 3, 3]);
        let mut r = rng(1);
        for _ in 0..200 {
            let j = queue_jump(0, &pol, &p, &mut r).unwrap();
            assert_eq!(j.event, JumpEvent::Arrival);
            assert!(j.holding_time > 0.0);
        }
    }

    #[test]
    fn jump_at_full_buffer_decaying_has_no_arrivals() {
        let p = small_params(ArrivalMode::Decaying);
        let pol = policy(&[0, 0, 3]);
        // P(deadline) = Lμ/(Lμ + θ_L) = 6/9
        let (arr, dead, srv) = event_rates(2, &pol, &p);
        assert_eq!(arr, 0.0);
        assert!((dead / (dead + srv) - 6.0 / 9.0).abs() < 1e-12);
        let mut r = rng(2);
        let n = 40_000;
        let misses = (0..n)
            .filter(|_| queue_jump(2, &pol, &p, &mut r).unwrap().event == JumpEvent::DeadlineMiss)
            .count();
        let freq = misses as f64 / n as f64;
        assert!((freq - 2.0 / 3.0).abs() < 0.01, "miss frequency {freq}");
    }

    #[test]
    fn jump_rate_ratios() {
        // s=1, fixed λ=1, μ=1, θ_1=2 → P(arrival)=1/4, P(deadline)=1/4, P(service)=1/2
        let p = QueueParams {
            buffer: 2,
            lambda: 1.0,
            mu: 1.0,
            lambda_max: 2.0,
            mu_max: 2.0,
            a_max: 2,
            power_cost: vec![0.0, 1.0, 4.0],
            deadline_penalty: 1.0,
            arrival_mode: ArrivalMode::Fixed,
            uniformization: 8.0,
        };
        let pol = policy(&[0, 2, 2]);
        let (arr, dead, srv) = event_rates(1, &pol, &p);
        let total = arr + dead + srv;
        assert!((arr / total - 0.25).abs() < 1e-12);
        assert!((dead / total - 0.25).abs() < 1e-12);
        assert!((srv / total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn estimate_rates_hand_cases() {
        let p = small_params(ArrivalMode::Fixed);
        let pol = policy(&[0, 0, 1]);
        // two state-0 intervals of lengths 0.5 and 1.5 → λ̂ = 1.0
        // three state-L intervals totaling 1.0 → exit rate 3, μ̂ = (3-1)/2 = 1
        let jumps = vec![
            JumpRecord { state: 0, holding_time: 0.5, event: JumpEvent::Arrival, accrued_cost: 0.0 },
            JumpRecord { state: 2, holding_time: 0.25, event: JumpEvent::DeadlineMiss, accrued_cost: 0.0 },
            JumpRecord { state: 0, holding_time: 1.5, event: JumpEvent::Arrival, accrued_cost: 0.0 },
            JumpRecord { state: 2, holding_time: 0.5, event: JumpEvent::ServiceCompletion, accrued_cost: 0.0 },
            JumpRecord { state: 2, holding_time: 0.25, event: JumpEvent::DeadlineMiss, accrued_cost: 0.0 },
        ];
        let (lh, mh) = estimate_rates(&jumps, &pol, &p).unwrap();
        assert!((lh - 1.0).abs() < 1e-12);
        assert!((mh - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_rates_clamps_mu_at_zero() {
        let p = small_params(ArrivalMode::Fixed);
        let pol = policy(&[0, 0, 3]);
        // exit-rate estimate 2 < θ_L = 3 → clamped to 0
        let jumps = vec![
            JumpRecord { state: 0, holding_time: 1.0, event: JumpEvent::Arrival, accrued_cost: 0.0 },
            JumpRecord { state: 2, holding_time: 0.5, event: JumpEvent::ServiceCompletion, accrued_cost: 0.0 },
        ];
        let (_, mh) = estimate_rates(&jumps, &pol, &p).unwrap();
        assert_eq!(mh, 0.0);
    }

    #[test]
    fn estimate_rates_needs_coverage() {
        let p = small_params(ArrivalMode::Fixed);
        let pol = policy(&[0, 0, 1]);
        let only_zero = vec![JumpRecord {
            state: 0,
            holding_time: 1.0,
            event: JumpEvent::Arrival,
            accrued_cost: 0.0,
        }];
        assert!(matches!(
            estimate_rates(&only_zero, &pol, &p),
            Err(QueueError::InsufficientCoverage(2))
        ));
        assert!(matches!(
            estimate_rates(&[], &pol, &p),
            Err(QueueError::InsufficientCoverage(0))
        ));
    }

    #[test]
    fn stationary_point_mass_when_no_arrivals() {
        let p = small_params(ArrivalMode::Fixed);
        let pol = policy(&[1, 1, 1]);
        let m = stationary_dist(0.0, 3.0, &pol, &p).unwrap();
        assert_eq!(m, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn stationary_single_balance_equations() {
        // L=1, fixed λ=1, μ=1: θ_1=0 → (0.5, 0.5); θ_1=1 → (2/3, 1/3)
        let p = QueueParams {
            buffer: 1,
            lambda: 1.0,
            mu: 1.0,
            lambda_max: 2.0,
            mu_max: 2.0,
            a_max: 1,
            power_cost: vec![0.0, 1.0],
            deadline_penalty: 1.0,
            arrival_mode: ArrivalMode::Fixed,
            uniformization: 5.0,
        };
        let m = stationary_dist(1.0, 1.0, &policy(&[0, 0]), &p).unwrap();
        assert!((m[0] - 0.5).abs() < 1e-12 && (m[1] - 0.5).abs() < 1e-12);
        let m = stationary_dist(1.0, 1.0, &policy(&[0, 1]), &p).unwrap();
        assert!((m[0] - 2.0 / 3.0).abs() < 1e-12 && (m[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_product_form_matches_generator_solve() {
        let mut r = rng(3);
        for mode in [ArrivalMode::Fixed, ArrivalMode::Decaying] {
            for _ in 0..50 {
                let p = QueueParams {
                    buffer: 1 + (r.gen::<u64>() % 5) as usize,
                    lambda: 0.5 + 8.0 * r.gen::<f64>(),
                    mu: 0.2 + 6.0 * r.gen::<f64>(),
                    lambda_max: 10.0,
                    mu_max: 10.0,
                    a_max: 3,
                    power_cost: vec![0.0, 1.0, 4.0, 9.0],
                    deadline_penalty: 10.0,
                    arrival_mode: mode,
                    uniformization: 100.0,
                };
                let pol = QueuePolicy {
                    rates: (0..=p.buffer).map(|_| (r.gen::<u64>() % 4) as u32).collect(),
                };
                let a = stationary_dist(p.lambda, p.mu, &pol, &p).unwrap();
                let b = stationary_dist_generator(p.lambda, p.mu, &pol, &p).unwrap();
                let tv: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0;
                assert!(tv <= 1e-10, "TV {tv} for {pol:?}");
            }
        }
    }

    #[test]
    fn expected_step_cost_cases() {
        let mut p = small_params(ArrivalMode::Fixed);
        assert!((expected_step_cost(0, 2, 3.0, &p) - 4.0 / 23.0).abs() < 1e-12);
        p.power_cost = vec![0.0; 4];
        p.deadline_penalty = 0.0;
        assert_eq!(expected_step_cost(2, 3, 3.0, &p), 0.0);
        // U=26 variant
        let p26 = QueueParams { uniformization: 26.0, ..small_params(ArrivalMode::Fixed) };
        let got = expected_step_cost(2, 2, 3.0, &p26);
        assert!((got - (4.0 / 26.0 + 100.0 * 6.0 / 26.0)).abs() < 1e-10);
        assert!((got - 23.2308).abs() < 1e-3);
    }

    #[test]
    fn plugin_gain_zero_cost_model() {
        let mut p = small_params(ArrivalMode::Decaying);
        p.power_cost = vec![0.0; 4];
        p.deadline_penalty = 0.0;
        for rates in [[0, 0, 0], [0, 3, 3], [3, 2, 1]] {
            assert_eq!(plugin_gain(p.lambda, p.mu, &policy(&rates), &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn plugin_gain_l1_composition() {
        let p = QueueParams {
            buffer: 1,
            lambda: 1.0,
            mu: 1.0,
            lambda_max: 2.0,
            mu_max: 2.0,
            a_max: 1,
            power_cost: vec![0.0, 1.0],
            deadline_penalty: 10.0,
            arrival_mode: ArrivalMode::Fixed,
            uniformization: 5.0,
        };
        // θ=(0,1): m=(2/3,1/3); cost(0,0)=0, cost(1,1)=1/5 + 10·1/5
        let g = plugin_gain(1.0, 1.0, &policy(&[0, 1]), &p).unwrap();
        let want = (2.0 / 3.0) * 0.0 + (1.0 / 3.0) * (0.2 + 2.0);
        assert!((g - want).abs() < 1e-12);
    }

    #[test]
    fn tick_sim_time_average_matches_plugin_gain() {
        // Smoke-scale ergodic consistency; the acceptance suite runs the
        // full-length version.
        let p = small_params(ArrivalMode::Decaying);
        let env = QueueEnv::new(p.clone());
        let pol = policy(&[0, 3, 3]);
        let theta = PolicyParam::new(vec![0.0, 3.0, 3.0]);
        let mut r = rng(4);
        let mut s = 0usize;
        let mut total = 0.0;
        let n = 400_000u64;
        for _ in 0..n {
            let a = env.action(&theta, &s);
            let tr = env.step(&s, &a, &mut r);
            total += tr.reported_cost;
            s = tr.state_after;
        }
        let avg = total / n as f64;
        let want = plugin_gain(p.lambda, p.mu, &pol, &p).unwrap();
        assert!(
            (avg - want).abs() / want < 0.05,
            "sim {avg} vs plugin {want}"
        );
    }

    #[test]
    fn holding_times_from_ticks_are_exponential_with_total_rate() {
        // Mean sojourn in state 0 must be 1/λ_0 even though ticks run at U.
        let p = small_params(ArrivalMode::Fixed);
        let env = QueueEnv::new(p.clone());
        let theta = PolicyParam::new(vec![0.0, 3.0, 3.0]);
        let mut r = rng(5);
        let mut traj = Trajectory::new(0usize, theta.clone());
        let mut s = 0usize;
        for _ in 0..300_000 {
            let a = env.action(&theta, &s);
            let tr = env.step(&s, &a, &mut r);
            s = tr.state_after;
            traj.push(tr);
        }
        let jumps = jumps_from_ticks(&traj, &p);
        let zero: Vec<&JumpRecord> = jumps.iter().filter(|j| j.state == 0).collect();
        assert!(zero.len() > 1000);
        let mean: f64 =
            zero.iter().map(|j| j.holding_time).sum::<f64>() / zero.len() as f64;
        assert!((mean - 1.0 / 6.0).abs() < 0.01, "mean sojourn {mean}");
    }

    #[test]
    fn estimator_recovers_rates() {
        let p = small_params(ArrivalMode::Decaying);
        let env = QueueEnv::new(p.clone());
        let theta = PolicyParam::new(vec![0.0, 2.0, 3.0]);
        let pol = QueuePolicy::from_param(&theta, &p).unwrap();
        let mut r = rng(6);
        let mut traj = Trajectory::new(0usize, theta.clone());
        let mut s = 0usize;
        let mut elapsed = 0.0;
        while elapsed < 20_000.0 {
            let a = env.action(&theta, &s);
            let tr = env.step(&s, &a, &mut r);
            elapsed += tr.observation.dt;
            s = tr.state_after;
            traj.push(tr);
        }
        let jumps = jumps_from_ticks(&traj, &p);
        let (lh, mh) = estimate_rates(&jumps, &pol, &p).unwrap();
        assert!((lh - p.lambda).abs() < 0.15, "lambda estimate {lh}");
        assert!((mh - p.mu).abs() < 0.3, "mu estimate {mh}");
    }

    #[test]
    fn order_is_complete_and_width_one() {
        let p = small_params(ArrivalMode::Decaying);
        let env = QueueEnv::new(p.clone());
        let grid: Vec<PolicyParam> = crate::algo::epsilon_net(&[3.0, 3.0, 3.0], 1.0).unwrap();
        assert_eq!(grid.len(), 64);
        let order = env.order(grid.clone(), 1);
        assert_eq!(order.width().unwrap(), 1);
        let maxima = order.maximal_set(&grid).unwrap();
        assert_eq!(maxima, vec![PolicyParam::new(vec![3.0, 3.0, 3.0])]);

        // the plug-in estimate is defined for every (θ', θ) pair
        let theta = PolicyParam::new(vec![1.0, 2.0, 0.0]);
        let mut r = rng(7);
        let mut traj = Trajectory::new(0usize, theta.clone());
        let mut s = 0usize;
        for _ in 0..200_000 {
            let a = env.action(&theta, &s);
            let tr = env.step(&s, &a, &mut r);
            s = tr.state_after;
            traj.push(tr);
        }
        for probe in [[0.0, 0.0, 0.0], [3.0, 3.0, 3.0], [2.0, 0.0, 1.0]] {
            let g = order.estimate(&PolicyParam::new(probe.to_vec()), &traj).unwrap();
            assert!(g.is_finite() && g > 0.0);
        }
    }
}

#[cfg(test)]
mod error_tests {
    use super::*;
    use crate::rng::{Purpose, StreamKey};

    #[test]
    fn jump_from_empty_queue_with_no_arrivals_is_absorbing() {
        let p = QueueParams {
            buffer: 2,
            lambda: 0.0,
            mu: 3.0,
            lambda_max: 10.0,
            mu_max: 10.0,
            a_max: 3,
            power_cost: vec![0.0, 1.0, 4.0, 9.0],
            deadline_penalty: 100.0,
            arrival_mode: ArrivalMode::Fixed,
            uniformization: 23.0,
        };
        let pol = QueuePolicy { rates: vec![3, 3, 3] };
        let mut rng = StreamKey::new(1, 0, 0, 0, Purpose::Explore).rng();
        assert!(matches!(
            queue_jump(0, &pol, &p, &mut rng),
            Err(QueueError::AbsorbingState(0))
        ));
    }

    #[test]
    fn stationary_dist_detects_non_ergodic_chain() {
        let p = QueueParams {
            buffer: 2,
            lambda: 2.0,
            mu: 0.0,
            lambda_max: 10.0,
            mu_max: 10.0,
            a_max: 3,
            power_cost: vec![0.0, 1.0, 4.0, 9.0],
            deadline_penalty: 100.0,
            arrival_mode: ArrivalMode::Fixed,
            uniformization: 23.0,
        };
        // zero service and zero deadline rate below a reachable state
        let pol = QueuePolicy { rates: vec![0, 0, 0] };
        assert_eq!(stationary_dist(2.0, 0.0, &pol, &p), Err(QueueError::NonErgodic));
    }

    #[test]
    fn policy_rejects_fractional_and_out_of_range_rates() {
        let p = QueueParams {
            buffer: 1,
            lambda: 1.0,
            mu: 1.0,
            lambda_max: 2.0,
            mu_max: 2.0,
            a_max: 2,
            power_cost: vec![0.0, 1.0, 4.0],
            deadline_penalty: 1.0,
            arrival_mode: ArrivalMode::Fixed,
            uniformization: 8.0,
        };
        assert!(QueuePolicy::from_param(&PolicyParam::new(vec![0.5, 1.0]), &p).is_err());
        assert!(QueuePolicy::from_param(&PolicyParam::new(vec![3.0, 1.0]), &p).is_err());
        assert!(QueuePolicy::from_param(&PolicyParam::new(vec![2.0, 0.0]), &p).is_ok());
    }
}
