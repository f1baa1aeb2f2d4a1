//! Environment-agnostic MDP contracts: policy parameters, trajectory
//! recording, regret accounting, and the capability trait every benchmark
//! environment implements.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::StreamRng;

#[derive(Debug, Error, PartialEq)]
pub enum MdpError {
    #[error("empty-trajectory: cannot average costs over zero steps")]
    EmptyTrajectory,
}

/// A point θ in a bounded d-dimensional box, identifying one stationary
/// deterministic policy (base-stock levels, dual-index levels, or integer
/// service rates per queue state).
///
/// Ordering and equality are lexicographic over the raw coordinate bits
/// (`f64::total_cmp`), so grid-generated parameters sort and deduplicate
/// deterministically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyParam {
    coords: Vec<f64>,
}

impl PolicyParam {
    pub fn new(coords: Vec<f64>) -> Self {
        assert!(!coords.is_empty(), "policy parameter must have at least one coordinate");
        assert!(coords.iter().all(|c| c.is_finite()), "policy coordinates must be finite");
        Self { coords }
    }

    pub fn scalar(v: f64) -> Self {
        Self::new(vec![v])
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// First coordinate, for one-dimensional policy classes.
    pub fn as_scalar(&self) -> f64 {
        self.coords[0]
    }

    /// True when every coordinate lies in `[0, hi_d]` for the per-dimension
    /// bounds given.
    pub fn within_box(&self, hi: &[f64]) -> bool {
        self.coords.len() == hi.len()
            && self.coords.iter().zip(hi).all(|(c, h)| *c >= 0.0 && *c <= *h)
    }
}

impl PartialEq for PolicyParam {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PolicyParam {}

impl PartialOrd for PolicyParam {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PolicyParam {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.coords.iter().zip(&other.coords) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.coords.len().cmp(&other.coords.len())
    }
}

impl fmt::Display for PolicyParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|c| format!("{c}")).collect();
        write!(f, "({})", parts.join(";"))
    }
}

/// One recorded environment step.
///
/// Costs travel on two channels: `observed_cost` is the training cost the
/// learner sees (the pseudo-cost for the inventory environments, affinely
/// normalized into `[0,1]`), while `reported_cost` is the true cost used for
/// regret reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S, A, O> {
    pub state_before: S,
    pub action: A,
    pub observed_cost: f64,
    pub reported_cost: f64,
    pub observation: O,
    pub state_after: S,
}

/// The ordered record of one rollout under a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S, A, O> {
    pub start_state: S,
    pub steps: Vec<Transition<S, A, O>>,
    pub policy: PolicyParam,
}

impl<S: Clone + PartialEq + fmt::Debug, A, O> Trajectory<S, A, O> {
    pub fn new(start_state: S, policy: PolicyParam) -> Self {
        Self { start_state, steps: Vec::new(), policy }
    }

    /// Append a step, checking that it chains onto the previous state.
    pub fn push(&mut self, tr: Transition<S, A, O>) {
        let expected = self.steps.last().map(|t| &t.state_after).unwrap_or(&self.start_state);
        debug_assert!(
            tr.state_before == *expected,
            "trajectory discontinuity: expected {:?}, got {:?}",
            expected,
            tr.state_before
        );
        self.steps.push(tr);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Empirical average cost of a trajectory: the plain mean of the observed
/// (training) channel when `use_observed` is set, of the reported (true)
/// channel otherwise.
pub fn empirical_gain<S, A, O>(
    traj: &Trajectory<S, A, O>,
    use_observed: bool,
) -> Result<f64, MdpError> {
    if traj.steps.is_empty() {
        return Err(MdpError::EmptyTrajectory);
    }
    let sum: f64 = traj
        .steps
        .iter()
        .map(|t| if use_observed { t.observed_cost } else { t.reported_cost })
        .sum();
    Ok(sum / traj.steps.len() as f64)
}

/// Cumulative realized cost, timestep counter, and the reference optimal
/// gain used to turn realized cost into regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub total_true_cost: f64,
    pub timesteps: u64,
    /// Gain of the in-class optimum, supplied by the harness oracle.
    pub g_star: f64,
}

impl RegretLedger {
    pub fn new(g_star: f64) -> Self {
        Self { total_true_cost: 0.0, timesteps: 0, g_star }
    }

    /// Record one step: the counter advances by one and the total cost by
    /// exactly the step's reported cost.
    pub fn record_step<S, A, O>(&mut self, tr: &Transition<S, A, O>) {
        self.record_cost(tr.reported_cost);
    }

    pub fn record_cost(&mut self, reported_cost: f64) {
        debug_assert!(reported_cost.is_finite());
        self.total_true_cost += reported_cost;
        self.timesteps += 1;
    }

    /// Realized regret: total true cost minus `timesteps · g_star`.
    pub fn regret(&self) -> f64 {
        self.total_true_cost - self.timesteps as f64 * self.g_star
    }
}

/// Affine map taking raw training costs into `[0,1]`.
///
/// The confidence-radius constants assume unit-bounded costs, so each
/// environment declares the worst-case range of its training cost and the
/// normalizer maps it order-preservingly onto the unit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostNormalizer {
    pub offset: f64,
    pub scale: f64,
}

impl CostNormalizer {
    /// Normalizer for raw costs ranging over `[lo, hi]`.
    pub fn from_range(lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "degenerate cost range [{lo}, {hi}]");
        Self { offset: -lo, scale: 1.0 / (hi - lo) }
    }

    pub fn apply(&self, raw: f64) -> f64 {
        (raw + self.offset) * self.scale
    }
}

/// Capability contract realized by each benchmark environment.
///
/// `step` must draw all of its randomness from the provided stream, one
/// environment step per call, so that replaying the stream replays the
/// episode. The restart policy must drive any reachable state back to
/// `initial_state` in finite expected time.
pub trait Environment {
    type State: Clone + PartialEq + fmt::Debug;
    type Action: Clone + fmt::Debug;
    type Obs: Clone + fmt::Debug;

    /// The fixed starting state s₁.
    fn initial_state(&self) -> Self::State;

    /// Evaluate the policy at a state.
    fn action(&self, theta: &PolicyParam, s: &Self::State) -> Self::Action;

    /// Advance one step.
    fn step(
        &self,
        s: &Self::State,
        a: &Self::Action,
        rng: &mut StreamRng,
    ) -> Transition<Self::State, Self::Action, Self::Obs>;

    /// The restart policy θ_R.
    fn restart_param(&self) -> PolicyParam;

    /// Span bound H on the bias, in normalized training-cost units; feeds
    /// the default confidence radius.
    fn span_bound(&self) -> f64;

    /// Order informativeness factor α ∈ (0,1].
    fn order_alpha(&self) -> f64;

    /// Practical horizon threshold T_h(δ) for the information order.
    fn t_h_default(&self) -> u64;

    /// Map from raw training cost to the normalized `[0,1]` scale.
    fn cost_normalizer(&self) -> CostNormalizer;

    /// Informational bound on the expected restart time. Appears only in
    /// regret constants, never consumed at runtime.
    fn restart_time_hint(&self) -> Option<f64> {
        None
    }

    /// Informational Lipschitz constant of the gain in θ. Never consumed at
    /// runtime.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }
}

/// Roll a fixed policy forward `n` steps from `start`, returning the
/// recorded trajectory.
pub fn rollout<E: Environment>(
    env: &E,
    theta: &PolicyParam,
    start: E::State,
    n: u64,
    rng: &mut StreamRng,
) -> Trajectory<E::State, E::Action, E::Obs> {
    let mut state = start.clone();
    let mut traj = Trajectory::new(start, theta.clone());
    for _ in 0..n {
        let a = env.action(theta, &state);
        let tr = env.step(&state, &a, rng);
        state = tr.state_after.clone();
        traj.push(tr);
    }
    traj
}
