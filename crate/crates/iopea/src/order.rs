//! The information order over a finite policy grid.
//!
//! A [`PolicyOrder`] bundles the ground set, the decidable relation
//! `leq(a, b)` ("a trajectory under b estimates a"), and the counterfactual
//! estimator attached to related pairs. On top of it live the generic poset
//! operations: maximal elements of an active subset, exact width via
//! Dilworth's theorem, and the assignment of each active policy to the
//! maximal element that will estimate it.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mdp::{PolicyParam, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum OrderError {
    #[error("unknown-policy: {0} is not in the ground set")]
    UnknownPolicy(PolicyParam),
    #[error("empty-active-set")]
    EmptyActiveSet,
    #[error("poset-too-large: |ground set| = {size} exceeds the exact-width cap {cap}")]
    PosetTooLarge { size: usize, cap: usize },
    #[error("order-violated: {0} is dominated by no maximal element")]
    OrderViolated(PolicyParam),
    #[error("not-dominated: estimator invoked on an unrelated pair")]
    NotDominated,
    #[error("insufficient-coverage: trajectory lacks the observations the estimator needs")]
    InsufficientCoverage,
}

/// Whether the counterfactual estimate is exact on the sample path or only
/// matches in distribution over an α-fraction horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderKind {
    SamplePath,
    Distributional,
}

/// Exact maximum-antichain computation is only attempted up to this many
/// ground-set elements.
pub const DEFAULT_WIDTH_CAP: usize = 10_000;

type Relation = dyn Fn(&PolicyParam, &PolicyParam) -> bool + Send + Sync;
type Estimator<S, A, O> =
    dyn Fn(&PolicyParam, &Trajectory<S, A, O>) -> Result<f64, OrderError> + Send + Sync;
type HorizonThreshold = Box<dyn Fn(f64) -> u64 + Send + Sync>;
type RadiusFn = Box<dyn Fn(&RadiusCtx) -> f64 + Send + Sync>;

/// Inputs to a confidence-radius computation for one epoch.
#[derive(Debug, Clone, Copy)]
pub struct RadiusCtx {
    pub k: u32,
    pub n_k: u64,
    pub grid_size: usize,
    pub cap_k: u32,
    pub delta: f64,
    pub c_beta: f64,
    pub span: f64,
    pub alpha: f64,
}

/// A declarative partial order over a finite policy grid plus the estimator
/// dispatched along it.
pub struct PolicyOrder<S, A, O> {
    ground: Vec<PolicyParam>,
    relation: Box<Relation>,
    estimator: Box<Estimator<S, A, O>>,
    kind: OrderKind,
    alpha: f64,
    t_h: HorizonThreshold,
    known_width: Option<usize>,
    width_cap: usize,
    radius: Option<RadiusFn>,
}

impl<S, A, O> PolicyOrder<S, A, O> {
    /// Build an order. The ground set is sorted and deduplicated so that
    /// "first in canonical order" is well defined. Sample-path orders are
    /// pinned to α = 1 and T_h ≡ 1.
    pub fn new(
        mut ground: Vec<PolicyParam>,
        kind: OrderKind,
        alpha: f64,
        t_h: impl Fn(f64) -> u64 + Send + Sync + 'static,
        relation: impl Fn(&PolicyParam, &PolicyParam) -> bool + Send + Sync + 'static,
        estimator: impl Fn(&PolicyParam, &Trajectory<S, A, O>) -> Result<f64, OrderError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0,1]");
        if kind == OrderKind::SamplePath {
            assert_eq!(alpha, 1.0, "sample-path orders have alpha = 1");
        }
        ground.sort();
        ground.dedup();
        let t_h: HorizonThreshold = match kind {
            OrderKind::SamplePath => Box::new(|_| 1),
            OrderKind::Distributional => Box::new(t_h),
        };
        Self {
            ground,
            relation: Box::new(relation),
            estimator: Box::new(estimator),
            kind,
            alpha,
            t_h,
            known_width: None,
            width_cap: DEFAULT_WIDTH_CAP,
            radius: None,
        }
    }

    /// Install an estimator-specific confidence radius, replacing the
    /// default epoch radius formula.
    pub fn with_radius(
        mut self,
        f: impl Fn(&RadiusCtx) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.radius = Some(Box::new(f));
        self
    }

    /// The estimator-specific radius for one epoch, if installed.
    pub fn radius(&self, ctx: &RadiusCtx) -> Option<f64> {
        self.radius.as_ref().map(|f| f(ctx))
    }

    /// Declare the width up front (the case-study orders are width one by
    /// construction), skipping the exact computation.
    pub fn with_known_width(mut self, w: usize) -> Self {
        self.known_width = Some(w);
        self
    }

    pub fn with_width_cap(mut self, cap: usize) -> Self {
        self.width_cap = cap;
        self
    }

    pub fn ground_set(&self) -> &[PolicyParam] {
        &self.ground
    }

    pub fn kind(&self) -> OrderKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn t_h(&self, delta: f64) -> u64 {
        (self.t_h)(delta)
    }

    /// Decide `a ≼ b` for ground-set members.
    pub fn leq(&self, a: &PolicyParam, b: &PolicyParam) -> Result<bool, OrderError> {
        if !self.ground.binary_search(a).is_ok() {
            return Err(OrderError::UnknownPolicy(a.clone()));
        }
        if !self.ground.binary_search(b).is_ok() {
            return Err(OrderError::UnknownPolicy(b.clone()));
        }
        Ok((self.relation)(a, b))
    }

    /// Estimate the empirical gain of `theta` from a trajectory collected
    /// under a dominating policy.
    pub fn estimate(
        &self,
        theta: &PolicyParam,
        traj: &Trajectory<S, A, O>,
    ) -> Result<f64, OrderError> {
        (self.estimator)(theta, traj)
    }

    /// Maximal elements of `active`: members dominated by no other active
    /// member. The result is an antichain covering all of `active`.
    pub fn maximal_set(&self, active: &[PolicyParam]) -> Result<Vec<PolicyParam>, OrderError> {
        if active.is_empty() {
            return Err(OrderError::EmptyActiveSet);
        }
        for a in active {
            if !self.ground.binary_search(a).is_ok() {
                return Err(OrderError::UnknownPolicy(a.clone()));
            }
        }
        let mut maxima: Vec<PolicyParam> = Vec::new();
        for a in active {
            let dominated = active
                .iter()
                .any(|b| b != a && (self.relation)(a, b));
            if !dominated {
                maxima.push(a.clone());
            }
        }
        maxima.sort();
        Ok(maxima)
    }

    /// Exact width (maximum antichain size) of the order restricted to the
    /// ground set, via minimum chain cover on the strict relation.
    pub fn width(&self) -> Result<usize, OrderError> {
        if let Some(w) = self.known_width {
            return Ok(w);
        }
        self.recompute_width()
    }

    /// Exact width, ignoring any declared value.
    #[allow(clippy::needless_range_loop)]
    pub fn recompute_width(&self) -> Result<usize, OrderError> {
        let n = self.ground.len();
        if n > self.width_cap {
            return Err(OrderError::PosetTooLarge { size: n, cap: self.width_cap });
        }
        let mut strict = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && (self.relation)(&self.ground[i], &self.ground[j]) {
                    strict[i].push(j);
                }
            }
        }
        Ok(n - max_bipartite_matching(&strict, n))
    }

    /// Map every member of `active` to the first maximal element (in the
    /// canonical lexicographic order of `maxima`) that dominates it.
    ///
    /// `maxima` must be the maximal set of `active`; a member dominated by
    /// no maximal element means the relation itself is broken.
    pub fn assign_estimators(
        &self,
        active: &[PolicyParam],
        maxima: &[PolicyParam],
    ) -> Result<EstimatorAssignment, OrderError> {
        let mut map = BTreeMap::new();
        for theta in active {
            let target = maxima
                .iter()
                .find(|m| (self.relation)(theta, m))
                .ok_or_else(|| OrderError::OrderViolated(theta.clone()))?;
            map.insert(theta.clone(), target.clone());
        }
        Ok(EstimatorAssignment { map })
    }
}

/// For each active policy, the maximal element whose trajectory estimates it.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorAssignment {
    map: BTreeMap<PolicyParam, PolicyParam>,
}

impl EstimatorAssignment {
    pub fn target(&self, theta: &PolicyParam) -> Option<&PolicyParam> {
        self.map.get(theta)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PolicyParam, &PolicyParam)> {
        self.map.iter()
    }
}

/// Kuhn's augmenting-path maximum matching on the DAG of strict relations,
/// which by Dilworth/König turns a minimum chain cover into `n - matching`.
fn max_bipartite_matching(adj: &[Vec<usize>], n: usize) -> usize {
    let mut match_right: Vec<Option<usize>> = vec![None; n];
    let mut matched = 0;
    let mut visited = vec![false; n];
    for u in 0..n {
        visited.iter_mut().for_each(|v| *v = false);
        if augment(u, adj, &mut match_right, &mut visited) {
            matched += 1;
        }
    }
    matched
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    match_right: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    for &v in &adj[u] {
        if visited[v] {
            continue;
        }
        visited[v] = true;
        if match_right[v].is_none()
            || augment(match_right[v].unwrap(), adj, match_right, visited)
        {
            match_right[v] = Some(u);
            return true;
        }
    }
    false
}

/// Checks the partial-order axioms exhaustively; used by tests and debug
/// validation on small ground sets.
pub fn is_partial_order(
    ground: &[PolicyParam],
    leq: impl Fn(&PolicyParam, &PolicyParam) -> bool,
) -> bool {
    for a in ground {
        if !leq(a, a) {
            return false;
        }
        for b in ground {
            if a != b && leq(a, b) && leq(b, a) {
                return false;
            }
            for c in ground {
                if leq(a, b) && leq(b, c) && !leq(a, c) {
                    return false;
                }
            }
        }
    }
    true
}
