//! The gain oracle: estimates g_θ by fresh simulation with common random
//! numbers, and finds the grid optimum θ*.

use rayon::prelude::*;

use crate::mdp::{Environment, PolicyParam};
use crate::rng::{Purpose, StreamKey};

/// Mean true cost per step of `theta` from the initial state, averaged over
/// `eval_horizon` steps per seed; returns the across-seed mean and its
/// standard error.
///
/// The evaluation stream depends only on the seed, never on θ, so different
/// policies see identical exogenous randomness (common random numbers).
pub fn oracle_gain<E: Environment + Sync>(
    env: &E,
    theta: &PolicyParam,
    eval_horizon: u64,
    seeds: &[u64],
) -> (f64, f64) {
    assert!(eval_horizon >= 1);
    assert!(!seeds.is_empty());
    let gains: Vec<f64> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = StreamKey::new(s, 0, 0, 0, Purpose::Evaluate).rng();
            let mut state = env.initial_state();
            let mut total = 0.0;
            for _ in 0..eval_horizon {
                let a = env.action(theta, &state);
                let tr = env.step(&state, &a, &mut rng);
                total += tr.reported_cost;
                state = tr.state_after;
            }
            total / eval_horizon as f64
        })
        .collect();
    mean_and_se(&gains)
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Grid argmin of the oracle means under common random numbers, with
/// lexicographic tie-break. Returns (θ*, mean gain, standard error).
pub fn grid_optimum<E: Environment + Sync>(
    env: &E,
    grid: &[PolicyParam],
    eval_horizon: u64,
    seeds: &[u64],
) -> (PolicyParam, f64, f64) {
    assert!(!grid.is_empty(), "grid must be nonempty");
    let evaluated: Vec<(usize, f64, f64)> = grid
        .par_iter()
        .enumerate()
        .map(|(i, theta)| {
            let (g, se) = oracle_gain(env, theta, eval_horizon, seeds);
            (i, g, se)
        })
        .collect();
    let mut best = &evaluated[0];
    for e in &evaluated[1..] {
        if e.1 < best.1 {
            best = e;
        }
    }
    (grid[best.0].clone(), best.1, best.2)
}

/// Evaluation seeds derived from a base seed.
pub fn eval_seeds(base: u64, count: u32) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i)).collect()
}
