//! Reference algorithms run against the same epoch schedule for
//! like-for-like budget comparisons:
//!
//! - uniform-random policy selection at each epoch boundary;
//! - trivial-order elimination, where no two policies are related (width
//!   equals the grid size, so every survivor is played every epoch);
//! - a full-feedback ERM oracle that re-derives the epoch's exogenous
//!   randomness from its stream key and evaluates every grid policy on it.
//!
//! The ERM baseline's access to hidden randomness lives only here (via
//! [`gain_on_stream`]); the elimination algorithm itself can only reach
//! trajectories through the information order's estimators.

use rand::Rng;

use crate::algo::{self, IopeaConfig, RunKey, RunOutput, StepInfo};
use crate::mdp::{empirical_gain, Environment, PolicyParam, RegretLedger};
use crate::order::{OrderError, OrderKind, PolicyOrder};
use crate::rng::{Purpose, StreamKey, StreamRng};

/// Outcome of a baseline run: the ledger over exactly T steps plus the
/// policy the baseline would keep playing.
#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub ledger: RegretLedger,
    pub final_policy: PolicyParam,
}

/// Simulate `theta` from the initial state for `n` steps on the exogenous
/// stream drawn from `rng`, returning the mean cost on the selected channel.
///
/// Because every environment consumes a fixed number of draws per step,
/// handing this function a clone of an exploration stream replays exactly
/// the randomness that exploration experienced.
pub fn gain_on_stream<E: Environment>(
    env: &E,
    theta: &PolicyParam,
    mut rng: StreamRng,
    n: u64,
    use_observed: bool,
) -> f64 {
    let traj = crate::mdp::rollout(env, theta, env.initial_state(), n, &mut rng);
    empirical_gain(&traj, use_observed).expect("nonempty rollout")
}

/// Uniform-random policy selection on the shared epoch schedule.
pub fn run_random<E: Environment>(
    env: &E,
    grid: &[PolicyParam],
    cfg: &IopeaConfig,
    key: RunKey,
    g_star: f64,
    mut observe: impl FnMut(StepInfo),
) -> BaselineOutput {
    assert!(!grid.is_empty(), "grid must be nonempty");
    let t_total = cfg.horizon;
    let alpha = cfg.alpha.unwrap_or_else(|| env.order_alpha());
    let t_h = cfg.t_h_value.unwrap_or_else(|| env.t_h_default());
    let mut ledger = RegretLedger::new(g_star);
    let mut pick_rng = StreamKey::new(key.seed, key.replicate, 0, 0, Purpose::Baseline).rng();
    let mut state = env.initial_state();
    let mut k = 1u32;
    let mut current = grid[0].clone();
    while ledger.timesteps < t_total {
        let n_k = algo::schedule_n_k(k, t_h, alpha, t_total).min(t_total - ledger.timesteps);
        current = grid[pick_rng.gen_range(0..grid.len())].clone();
        let mut rng = StreamKey::new(key.seed, key.replicate, k, 0, Purpose::Explore).rng();
        for _ in 0..n_k {
            let a = env.action(&current, &state);
            let tr = env.step(&state, &a, &mut rng);
            state = tr.state_after.clone();
            ledger.record_step(&tr);
            observe(StepInfo {
                t: ledger.timesteps,
                epoch: k,
                active: grid.len(),
                cum_true_cost: ledger.total_true_cost,
            });
        }
        k += 1;
    }
    debug_assert_eq!(ledger.timesteps, t_total);
    BaselineOutput { ledger, final_policy: current }
}

/// The trivial information order: a policy estimates only itself, so the
/// order has width |grid| and each survivor must be played each epoch.
pub fn trivial_order<E: Environment>(
    grid: Vec<PolicyParam>,
) -> PolicyOrder<E::State, E::Action, E::Obs> {
    let n = grid.len();
    PolicyOrder::new(
        grid,
        OrderKind::SamplePath,
        1.0,
        |_| 1,
        |a, b| a == b,
        |theta, traj| {
            if traj.policy != *theta {
                return Err(OrderError::NotDominated);
            }
            empirical_gain(traj, true).map_err(|_| OrderError::InsufficientCoverage)
        },
    )
    .with_known_width(n)
}

/// Elimination with the trivial order: identical rule, no information
/// sharing.
pub fn run_trivial_elimination<E: Environment>(
    env: &E,
    grid: &[PolicyParam],
    cfg: &IopeaConfig,
    key: RunKey,
    g_star: f64,
    observe: impl FnMut(StepInfo),
) -> Result<RunOutput, algo::RunError> {
    let order = trivial_order::<E>(grid.to_vec());
    let mut cfg = cfg.clone();
    cfg.alpha = Some(1.0);
    cfg.t_h_value = Some(1);
    algo::run_with_observer(env, &order, &cfg, key, g_star, observe)
}

/// Full-feedback ERM: play the current empirical argmin each epoch, then
/// re-simulate every grid policy on the epoch's realized exogenous stream
/// and adopt the new argmin.
pub fn run_full_feedback_erm<E: Environment>(
    env: &E,
    grid: &[PolicyParam],
    cfg: &IopeaConfig,
    key: RunKey,
    g_star: f64,
    mut observe: impl FnMut(StepInfo),
) -> BaselineOutput {
    assert!(!grid.is_empty(), "grid must be nonempty");
    let t_total = cfg.horizon;
    let mut ledger = RegretLedger::new(g_star);
    let mut state = env.initial_state();
    let mut current = grid[0].clone();
    let restart_param = env.restart_param();
    let n_1 = algo::schedule_n_k(1, 1, 1.0, t_total);
    let restart_cap = cfg.restart_cap.unwrap_or(10 * n_1);
    let mut k = 1u32;
    loop {
        let remaining = t_total - ledger.timesteps;
        if remaining == 0 {
            break;
        }
        let n_k = algo::schedule_n_k(k, 1, 1.0, t_total);
        if n_k > remaining {
            break;
        }
        let stream_key = StreamKey::new(key.seed, key.replicate, k, 0, Purpose::Explore);
        let mut rng = stream_key.rng();
        for _ in 0..n_k {
            let a = env.action(&current, &state);
            let tr = env.step(&state, &a, &mut rng);
            state = tr.state_after.clone();
            ledger.record_step(&tr);
            observe(StepInfo {
                t: ledger.timesteps,
                epoch: k,
                active: grid.len(),
                cum_true_cost: ledger.total_true_cost,
            });
        }
        // Return to the initial state so the next epoch's evaluation and
        // play both start from s₁.
        let mut restart_steps = 0u64;
        while state != env.initial_state() && ledger.timesteps < t_total {
            if restart_steps >= restart_cap {
                break;
            }
            let a = env.action(&restart_param, &state);
            let tr = env.step(&state, &a, &mut rng);
            state = tr.state_after.clone();
            ledger.record_step(&tr);
            observe(StepInfo {
                t: ledger.timesteps,
                epoch: k,
                active: grid.len(),
                cum_true_cost: ledger.total_true_cost,
            });
            restart_steps += 1;
        }
        if state != env.initial_state() {
            break; // horizon expired mid-restart
        }
        // Hindsight evaluation: every grid policy on this epoch's stream.
        let mut best: Option<(&PolicyParam, f64)> = None;
        for theta in grid {
            let g = gain_on_stream(env, theta, stream_key.rng(), n_k, true);
            match best {
                Some((_, bg)) if g >= bg => {}
                _ => best = Some((theta, g)),
            }
        }
        current = best.expect("nonempty grid").0.clone();
        k += 1;
    }
    // Commit the final argmin for the remaining steps.
    if ledger.timesteps < t_total {
        let mut rng = StreamKey::new(key.seed, key.replicate, k, 0, Purpose::Commit).rng();
        while ledger.timesteps < t_total {
            let a = env.action(&current, &state);
            let tr = env.step(&state, &a, &mut rng);
            state = tr.state_after.clone();
            ledger.record_step(&tr);
            observe(StepInfo {
                t: ledger.timesteps,
                epoch: k,
                active: grid.len(),
                cum_true_cost: ledger.total_true_cost,
            });
        }
    }
    debug_assert_eq!(ledger.timesteps, t_total);
    BaselineOutput { ledger, final_policy: current }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algo::{epsilon_net, schedule_n_k};
    use crate::demand::{DemandKind, DemandModel};
    use crate::env::inventory::{InvParams, InventoryEnv};
    use crate::mdp::{CostNormalizer, Transition};

    /// Deterministic environment: playing θ costs θ + 0.2 per step.
    struct ConstEnv;

    impl Environment for ConstEnv {
        type State = ();
        type Action = f64;
        type Obs = ();

        fn initial_state(&self) {}
        fn action(&self, theta: &PolicyParam, _s: &()) -> f64 {
            theta.as_scalar() + 0.2
        }
        fn step(&self, _s: &(), a: &f64, _rng: &mut StreamRng) -> Transition<(), f64, ()> {
            Transition {
                state_before: (),
                action: *a,
                observed_cost: *a,
                reported_cost: *a,
                observation: (),
                state_after: (),
            }
        }
        fn restart_param(&self) -> PolicyParam {
            PolicyParam::scalar(0.0)
        }
        fn span_bound(&self) -> f64 {
            0.1
        }
        fn order_alpha(&self) -> f64 {
            1.0
        }
        fn t_h_default(&self) -> u64 {
            1
        }
        fn cost_normalizer(&self) -> CostNormalizer {
            CostNormalizer { offset: 0.0, scale: 1.0 }
        }
    }

    fn cfg(horizon: u64, box_hi: f64, r: f64) -> IopeaConfig {
        let mut cfg = IopeaConfig::new(horizon, 0.05, vec![box_hi]);
        cfg.r = Some(r);
        cfg
    }

    #[test]
    fn random_singleton_grid_plays_that_policy() {
        let grid = vec![PolicyParam::scalar(0.0)];
        let out = run_random(
            &ConstEnv,
            &grid,
            &cfg(5000, 0.0, 1.0),
            RunKey { seed: 1, replicate: 0 },
            0.2,
            |_| {},
        );
        assert_eq!(out.ledger.timesteps, 5000);
        assert!((out.ledger.total_true_cost - 1000.0).abs() < 1e-6);
        assert!(out.ledger.regret().abs() < 1e-6);
    }

    #[test]
    fn random_long_run_mean_is_uniform_average() {
        // Two deterministic policies with costs 0.2 and 0.8. A single run's
        // mean is dominated by the final (geometrically long) epoch's draw,
        // so the uniform average shows up across replicates.
        let grid = epsilon_net(&[0.6], 0.6).unwrap();
        let reps = 60;
        let mut total = 0.0;
        for rep in 0..reps {
            let out = run_random(
                &ConstEnv,
                &grid,
                &cfg(50_000, 0.6, 0.6),
                RunKey { seed: 2, replicate: rep },
                0.0,
                |_| {},
            );
            total += out.ledger.total_true_cost / out.ledger.timesteps as f64;
        }
        let mean = total / reps as f64;
        assert!((mean - 0.5).abs() < 0.08, "mean {mean}");
    }

    #[test]
    fn random_is_reproducible() {
        let grid = epsilon_net(&[0.6], 0.6).unwrap();
        let a = run_random(&ConstEnv, &grid, &cfg(10_000, 0.6, 0.6), RunKey { seed: 3, replicate: 1 }, 0.0, |_| {});
        let b = run_random(&ConstEnv, &grid, &cfg(10_000, 0.6, 0.6), RunKey { seed: 3, replicate: 1 }, 0.0, |_| {});
        assert_eq!(a.ledger.total_true_cost.to_bits(), b.ledger.total_true_cost.to_bits());
        assert_eq!(a.final_policy, b.final_policy);
    }

    #[test]
    fn trivial_runs_every_survivor_each_epoch() {
        let grid = epsilon_net(&[1.0], 0.25).unwrap(); // 5 policies
        let horizon = 300_000;
        let mut epoch1_steps = 0u64;
        let out = run_trivial_elimination(
            &ConstEnv,
            &grid,
            &cfg(horizon, 1.0, 0.25),
            RunKey { seed: 4, replicate: 0 },
            0.0,
            |info| {
                if info.epoch == 1 {
                    epoch1_steps += 1;
                }
            },
        )
        .unwrap();
        // epoch 1 plays all w = 5 policies for N_1 steps each (restarts are
        // instantaneous in this environment)
        let n_1 = schedule_n_k(1, 1, 1.0, horizon);
        assert_eq!(epoch1_steps, 5 * n_1);
        assert_eq!(out.ledger.timesteps, horizon);
    }

    #[test]
    fn trivial_eliminates_clear_gap_after_first_epoch() {
        let grid = epsilon_net(&[0.6], 0.6).unwrap(); // costs 0.2 and 0.8
        let mut c = cfg(100_000, 0.6, 0.6);
        c.c_beta = 0.001; // 2β_1 « 0.6 cost gap
        let out = run_trivial_elimination(
            &ConstEnv,
            &grid,
            &c,
            RunKey { seed: 5, replicate: 0 },
            0.2,
            |_| {},
        )
        .unwrap();
        assert_eq!(out.history[0].surviving, vec![PolicyParam::scalar(0.0)]);
        assert_eq!(out.committed, PolicyParam::scalar(0.0));
    }

    #[test]
    fn erm_adopts_argmin_after_first_epoch_and_covers_budget() {
        let grid = epsilon_net(&[1.0], 0.25).unwrap();
        let horizon = 50_000;
        let mut post_epoch1_costs = Vec::new();
        let out = run_full_feedback_erm(
            &ConstEnv,
            &grid,
            &cfg(horizon, 1.0, 0.25),
            RunKey { seed: 6, replicate: 0 },
            0.2,
            |info| {
                if info.epoch > 1 {
                    post_epoch1_costs.push(info.cum_true_cost);
                }
            },
        );
        assert_eq!(out.ledger.timesteps, horizon);
        assert_eq!(out.final_policy, PolicyParam::scalar(0.0));
        // every step after the first epoch plays the argmin (cost 0.2)
        let n = post_epoch1_costs.len();
        let delta = post_epoch1_costs[n - 1] - post_epoch1_costs[0];
        assert!((delta / (n - 1) as f64 - 0.2).abs() < 1e-9);
    }

    #[test]
    fn erm_singleton_grid_plays_it_throughout() {
        let grid = vec![PolicyParam::scalar(0.5)];
        let out = run_full_feedback_erm(
            &ConstEnv,
            &grid,
            &cfg(5000, 0.5, 1.0),
            RunKey { seed: 7, replicate: 0 },
            0.7,
            |_| {},
        );
        assert_eq!(out.ledger.timesteps, 5000);
        assert!(out.ledger.regret().abs() < 1e-6);
    }

    #[test]
    fn erm_epoch_evaluation_matches_replay_oracle() {
        // On the inventory environment, hindsight evaluation of θ' ≤ θ on
        // the epoch's stream equals the replay estimator on the recorded
        // trajectory: both reduce to simulation on the same demand stream.
        let env = InventoryEnv::new(InvParams {
            lead_time: 2,
            holding: 1.0,
            lost_sales: 10.0,
            demand: DemandModel::new(0.3, 3.0, DemandKind::Exponential { mean: 1.0 }),
            policy_box: 6.0,
        });
        let theta = PolicyParam::scalar(4.0);
        let theta_prime = PolicyParam::scalar(1.7);
        let key = StreamKey::new(8, 0, 3, 0, Purpose::Explore);
        let n = 500;

        let mut rng = key.rng();
        let traj = crate::mdp::rollout(&env, &theta, env.initial_state(), n, &mut rng);

        let order = env.order(epsilon_net(&[6.0], 0.1).unwrap());
        let replayed = order.estimate(&theta_prime, &traj).unwrap();
        let hindsight = gain_on_stream(&env, &theta_prime, key.rng(), n, true);
        assert!(
            (replayed - hindsight).abs() < 1e-12,
            "replay {replayed} vs hindsight {hindsight}"
        );
    }

    #[test]
    fn baseline_budgets_are_exact_for_odd_horizons() {
        let grid = epsilon_net(&[1.0], 0.25).unwrap();
        for horizon in [911u64, 14_323] {
            let c = cfg(horizon, 1.0, 0.25);
            let key = RunKey { seed: 9, replicate: 0 };
            assert_eq!(run_random(&ConstEnv, &grid, &c, key, 0.0, |_| {}).ledger.timesteps, horizon);
            assert_eq!(
                run_trivial_elimination(&ConstEnv, &grid, &c, key, 0.0, |_| {})
                    .unwrap()
                    .ledger
                    .timesteps,
                horizon
            );
            assert_eq!(
                run_full_feedback_erm(&ConstEnv, &grid, &c, key, 0.0, |_| {}).ledger.timesteps,
                horizon
            );
        }
    }
}
