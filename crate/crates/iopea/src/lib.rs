//! Epoch-based policy elimination for infinite-horizon average-cost MDPs
//! whose policy classes carry an *information order*: a partial order
//! `a ≼ b` meaning a trajectory collected under policy `b` suffices to
//! estimate the average cost of policy `a` counterfactually.
//!
//! The crate ships:
//!
//! - [`mdp`]: environment contracts, trajectory recording, regret accounting;
//! - [`order`]: the partial-order machinery (maximal elements, Dilworth width,
//!   estimator assignment);
//! - [`algo`]: the epoch-based elimination algorithm itself;
//! - [`env`]: three benchmark environments — lost-sales inventory control,
//!   dual-sourcing inventory, and an M/M/1/L queue with service-rate control;
//! - [`baselines`]: random selection, trivial-order elimination, and a
//!   full-feedback ERM oracle;
//! - [`harness`]: experiment configuration, the grid-optimum oracle, and
//!   CSV/JSON reporting behind the `iopea` command-line binary.

pub mod algo;
pub mod baselines;
pub mod demand;
pub mod env;
pub mod harness;
pub mod mdp;
pub mod order;
pub mod rng;
