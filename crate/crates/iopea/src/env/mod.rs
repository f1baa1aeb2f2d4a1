//! Benchmark environments.

pub mod dualsource;
pub mod inventory;
pub mod queue;

use serde::{Deserialize, Serialize};

/// What the decision maker sees after an inventory step: the sale amount and
/// whether demand was censored by the available stock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaleObservation {
    pub sale: f64,
    /// True iff demand reached (or exceeded) the available stock, so the
    /// sale reveals only a lower bound on demand.
    pub censored: bool,
}
