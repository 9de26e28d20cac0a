//! Matched-asymptotic network decompositions: one outer and one inner network
//! at leading order, five networks at first order, plus the piecewise
//! (no composite) baseline.
//!
//! Point-wise networks and operator networks share this module; see
//! [`crate::pvd_onet`] for the operator-specific pieces.

pub mod collocation;
pub mod loss;
mod model;

use serde::{Deserialize, Serialize};

pub use collocation::CollocationSets;
pub use loss::{AsymptoticLoss, LossParts, LossWeights, Targets};
pub use model::{
    bl_pinns_values, composite_values, point_nets, train_pointwise, CompositeOptions, InnerExtension, MatchingSide,
    TrainedModel,
};

/// Truncation order of the matched expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    /// Outer `u0` and inner `psi0`.
    Leading,
    /// Adds outer `u1`, inner `psi1` and the order-reduction term `psic`.
    High,
}

impl Order {
    pub fn net_count(&self) -> usize {
        match self {
            Order::Leading => 2,
            Order::High => 5,
        }
    }
}
