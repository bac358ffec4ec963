//! Network simplification steps.
//!
//! Every step uses a witness input to decide how to rewrite the network and
//! keeps the network's output at that witness unchanged (up to rounding),
//! while strictly shrinking it:
//!
//! - [`merge_fc_layers`] fixes the ReLUs of a fully connected layer to their
//!   phase at the witness and fuses the layer with its successor;
//! - [`merge_conv_layer`] does the same for a convolutional layer after
//!   lowering it with [`conv_to_fc`];
//! - [`merge_neurons`] collapses two neurons of one hidden layer.

mod linearize;
mod neurons;
mod strategy;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use linearize::{conv_to_fc, merge_conv_layer, merge_fc_layers, phase_mask, PhaseMask};
pub use neurons::{candidate_pairs, merge_neurons, PairApproach, ZERO_SUM_GUARD};
pub use strategy::{strategy_attempts, strategy_attempts_with, LayerOrder, StepFamily, StrategyConfig};

use crate::error::Result;
use crate::model::Network;

/// One attemptable rewrite. Layer positions are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "at", rename_all = "snake_case")]
pub enum SimplificationStep {
    /// Fuse fully connected layer `t` with layer `t + 1`.
    MergeFc(usize),
    /// Lower convolutional layer `t` and fuse it with layer `t + 1`.
    MergeConv(usize),
    /// Merge neurons `b < c` of hidden layer `layer`.
    MergeNeurons { layer: usize, b: usize, c: usize },
}

impl SimplificationStep {
    pub fn apply(&self, network: &Network, witness: &[f64]) -> Result<Network> {
        match *self {
            SimplificationStep::MergeFc(t) => merge_fc_layers(network, t, witness),
            SimplificationStep::MergeConv(t) => merge_conv_layer(network, t, witness),
            SimplificationStep::MergeNeurons { layer, b, c } => merge_neurons(network, layer, b, c, witness),
        }
    }
}

impl fmt::Display for SimplificationStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimplificationStep::MergeFc(t) => write!(f, "merge-fc({t})"),
            SimplificationStep::MergeConv(t) => write!(f, "merge-conv({t})"),
            SimplificationStep::MergeNeurons { layer, b, c } => write!(f, "merge-neurons({layer}, {b}, {c})"),
        }
    }
}
