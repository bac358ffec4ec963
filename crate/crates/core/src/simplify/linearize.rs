//! Fixing ReLUs to their phase at a witness and fusing the resulting linear
//! layers, for fully connected and convolutional layers.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::model::{Activation, ConvLayer, FcLayer, Layer, Network};

/// Diagonal 0/1 matrix fixing each ReLU of a layer to its phase at a
/// witness. Stored as the diagonal only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseMask {
    active: Vec<bool>,
}

impl PhaseMask {
    /// Mask from pre-activation values. Zero counts as active.
    pub fn from_pre_activations(values: &Array1<f64>) -> Self {
        PhaseMask {
            active: values.iter().map(|v| *v >= 0.0).collect(),
        }
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn to_matrix(&self) -> Array2<f64> {
        let n = self.active.len();
        let mut m = Array2::zeros((n, n));
        for (i, &a) in self.active.iter().enumerate() {
            if a {
                m[[i, i]] = 1.0;
            }
        }
        m
    }
}

/// Phase mask of hidden layer `t` at `witness`.
pub fn phase_mask(network: &Network, t: usize, witness: &[f64]) -> Result<PhaseMask> {
    let layer = network
        .layer(t)
        .ok_or_else(|| Error::InvalidStep(format!("no layer at position {t}")))?;
    if layer.activation() != Activation::Relu {
        return Err(Error::InvalidStep(format!("layer {t} has no ReLU activation")));
    }
    let trace = network.evaluate_trace(witness)?;
    Ok(PhaseMask::from_pre_activations(trace.pre(t)))
}

/// `next_w * mask * first_w` and `next_w * mask * first_b + next_b`.
fn fuse(
    first_w: &Array2<f64>,
    first_b: &Array1<f64>,
    mask: &PhaseMask,
    next: &FcLayer,
) -> Result<FcLayer> {
    let mut masked = next.weights().clone();
    for (j, mut col) in masked.axis_iter_mut(Axis(1)).enumerate() {
        if !mask.active()[j] {
            col.fill(0.0);
        }
    }
    let weights = masked.dot(first_w);
    let biases = masked.dot(first_b) + next.biases();
    FcLayer::new(weights, biases, next.activation())
}

fn check_interior(network: &Network, t: usize) -> Result<()> {
    if t == 0 || t >= network.depth() {
        return Err(Error::InvalidStep(format!(
            "layer {t} is not a hidden layer of a network with {} layers",
            network.depth() + 1
        )));
    }
    Ok(())
}

/// Linearizes the ReLUs of fully connected layer `t` at `witness` and fuses
/// layers `t` and `t + 1` into one layer carrying the activation of `t + 1`.
pub fn merge_fc_layers(network: &Network, t: usize, witness: &[f64]) -> Result<Network> {
    check_interior(network, t)?;
    let (Some(first), Some(next)) = (
        network.layer(t).and_then(Layer::as_fc),
        network.layer(t + 1).and_then(Layer::as_fc),
    ) else {
        return Err(Error::InvalidStep(format!(
            "layers {t} and {} must both be fully connected",
            t + 1
        )));
    };
    let mask = phase_mask(network, t, witness)?;
    let fused = fuse(first.weights(), first.biases(), &mask, next)?;
    network.splice(t, t + 1, vec![fused.into()])
}

/// Rewrites a convolution as the equivalent (sparse) fully connected layer.
///
/// Row `co*ho*wo + oi*wo + oj` holds the kernel taps of output pixel
/// `(co, oi, oj)` scattered onto the flattened input columns.
pub fn conv_to_fc(layer: &ConvLayer) -> FcLayer {
    let g = layer.geometry();
    let (ho, wo) = layer.output_dims();
    let plane = g.height * g.width;
    let mut weights = Array2::zeros((layer.fan_out(), layer.fan_in()));
    let mut biases = Array1::zeros(layer.fan_out());
    let kernel = layer.kernel();
    for co in 0..g.out_channels {
        for oi in 0..ho {
            for oj in 0..wo {
                let row = co * ho * wo + oi * wo + oj;
                biases[row] = layer.biases()[co];
                for ki in 0..g.kernel {
                    let Some(r) = (oi * g.stride + ki).checked_sub(g.padding) else {
                        continue;
                    };
                    if r >= g.height {
                        continue;
                    }
                    for kj in 0..g.kernel {
                        let Some(c) = (oj * g.stride + kj).checked_sub(g.padding) else {
                            continue;
                        };
                        if c >= g.width {
                            continue;
                        }
                        for ci in 0..g.in_channels {
                            weights[[row, ci * plane + r * g.width + c]] = kernel[[co, ci, ki, kj]];
                        }
                    }
                }
            }
        }
    }
    FcLayer::new(weights, biases, layer.activation()).expect("lowering preserves shape invariants")
}

/// Lowers convolutional layer `t` to a fully connected one, linearizes its
/// ReLUs at `witness` and fuses it with layer `t + 1` (itself lowered first
/// when convolutional). The result is a single fully connected layer.
pub fn merge_conv_layer(network: &Network, t: usize, witness: &[f64]) -> Result<Network> {
    check_interior(network, t)?;
    let Some(conv) = network.layer(t).and_then(Layer::as_conv) else {
        return Err(Error::InvalidStep(format!("layer {t} is not convolutional")));
    };
    let mask = phase_mask(network, t, witness)?;
    let lowered = conv_to_fc(conv);
    let next = match network.layer(t + 1).expect("checked interior") {
        Layer::FullyConnected(l) => l.clone(),
        Layer::Convolutional(l) => conv_to_fc(l),
    };
    let fused = fuse(lowered.weights(), lowered.biases(), &mask, &next)?;
    network.splice(t, t + 1, vec![fused.into()])
}
