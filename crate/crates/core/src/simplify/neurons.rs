//! Merging pairs of neurons within a hidden layer, and the orderings used to
//! pick which pairs to try.

use std::cmp::Ordering;

use ndarray::{s, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::model::{Activation, FcLayer, Layer, Network};

/// Same-phase pairs whose witness values sum to less than this are skipped.
pub const ZERO_SUM_GUARD: f64 = 1e-12;

/// How candidate neuron pairs are prioritized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PairApproach {
    /// Index order.
    Arbitrary,
    /// Closest witness values first.
    Closest,
    /// Inactive-inactive pairs first, then the rest; closest first within each.
    InactiveFirst,
    /// Active-active pairs first, then the rest; closest first within each.
    ActiveFirst,
    /// Inactive-inactive, then mixed, then active-active; closest first within each.
    #[default]
    InactiveMixedActive,
}

impl PairApproach {
    /// Approaches are numbered 1 to 5 on the command line.
    pub fn from_number(n: u8) -> Option<Self> {
        Some(match n {
            1 => PairApproach::Arbitrary,
            2 => PairApproach::Closest,
            3 => PairApproach::InactiveFirst,
            4 => PairApproach::ActiveFirst,
            5 => PairApproach::InactiveMixedActive,
            _ => return None,
        })
    }

    fn category(self, vb: f64, vc: f64) -> u8 {
        let (ab, ac) = (vb >= 0.0, vc >= 0.0);
        match self {
            PairApproach::Arbitrary | PairApproach::Closest => 0,
            PairApproach::InactiveFirst => u8::from(ab || ac),
            PairApproach::ActiveFirst => u8::from(!(ab && ac)),
            PairApproach::InactiveMixedActive => match (ab, ac) {
                (false, false) => 0,
                (true, true) => 2,
                _ => 1,
            },
        }
    }

    /// Sort key of the pair `(vb, vc)`; lower keys are tried first.
    pub(crate) fn key(self, vb: f64, vc: f64) -> (u8, f64) {
        let gap = match self {
            PairApproach::Arbitrary => 0.0,
            _ => (vb - vc).abs(),
        };
        (self.category(vb, vc), gap)
    }
}

pub(crate) fn compare_keys(a: &(u8, f64), b: &(u8, f64)) -> Ordering {
    a.0.cmp(&b.0).then(a.1.total_cmp(&b.1))
}

/// Checks that layer `t` can have neurons merged and returns it with its
/// successor.
fn mergeable_layer(network: &Network, t: usize) -> Result<(&FcLayer, &FcLayer)> {
    if t == 0 || t >= network.depth() {
        return Err(Error::InvalidStep(format!("layer {t} is not a hidden layer")));
    }
    let layer = network
        .layer(t)
        .and_then(Layer::as_fc)
        .ok_or_else(|| Error::InvalidStep(format!("layer {t} is not fully connected")))?;
    if layer.activation() != Activation::Relu {
        return Err(Error::InvalidStep(format!("layer {t} has no ReLU activation")));
    }
    let next = network
        .layer(t + 1)
        .and_then(Layer::as_fc)
        .ok_or_else(|| Error::InvalidStep(format!("layer {} is not fully connected", t + 1)))?;
    Ok((layer, next))
}

/// All neuron pairs of hidden layer `t`, in the order given by `approach`.
pub fn candidate_pairs(
    network: &Network,
    t: usize,
    witness: &[f64],
    approach: PairApproach,
) -> Result<Vec<(usize, usize)>> {
    mergeable_layer(network, t)?;
    let trace = network.evaluate_trace(witness)?;
    let values = trace.pre(t);
    let n = values.len();
    let mut pairs: Vec<((u8, f64), (usize, usize))> = (0..n)
        .flat_map(|b| (b + 1..n).map(move |c| (b, c)))
        .map(|(b, c)| (approach.key(values[b], values[c]), (b, c)))
        .collect();
    pairs.sort_by(|x, y| compare_keys(&x.0, &y.0));
    Ok(pairs.into_iter().map(|(_, p)| p).collect())
}

fn drop_row(m: &Array2<f64>, row: usize) -> Array2<f64> {
    let keep: Vec<usize> = (0..m.nrows()).filter(|&i| i != row).collect();
    m.select(Axis(0), &keep)
}

fn drop_col(m: &Array2<f64>, col: usize) -> Array2<f64> {
    let keep: Vec<usize> = (0..m.ncols()).filter(|&j| j != col).collect();
    m.select(Axis(1), &keep)
}

fn drop_entry(v: &Array1<f64>, i: usize) -> Array1<f64> {
    let keep: Vec<usize> = (0..v.len()).filter(|&j| j != i).collect();
    v.select(Axis(0), &keep)
}

/// Merges neurons `b < c` of hidden layer `t` into one, using their phases
/// at `witness`.
///
/// Same phase: the merged neuron's incoming weights and bias are the means
/// of the two originals, and each outgoing weight is
/// `2 (w_b v_b + w_c v_c) / (v_b + v_c)` with `v` the pre-activation values
/// at the witness, so the next layer sees the same input at the witness.
/// Mixed phase: the inactive neuron is deleted.
pub fn merge_neurons(network: &Network, t: usize, b: usize, c: usize, witness: &[f64]) -> Result<Network> {
    let (layer, next) = mergeable_layer(network, t)?;
    let n = layer.fan_out();
    if b >= c || c >= n {
        return Err(Error::InvalidStep(format!(
            "neuron pair ({b}, {c}) invalid for layer {t} of width {n}"
        )));
    }
    let trace = network.evaluate_trace(witness)?;
    let v = trace.pre(t);
    let (vb, vc) = (v[b], v[c]);
    let (active_b, active_c) = (vb >= 0.0, vc >= 0.0);

    let (w, bias, w_next) = if active_b == active_c {
        let sum = vb + vc;
        if sum.abs() < ZERO_SUM_GUARD {
            return Err(Error::InvalidStep(format!(
                "neurons ({b}, {c}) of layer {t} have values summing to zero at the witness"
            )));
        }
        let mut w = layer.weights().clone();
        let mean = (&w.row(b) + &w.row(c)) * 0.5;
        w.row_mut(b).assign(&mean);
        let mut bias = layer.biases().clone();
        bias[b] = 0.5 * (bias[b] + bias[c]);

        let mut w_next = next.weights().clone();
        let outgoing = (&w_next.column(b) * vb + &w_next.column(c) * vc) * (2.0 / sum);
        w_next.slice_mut(s![.., b]).assign(&outgoing);
        (drop_row(&w, c), drop_entry(&bias, c), drop_col(&w_next, c))
    } else {
        let inactive = if active_b { c } else { b };
        (
            drop_row(layer.weights(), inactive),
            drop_entry(layer.biases(), inactive),
            drop_col(next.weights(), inactive),
        )
    };

    let merged = FcLayer::new(w, bias, layer.activation())?;
    let successor = FcLayer::new(w_next, next.biases().clone(), next.activation())?;
    network.splice(t, t + 1, vec![merged.into(), successor.into()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const TOL: f64 = 1e-9;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= TOL
    }

    #[test]
    fn merging_active_pair_of_running_example() {
        let net = fixtures::running_example_network();
        let merged = merge_neurons(&net, 2, 0, 1, &[5.0]).unwrap();
        assert_eq!(merged.size(), 7);
        let l2 = merged.layer(2).unwrap().as_fc().unwrap();
        assert_eq!(l2.fan_out(), 2);
        assert!(close(l2.biases()[0], 5.0));
        for (w, e) in l2.weights().row(0).iter().zip([0.4, -0.25, -1.0]) {
            assert!(close(*w, e));
        }
        let out = merged.layer(3).unwrap().as_fc().unwrap();
        assert!(close(out.weights()[[0, 0]], 5.0 / 3.0));
        // the untouched neuron l2_2 moves into slot 1
        assert_eq!(l2.weights().row(1).to_vec(), vec![2.0, 0.5, -1.0]);
        assert!(close(out.weights()[[0, 1]], 0.5));
        assert!(close(merged.evaluate(&[5.0]).unwrap()[0], 5.0));
    }

    #[test]
    fn duplicate_neurons_sum_outgoing_weights() {
        let l1 = FcLayer::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]], &[0.5, 0.5], Activation::Relu).unwrap();
        let l2 = FcLayer::from_rows(&[vec![3.0, -1.0]], &[0.0], Activation::Linear).unwrap();
        let net = Network::new(2, vec![l1.into(), l2.into()]).unwrap();
        let merged = merge_neurons(&net, 1, 0, 1, &[1.0, 1.0]).unwrap();
        let m1 = merged.layer(1).unwrap().as_fc().unwrap();
        assert_eq!(m1.weights().row(0).to_vec(), vec![1.0, 2.0]);
        assert_eq!(m1.biases()[0], 0.5);
        let m2 = merged.layer(2).unwrap().as_fc().unwrap();
        assert!(close(m2.weights()[[0, 0]], 2.0));
    }

    #[test]
    fn mixed_phase_deletes_inactive_neuron_exactly() {
        let net = fixtures::running_example_network();
        // layer 2 values (4, 2, -2): neuron 2 is inactive
        let merged = merge_neurons(&net, 2, 1, 2, &[5.0]).unwrap();
        assert_eq!(merged.evaluate(&[5.0]).unwrap(), net.evaluate(&[5.0]).unwrap());
        let l2 = merged.layer(2).unwrap().as_fc().unwrap();
        assert_eq!(l2.weights().row(1).to_vec(), vec![0.0, 0.5, 0.0]);
        // layer 1 values (-15, -5, 2): neuron 0 is inactive, the active one stays
        let merged = merge_neurons(&net, 1, 0, 2, &[5.0]).unwrap();
        assert_eq!(merged.evaluate(&[5.0]).unwrap(), net.evaluate(&[5.0]).unwrap());
        assert_eq!(merged.layer(1).unwrap().as_fc().unwrap().biases().to_vec(), vec![-2.5, 7.0]);
    }

    #[test]
    fn invalid_pairs_and_layers() {
        let net = fixtures::running_example_network();
        assert!(matches!(merge_neurons(&net, 2, 1, 1, &[5.0]), Err(Error::InvalidStep(_))));
        assert!(matches!(merge_neurons(&net, 2, 2, 1, &[5.0]), Err(Error::InvalidStep(_))));
        assert!(matches!(merge_neurons(&net, 2, 0, 3, &[5.0]), Err(Error::InvalidStep(_))));
        assert!(matches!(merge_neurons(&net, 3, 0, 1, &[5.0]), Err(Error::InvalidStep(_))));
        assert!(matches!(merge_neurons(&net, 0, 0, 1, &[5.0]), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn zero_sum_same_phase_is_inapplicable() {
        let l1 = FcLayer::from_rows(&[vec![0.0], vec![0.0]], &[0.0, 0.0], Activation::Relu).unwrap();
        let l2 = FcLayer::from_rows(&[vec![1.0, 1.0]], &[0.0], Activation::Linear).unwrap();
        let net = Network::new(1, vec![l1.into(), l2.into()]).unwrap();
        assert!(matches!(merge_neurons(&net, 1, 0, 1, &[3.0]), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn approach_five_on_first_layer() {
        let net = fixtures::running_example_network();
        let pairs = candidate_pairs(&net, 1, &[5.0], PairApproach::InactiveMixedActive).unwrap();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (0, 2)]);
    }

    #[test]
    fn approach_two_sorts_by_gap() {
        let l1 = FcLayer::from_rows(&[vec![0.0], vec![0.0], vec![0.0]], &[1.0, 1.1, 9.0], Activation::Relu)
            .unwrap();
        let l2 = FcLayer::from_rows(&[vec![1.0, 1.0, 1.0]], &[0.0], Activation::Linear).unwrap();
        let net = Network::new(1, vec![l1.into(), l2.into()]).unwrap();
        let pairs = candidate_pairs(&net, 1, &[0.0], PairApproach::Closest).unwrap();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (0, 2)]);
        let pairs = candidate_pairs(&net, 1, &[0.0], PairApproach::Arbitrary).unwrap();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn approaches_three_and_four_split_categories() {
        let net = fixtures::running_example_network();
        // layer 2 values (4, 2, -2)
        let inactive = candidate_pairs(&net, 2, &[5.0], PairApproach::InactiveFirst).unwrap();
        assert_eq!(inactive, vec![(0, 1), (1, 2), (0, 2)]);
        let active = candidate_pairs(&net, 2, &[5.0], PairApproach::ActiveFirst).unwrap();
        assert_eq!(active, vec![(0, 1), (1, 2), (0, 2)]);
        // layer 1 values (-15, -5, 2)
        let inactive = candidate_pairs(&net, 1, &[5.0], PairApproach::InactiveFirst).unwrap();
        assert_eq!(inactive, vec![(0, 1), (1, 2), (0, 2)]);
        let active = candidate_pairs(&net, 1, &[5.0], PairApproach::ActiveFirst).unwrap();
        assert_eq!(active, vec![(1, 2), (0, 1), (0, 2)]);
    }

    #[test]
    fn single_neuron_layer_has_no_pairs() {
        let l1 = FcLayer::from_rows(&[vec![1.0]], &[0.0], Activation::Relu).unwrap();
        let l2 = FcLayer::from_rows(&[vec![1.0]], &[0.0], Activation::Linear).unwrap();
        let net = Network::new(1, vec![l1.into(), l2.into()]).unwrap();
        assert!(candidate_pairs(&net, 1, &[1.0], PairApproach::default()).unwrap().is_empty());
    }
}
