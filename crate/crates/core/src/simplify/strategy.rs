use crate::error::Result;
use crate::model::{Activation, Layer, Network};

use super::neurons::{compare_keys, PairApproach};
use super::SimplificationStep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerOrder {
    /// Input towards output.
    Ascending,
    /// Output towards input.
    Descending,
}

/// A family of steps in the attempt list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepFamily {
    MergeConv,
    MergeFc,
    MergeNeurons,
}

/// Which step families are tried, in which order, and how each is ordered
/// internally. The default tries convolution merges front to back, then
/// fully connected merges from the output backwards, then neuron merges
/// with [`PairApproach::InactiveMixedActive`].
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub families: Vec<StepFamily>,
    pub conv_order: LayerOrder,
    pub fc_order: LayerOrder,
    pub approach: PairApproach,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            families: vec![StepFamily::MergeConv, StepFamily::MergeFc, StepFamily::MergeNeurons],
            conv_order: LayerOrder::Ascending,
            fc_order: LayerOrder::Descending,
            approach: PairApproach::InactiveMixedActive,
        }
    }
}

fn ordered(positions: Vec<usize>, order: LayerOrder) -> Vec<usize> {
    match order {
        LayerOrder::Ascending => positions,
        LayerOrder::Descending => positions.into_iter().rev().collect(),
    }
}

fn is_relu(layer: &Layer) -> bool {
    layer.activation() == Activation::Relu
}

/// Steps to attempt on `network`, in order, using default ordering.
pub fn strategy_attempts(network: &Network, witness: &[f64]) -> Result<Vec<SimplificationStep>> {
    strategy_attempts_with(network, witness, &StrategyConfig::default())
}

/// Steps to attempt on `network`, in order.
///
/// Neuron merges from all eligible layers are pooled and sorted together by
/// the approach's key, so e.g. every inactive pair of every layer precedes
/// every mixed pair. Ties keep layer order, then pair index order.
pub fn strategy_attempts_with(
    network: &Network,
    witness: &[f64],
    config: &StrategyConfig,
) -> Result<Vec<SimplificationStep>> {
    let hidden: Vec<usize> = (1..network.depth()).collect();
    let layer = |t: usize| network.layer(t).expect("hidden position");
    let mut steps = Vec::new();
    let mut trace = None;

    for family in &config.families {
        match family {
            StepFamily::MergeConv => {
                let eligible = hidden
                    .iter()
                    .copied()
                    .filter(|&t| layer(t).is_convolutional() && is_relu(layer(t)))
                    .collect();
                steps.extend(ordered(eligible, config.conv_order).into_iter().map(SimplificationStep::MergeConv));
            }
            StepFamily::MergeFc => {
                let eligible = hidden
                    .iter()
                    .copied()
                    .filter(|&t| {
                        let (l, next) = (layer(t), layer(t + 1));
                        !l.is_convolutional() && is_relu(l) && !next.is_convolutional()
                    })
                    .collect();
                steps.extend(ordered(eligible, config.fc_order).into_iter().map(SimplificationStep::MergeFc));
            }
            StepFamily::MergeNeurons => {
                if trace.is_none() {
                    trace = Some(network.evaluate_trace(witness)?);
                }
                let trace = trace.as_ref().expect("just computed");
                let mut keyed = Vec::new();
                for &t in &hidden {
                    let (l, next) = (layer(t), layer(t + 1));
                    if l.is_convolutional() || !is_relu(l) || next.is_convolutional() {
                        continue;
                    }
                    let v = trace.pre(t);
                    let n = v.len();
                    for b in 0..n {
                        for c in b + 1..n {
                            keyed.push((config.approach.key(v[b], v[c]), SimplificationStep::MergeNeurons { layer: t, b, c }));
                        }
                    }
                }
                keyed.sort_by(|x, y| compare_keys(&x.0, &y.0));
                steps.extend(keyed.into_iter().map(|(_, s)| s));
            }
        }
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::FcLayer;
    use SimplificationStep::*;

    fn neurons(layer: usize, b: usize, c: usize) -> SimplificationStep {
        MergeNeurons { layer, b, c }
    }

    #[test]
    fn running_example_attempt_order() {
        let net = fixtures::running_example_network();
        let steps = strategy_attempts(&net, &[5.0]).unwrap();
        let expected = vec![
            MergeFc(2),
            MergeFc(1),
            neurons(1, 0, 1),
            neurons(2, 1, 2),
            neurons(2, 0, 2),
            neurons(1, 1, 2),
            neurons(1, 0, 2),
            // the active pair of layer 2 comes last
            neurons(2, 0, 1),
        ];
        assert_eq!(steps, expected);
    }

    #[test]
    fn no_hidden_layers_no_attempts() {
        let out = FcLayer::from_rows(&[vec![1.0, 2.0]], &[0.0], Activation::Linear).unwrap();
        let net = Network::new(2, vec![out.into()]).unwrap();
        assert!(strategy_attempts(&net, &[0.0, 0.0]).unwrap().is_empty());
    }

    #[test]
    fn conv_networks_start_with_conv_merges() {
        let net = fixtures::random_conv_network(1, 6, 2, 5);
        let steps = strategy_attempts(&net, &vec![0.1; 36]).unwrap();
        assert_eq!(steps[0], MergeConv(1));
        assert_eq!(steps[1], MergeConv(2));
        assert_eq!(steps[2], MergeFc(3));
        assert!(steps[3..].iter().all(|s| matches!(s, MergeNeurons { layer: 3, .. })));
    }

    #[test]
    fn ascending_fc_order() {
        let net = fixtures::random_fc_network(2, &[3, 3, 3], 1, 0);
        let config = StrategyConfig {
            families: vec![StepFamily::MergeFc],
            fc_order: LayerOrder::Ascending,
            ..StrategyConfig::default()
        };
        let steps = strategy_attempts_with(&net, &[0.0, 0.0], &config).unwrap();
        assert_eq!(steps, vec![MergeFc(1), MergeFc(2), MergeFc(3)]);
    }
}
