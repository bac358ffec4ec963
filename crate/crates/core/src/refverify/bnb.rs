use ndarray::{Array1, Array2};

use crate::model::{Activation, Comparison, Layer, VerificationQuery};
use crate::par::{self, Execution};
use crate::simplify::conv_to_fc;
use crate::verifier::{validate_witness, VerdictOutcome, WitnessStatus};

pub const DEFAULT_BOX_RESOLUTION: f64 = 1e-3;
pub const DEFAULT_MAX_SPLITS: usize = 1 << 20;
const BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbConfig {
    /// Boxes whose widest side is below this are not split further.
    pub box_resolution: f64,
    pub max_splits: usize,
    pub execution: Execution,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            box_resolution: DEFAULT_BOX_RESOLUTION,
            max_splits: DEFAULT_MAX_SPLITS,
            execution: Execution::default(),
        }
    }
}

/// Dense affine layers with their absolute weights, for interval arithmetic.
struct Affine {
    w: Array2<f64>,
    abs_w: Array2<f64>,
    b: Array1<f64>,
    relu: bool,
}

/// One output constraint folded through the last layer: `v . a + k` over
/// the last hidden activations `a`.
struct Folded {
    v: Array1<f64>,
    abs_v: Array1<f64>,
    k: f64,
    cmp: Comparison,
    rhs: f64,
}

struct Problem<'q> {
    query: &'q VerificationQuery,
    hidden: Vec<Affine>,
    region: Vec<Vec<Folded>>,
}

enum BoxResult {
    Pruned,
    Sat(Vec<f64>),
    Split(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>),
    Unknown,
}

impl<'q> Problem<'q> {
    fn new(query: &'q VerificationQuery) -> Self {
        let mut dense: Vec<Affine> = query
            .network()
            .layers()
            .iter()
            .map(|l| {
                let fc = match l {
                    Layer::FullyConnected(fc) => fc.clone(),
                    Layer::Convolutional(c) => conv_to_fc(c),
                };
                Affine {
                    abs_w: fc.weights().mapv(f64::abs),
                    w: fc.weights().clone(),
                    b: fc.biases().clone(),
                    relu: fc.activation() == Activation::Relu,
                }
            })
            .collect();
        let last = dense.pop().expect("networks have an output layer");
        let region = query
            .property()
            .output_region()
            .iter()
            .map(|conj| {
                conj.iter()
                    .map(|c| {
                        let coeffs = Array1::from(c.coeffs.clone());
                        let v = coeffs.dot(&last.w);
                        Folded {
                            abs_v: v.mapv(f64::abs),
                            v,
                            k: coeffs.dot(&last.b),
                            cmp: c.cmp,
                            rhs: c.rhs,
                        }
                    })
                    .collect()
            })
            .collect();
        Problem {
            query,
            hidden: dense,
            region,
        }
    }

    /// Whether some disjunct might be reachable from the box.
    fn reachable(&self, lower: &[f64], upper: &[f64]) -> bool {
        let mut lo = Array1::from(lower.to_vec());
        let mut hi = Array1::from(upper.to_vec());
        for layer in &self.hidden {
            let mid = (&lo + &hi) * 0.5;
            let rad = (&hi - &lo) * 0.5;
            let c = layer.w.dot(&mid) + &layer.b;
            let r = layer.abs_w.dot(&rad);
            lo = &c - &r;
            hi = c + r;
            if layer.relu {
                lo.mapv_inplace(|x| x.max(0.0));
                hi.mapv_inplace(|x| x.max(0.0));
            }
        }
        let mid = (&lo + &hi) * 0.5;
        let rad = (&hi - &lo) * 0.5;
        self.region.iter().any(|conj| {
            conj.iter().all(|f| {
                let m = f.v.dot(&mid) + f.k;
                let r = f.abs_v.dot(&rad);
                match f.cmp {
                    Comparison::Le => m - r <= f.rhs,
                    Comparison::Ge => m + r >= f.rhs,
                }
            })
        })
    }

    fn examine(&self, lower: &[f64], upper: &[f64], resolution: f64) -> BoxResult {
        if !self.reachable(lower, upper) {
            return BoxResult::Pruned;
        }
        let center: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| l + (u - l) * 0.5).collect();
        if validate_witness(self.query, &center, 0.0).ok() == Some(WitnessStatus::Valid) {
            return BoxResult::Sat(center);
        }
        let (dim, width) = lower
            .iter()
            .zip(upper)
            .map(|(l, u)| u - l)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, w)| if w > best.1 { (i, w) } else { best });
        if width < resolution {
            return BoxResult::Unknown;
        }
        let mid = center[dim];
        let mut left_upper = upper.to_vec();
        left_upper[dim] = mid;
        let mut right_lower = lower.to_vec();
        right_lower[dim] = mid;
        BoxResult::Split(lower.to_vec(), left_upper, right_lower, upper.to_vec())
    }
}

/// Sound branch and bound over the input box with interval bound
/// propagation.
///
/// SAT answers carry a box center that validates exactly; UNSAT means
/// every box was pruned. Running out of splits, or boxes shrinking below
/// the resolution without being decided, gives ERROR "unknown". Boxes are
/// explored depth first, lower half first, in batches that may be examined
/// in parallel; the answer does not depend on the execution mode.
pub fn bnb_verify(query: &VerificationQuery, config: &BnbConfig) -> VerdictOutcome {
    let start = std::time::Instant::now();
    let problem = Problem::new(query);
    let (lower, upper): (Vec<f64>, Vec<f64>) =
        query.property().input_box().iter().map(|b| (b.lower, b.upper)).unzip();
    let mut stack = vec![(lower, upper)];
    let mut splits = 0usize;
    let mut undecided = 0usize;

    while !stack.is_empty() {
        let take = stack.len().min(BATCH);
        let batch: Vec<(Vec<f64>, Vec<f64>)> = stack.split_off(stack.len() - take).into_iter().rev().collect();
        let results = par::map(config.execution, &batch, |(l, u)| problem.examine(l, u, config.box_resolution));
        let mut children = Vec::new();
        for r in results {
            match r {
                BoxResult::Pruned => {}
                BoxResult::Sat(w) => return VerdictOutcome::sat(w).timed(start.elapsed()),
                BoxResult::Unknown => undecided += 1,
                BoxResult::Split(l1, u1, l2, u2) => {
                    splits += 1;
                    children.push((l1, u1));
                    children.push((l2, u2));
                }
            }
        }
        if splits > config.max_splits {
            return VerdictOutcome::error(format!("unknown: split budget of {} exhausted", config.max_splits))
                .timed(start.elapsed());
        }
        stack.extend(children.into_iter().rev());
    }
    if undecided > 0 {
        VerdictOutcome::error(format!("unknown: {undecided} box(es) below resolution left undecided"))
    } else {
        VerdictOutcome::unsat()
    }
    .timed(start.elapsed())
}
