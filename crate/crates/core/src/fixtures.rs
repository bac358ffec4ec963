//! Ready-made networks and queries for tests, benchmarks and demos.

use ndarray::{Array1, Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    Activation, Bounds, Comparison, ConvGeometry, ConvLayer, FcLayer, Layer, LinearConstraint,
    Network, Property, VerificationQuery,
};

/// The four-layer example network: one input, two hidden ReLU layers of
/// three neurons, one output. Evaluates to 5 at input 5.
pub fn running_example_network() -> Network {
    let l1 = FcLayer::from_rows(
        &[vec![-5.0], vec![-0.5], vec![-1.0]],
        &[10.0, -2.5, 7.0],
        Activation::Relu,
    )
    .unwrap();
    let l2 = FcLayer::from_rows(
        &[
            vec![0.8, -1.0, -2.0],
            vec![0.0, 0.5, 0.0],
            vec![2.0, 0.5, -1.0],
        ],
        &[8.0, 2.0, 0.0],
        Activation::Relu,
    )
    .unwrap();
    let l3 = FcLayer::from_rows(&[vec![0.25, 2.0, 0.5]], &[0.0], Activation::Linear).unwrap();
    Network::new(1, vec![l1.into(), l2.into(), l3.into()]).unwrap()
}

/// `5 <= x <= 10` and `5 <= y <= 10`.
pub fn running_example_property() -> Property {
    Property::new(
        vec![Bounds::new(5.0, 10.0)],
        1,
        vec![vec![
            LinearConstraint::bound(1, 0, Comparison::Ge, 5.0),
            LinearConstraint::bound(1, 0, Comparison::Le, 10.0),
        ]],
    )
    .unwrap()
}

pub fn running_example_query() -> VerificationQuery {
    VerificationQuery::new(running_example_network(), running_example_property()).unwrap()
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-scale..scale))
}

fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.gen_range(-scale..scale))
}

/// A fully connected ReLU network with He-uniform weights and small biases.
pub fn random_fc_network(input_dim: usize, hidden: &[usize], output_dim: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers: Vec<Layer> = Vec::with_capacity(hidden.len() + 1);
    let mut fan_in = input_dim;
    for (i, &width) in hidden.iter().chain(std::iter::once(&output_dim)).enumerate() {
        let scale = (6.0 / fan_in as f64).sqrt();
        let act = if i < hidden.len() {
            Activation::Relu
        } else {
            Activation::Linear
        };
        let w = uniform_matrix(&mut rng, width, fan_in, scale);
        let b = uniform_vector(&mut rng, width, 0.1);
        layers.push(FcLayer::new(w, b, act).unwrap().into());
        fan_in = width;
    }
    Network::new(input_dim, layers).unwrap()
}

/// A random convolutional layer with the given geometry.
pub fn random_conv_layer(geometry: ConvGeometry, activation: Activation, rng: &mut ChaCha8Rng) -> ConvLayer {
    let g = geometry;
    let scale = (6.0 / (g.in_channels * g.kernel * g.kernel) as f64).sqrt();
    let kernel = Array4::from_shape_simple_fn(
        (g.out_channels, g.in_channels, g.kernel, g.kernel),
        || rng.gen_range(-scale..scale),
    );
    let biases = uniform_vector(rng, g.out_channels, 0.1);
    ConvLayer::new(geometry, kernel, biases, activation).unwrap()
}

/// Conv (ReLU) -> conv (ReLU) -> FC (ReLU) -> FC output network over a
/// `c x h x w` image.
pub fn random_conv_network(channels: usize, side: usize, output_dim: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g1 = ConvGeometry {
        height: side,
        width: side,
        kernel: 3,
        stride: 1,
        padding: 1,
        in_channels: channels,
        out_channels: 2,
    };
    let c1 = random_conv_layer(g1, Activation::Relu, &mut rng);
    let g2 = ConvGeometry {
        height: side,
        width: side,
        kernel: 3,
        stride: 2,
        padding: 0,
        in_channels: 2,
        out_channels: 2,
    };
    let c2 = random_conv_layer(g2, Activation::Relu, &mut rng);
    let flat = c2.fan_out();
    let hidden = 8;
    let f1 = FcLayer::new(
        uniform_matrix(&mut rng, hidden, flat, (6.0 / flat as f64).sqrt()),
        uniform_vector(&mut rng, hidden, 0.1),
        Activation::Relu,
    )
    .unwrap();
    let f2 = FcLayer::new(
        uniform_matrix(&mut rng, output_dim, hidden, (6.0 / hidden as f64).sqrt()),
        uniform_vector(&mut rng, output_dim, 0.1),
        Activation::Linear,
    )
    .unwrap();
    Network::new(
        channels * side * side,
        vec![c1.into(), c2.into(), f1.into(), f2.into()],
    )
    .unwrap()
}

/// A satisfiable query whose output region is a margin-wide slab around the
/// network's value at the input-box center, so the center is a witness.
///
/// The region is `y_0 - y_1 >= d - margin` where `d` is the difference at the
/// center (or `y_0 >= y_0(center) - margin` for single-output networks).
pub fn centered_sat_query(network: Network, half_width: f64, margin: f64) -> VerificationQuery {
    let n_in = network.input_dim();
    let n_out = network.output_dim();
    let input_box = vec![Bounds::new(-half_width, half_width); n_in];
    let center = vec![0.0; n_in];
    let y = network.evaluate(&center).unwrap();
    let mut coeffs = vec![0.0; n_out];
    coeffs[0] = 1.0;
    let mut target = y[0];
    if n_out > 1 {
        coeffs[1] = -1.0;
        target -= y[1];
    }
    let region = vec![vec![LinearConstraint::new(
        coeffs,
        Comparison::Ge,
        target - margin,
    )]];
    let property = Property::new(input_box, n_out, region).unwrap();
    VerificationQuery::new(network, property).unwrap()
}

/// 5 inputs, six hidden ReLU layers of 50, 5 outputs: 310 neurons in 8
/// layers, paired with a satisfiable [`centered_sat_query`] property.
pub fn acas_like_query(seed: u64) -> VerificationQuery {
    let net = random_fc_network(5, &[50; 6], 5, seed);
    centered_sat_query(net, 0.5, 0.05)
}

/// Random property over the given arities with 0 to 3 disjuncts of 1 to 3
/// constraints each.
pub fn random_property(input_dim: usize, output_dim: usize, rng: &mut ChaCha8Rng) -> Property {
    let input_box = (0..input_dim)
        .map(|_| {
            let lo: f64 = rng.gen_range(-5.0..5.0);
            let w: f64 = rng.gen_range(0.0..3.0);
            Bounds::new(lo, lo + w)
        })
        .collect();
    let disjuncts = rng.gen_range(0..4);
    let region = (0..disjuncts)
        .map(|_| {
            (0..rng.gen_range(1..4))
                .map(|_| {
                    let coeffs = (0..output_dim)
                        .map(|_| {
                            if rng.gen_bool(0.6) {
                                rng.gen_range(-2.0..2.0)
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let cmp = if rng.gen_bool(0.5) {
                        Comparison::Le
                    } else {
                        Comparison::Ge
                    };
                    LinearConstraint::new(coeffs, cmp, rng.gen_range(-10.0..10.0))
                })
                .collect()
        })
        .collect();
    Property::new(input_box, output_dim, region).unwrap()
}
