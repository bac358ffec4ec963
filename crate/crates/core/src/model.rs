//! Networks, properties and verification queries.
//!
//! All values here are immutable once constructed: constructors validate the
//! structural invariants and every transformation elsewhere in the crate
//! builds a new [`Network`] instead of editing one in place.
//!
//! Layer values follow the usual feed-forward recurrence: the pre-activation
//! vector of layer `i` is `W_i * a_{i-1} + B_i`, and the post-activation
//! vector `a_i` applies the layer's activation elementwise. Layer positions
//! are numbered from 1 (position 0 is the input layer), so a network with `n`
//! stored layers has hidden layers `1..n` and output layer `n`.

use ndarray::{Array1, Array2, Array4};

use crate::error::{Error, Result};

/// Activation applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    /// No activation (identity).
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "none",
        }
    }
}

/// A fully connected layer. `weights` has one row per output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer {
    weights: Array2<f64>,
    biases: Array1<f64>,
    activation: Activation,
}

impl FcLayer {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::InvalidLayer(format!(
                "weight matrix has {} rows but {} biases",
                weights.nrows(),
                biases.len()
            )));
        }
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::InvalidLayer("empty weight matrix".into()));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidLayer("non-finite parameter".into()));
        }
        Ok(FcLayer {
            weights,
            biases,
            activation,
        })
    }

    /// Builds a layer from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], biases: &[f64], activation: Activation) -> Result<Self> {
        let ncols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidLayer("ragged weight rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let weights = Array2::from_shape_vec((rows.len(), ncols), flat)
            .map_err(|e| Error::InvalidLayer(e.to_string()))?;
        FcLayer::new(weights, Array1::from(biases.to_vec()), activation)
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    fn affine(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weights.dot(x) + &self.biases
    }
}

/// Geometry of a convolutional layer: square kernel, equal stride and
/// padding along both spatial axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvGeometry {
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.kernel < 1 || self.stride < 1 {
            return Err(Error::InvalidLayer(format!(
                "kernel size and stride must be positive (k={}, s={})",
                self.kernel, self.stride
            )));
        }
        if self.in_channels < 1 || self.out_channels < 1 {
            return Err(Error::InvalidLayer("channel counts must be positive".into()));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidLayer("empty input image".into()));
        }
        if self.height + 2 * self.padding < self.kernel || self.width + 2 * self.padding < self.kernel {
            return Err(Error::InvalidLayer(format!(
                "kernel {} does not fit padded input {}x{} (p={})",
                self.kernel, self.height, self.width, self.padding
            )));
        }
        Ok(())
    }

    /// Output feature-map height and width.
    pub fn output_dims(&self) -> Result<(usize, usize)> {
        self.validate()?;
        let ho = (self.height + 2 * self.padding - self.kernel) / self.stride + 1;
        let wo = (self.width + 2 * self.padding - self.kernel) / self.stride + 1;
        Ok((ho, wo))
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    pub fn fan_out(&self) -> usize {
        // validated on construction of every ConvLayer
        let (ho, wo) = self.output_dims().unwrap_or((0, 0));
        self.out_channels * ho * wo
    }
}

/// A 2-D convolution over a channel-major flattened input
/// (`index = c*h*w + i*w + j`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    geometry: ConvGeometry,
    /// Shape `(out_channels, in_channels, k, k)`.
    kernel: Array4<f64>,
    biases: Array1<f64>,
    activation: Activation,
}

impl ConvLayer {
    pub fn new(
        geometry: ConvGeometry,
        kernel: Array4<f64>,
        biases: Array1<f64>,
        activation: Activation,
    ) -> Result<Self> {
        geometry.validate()?;
        let expected = (
            geometry.out_channels,
            geometry.in_channels,
            geometry.kernel,
            geometry.kernel,
        );
        if kernel.dim() != expected {
            return Err(Error::InvalidLayer(format!(
                "kernel shape {:?} does not match geometry {:?}",
                kernel.dim(),
                expected
            )));
        }
        if biases.len() != geometry.out_channels {
            return Err(Error::InvalidLayer(format!(
                "{} biases for {} output channels",
                biases.len(),
                geometry.out_channels
            )));
        }
        if kernel.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidLayer("non-finite parameter".into()));
        }
        Ok(ConvLayer {
            geometry,
            kernel,
            biases,
            activation,
        })
    }

    pub fn geometry(&self) -> &ConvGeometry {
        &self.geometry
    }

    pub fn kernel(&self) -> &Array4<f64> {
        &self.kernel
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_dims(&self) -> (usize, usize) {
        self.geometry
            .output_dims()
            .expect("geometry validated on construction")
    }

    pub fn fan_in(&self) -> usize {
        self.geometry.fan_in()
    }

    pub fn fan_out(&self) -> usize {
        self.geometry.fan_out()
    }

    fn affine(&self, x: &Array1<f64>) -> Array1<f64> {
        let g = &self.geometry;
        let (ho, wo) = self.output_dims();
        let (h, w, k) = (g.height as isize, g.width as isize, g.kernel);
        let mut out = Array1::zeros(self.fan_out());
        for co in 0..g.out_channels {
            for oi in 0..ho {
                for oj in 0..wo {
                    let mut acc = self.biases[co];
                    let top = (oi * g.stride) as isize - g.padding as isize;
                    let left = (oj * g.stride) as isize - g.padding as isize;
                    for ci in 0..g.in_channels {
                        for ki in 0..k {
                            let row = top + ki as isize;
                            if row < 0 || row >= h {
                                continue;
                            }
                            for kj in 0..k {
                                let col = left + kj as isize;
                                if col < 0 || col >= w {
                                    continue;
                                }
                                let idx = ci * (g.height * g.width) + (row * w + col) as usize;
                                acc += self.kernel[[co, ci, ki, kj]] * x[idx];
                            }
                        }
                    }
                    out[co * ho * wo + oi * wo + oj] = acc;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    FullyConnected(FcLayer),
    Convolutional(ConvLayer),
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        match self {
            Layer::FullyConnected(l) => l.fan_in(),
            Layer::Convolutional(l) => l.fan_in(),
        }
    }

    pub fn fan_out(&self) -> usize {
        match self {
            Layer::FullyConnected(l) => l.fan_out(),
            Layer::Convolutional(l) => l.fan_out(),
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            Layer::FullyConnected(l) => l.activation(),
            Layer::Convolutional(l) => l.activation(),
        }
    }

    pub fn is_convolutional(&self) -> bool {
        matches!(self, Layer::Convolutional(_))
    }

    pub fn as_fc(&self) -> Option<&FcLayer> {
        match self {
            Layer::FullyConnected(l) => Some(l),
            Layer::Convolutional(_) => None,
        }
    }

    pub fn as_conv(&self) -> Option<&ConvLayer> {
        match self {
            Layer::Convolutional(l) => Some(l),
            Layer::FullyConnected(_) => None,
        }
    }

    /// The affine part of the layer (its pre-activation values).
    pub fn affine(&self, x: &Array1<f64>) -> Array1<f64> {
        match self {
            Layer::FullyConnected(l) => l.affine(x),
            Layer::Convolutional(l) => l.affine(x),
        }
    }
}

impl From<FcLayer> for Layer {
    fn from(l: FcLayer) -> Self {
        Layer::FullyConnected(l)
    }
}

impl From<ConvLayer> for Layer {
    fn from(l: ConvLayer) -> Self {
        Layer::Convolutional(l)
    }
}

/// Pre- and post-activation values of every stored layer for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationTrace {
    pub pre_activations: Vec<Array1<f64>>,
    pub post_activations: Vec<Array1<f64>>,
}

impl EvaluationTrace {
    /// Pre-activation values of layer position `t` (1-based).
    pub fn pre(&self, t: usize) -> &Array1<f64> {
        &self.pre_activations[t - 1]
    }

    pub fn output(&self) -> &Array1<f64> {
        self.pre_activations
            .last()
            .expect("a network has at least one layer")
    }
}

/// A feed-forward network. The last layer is fully connected without
/// activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidNetwork("input dimension must be positive".into()));
        }
        let Some(last) = layers.last() else {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        };
        match last {
            Layer::FullyConnected(l) if l.activation() == Activation::Linear => {}
            _ => {
                return Err(Error::InvalidNetwork(
                    "output layer must be fully connected without activation".into(),
                ))
            }
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.fan_in() != width {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} expects {} inputs but receives {}",
                    i + 1,
                    layer.fan_in(),
                    width
                )));
            }
            width = layer.fan_out();
        }
        Ok(Network { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::fan_out).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Layer at 1-based position `t`.
    pub fn layer(&self, t: usize) -> Option<&Layer> {
        t.checked_sub(1).and_then(|i| self.layers.get(i))
    }

    /// Number of stored (non-input) layers; the output layer has this position.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Total neuron count, input and output layers included. A neuron's
    /// pre- and post-activation values count once.
    pub fn size(&self) -> usize {
        self.input_dim + self.layers.iter().map(Layer::fan_out).sum::<usize>()
    }

    /// Widest hidden or output layer.
    pub fn max_layer_width(&self) -> usize {
        self.layers.iter().map(Layer::fan_out).max().unwrap_or(0)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::InvalidInput(format!(
                "expected {} inputs, got {}",
                self.input_dim,
                input.len()
            )));
        }
        Ok(())
    }

    /// The network output for `input`.
    pub fn evaluate(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = Array1::from(input.to_vec());
        for layer in &self.layers {
            let act = layer.activation();
            x = layer.affine(&x).mapv_into(|v| act.apply(v));
        }
        Ok(x.to_vec())
    }

    pub fn evaluate_trace(&self, input: &[f64]) -> Result<EvaluationTrace> {
        self.check_input(input)?;
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut post_activations = Vec::with_capacity(self.layers.len());
        let mut x = Array1::from(input.to_vec());
        for layer in &self.layers {
            let pre = layer.affine(&x);
            let act = layer.activation();
            x = pre.mapv(|v| act.apply(v));
            pre_activations.push(pre);
            post_activations.push(x.clone());
        }
        Ok(EvaluationTrace {
            pre_activations,
            post_activations,
        })
    }

    /// Returns a copy with layers at 1-based positions `first..=last`
    /// replaced by `replacement`.
    pub fn splice(&self, first: usize, last: usize, replacement: Vec<Layer>) -> Result<Network> {
        if first == 0 || last < first || last > self.layers.len() {
            return Err(Error::InvalidStep(format!(
                "layer range {first}..={last} out of bounds"
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len() - (last - first + 1) + replacement.len());
        layers.extend_from_slice(&self.layers[..first - 1]);
        layers.extend(replacement);
        layers.extend_from_slice(&self.layers[last..]);
        Network::new(self.input_dim, layers)
    }
}

/// Closed interval bound on one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Self {
        Bounds { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Le,
    Ge,
}

/// `coeffs · y  (<= | >=)  rhs` over the network outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub cmp: Comparison,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<f64>, cmp: Comparison, rhs: f64) -> Self {
        LinearConstraint { coeffs, cmp, rhs }
    }

    /// Single-variable bound `y_index cmp rhs` over `dim` outputs.
    pub fn bound(dim: usize, index: usize, cmp: Comparison, rhs: f64) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[index] = 1.0;
        LinearConstraint { coeffs, cmp, rhs }
    }

    pub fn lhs(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().zip(y).map(|(a, v)| a * v).sum()
    }

    pub fn holds(&self, y: &[f64], tol: f64) -> bool {
        let lhs = self.lhs(y);
        match self.cmp {
            Comparison::Le => lhs <= self.rhs + tol,
            Comparison::Ge => lhs >= self.rhs - tol,
        }
    }
}

/// A verification property: an input box and an output region given as a
/// disjunction of conjunctions of linear constraints. An empty disjunction
/// is the empty region; a disjunct with no constraints is the whole space.
#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    input_box: Vec<Bounds>,
    output_dim: usize,
    output_region: Vec<Vec<LinearConstraint>>,
}

impl Property {
    pub fn new(
        input_box: Vec<Bounds>,
        output_dim: usize,
        output_region: Vec<Vec<LinearConstraint>>,
    ) -> Result<Self> {
        if input_box.is_empty() {
            return Err(Error::InvalidProperty("no input bounds".into()));
        }
        for (i, b) in input_box.iter().enumerate() {
            if !(b.lower.is_finite() && b.upper.is_finite()) {
                return Err(Error::InvalidProperty(format!("input {i} has a non-finite bound")));
            }
            if b.lower > b.upper {
                return Err(Error::InvalidProperty(format!(
                    "input {i} has lower bound {} above upper bound {}",
                    b.lower, b.upper
                )));
            }
        }
        if output_dim == 0 {
            return Err(Error::InvalidProperty("output dimension must be positive".into()));
        }
        for c in output_region.iter().flatten() {
            if c.coeffs.len() != output_dim {
                return Err(Error::InvalidProperty(format!(
                    "constraint over {} outputs in a property with {} outputs",
                    c.coeffs.len(),
                    output_dim
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidProperty("non-finite constraint".into()));
            }
        }
        Ok(Property {
            input_box,
            output_dim,
            output_region,
        })
    }

    pub fn input_box(&self) -> &[Bounds] {
        &self.input_box
    }

    pub fn input_dim(&self) -> usize {
        self.input_box.len()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn output_region(&self) -> &[Vec<LinearConstraint>] {
        &self.output_region
    }

    pub fn input_center(&self) -> Vec<f64> {
        self.input_box.iter().map(Bounds::center).collect()
    }

    /// Whether `point` lies in the input box, each interval widened by `eps`.
    pub fn input_contains(&self, point: &[f64], eps: f64) -> Result<bool> {
        if point.len() != self.input_box.len() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, property has {} inputs",
                point.len(),
                self.input_box.len()
            )));
        }
        Ok(point
            .iter()
            .zip(&self.input_box)
            .all(|(x, b)| *x >= b.lower - eps && *x <= b.upper + eps))
    }

    /// Whether `output` lies in the output region, each inequality relaxed
    /// by `tol`.
    pub fn output_satisfies(&self, output: &[f64], tol: f64) -> Result<bool> {
        if output.len() != self.output_dim {
            return Err(Error::InvalidInput(format!(
                "output has {} values, property has {} outputs",
                output.len(),
                self.output_dim
            )));
        }
        Ok(self
            .output_region
            .iter()
            .any(|conj| conj.iter().all(|c| c.holds(output, tol))))
    }
}

/// A network together with the property to check on it.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationQuery {
    network: Network,
    property: Property,
}

impl VerificationQuery {
    pub fn new(network: Network, property: Property) -> Result<Self> {
        if network.input_dim() != property.input_dim() {
            return Err(Error::InvalidInput(format!(
                "network has {} inputs, property bounds {}",
                network.input_dim(),
                property.input_dim()
            )));
        }
        if network.output_dim() != property.output_dim() {
            return Err(Error::InvalidInput(format!(
                "network has {} outputs, property constrains {}",
                network.output_dim(),
                property.output_dim()
            )));
        }
        Ok(VerificationQuery { network, property })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn property(&self) -> &Property {
        &self.property
    }

    /// Same property, different network.
    pub fn with_network(&self, network: Network) -> Result<Self> {
        VerificationQuery::new(network, self.property.clone())
    }

    pub fn into_parts(self) -> (Network, Property) {
        (self.network, self.property)
    }
}
