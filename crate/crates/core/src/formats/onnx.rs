//! ONNX import and export for single-chain feed-forward models built from
//! `Gemm`, `MatMul`/`Add`, `Conv`, `Relu` and `Flatten`/`Reshape`.
//!
//! Tensors are NCHW with a batch dimension of 1. Exported parameters are
//! stored as doubles so that a round trip is exact; imports accept float
//! or double initializers.

use std::collections::{HashMap, HashSet};

use ndarray::{Array1, Array2, Array4};
use prost::Message;

use super::onnx_proto::*;
use crate::error::{Error, Result};
use crate::model::{Activation, ConvGeometry, ConvLayer, FcLayer, Layer, Network};

const OPSET: i64 = 13;
const IR_VERSION: i64 = 8;

fn value_info(name: &str, elem_type: i32, dims: &[usize]) -> ValueInfoProto {
    ValueInfoProto {
        name: name.to_string(),
        r#type: Some(TypeProto {
            tensor_type: Some(TypeProtoTensor {
                elem_type,
                shape: Some(TensorShapeProto {
                    dim: dims
                        .iter()
                        .map(|&d| Dimension {
                            dim_value: Some(d as i64),
                            dim_param: None,
                        })
                        .collect(),
                }),
            }),
        }),
        doc_string: String::new(),
    }
}

fn double_tensor(name: &str, dims: &[usize], data: impl IntoIterator<Item = f64>) -> TensorProto {
    TensorProto {
        name: name.to_string(),
        dims: dims.iter().map(|&d| d as i64).collect(),
        data_type: DOUBLE,
        double_data: data.into_iter().collect(),
        ..Default::default()
    }
}

fn ints_attr(name: &str, values: &[i64]) -> AttributeProto {
    AttributeProto {
        name: name.to_string(),
        r#type: ATTR_INTS,
        ints: values.to_vec(),
        ..Default::default()
    }
}

fn int_attr(name: &str, value: i64) -> AttributeProto {
    AttributeProto {
        name: name.to_string(),
        r#type: ATTR_INT,
        i: value,
        ..Default::default()
    }
}

fn node(op: &str, name: String, inputs: Vec<String>, output: String, attribute: Vec<AttributeProto>) -> NodeProto {
    NodeProto {
        input: inputs,
        output: vec![output],
        name,
        op_type: op.to_string(),
        attribute,
        ..Default::default()
    }
}

/// Serializes `network` as an ONNX model.
pub fn export_onnx(network: &Network) -> Vec<u8> {
    let mut nodes = Vec::new();
    let mut initializers = Vec::new();
    let input_dims: Vec<usize> = match network.layers().first() {
        Some(Layer::Convolutional(c)) => {
            let g = c.geometry();
            vec![1, g.in_channels, g.height, g.width]
        }
        _ => vec![1, network.input_dim()],
    };
    let mut image = input_dims.len() == 4;
    let mut current = "input".to_string();
    let last = network.depth();

    for (i, layer) in network.layers().iter().enumerate() {
        let pos = i + 1;
        let out_name = |suffix: &str| {
            if pos == last && suffix == "out" {
                "output".to_string()
            } else {
                format!("l{pos}_{suffix}")
            }
        };
        match layer {
            Layer::FullyConnected(fc) => {
                if image {
                    let flat = format!("l{pos}_flat");
                    nodes.push(node("Flatten", flat.clone(), vec![current], flat.clone(), vec![int_attr("axis", 1)]));
                    current = flat;
                    image = false;
                }
                let (w, b) = (format!("l{pos}_W"), format!("l{pos}_B"));
                initializers.push(double_tensor(&w, &[fc.fan_out(), fc.fan_in()], fc.weights().iter().copied()));
                initializers.push(double_tensor(&b, &[fc.fan_out()], fc.biases().iter().copied()));
                let out = if fc.activation() == Activation::Relu {
                    out_name("gemm")
                } else {
                    out_name("out")
                };
                nodes.push(node(
                    "Gemm",
                    format!("l{pos}_gemm"),
                    vec![current, w, b],
                    out.clone(),
                    vec![int_attr("transB", 1)],
                ));
                current = out;
            }
            Layer::Convolutional(conv) => {
                let g = *conv.geometry();
                if !image {
                    let shape = format!("l{pos}_shape");
                    initializers.push(TensorProto {
                        name: shape.clone(),
                        dims: vec![4],
                        data_type: INT64,
                        int64_data: vec![1, g.in_channels as i64, g.height as i64, g.width as i64],
                        ..Default::default()
                    });
                    let reshaped = format!("l{pos}_image");
                    nodes.push(node("Reshape", reshaped.clone(), vec![current, shape], reshaped.clone(), vec![]));
                    current = reshaped;
                    image = true;
                }
                let (w, b) = (format!("l{pos}_W"), format!("l{pos}_B"));
                initializers.push(double_tensor(
                    &w,
                    &[g.out_channels, g.in_channels, g.kernel, g.kernel],
                    conv.kernel().iter().copied(),
                ));
                initializers.push(double_tensor(&b, &[g.out_channels], conv.biases().iter().copied()));
                let out = format!("l{pos}_conv");
                let (k, s, p) = (g.kernel as i64, g.stride as i64, g.padding as i64);
                nodes.push(node(
                    "Conv",
                    out.clone(),
                    vec![current, w, b],
                    out.clone(),
                    vec![ints_attr("kernel_shape", &[k, k]), ints_attr("strides", &[s, s]), ints_attr("pads", &[p, p, p, p])],
                ));
                current = out;
            }
        }
        if layer.activation() == Activation::Relu {
            let out = format!("l{pos}_relu");
            nodes.push(node("Relu", out.clone(), vec![current], out.clone(), vec![]));
            current = out;
        }
    }

    let model = ModelProto {
        ir_version: IR_VERSION,
        opset_import: vec![OperatorSetIdProto {
            domain: String::new(),
            version: OPSET,
        }],
        producer_name: "delbug".into(),
        producer_version: env!("CARGO_PKG_VERSION").into(),
        graph: Some(GraphProto {
            node: nodes,
            name: "network".into(),
            initializer: initializers,
            input: vec![value_info("input", DOUBLE, &input_dims)],
            output: vec![value_info(&current, DOUBLE, &[1, network.output_dim()])],
            ..Default::default()
        }),
        ..Default::default()
    };
    model.encode_to_vec()
}

#[derive(Debug, Clone)]
struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn decode_tensor(t: &TensorProto) -> Result<Tensor> {
    if t.data_location != 0 {
        return Err(Error::UnsupportedModel(format!("tensor '{}' uses external data", t.name)));
    }
    let dims: Vec<usize> = t
        .dims
        .iter()
        .map(|&d| usize::try_from(d).map_err(|_| Error::ModelStructure(format!("negative dimension in '{}'", t.name))))
        .collect::<Result<_>>()?;
    let raw = &t.raw_data;
    let data: Vec<f64> = match t.data_type {
        FLOAT if !raw.is_empty() => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect(),
        FLOAT => t.float_data.iter().map(|&v| v as f64).collect(),
        DOUBLE if !raw.is_empty() => raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
        DOUBLE => t.double_data.clone(),
        INT64 if !raw.is_empty() => raw
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().expect("chunk of 8")) as f64)
            .collect(),
        INT64 => t.int64_data.iter().map(|&v| v as f64).collect(),
        other => {
            return Err(Error::UnsupportedModel(format!(
                "tensor '{}' has unsupported element type {other}",
                t.name
            )))
        }
    };
    let expected: usize = dims.iter().product();
    if data.len() != expected {
        return Err(Error::ModelStructure(format!(
            "tensor '{}' holds {} values for shape {:?}",
            t.name,
            data.len(),
            dims
        )));
    }
    Ok(Tensor { dims, data })
}

fn attr<'a>(n: &'a NodeProto, name: &str) -> Option<&'a AttributeProto> {
    n.attribute.iter().find(|a| a.name == name)
}

fn attr_int(n: &NodeProto, name: &str, default: i64) -> i64 {
    attr(n, name).map(|a| a.i).unwrap_or(default)
}

fn attr_float(n: &NodeProto, name: &str, default: f64) -> f64 {
    attr(n, name).map(|a| a.f as f64).unwrap_or(default)
}

fn attr_ints(n: &NodeProto, name: &str) -> Option<Vec<i64>> {
    attr(n, name).map(|a| a.ints.clone())
}

/// Layers under construction, with the shape of the current tensor
/// (batch dimension dropped).
struct Builder {
    layers: Vec<Layer>,
    shape: Vec<usize>,
    /// Whether the last layer can still absorb a bias (no ReLU applied yet).
    open: bool,
}

impl Builder {
    fn width(&self) -> usize {
        self.shape.iter().product()
    }

    fn push_fc(&mut self, weights: Array2<f64>, biases: Array1<f64>) -> Result<()> {
        if weights.ncols() != self.width() {
            return Err(Error::ModelStructure(format!(
                "linear layer expects {} inputs, tensor has {}",
                weights.ncols(),
                self.width()
            )));
        }
        self.shape = vec![weights.nrows()];
        self.layers.push(FcLayer::new(weights, biases, Activation::Linear)?.into());
        self.open = true;
        Ok(())
    }

    fn add_bias(&mut self, bias: &Tensor, sign: f64, op: &str) -> Result<()> {
        let width = self.width();
        let (Some(layer), true) = (self.layers.pop(), self.open) else {
            return Err(Error::UnsupportedModel(format!("{op} not following a linear layer")));
        };
        let per_channel;
        let offset = |i: usize| -> Result<f64> {
            match bias.data.len() {
                1 => Ok(bias.data[0]),
                n if n == width => Ok(bias.data[i]),
                n => Err(Error::UnsupportedModel(format!("{op} operand of {n} values for {width} neurons"))),
            }
        };
        let rebuilt: Layer = match layer {
            Layer::FullyConnected(fc) => {
                let mut b = fc.biases().clone();
                for (i, v) in b.iter_mut().enumerate() {
                    *v += sign * offset(i)?;
                }
                FcLayer::new(fc.weights().clone(), b, fc.activation())?.into()
            }
            Layer::Convolutional(conv) => {
                // only per-channel offsets keep the layer a convolution
                let channels = conv.geometry().out_channels;
                per_channel = bias.data.len() == channels || bias.data.len() == 1;
                if !per_channel {
                    return Err(Error::UnsupportedModel(format!("{op} with a non-channel offset after Conv")));
                }
                let mut b = conv.biases().clone();
                for (c, v) in b.iter_mut().enumerate() {
                    *v += sign * bias.data[if bias.data.len() == 1 { 0 } else { c }];
                }
                ConvLayer::new(*conv.geometry(), conv.kernel().clone(), b, conv.activation())?.into()
            }
        };
        self.layers.push(rebuilt);
        Ok(())
    }
}

/// Reads an ONNX model into a [`Network`].
pub fn import_onnx(bytes: &[u8]) -> Result<Network> {
    let model = ModelProto::decode(bytes).map_err(|e| Error::ModelStructure(format!("not an ONNX model: {e}")))?;
    let graph = model
        .graph
        .ok_or_else(|| Error::ModelStructure("model has no graph".into()))?;

    let mut constants: HashMap<String, Tensor> = HashMap::new();
    for t in &graph.initializer {
        constants.insert(t.name.clone(), decode_tensor(t)?);
    }
    for n in graph.node.iter().filter(|n| n.op_type == "Constant") {
        let t = attr(n, "value")
            .and_then(|a| a.t.as_ref())
            .ok_or_else(|| Error::UnsupportedModel("Constant without a tensor value".into()))?;
        let name = n
            .output
            .first()
            .ok_or_else(|| Error::ModelStructure("Constant node without output".into()))?;
        constants.insert(name.clone(), decode_tensor(t)?);
    }

    let inputs: Vec<&ValueInfoProto> = graph.input.iter().filter(|v| !constants.contains_key(&v.name)).collect();
    let [input] = inputs.as_slice() else {
        return Err(Error::ModelStructure(format!("expected one graph input, found {}", inputs.len())));
    };
    let mut dims: Vec<usize> = input
        .r#type
        .as_ref()
        .and_then(|t| t.tensor_type.as_ref())
        .and_then(|t| t.shape.as_ref())
        .map(|s| s.dim.iter().map(|d| d.dim_value.unwrap_or(1).max(1) as usize).collect())
        .ok_or_else(|| Error::ModelStructure("graph input has no shape".into()))?;
    if dims.len() > 1 && dims[0] == 1 {
        dims.remove(0);
    }
    let input_dim: usize = dims.iter().product();
    if input_dim == 0 {
        return Err(Error::ModelStructure("graph input is empty".into()));
    }

    let chain: Vec<&NodeProto> = graph.node.iter().filter(|n| n.op_type != "Constant").collect();
    let mut visited = HashSet::new();
    let mut builder = Builder {
        layers: Vec::new(),
        shape: dims,
        open: false,
    };
    let mut current = input.name.clone();

    loop {
        let consumers: Vec<usize> = chain
            .iter()
            .enumerate()
            .filter(|(_, n)| n.input.iter().any(|i| *i == current))
            .map(|(i, _)| i)
            .collect();
        let idx = match consumers.as_slice() {
            [] => break,
            [one] => *one,
            _ => return Err(Error::ModelStructure(format!("tensor '{current}' feeds several nodes"))),
        };
        if !visited.insert(idx) {
            return Err(Error::ModelStructure("graph contains a cycle".into()));
        }
        let n = chain[idx];
        let [out] = n.output.as_slice() else {
            return Err(Error::ModelStructure(format!("node '{}' must have one output", n.name)));
        };
        let operand = |k: usize| -> Result<&Tensor> {
            let name = n
                .input
                .get(k)
                .ok_or_else(|| Error::ModelStructure(format!("{} node is missing input {k}", n.op_type)))?;
            constants
                .get(name)
                .ok_or_else(|| Error::UnsupportedModel(format!("{} operand '{name}' is not a constant", n.op_type)))
        };
        let data_first = n.input.first() == Some(&current);
        match n.op_type.as_str() {
            "Gemm" => {
                if !data_first {
                    return Err(Error::UnsupportedModel("Gemm with constant first operand".into()));
                }
                if attr_int(n, "transA", 0) != 0 {
                    return Err(Error::UnsupportedModel("Gemm with transA=1".into()));
                }
                let b = operand(1)?;
                let [r, c] = b.dims[..] else {
                    return Err(Error::ModelStructure("Gemm weight must be 2-D".into()));
                };
                let raw = Array2::from_shape_vec((r, c), b.data.clone()).expect("size checked on decode");
                let alpha = attr_float(n, "alpha", 1.0);
                let beta = attr_float(n, "beta", 1.0);
                let w = if attr_int(n, "transB", 0) != 0 { raw } else { raw.reversed_axes() } * alpha;
                let mut bias = Array1::zeros(w.nrows());
                if n.input.len() > 2 && !n.input[2].is_empty() {
                    let c = operand(2)?;
                    for (i, v) in bias.iter_mut().enumerate() {
                        *v = beta
                            * match c.data.len() {
                                1 => c.data[0],
                                len if len == w.nrows() => c.data[i],
                                len => {
                                    return Err(Error::UnsupportedModel(format!("Gemm bias of {len} values")))
                                }
                            };
                    }
                }
                builder.push_fc(w.as_standard_layout().to_owned(), bias)?;
            }
            "MatMul" => {
                if !data_first {
                    return Err(Error::UnsupportedModel("MatMul with constant first operand".into()));
                }
                let b = operand(1)?;
                let [r, c] = b.dims[..] else {
                    return Err(Error::ModelStructure("MatMul weight must be 2-D".into()));
                };
                let w = Array2::from_shape_vec((r, c), b.data.clone())
                    .expect("size checked on decode")
                    .reversed_axes()
                    .as_standard_layout()
                    .to_owned();
                let zeros = Array1::zeros(c);
                builder.push_fc(w, zeros)?;
            }
            op @ ("Add" | "Sub") => {
                let other = n
                    .input
                    .iter()
                    .find(|i| **i != current)
                    .ok_or_else(|| Error::UnsupportedModel(format!("{op} of a tensor with itself")))?;
                if op == "Sub" && !data_first {
                    return Err(Error::UnsupportedModel("Sub with constant first operand".into()));
                }
                let t = constants
                    .get(other)
                    .ok_or_else(|| Error::UnsupportedModel(format!("{op} operand '{other}' is not a constant")))?;
                let sign = if op == "Sub" { -1.0 } else { 1.0 };
                builder.add_bias(t, sign, op)?;
            }
            "Conv" => {
                if !data_first {
                    return Err(Error::UnsupportedModel("Conv with constant first operand".into()));
                }
                let [c_in, h, w] = builder.shape[..] else {
                    return Err(Error::UnsupportedModel(format!(
                        "Conv on a tensor of shape {:?}; expected C x H x W",
                        builder.shape
                    )));
                };
                let kt = operand(1)?;
                let [c_out, kc, kh, kw] = kt.dims[..] else {
                    return Err(Error::ModelStructure("Conv weight must be 4-D".into()));
                };
                if kh != kw {
                    return Err(Error::UnsupportedModel("Conv with a non-square kernel".into()));
                }
                if kc != c_in || attr_int(n, "group", 1) != 1 {
                    return Err(Error::UnsupportedModel("grouped Conv".into()));
                }
                if let Some(a) = attr(n, "auto_pad") {
                    if !a.s.is_empty() && a.s != b"NOTSET" {
                        return Err(Error::UnsupportedModel("Conv with auto_pad".into()));
                    }
                }
                if attr_ints(n, "dilations").is_some_and(|d| d.iter().any(|&v| v != 1)) {
                    return Err(Error::UnsupportedModel("dilated Conv".into()));
                }
                let strides = attr_ints(n, "strides").unwrap_or_else(|| vec![1, 1]);
                let pads = attr_ints(n, "pads").unwrap_or_else(|| vec![0; 4]);
                if strides.len() != 2 || strides[0] != strides[1] {
                    return Err(Error::UnsupportedModel("Conv with asymmetric strides".into()));
                }
                if pads.len() != 4 || pads.iter().any(|&p| p != pads[0]) {
                    return Err(Error::UnsupportedModel("Conv with asymmetric padding".into()));
                }
                let geometry = ConvGeometry {
                    height: h,
                    width: w,
                    kernel: kh,
                    stride: strides[0].max(0) as usize,
                    padding: pads[0].max(0) as usize,
                    in_channels: c_in,
                    out_channels: c_out,
                };
                let kernel = Array4::from_shape_vec((c_out, c_in, kh, kw), kt.data.clone()).expect("size checked");
                let biases = if n.input.len() > 2 && !n.input[2].is_empty() {
                    let b = operand(2)?;
                    if b.data.len() != c_out {
                        return Err(Error::ModelStructure("Conv bias length mismatch".into()));
                    }
                    Array1::from(b.data.clone())
                } else {
                    Array1::zeros(c_out)
                };
                let layer = ConvLayer::new(geometry, kernel, biases, Activation::Linear)?;
                let (ho, wo) = layer.output_dims();
                builder.shape = vec![c_out, ho, wo];
                builder.layers.push(layer.into());
                builder.open = true;
            }
            "Relu" => {
                let layer = builder
                    .layers
                    .pop()
                    .filter(|l| l.activation() == Activation::Linear && builder.open)
                    .ok_or_else(|| Error::UnsupportedModel("Relu not following a linear layer".into()))?;
                let with_relu: Layer = match layer {
                    Layer::FullyConnected(l) => FcLayer::new(l.weights().clone(), l.biases().clone(), Activation::Relu)?.into(),
                    Layer::Convolutional(l) => {
                        ConvLayer::new(*l.geometry(), l.kernel().clone(), l.biases().clone(), Activation::Relu)?.into()
                    }
                };
                builder.layers.push(with_relu);
                builder.open = false;
            }
            "Flatten" => {
                builder.shape = vec![builder.width()];
            }
            "Reshape" => {
                let target = operand(1)?;
                let mut shape: Vec<i64> = target.data.iter().map(|&v| v as i64).collect();
                if shape.len() > 1 && shape[0] == 1 {
                    shape.remove(0);
                }
                let known: i64 = shape.iter().filter(|&&d| d > 0).product();
                let width = builder.width() as i64;
                let resolved: Vec<usize> = shape
                    .iter()
                    .map(|&d| if d == -1 && known > 0 { (width / known) as usize } else { d.max(0) as usize })
                    .collect();
                if resolved.iter().product::<usize>() as i64 != width {
                    return Err(Error::ModelStructure(format!("Reshape to {shape:?} changes element count")));
                }
                builder.shape = resolved;
            }
            "Identity" | "Dropout" => {}
            other => return Err(Error::UnsupportedModel(format!("operator '{other}'"))),
        }
        current = out.clone();
    }

    if visited.len() != chain.len() {
        return Err(Error::ModelStructure(format!(
            "{} node(s) are not on the input-to-output chain",
            chain.len() - visited.len()
        )));
    }
    if !graph.output.iter().any(|o| o.name == current) {
        return Err(Error::ModelStructure(format!(
            "chain ends at '{current}', which is not a graph output"
        )));
    }
    Network::new(input_dim, builder.layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn running_example_round_trip() {
        let net = fixtures::running_example_network();
        let back = import_onnx(&export_onnx(&net)).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.evaluate(&[5.0]).unwrap(), vec![5.0]);
        let widths: Vec<usize> = back.layers().iter().map(Layer::fan_out).collect();
        assert_eq!(widths, vec![3, 3, 1]);
    }

    #[test]
    fn identity_network_exports_one_gemm() {
        let id = FcLayer::new(Array2::eye(3), Array1::zeros(3), Activation::Linear).unwrap();
        let net = Network::new(3, vec![id.into()]).unwrap();
        let bytes = export_onnx(&net);
        let model = ModelProto::decode(bytes.as_slice()).unwrap();
        let graph = model.graph.unwrap();
        assert_eq!(graph.node.len(), 1);
        assert_eq!(graph.node[0].op_type, "Gemm");
        assert_eq!(import_onnx(&bytes).unwrap(), net);
    }

    #[test]
    fn conv_network_round_trip() {
        let net = fixtures::random_conv_network(2, 5, 3, 1);
        assert_eq!(import_onnx(&export_onnx(&net)).unwrap(), net);
    }

    fn float_tensor(name: &str, dims: &[i64], data: &[f32]) -> TensorProto {
        TensorProto {
            name: name.into(),
            dims: dims.to_vec(),
            data_type: FLOAT,
            raw_data: data.iter().flat_map(|v| v.to_le_bytes()).collect(),
            ..Default::default()
        }
    }

    fn model(nodes: Vec<NodeProto>, init: Vec<TensorProto>, in_dims: &[usize], out: &str, out_dim: usize) -> Vec<u8> {
        ModelProto {
            ir_version: IR_VERSION,
            graph: Some(GraphProto {
                node: nodes,
                initializer: init,
                input: vec![value_info("x", FLOAT, in_dims)],
                output: vec![value_info(out, FLOAT, &[1, out_dim])],
                ..Default::default()
            }),
            ..Default::default()
        }
        .encode_to_vec()
    }

    #[test]
    fn matmul_add_relu_chain_with_float_raw_data() {
        // x(1x2) @ W(2x2) + b, relu, @ V(2x1)
        let nodes = vec![
            node("MatMul", "m1".into(), vec!["x".into(), "W".into()], "h".into(), vec![]),
            node("Add", "a1".into(), vec!["h".into(), "b".into()], "hb".into(), vec![]),
            node("Relu", "r1".into(), vec!["hb".into()], "hr".into(), vec![]),
            node("MatMul", "m2".into(), vec!["hr".into(), "V".into()], "y".into(), vec![]),
        ];
        let init = vec![
            float_tensor("W", &[2, 2], &[1.0, 2.0, 3.0, 4.0]),
            float_tensor("b", &[2], &[0.5, -100.0]),
            float_tensor("V", &[2, 1], &[1.0, 1.0]),
        ];
        let net = import_onnx(&model(nodes, init, &[1, 2], "y", 1)).unwrap();
        assert_eq!(net.depth(), 2);
        // h = (x0 + 3 x1 + 0.5, 2 x0 + 4 x1 - 100)
        assert_eq!(net.evaluate(&[1.0, 1.0]).unwrap(), vec![4.5]);
    }

    #[test]
    fn unsupported_operator_is_named() {
        let nodes = vec![
            node("Gemm", "g".into(), vec!["x".into(), "W".into()], "h".into(), vec![]),
            node("Sigmoid", "s".into(), vec!["h".into()], "y".into(), vec![]),
        ];
        let init = vec![float_tensor("W", &[1, 1], &[1.0])];
        match import_onnx(&model(nodes, init, &[1, 1], "y", 1)) {
            Err(Error::UnsupportedModel(msg)) => assert!(msg.contains("Sigmoid")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_nodes_are_structure_errors() {
        let nodes = vec![
            node("Gemm", "g".into(), vec!["x".into(), "W".into()], "y".into(), vec![]),
            node("Relu", "orphan".into(), vec!["z".into()], "w".into(), vec![]),
        ];
        let init = vec![float_tensor("W", &[1, 1], &[1.0])];
        assert!(matches!(
            import_onnx(&model(nodes, init, &[1, 1], "y", 1)),
            Err(Error::ModelStructure(_))
        ));
        let nodes = vec![node("Gemm", "g".into(), vec!["x".into(), "W".into()], "h".into(), vec![])];
        let init = vec![float_tensor("W", &[1, 1], &[1.0])];
        assert!(matches!(
            import_onnx(&model(nodes, init, &[1, 1], "y", 1)),
            Err(Error::ModelStructure(_))
        ));
        assert!(matches!(import_onnx(b"\xff\xff\xff"), Err(Error::ModelStructure(_))));
    }
}
