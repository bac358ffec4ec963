//! Canonical JSON encoding of queries, used for checkpoints and tests.
//!
//! Field order is fixed by the struct definitions and every float is
//! written with 17 significant digits, so identical queries serialize to
//! identical bytes and parsing restores them exactly.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Activation, Bounds, Comparison, ConvGeometry, ConvLayer, FcLayer, Layer, LinearConstraint, Network, Property,
    VerificationQuery,
};

pub const FORMAT_TAG: &str = "delbug-query/1";

/// A query plus free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryDocument {
    pub query: VerificationQuery,
    pub metadata: BTreeMap<String, String>,
}

impl QueryDocument {
    pub fn new(query: VerificationQuery) -> Self {
        QueryDocument {
            query,
            metadata: BTreeMap::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDoc {
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    network: Option<NetworkDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    network_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    property: Option<PropertyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    property_path: Option<PathBuf>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    input_dim: usize,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum ActivationDoc {
    Relu,
    None,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum LayerDoc {
    FullyConnected {
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        activation: ActivationDoc,
    },
    Convolutional {
        height: usize,
        width: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
        in_channels: usize,
        out_channels: usize,
        /// Row-major over (out_channel, in_channel, row, column).
        kernel: Vec<f64>,
        biases: Vec<f64>,
        activation: ActivationDoc,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropertyDoc {
    input_box: Vec<[f64; 2]>,
    output_dim: usize,
    output_region: Vec<Vec<ConstraintDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintDoc {
    coeffs: Vec<f64>,
    op: String,
    rhs: f64,
}

impl From<Activation> for ActivationDoc {
    fn from(a: Activation) -> Self {
        match a {
            Activation::Relu => ActivationDoc::Relu,
            Activation::Linear => ActivationDoc::None,
        }
    }
}

impl From<ActivationDoc> for Activation {
    fn from(a: ActivationDoc) -> Self {
        match a {
            ActivationDoc::Relu => Activation::Relu,
            ActivationDoc::None => Activation::Linear,
        }
    }
}

fn network_doc(net: &Network) -> NetworkDoc {
    let layers = net
        .layers()
        .iter()
        .map(|layer| match layer {
            Layer::FullyConnected(fc) => LayerDoc::FullyConnected {
                weights: fc.weights().rows().into_iter().map(|r| r.to_vec()).collect(),
                biases: fc.biases().to_vec(),
                activation: fc.activation().into(),
            },
            Layer::Convolutional(c) => {
                let g = c.geometry();
                LayerDoc::Convolutional {
                    height: g.height,
                    width: g.width,
                    kernel_size: g.kernel,
                    stride: g.stride,
                    padding: g.padding,
                    in_channels: g.in_channels,
                    out_channels: g.out_channels,
                    kernel: c.kernel().iter().copied().collect(),
                    biases: c.biases().to_vec(),
                    activation: c.activation().into(),
                }
            }
        })
        .collect();
    NetworkDoc {
        input_dim: net.input_dim(),
        layers,
    }
}

fn network_from_doc(doc: NetworkDoc) -> Result<Network> {
    let layers = doc
        .layers
        .into_iter()
        .map(|l| -> Result<Layer> {
            Ok(match l {
                LayerDoc::FullyConnected {
                    weights,
                    biases,
                    activation,
                } => {
                    if weights.is_empty() {
                        return Err(Error::Schema("fully connected layer without weights".into()));
                    }
                    FcLayer::from_rows(&weights, &biases, activation.into())?.into()
                }
                LayerDoc::Convolutional {
                    height,
                    width,
                    kernel_size,
                    stride,
                    padding,
                    in_channels,
                    out_channels,
                    kernel,
                    biases,
                    activation,
                } => {
                    let geometry = ConvGeometry {
                        height,
                        width,
                        kernel: kernel_size,
                        stride,
                        padding,
                        in_channels,
                        out_channels,
                    };
                    let shape = (out_channels, in_channels, kernel_size, kernel_size);
                    let kernel = Array4::from_shape_vec(shape, kernel)
                        .map_err(|_| Error::Schema(format!("kernel does not have shape {shape:?}")))?;
                    ConvLayer::new(geometry, kernel, Array1::from(biases), activation.into())?.into()
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(doc.input_dim, layers)
}

fn property_doc(p: &Property) -> PropertyDoc {
    PropertyDoc {
        input_box: p.input_box().iter().map(|b| [b.lower, b.upper]).collect(),
        output_dim: p.output_dim(),
        output_region: p
            .output_region()
            .iter()
            .map(|conj| {
                conj.iter()
                    .map(|c| ConstraintDoc {
                        coeffs: c.coeffs.clone(),
                        op: match c.cmp {
                            Comparison::Le => "<=".into(),
                            Comparison::Ge => ">=".into(),
                        },
                        rhs: c.rhs,
                    })
                    .collect()
            })
            .collect(),
    }
}

fn property_from_doc(doc: PropertyDoc) -> Result<Property> {
    let region = doc
        .output_region
        .into_iter()
        .map(|conj| {
            conj.into_iter()
                .map(|c| {
                    let cmp = match c.op.as_str() {
                        "<=" => Comparison::Le,
                        ">=" => Comparison::Ge,
                        other => return Err(Error::Schema(format!("unknown comparison '{other}'"))),
                    };
                    Ok(LinearConstraint::new(c.coeffs, cmp, c.rhs))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Property::new(
        doc.input_box.iter().map(|[lo, hi]| Bounds::new(*lo, *hi)).collect(),
        doc.output_dim,
        region,
    )
}

/// Compact output with floats rendered as `d.dddddddddddddddde±x`.
struct CanonicalFloats;

impl serde_json::ser::Formatter for CanonicalFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

fn render(doc: &FileDoc) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFloats);
    doc.serialize(&mut ser).expect("in-memory serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

fn schema_error(e: serde_json::Error) -> Error {
    if e.is_syntax() || e.is_eof() {
        Error::parse(e.line(), e.column(), e.to_string())
    } else {
        Error::Schema(e.to_string())
    }
}

/// Serializes a document with the network and property inline.
pub fn to_json_string(doc: &QueryDocument) -> String {
    render(&FileDoc {
        format: FORMAT_TAG.into(),
        network: Some(network_doc(doc.query.network())),
        network_path: None,
        property: Some(property_doc(doc.query.property())),
        property_path: None,
        metadata: doc.metadata.clone(),
    })
}

fn resolve(base: Option<&Path>, rel: &Path) -> PathBuf {
    match base {
        Some(dir) if rel.is_relative() => dir.join(rel),
        _ => rel.to_path_buf(),
    }
}

fn from_json_impl(text: &str, base: Option<&Path>) -> Result<QueryDocument> {
    let doc: FileDoc = serde_json::from_str(text).map_err(schema_error)?;
    if doc.format != FORMAT_TAG {
        return Err(Error::Schema(format!("unsupported format '{}'", doc.format)));
    }
    let network = match (doc.network, doc.network_path) {
        (Some(n), None) => network_from_doc(n)?,
        (None, Some(path)) => {
            let path = resolve(base, &path);
            let bytes = std::fs::read(&path)?;
            if path.extension().is_some_and(|e| e == "json") {
                let n: NetworkDoc = serde_json::from_slice(&bytes).map_err(schema_error)?;
                network_from_doc(n)?
            } else {
                super::onnx::import_onnx(&bytes)?
            }
        }
        _ => return Err(Error::Schema("exactly one of 'network' and 'network_path' is required".into())),
    };
    let property = match (doc.property, doc.property_path) {
        (Some(p), None) => property_from_doc(p)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(resolve(base, &path))?;
            super::vnnlib::parse_vnnlib(&text)?
        }
        _ => return Err(Error::Schema("exactly one of 'property' and 'property_path' is required".into())),
    };
    Ok(QueryDocument {
        query: VerificationQuery::new(network, property)?,
        metadata: doc.metadata,
    })
}

/// Parses a document; `network_path`/`property_path` are resolved against
/// the current directory.
pub fn from_json_str(text: &str) -> Result<QueryDocument> {
    from_json_impl(text, None)
}

pub fn read_query(path: &Path) -> Result<QueryDocument> {
    let text = std::fs::read_to_string(path)?;
    from_json_impl(&text, path.parent())
}

pub fn write_query(path: &Path, doc: &QueryDocument) -> Result<()> {
    std::fs::write(path, to_json_string(doc))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use crate::fixtures;

    #[test]
    fn running_example_round_trip() {
        let mut doc = QueryDocument::new(fixtures::running_example_query());
        doc.metadata.insert("source".into(), "fig1".into());
        let text = to_json_string(&doc);
        assert!(text.contains("\"type\":\"fully_connected\""));
        assert!(text.contains("1.0000000000000000e1"));
        assert_eq!(from_json_str(&text).unwrap(), doc);
        assert_eq!(to_json_string(&from_json_str(&text).unwrap()), text);
    }

    #[test]
    fn awkward_floats_survive() {
        let fc = FcLayer::new(
            Array2::from_shape_vec((1, 3), vec![0.1 + 0.2, -1e-300, f64::MAX]).unwrap(),
            Array1::from(vec![std::f64::consts::PI]),
            Activation::Linear,
        )
        .unwrap();
        let net = Network::new(3, vec![fc.into()]).unwrap();
        let prop = Property::new(vec![Bounds::new(-1.0, 1.0); 3], 1, vec![vec![]]).unwrap();
        let doc = QueryDocument::new(VerificationQuery::new(net, prop).unwrap());
        assert_eq!(from_json_str(&to_json_string(&doc)).unwrap(), doc);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let doc = QueryDocument::new(fixtures::running_example_query());
        let text = to_json_string(&doc).replace("[[5.0000000000000000e0,1.0000000000000000e1]]", "[[0.0,1.0],[0.0,1.0]]");
        assert!(matches!(from_json_str(&text), Err(Error::InvalidProperty(_) | Error::InvalidInput(_))));
    }

    #[test]
    fn schema_violations_are_errors() {
        assert!(matches!(from_json_str("{\"format\":\"delbug-query/1\"}"), Err(Error::Schema(_))));
        assert!(matches!(from_json_str("{\"format\":"), Err(Error::Parse { .. })));
        let text = to_json_string(&QueryDocument::new(fixtures::running_example_query()));
        let extra = text.replacen("{", "{\"surprise\":1,", 1);
        assert!(matches!(from_json_str(&extra), Err(Error::Schema(_))));
    }

    #[test]
    fn paths_resolve_relative_to_the_document() {
        let dir = tempfile::tempdir().unwrap();
        let q = fixtures::running_example_query();
        std::fs::write(dir.path().join("n.onnx"), super::super::onnx::export_onnx(q.network())).unwrap();
        std::fs::write(dir.path().join("p.vnnlib"), super::super::vnnlib::emit_vnnlib(q.property())).unwrap();
        let path = dir.path().join("q.json");
        std::fs::write(
            &path,
            r#"{"format":"delbug-query/1","network_path":"n.onnx","property_path":"p.vnnlib"}"#,
        )
        .unwrap();
        assert_eq!(read_query(&path).unwrap().query, q);
    }
}
