//! Query serialization: VNN-LIB properties, ONNX networks and a canonical
//! JSON document.

pub mod json;
pub mod onnx;
mod onnx_proto;
pub mod sexpr;
pub mod vnnlib;

use std::path::Path;

pub use json::{from_json_str, read_query, to_json_string, write_query, QueryDocument};
pub use onnx::{export_onnx, import_onnx};
pub use vnnlib::{emit_vnnlib, parse_vnnlib, parse_vnnlib_files};

use crate::error::Result;
use crate::model::{Network, VerificationQuery};

pub fn read_onnx(path: &Path) -> Result<Network> {
    import_onnx(&std::fs::read(path)?)
}

/// Loads a query from an ONNX network and one or more VNN-LIB files.
pub fn load_query<P: AsRef<Path>>(network: &Path, properties: &[P]) -> Result<VerificationQuery> {
    let net = read_onnx(network)?;
    let texts = properties
        .iter()
        .map(|p| std::fs::read_to_string(p.as_ref()))
        .collect::<std::io::Result<Vec<_>>>()?;
    let property = parse_vnnlib_files(&texts)?;
    VerificationQuery::new(net, property)
}

/// Writes the verifier-facing pair `network.onnx` and `property.vnnlib`.
pub fn write_query_pair(dir: &Path, query: &VerificationQuery) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("network.onnx"), export_onnx(query.network()))?;
    std::fs::write(dir.join("property.vnnlib"), emit_vnnlib(query.property()))?;
    Ok(())
}
