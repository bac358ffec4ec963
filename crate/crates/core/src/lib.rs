//! Delta debugging for neural-network verifiers.
//!
//! Given a verification query on which a verifier misbehaves (it disagrees
//! with one or more oracle verifiers, or returns a counter-example that does
//! not hold), [`engine::reduce`] repeatedly shrinks the query's network with
//! witness-preserving rewrites from [`simplify`] for as long as the
//! misbehavior persists.

pub mod engine;
pub mod error;
pub mod fixtures;
pub mod formats;
pub mod model;
pub mod par;
pub mod refverify;
pub mod simplify;
pub mod verifier;

pub use error::{Error, Result};
pub use model::{
    Activation, Bounds, Comparison, ConvGeometry, ConvLayer, EvaluationTrace, FcLayer, Layer,
    LinearConstraint, Network, Property, VerificationQuery,
};
pub use simplify::SimplificationStep;
pub use verifier::{Verdict, VerdictOutcome, Verifier, WitnessStatus};
