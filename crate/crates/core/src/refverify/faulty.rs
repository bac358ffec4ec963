use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bnb::{bnb_verify, BnbConfig};
use crate::error::{Error, Result};
use crate::model::VerificationQuery;
use crate::verifier::{Verdict, VerdictOutcome};

/// How the fault-injected verifier lies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FaultMode {
    /// Claims SAT, with the box midpoint as witness, on UNSAT queries.
    FlipToSat,
    /// Claims UNSAT on SAT queries.
    FlipToUnsat,
    /// Moves one coordinate of a true witness outside the input box.
    CorruptWitness,
    /// Claims UNSAT on SAT queries with at least `threshold` neurons.
    LieAboveSize { threshold: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultSpec {
    pub mode: FaultMode,
    pub seed: u64,
}

impl FaultSpec {
    pub fn new(mode: FaultMode, seed: u64) -> Result<Self> {
        if let FaultMode::LieAboveSize { threshold: 0 } = mode {
            return Err(Error::InvalidInput("size threshold must be at least 1".into()));
        }
        Ok(FaultSpec { mode, seed })
    }
}

/// Answers with [`bnb_verify`] and then applies the fault. ERROR answers
/// from the ground truth pass through untouched.
pub fn faulty_verify(spec: &FaultSpec, query: &VerificationQuery, config: &BnbConfig) -> VerdictOutcome {
    let start = std::time::Instant::now();
    let truth = bnb_verify(query, config);
    let property = query.property();
    let lied = match (spec.mode, truth.verdict) {
        (FaultMode::FlipToSat, Verdict::Unsat) => VerdictOutcome::sat(property.input_center()),
        (FaultMode::FlipToUnsat, Verdict::Sat) => VerdictOutcome::unsat(),
        (FaultMode::LieAboveSize { threshold }, Verdict::Sat) if query.network().size() >= threshold => {
            VerdictOutcome::unsat()
        }
        (FaultMode::CorruptWitness, Verdict::Sat) => {
            let mut w = truth.witness.clone().expect("SAT outcomes carry witnesses");
            let i = ChaCha8Rng::seed_from_u64(spec.seed).gen_range(0..w.len());
            let b = property.input_box()[i];
            let width = if b.width() > 0.0 { b.width() } else { 1.0 };
            w[i] = b.upper + width;
            VerdictOutcome::sat(w)
        }
        _ => truth,
    };
    lied.timed(start.elapsed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::verifier::{validate_witness, WitnessStatus};

    #[test]
    fn flips_on_running_example() {
        let q = fixtures::running_example_query();
        let cfg = BnbConfig::default();
        let flip = FaultSpec::new(FaultMode::FlipToUnsat, 0).unwrap();
        assert_eq!(faulty_verify(&flip, &q, &cfg).verdict, Verdict::Unsat);
        let flip = FaultSpec::new(FaultMode::FlipToSat, 0).unwrap();
        assert_eq!(faulty_verify(&flip, &q, &cfg).verdict, Verdict::Sat);
    }

    #[test]
    fn corrupt_witness_leaves_the_box() {
        let q = fixtures::running_example_query();
        let spec = FaultSpec::new(FaultMode::CorruptWitness, 9).unwrap();
        let out = faulty_verify(&spec, &q, &BnbConfig::default());
        assert_eq!(out.verdict, Verdict::Sat);
        let status = validate_witness(&q, out.witness.as_ref().unwrap(), 0.0).unwrap();
        assert_eq!(status, WitnessStatus::OutsideInputRegion);
        assert_eq!(faulty_verify(&spec, &q, &BnbConfig::default()).witness, out.witness);
    }

    #[test]
    fn lie_depends_on_size() {
        let q = fixtures::running_example_query();
        let cfg = BnbConfig::default();
        let at = FaultSpec::new(FaultMode::LieAboveSize { threshold: 8 }, 0).unwrap();
        assert_eq!(faulty_verify(&at, &q, &cfg).verdict, Verdict::Unsat);
        let above = FaultSpec::new(FaultMode::LieAboveSize { threshold: 9 }, 0).unwrap();
        assert_eq!(faulty_verify(&above, &q, &cfg).verdict, Verdict::Sat);
        assert!(FaultSpec::new(FaultMode::LieAboveSize { threshold: 0 }, 0).is_err());
    }
}
