//! Built-in verifiers: a sound branch-and-bound verifier to act as an
//! oracle and a fault-injected wrapper around it to act as the verifier
//! under test.

mod bnb;
mod faulty;

pub use bnb::{bnb_verify, BnbConfig, DEFAULT_BOX_RESOLUTION, DEFAULT_MAX_SPLITS};
pub use faulty::{faulty_verify, FaultMode, FaultSpec};

use crate::model::VerificationQuery;
use crate::verifier::{VerdictOutcome, Verifier};

#[derive(Debug, Clone, Default)]
pub struct BnbVerifier {
    pub config: BnbConfig,
}

impl Verifier for BnbVerifier {
    fn name(&self) -> &str {
        "bnb"
    }

    fn verify(&self, query: &VerificationQuery) -> VerdictOutcome {
        bnb_verify(query, &self.config)
    }
}

#[derive(Debug, Clone)]
pub struct FaultyVerifier {
    pub spec: FaultSpec,
    pub config: BnbConfig,
}

impl FaultyVerifier {
    pub fn new(spec: FaultSpec) -> Self {
        FaultyVerifier {
            spec,
            config: BnbConfig::default(),
        }
    }
}

impl Verifier for FaultyVerifier {
    fn name(&self) -> &str {
        "faulty"
    }

    fn verify(&self, query: &VerificationQuery) -> VerdictOutcome {
        faulty_verify(&self.spec, query, &self.config)
    }
}
