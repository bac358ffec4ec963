//! Fault-injected verifier speaking the result-file protocol.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use delbug::formats;
use delbug::refverify::{faulty_verify, BnbConfig, FaultMode, FaultSpec};
use delbug::verifier::VerdictOutcome;

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    FlipToSat,
    FlipToUnsat,
    CorruptWitness,
    LieAboveSize,
}

#[derive(Parser)]
#[command(name = "faultyverify", version, about = "Branch-and-bound verifier with an injected fault")]
struct Args {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Neuron count from which `lie-above-size` lies.
    #[arg(long, required_if_eq("mode", "lie-above-size"))]
    threshold: Option<usize>,
    network: PathBuf,
    property: PathBuf,
    result: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mode = match args.mode {
        ModeArg::FlipToSat => FaultMode::FlipToSat,
        ModeArg::FlipToUnsat => FaultMode::FlipToUnsat,
        ModeArg::CorruptWitness => FaultMode::CorruptWitness,
        ModeArg::LieAboveSize => FaultMode::LieAboveSize {
            threshold: args.threshold.unwrap_or(1),
        },
    };
    let spec = match FaultSpec::new(mode, args.seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("faultyverify: {e}");
            return ExitCode::from(2);
        }
    };
    let (outcome, code) = match formats::load_query(&args.network, &[&args.property]) {
        Ok(q) => (faulty_verify(&spec, &q, &BnbConfig::default()), ExitCode::SUCCESS),
        Err(e) => (VerdictOutcome::error(e.to_string()), ExitCode::FAILURE),
    };
    if let Err(e) = std::fs::write(&args.result, outcome.to_result_text()) {
        eprintln!("faultyverify: cannot write {}: {e}", args.result.display());
        return ExitCode::FAILURE;
    }
    code
}
