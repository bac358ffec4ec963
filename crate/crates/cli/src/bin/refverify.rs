//! Branch-and-bound reference verifier speaking the result-file protocol.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use delbug::formats;
use delbug::par::Execution;
use delbug::refverify::{bnb_verify, BnbConfig, DEFAULT_BOX_RESOLUTION, DEFAULT_MAX_SPLITS};
use delbug::verifier::VerdictOutcome;

#[derive(Parser)]
#[command(name = "refverify", version, about = "Sound branch-and-bound verifier")]
struct Args {
    network: PathBuf,
    property: PathBuf,
    result: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BOX_RESOLUTION)]
    box_resolution: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_SPLITS)]
    max_splits: usize,
    #[arg(long)]
    sequential: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = BnbConfig {
        box_resolution: args.box_resolution,
        max_splits: args.max_splits,
        execution: if args.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let (outcome, code) = match formats::load_query(&args.network, &[&args.property]) {
        Ok(q) => (bnb_verify(&q, &config), ExitCode::SUCCESS),
        Err(e) => (VerdictOutcome::error(e.to_string()), ExitCode::FAILURE),
    };
    let mut text = outcome.to_result_text();
    if !outcome.raw_output.is_empty() {
        text.push_str(&format!("; {}\n", outcome.raw_output.replace('\n', " ")));
    }
    if let Err(e) = std::fs::write(&args.result, text) {
        eprintln!("refverify: cannot write {}: {e}", args.result.display());
        return ExitCode::FAILURE;
    }
    code
}
