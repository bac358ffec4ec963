use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use delbug::engine::{self, EngineConfig, Mode, Reduction};
use delbug::formats::{self, QueryDocument};
use delbug::par::Execution;
use delbug::simplify::{PairApproach, StrategyConfig};
use delbug::verifier::{validate_witness, ExternalVerifier, Verifier, VerifierConfig};
use delbug::{Error, Layer, Network, VerificationQuery};

const EXIT_NO_DISCREPANCY: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NO_PROGRESS: u8 = 3;

#[derive(Parser)]
#[command(name = "delbug", version, about = "Shrink verification queries that expose verifier bugs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a query while the faulty verifier keeps misbehaving on it.
    Reduce(ReduceArgs),
    /// Evaluate a network at a point.
    Eval(PointArgs),
    /// Classify a witness as valid, outside-input-region or output-violation.
    CheckWitness(WitnessArgs),
    /// Convert between a JSON query and an ONNX + VNN-LIB pair.
    Convert(ConvertArgs),
    /// Print network size and a layer table.
    Info(InputArgs),
}

#[derive(Args)]
struct InputArgs {
    /// ONNX network (or a JSON query document).
    #[arg(long)]
    network: Option<PathBuf>,
    /// VNN-LIB property; repeat to union several files.
    #[arg(long)]
    property: Vec<PathBuf>,
    /// JSON query document.
    #[arg(long, conflicts_with_all = ["network", "property"])]
    query: Option<PathBuf>,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Coordinates, separated by spaces or commas.
    #[arg(required = true, allow_negative_numbers = true)]
    point: Vec<String>,
}

#[derive(Args)]
struct WitnessArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
}

#[derive(Args)]
struct ConvertArgs {
    #[command(flatten)]
    input: InputArgs,
    /// `*.json` writes a query document; anything else is a directory
    /// receiving `network.onnx` and `property.vnnlib`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Command template of the verifier under test.
    #[arg(long)]
    faulty: String,
    /// Command template of an oracle verifier; repeatable.
    #[arg(long)]
    oracle: Vec<String>,
    /// Accept only invalid witnesses of the faulty verifier; no oracle.
    #[arg(long, conflicts_with = "oracle")]
    single: bool,
    /// Overall time budget in seconds.
    #[arg(long, default_value_t = 3600.0)]
    budget: f64,
    /// Per-invocation verifier timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value_t = engine::DEFAULT_WITNESS_TOL)]
    witness_tol: f64,
    /// Neuron-pair ordering, 1 to 5.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u8).range(1..=5))]
    approach: u8,
    /// Directory for checkpoints, the trace and the final query.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run verifier invocations one at a time.
    #[arg(long)]
    sequential: bool,
    /// Print trace records and the summary as JSON lines.
    #[arg(long)]
    json: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Precondition(_) => EXIT_NO_DISCREPANCY,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

fn load_query(args: &InputArgs) -> Result<VerificationQuery, Failure> {
    match (&args.query, &args.network) {
        (Some(q), _) => Ok(formats::read_query(q)?.query),
        (None, Some(n)) if is_json(n) && args.property.is_empty() => Ok(formats::read_query(n)?.query),
        (None, Some(n)) => {
            if args.property.is_empty() {
                return Err(usage("--property is required with an ONNX --network"));
            }
            Ok(formats::load_query(n, &args.property)?)
        }
        (None, None) => Err(usage("either --query or --network/--property is required")),
    }
}

fn load_network(args: &InputArgs) -> Result<Network, Failure> {
    match (&args.query, &args.network) {
        (None, Some(n)) if !is_json(n) => Ok(formats::read_onnx(n)?),
        _ => Ok(load_query(args)?.into_parts().0),
    }
}

fn parse_point(parts: &[String]) -> Result<Vec<f64>, Failure> {
    parts
        .iter()
        .flat_map(|p| p.split([',', ' ']))
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| usage(format!("'{s}' is not a number"))))
        .collect()
}

fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn cmd_eval(args: PointArgs) -> Result<(), Failure> {
    let net = load_network(&args.input)?;
    let y = net.evaluate(&parse_point(&args.point)?)?;
    println!("{}", format_vector(&y));
    Ok(())
}

fn cmd_check_witness(args: WitnessArgs) -> Result<(), Failure> {
    let q = load_query(&args.point.input)?;
    let status = validate_witness(&q, &parse_point(&args.point.point)?, args.tol)?;
    println!("{status}");
    Ok(())
}

fn cmd_convert(args: ConvertArgs) -> Result<(), Failure> {
    let q = load_query(&args.input)?;
    if is_json(&args.out) {
        formats::write_query(&args.out, &QueryDocument::new(q))?;
    } else {
        formats::write_query_pair(&args.out, &q)?;
    }
    Ok(())
}

fn cmd_info(args: InputArgs) -> Result<(), Failure> {
    let net = load_network(&args)?;
    println!("neurons: {}, layers: {}", net.size(), net.depth() + 1);
    println!("{:>5}  {:<15}  {:>7}  {:>7}  activation", "layer", "kind", "fan-in", "fan-out");
    println!("{:>5}  {:<15}  {:>7}  {:>7}  -", 0, "input", "-", net.input_dim());
    for (i, layer) in net.layers().iter().enumerate() {
        let kind = match layer {
            Layer::FullyConnected(_) => "fully-connected".to_string(),
            Layer::Convolutional(c) => {
                let g = c.geometry();
                format!("conv k{}s{}p{}", g.kernel, g.stride, g.padding)
            }
        };
        println!(
            "{:>5}  {:<15}  {:>7}  {:>7}  {}",
            i + 1,
            kind,
            layer.fan_in(),
            layer.fan_out(),
            layer.activation().name()
        );
    }
    Ok(())
}

fn seconds(value: f64, flag: &str) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(value).map_err(|_| usage(format!("--{flag} must be a non-negative number of seconds")))
}

fn external(name: &str, template: &str, timeout: Duration) -> Result<Box<dyn Verifier>, Failure> {
    let config = VerifierConfig::new(name, template)?.with_timeout(timeout);
    Ok(Box::new(ExternalVerifier::new(config)?))
}

fn print_summary(r: &Reduction, json: bool) {
    if json {
        for rec in &r.trace.records {
            println!("{}", serde_json::to_string(rec).expect("records serialize"));
        }
        let summary = serde_json::json!({
            "size_before": r.initial_size,
            "size_after": r.final_size(),
            "reduction_percent": r.reduction_percent(),
            "accepted_steps": r.trace.successes().count(),
            "attempts": r.trace.records.len(),
            "budget_exhausted": r.budget_exhausted,
        });
        println!("{summary}");
    } else {
        println!("size before: {}", r.initial_size);
        println!("size after: {}", r.final_size());
        println!("reduction: {:.0}%", r.reduction_percent());
        println!("accepted steps: {}", r.trace.successes().count());
        println!("attempts: {}", r.trace.records.len());
    }
}

fn cmd_reduce(args: ReduceArgs) -> Result<(), Failure> {
    if !args.single && args.oracle.is_empty() {
        return Err(usage("at least one --oracle is required unless --single is given"));
    }
    let query = load_query(&args.input)?;
    let timeout = seconds(args.timeout, "timeout")?;
    let faulty = external("faulty", &args.faulty, timeout)?;
    let oracles = args
        .oracle
        .iter()
        .enumerate()
        .map(|(i, t)| external(&format!("oracle-{i}"), t, timeout))
        .collect::<Result<Vec<_>, _>>()?;
    let config = EngineConfig {
        global_budget: seconds(args.budget, "budget")?,
        per_invocation_timeout: timeout,
        mode: if args.single { Mode::Single } else { Mode::Dual },
        witness_tol: args.witness_tol,
        strategy: StrategyConfig {
            approach: PairApproach::from_number(args.approach).expect("range checked by clap"),
            ..StrategyConfig::default()
        },
        checkpoint_dir: args.out.clone(),
        execution: if args.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let reduction = match engine::reduce(&config, faulty.as_ref(), &oracles, &query) {
        Ok(r) => r,
        Err(e @ Error::Precondition(_)) => {
            println!("{e}");
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(out) = &args.out {
        let dir = out.join("final");
        formats::write_query_pair(&dir, &reduction.query)?;
        let mut doc = QueryDocument::new(reduction.query.clone());
        doc.metadata.insert("initial_size".into(), reduction.initial_size.to_string());
        formats::write_query(&dir.join("query.json"), &doc)?;
    }
    print_summary(&reduction, args.json);
    if reduction.budget_exhausted && reduction.trace.successes().next().is_none() {
        return Err(Failure {
            code: EXIT_NO_PROGRESS,
            message: "time budget exhausted before any simplification succeeded".into(),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reduce(a) => cmd_reduce(a),
        Command::Eval(a) => cmd_eval(a),
        Command::CheckWitness(a) => cmd_check_witness(a),
        Command::Convert(a) => cmd_convert(a),
        Command::Info(a) => cmd_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("delbug: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
