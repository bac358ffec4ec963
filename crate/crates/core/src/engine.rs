//! The reduction loop.
//!
//! [`reduce`] repeatedly asks [`simplify_once`] for a smaller query on which
//! the faulty verifier still misbehaves, as judged by
//! [`success_simplification`], until no step succeeds or the time budget
//! runs out.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{self, QueryDocument};
use crate::model::VerificationQuery;
use crate::par::{self, Execution};
use crate::simplify::{strategy_attempts_with, SimplificationStep, StrategyConfig};
use crate::verifier::{validate_witness, Verdict, VerdictOutcome, Verifier, WitnessStatus, DEFAULT_INVOCATION_TIMEOUT};

pub const DEFAULT_WITNESS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Compare against oracle verifiers as well as checking witnesses.
    #[default]
    Dual,
    /// Only the faulty verifier's invalid witnesses count.
    Single,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub global_budget: Duration,
    /// Applied to external verifiers by whoever constructs them.
    pub per_invocation_timeout: Duration,
    pub mode: Mode,
    pub witness_tol: f64,
    pub strategy: StrategyConfig,
    pub checkpoint_dir: Option<PathBuf>,
    pub execution: Execution,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            global_budget: Duration::from_secs(3600),
            per_invocation_timeout: DEFAULT_INVOCATION_TIMEOUT,
            mode: Mode::Dual,
            witness_tol: DEFAULT_WITNESS_TOL,
            strategy: StrategyConfig::default(),
            checkpoint_dir: None,
            execution: Execution::default(),
        }
    }
}

/// One attempted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub step: SimplificationStep,
    pub applicable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faulty: Option<Verdict>,
    #[serde(default)]
    pub oracles: Vec<Verdict>,
    pub success: bool,
    pub size_before: usize,
    pub size_after: usize,
    /// Seconds.
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub records: Vec<AttemptRecord>,
}

impl ReductionTrace {
    pub fn successes(&self) -> impl Iterator<Item = &AttemptRecord> {
        self.records.iter().filter(|r| r.success)
    }
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub query: VerificationQuery,
    pub trace: ReductionTrace,
    pub initial_size: usize,
    pub budget_exhausted: bool,
    /// The witness the last accepted step was computed from.
    pub witness: Vec<f64>,
}

impl Reduction {
    pub fn final_size(&self) -> usize {
        self.query.network().size()
    }

    /// Percentage of neurons removed, `0.0..=100.0`.
    pub fn reduction_percent(&self) -> f64 {
        100.0 * (self.initial_size - self.final_size()) as f64 / self.initial_size as f64
    }
}

/// Whether the verdicts on `query` show the faulty verifier misbehaving:
///
/// - it answered SAT with a witness outside the input box, or
/// - it answered SAT with a witness whose output misses the output region, or
/// - in dual mode, every oracle answered SAT or UNSAT, they all agree, and
///   the faulty verifier answered the other definite verdict.
///
/// ERROR and TIMEOUT answers never count as disagreement.
pub fn success_simplification(
    faulty: &VerdictOutcome,
    oracles: &[VerdictOutcome],
    query: &VerificationQuery,
    tol: f64,
    mode: Mode,
) -> bool {
    if faulty.verdict == Verdict::Sat {
        if let Some(w) = &faulty.witness {
            match validate_witness(query, w, tol) {
                Ok(WitnessStatus::OutsideInputRegion | WitnessStatus::OutputViolation) | Err(_) => return true,
                Ok(WitnessStatus::Valid) => {}
            }
        }
    }
    if mode == Mode::Single || oracles.is_empty() || !faulty.verdict.is_definite() {
        return false;
    }
    let first = oracles[0].verdict;
    first.is_definite() && oracles.iter().all(|o| o.verdict == first) && faulty.verdict != first
}

struct Runner<'a> {
    config: &'a EngineConfig,
    faulty: &'a dyn Verifier,
    oracles: &'a [Box<dyn Verifier>],
}

struct Verdicts {
    faulty: VerdictOutcome,
    oracles: Vec<VerdictOutcome>,
}

impl Runner<'_> {
    fn run(&self, query: &VerificationQuery) -> Verdicts {
        let oracles: &[Box<dyn Verifier>] = match self.config.mode {
            Mode::Dual => self.oracles,
            Mode::Single => &[],
        };
        let exec = self.config.execution;
        let (faulty, oracles) = par::join(
            exec,
            || self.faulty.verify(query),
            || par::map(exec, oracles, |o| o.verify(query)),
        );
        Verdicts { faulty, oracles }
    }

    fn success(&self, v: &Verdicts, query: &VerificationQuery) -> bool {
        success_simplification(&v.faulty, &v.oracles, query, self.config.witness_tol, self.config.mode)
    }

    /// A witness to drive the next round of steps: a valid oracle witness
    /// if there is one, otherwise the faulty verifier's.
    fn witness(&self, v: &Verdicts, query: &VerificationQuery) -> Option<Vec<f64>> {
        v.oracles
            .iter()
            .filter(|o| o.verdict == Verdict::Sat)
            .filter_map(|o| o.witness.as_ref())
            .find(|w| validate_witness(query, w, self.config.witness_tol).ok() == Some(WitnessStatus::Valid))
            .or(if v.faulty.verdict == Verdict::Sat {
                v.faulty.witness.as_ref()
            } else {
                None
            })
            .cloned()
    }
}

fn describe(v: &Verdicts) -> String {
    let oracles: Vec<String> = v.oracles.iter().map(|o| o.verdict.to_string()).collect();
    if oracles.is_empty() {
        format!("faulty verifier {}", v.faulty.verdict)
    } else {
        format!("faulty verifier {}, oracle(s) {}", v.faulty.verdict, oracles.join(", "))
    }
}

struct Checkpoints {
    dir: PathBuf,
    trace: File,
}

impl Checkpoints {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Checkpoints {
            dir: dir.to_path_buf(),
            trace: File::create(dir.join("trace.jsonl"))?,
        })
    }

    fn record(&mut self, r: &AttemptRecord) -> Result<()> {
        let line = serde_json::to_string(r).map_err(|e| Error::Schema(e.to_string()))?;
        writeln!(self.trace, "{line}")?;
        self.trace.flush()?;
        Ok(())
    }

    fn save(&self, index: usize, query: &VerificationQuery, step: Option<SimplificationStep>) -> Result<()> {
        let dir = self.dir.join(format!("step_{index:04}"));
        formats::write_query_pair(&dir, query)?;
        let mut doc = QueryDocument::new(query.clone());
        doc.metadata.insert("size".into(), query.network().size().to_string());
        if let Some(s) = step {
            doc.metadata.insert("step".into(), s.to_string());
        }
        formats::write_query(&dir.join("query.json"), &doc)
    }
}

/// Outcome of one pass over the attempt list.
pub struct Progress {
    pub query: VerificationQuery,
    pub witness: Vec<f64>,
    pub step: SimplificationStep,
}

/// Tries the strategy's steps in order and returns the first candidate on
/// which the misbehavior persists, or `None` when every attempt failed or
/// `deadline` passed. Attempts are appended to `trace`.
fn simplify_once(
    runner: &Runner<'_>,
    query: &VerificationQuery,
    witness: &[f64],
    deadline: Option<Instant>,
    trace: &mut ReductionTrace,
    mut sink: Option<&mut Checkpoints>,
) -> Result<Option<Progress>> {
    let network = query.network();
    let size_before = network.size();
    for step in strategy_attempts_with(network, witness, &runner.config.strategy)? {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok(None);
        }
        let start = Instant::now();
        let mut record = AttemptRecord {
            step,
            applicable: false,
            faulty: None,
            oracles: Vec::new(),
            success: false,
            size_before,
            size_after: size_before,
            wall_time: 0.0,
            note: None,
        };
        let candidate = step
            .apply(network, witness)
            .and_then(|n| query.with_network(n));
        let mut progress = None;
        match candidate {
            Err(e) => record.note = Some(e.to_string()),
            Ok(candidate) => {
                record.applicable = true;
                record.size_after = candidate.network().size();
                let v = runner.run(&candidate);
                record.faulty = Some(v.faulty.verdict);
                record.oracles = v.oracles.iter().map(|o| o.verdict).collect();
                record.success = runner.success(&v, &candidate);
                if record.success {
                    let witness = runner.witness(&v, &candidate).unwrap_or_else(|| witness.to_vec());
                    progress = Some(Progress {
                        query: candidate,
                        witness,
                        step,
                    });
                }
            }
        }
        record.wall_time = start.elapsed().as_secs_f64();
        if let Some(sink) = sink.as_deref_mut() {
            sink.record(&record)?;
        }
        trace.records.push(record);
        if progress.is_some() {
            return Ok(progress);
        }
    }
    Ok(None)
}

/// Shrinks `query` while the faulty verifier keeps misbehaving on it.
///
/// Fails with [`Error::Precondition`] when the initial query shows no
/// misbehavior. The returned query is re-verified; should the misbehavior
/// not reproduce, earlier accepted queries are tried in reverse order.
pub fn reduce(
    config: &EngineConfig,
    faulty: &dyn Verifier,
    oracles: &[Box<dyn Verifier>],
    query: &VerificationQuery,
) -> Result<Reduction> {
    let start = Instant::now();
    if config.mode == Mode::Dual && oracles.is_empty() {
        return Err(Error::Precondition("dual mode needs at least one oracle verifier".into()));
    }
    let runner = Runner {
        config,
        faulty,
        oracles,
    };
    let initial = runner.run(query);
    if !runner.success(&initial, query) {
        return Err(Error::Precondition(format!(
            "the initial query shows no discrepancy: {}",
            describe(&initial)
        )));
    }
    let mut witness = runner
        .witness(&initial, query)
        .unwrap_or_else(|| query.property().input_center());

    let mut sink = config.checkpoint_dir.as_deref().map(Checkpoints::open).transpose()?;
    if let Some(s) = &sink {
        s.save(0, query, None)?;
    }
    let deadline = start.checked_add(config.global_budget);
    let mut trace = ReductionTrace::default();
    let mut accepted = vec![(query.clone(), witness.clone())];
    let budget_exhausted;

    loop {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            budget_exhausted = true;
            break;
        }
        let current = &accepted.last().expect("initial query is kept").0;
        let Some(p) = simplify_once(&runner, current, &witness, deadline, &mut trace, sink.as_mut())? else {
            budget_exhausted = deadline.is_some_and(|d| Instant::now() >= d);
            break;
        };
        log::info!(
            "{} accepted: {} -> {} neurons",
            p.step,
            current.network().size(),
            p.query.network().size()
        );
        if let Some(s) = &sink {
            s.save(accepted.len(), &p.query, Some(p.step))?;
        }
        witness = p.witness.clone();
        accepted.push((p.query, p.witness));
    }

    while accepted.len() > 1 {
        let q = &accepted.last().expect("non-empty").0;
        if runner.success(&runner.run(q), q) {
            break;
        }
        log::warn!("misbehavior did not reproduce on the {}-neuron query; backing off", q.network().size());
        accepted.pop();
    }
    let (final_query, witness) = accepted.pop().expect("initial query is kept");
    Ok(Reduction {
        query: final_query,
        trace,
        initial_size: query.network().size(),
        budget_exhausted,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::refverify::{BnbVerifier, FaultMode, FaultSpec, FaultyVerifier};

    fn oracle() -> Vec<Box<dyn Verifier>> {
        vec![Box::new(BnbVerifier::default())]
    }

    #[test]
    fn running_example_first_step_is_fc_merge() {
        let q = fixtures::running_example_query();
        let faulty = FaultyVerifier::new(FaultSpec::new(FaultMode::FlipToUnsat, 0).unwrap());
        let r = reduce(&EngineConfig::default(), &faulty, &oracle(), &q).unwrap();
        let first = r.trace.successes().next().unwrap();
        assert_eq!(first.step, SimplificationStep::MergeFc(2));
        assert_eq!((first.size_before, first.size_after), (8, 5));
        assert_eq!(r.final_size(), 2);
    }

    #[test]
    fn zero_budget_returns_input() {
        let q = fixtures::running_example_query();
        let faulty = FaultyVerifier::new(FaultSpec::new(FaultMode::FlipToUnsat, 0).unwrap());
        let config = EngineConfig {
            global_budget: Duration::ZERO,
            ..EngineConfig::default()
        };
        let r = reduce(&config, &faulty, &oracle(), &q).unwrap();
        assert_eq!(r.query, q);
        assert!(r.trace.records.is_empty());
        assert!(r.budget_exhausted);
    }

    #[test]
    fn agreement_is_a_precondition_failure() {
        let q = fixtures::running_example_query();
        let honest = BnbVerifier::default();
        match reduce(&EngineConfig::default(), &honest, &oracle(), &q) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("SAT"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            reduce(&EngineConfig::default(), &honest, &[], &q),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn single_mode_uses_invalid_witnesses() {
        let q = fixtures::running_example_query();
        let faulty = FaultyVerifier::new(FaultSpec::new(FaultMode::CorruptWitness, 1).unwrap());
        let config = EngineConfig {
            mode: Mode::Single,
            ..EngineConfig::default()
        };
        let r = reduce(&config, &faulty, &[], &q).unwrap();
        assert_eq!(r.final_size(), 2);
        assert!(r.trace.records.iter().all(|rec| rec.oracles.is_empty()));
    }

    #[test]
    fn checkpoints_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let q = fixtures::running_example_query();
        let faulty = FaultyVerifier::new(FaultSpec::new(FaultMode::FlipToUnsat, 0).unwrap());
        let config = EngineConfig {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            ..EngineConfig::default()
        };
        let r = reduce(&config, &faulty, &oracle(), &q).unwrap();
        let accepted = r.trace.successes().count();
        for i in 0..=accepted {
            let step = dir.path().join(format!("step_{i:04}"));
            for f in ["network.onnx", "property.vnnlib", "query.json"] {
                assert!(step.join(f).exists(), "{}", step.join(f).display());
            }
        }
        let lines = fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), r.trace.records.len());
        let first: AttemptRecord = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
        assert_eq!(first, r.trace.records[0]);
    }
}
