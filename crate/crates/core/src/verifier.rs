//! Running verifiers and interpreting their answers.
//!
//! External verifiers are driven through a command template. Each
//! invocation gets its own scratch directory holding `network.onnx`,
//! `property.vnnlib` and the result file the verifier is expected to write.
//! The result file starts with one of `sat`, `unsat`, `timeout` or `error`;
//! a `sat` answer is followed by `(X_i value)` pairs, optionally wrapped in
//! one more pair of parentheses.

use std::fmt;
use std::fs::File;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{emit_vnnlib, export_onnx, sexpr};
use crate::model::VerificationQuery;

pub const SCRATCH_ENV: &str = "DELBUG_SCRATCH";
pub const DEFAULT_INVOCATION_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Sat,
    Unsat,
    Error,
    Timeout,
}

impl Verdict {
    pub fn token(self) -> &'static str {
        match self {
            Verdict::Sat => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Error => "error",
            Verdict::Timeout => "timeout",
        }
    }

    /// SAT or UNSAT.
    pub fn is_definite(self) -> bool {
        matches!(self, Verdict::Sat | Verdict::Unsat)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token().to_uppercase())
    }
}

/// One verifier answer. `witness` is present exactly when the verdict is SAT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictOutcome {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    /// Seconds.
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub raw_output: String,
}

impl VerdictOutcome {
    pub fn sat(witness: Vec<f64>) -> Self {
        VerdictOutcome {
            verdict: Verdict::Sat,
            witness: Some(witness),
            wall_time: 0.0,
            raw_output: String::new(),
        }
    }

    pub fn unsat() -> Self {
        Self::plain(Verdict::Unsat, "")
    }

    pub fn error(message: impl Into<String>) -> Self {
        Self::plain(Verdict::Error, message)
    }

    pub fn timeout() -> Self {
        Self::plain(Verdict::Timeout, "")
    }

    fn plain(verdict: Verdict, raw: impl Into<String>) -> Self {
        VerdictOutcome {
            verdict,
            witness: None,
            wall_time: 0.0,
            raw_output: raw.into(),
        }
    }

    pub fn timed(mut self, elapsed: Duration) -> Self {
        self.wall_time = elapsed.as_secs_f64();
        self
    }

    /// The text of a result file for this outcome.
    pub fn to_result_text(&self) -> String {
        let mut out = String::from(self.verdict.token());
        out.push('\n');
        if let Some(w) = &self.witness {
            out.push('(');
            for (i, v) in w.iter().enumerate() {
                out.push_str(&format!("\n(X_{i} {v:e})"));
            }
            out.push_str("\n)\n");
        }
        out
    }
}

/// Anything that can answer a verification query.
pub trait Verifier: Send + Sync {
    fn name(&self) -> &str;
    fn verify(&self, query: &VerificationQuery) -> VerdictOutcome;
}

/// Classification of a witness against a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessStatus {
    Valid,
    OutsideInputRegion,
    OutputViolation,
}

impl WitnessStatus {
    pub fn label(self) -> &'static str {
        match self {
            WitnessStatus::Valid => "valid",
            WitnessStatus::OutsideInputRegion => "outside-input-region",
            WitnessStatus::OutputViolation => "output-violation",
        }
    }
}

impl fmt::Display for WitnessStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Checks input-box membership first, then the output region, each with
/// slack `tol`.
pub fn validate_witness(query: &VerificationQuery, witness: &[f64], tol: f64) -> Result<WitnessStatus> {
    let property = query.property();
    if !property.input_contains(witness, tol)? {
        return Ok(WitnessStatus::OutsideInputRegion);
    }
    let y = query.network().evaluate(witness)?;
    Ok(if property.output_satisfies(&y, tol)? {
        WitnessStatus::Valid
    } else {
        WitnessStatus::OutputViolation
    })
}

/// Parses a result file. Witness coordinates not mentioned are an error,
/// as are coordinates beyond `input_dim`.
pub fn parse_result(text: &str, input_dim: usize) -> Result<(Verdict, Option<Vec<f64>>)> {
    let trimmed = text.trim_start();
    let token_end = trimmed.find(|c: char| c.is_whitespace() || c == '(').unwrap_or(trimmed.len());
    let verdict = match &trimmed[..token_end] {
        "sat" => Verdict::Sat,
        "unsat" => Verdict::Unsat,
        "timeout" => Verdict::Timeout,
        "error" => Verdict::Error,
        "" => return Err(Error::parse(1, 1, "empty result")),
        other => return Err(Error::parse(1, 1, format!("unknown verdict '{other}'"))),
    };
    if verdict != Verdict::Sat {
        return Ok((verdict, None));
    }
    let prefix = text.len() - trimmed.len() + token_end;
    let offset_line = text[..prefix].matches('\n').count();
    let mut exprs = sexpr::parse_all(&text[prefix..]).map_err(|e| match e {
        Error::Parse { line, column, message } => Error::parse(line + offset_line, column, message),
        other => other,
    })?;
    if let [sexpr::SExpr::List(items, _)] = exprs.as_slice() {
        if items.iter().all(|i| matches!(i, sexpr::SExpr::List(..))) {
            exprs = items.clone();
        }
    }
    let mut values: Vec<Option<f64>> = vec![None; input_dim];
    for e in &exprs {
        let sexpr::SExpr::List(pair, _) = e else {
            return Err(e.error("expected a (variable value) pair"));
        };
        let [name, value] = pair.as_slice() else {
            return Err(e.error("expected a (variable value) pair"));
        };
        let name_str = name.as_atom().ok_or_else(|| name.error("expected a variable name"))?;
        if name_str.starts_with("Y_") {
            continue;
        }
        let index: usize = name_str
            .strip_prefix("X_")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| name.error(format!("unknown variable '{name_str}'")))?;
        if index >= input_dim {
            return Err(name.error(format!("{name_str} is beyond the {input_dim} network inputs")));
        }
        let v: f64 = value
            .as_atom()
            .and_then(|s| s.parse().ok())
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| value.error("expected a finite number"))?;
        values[index] = Some(v);
    }
    let witness = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::parse(1, 1, format!("witness is missing X_{i}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((Verdict::Sat, Some(witness)))
}

/// An external verifier invoked through a shell command template with the
/// placeholders `{network}`, `{property}`, `{result}` and `{timeout_s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierConfig {
    pub name: String,
    pub command_template: String,
    pub invocation_timeout: Duration,
    pub workdir: Option<PathBuf>,
}

impl VerifierConfig {
    pub fn new(name: impl Into<String>, command_template: impl Into<String>) -> Result<Self> {
        let config = VerifierConfig {
            name: name.into(),
            command_template: command_template.into(),
            invocation_timeout: DEFAULT_INVOCATION_TIMEOUT,
            workdir: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.invocation_timeout = timeout;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for p in ["{network}", "{property}", "{result}"] {
            if !self.command_template.contains(p) {
                return Err(Error::InvalidInput(format!(
                    "command template for '{}' lacks the {p} placeholder",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn scratch_root() -> PathBuf {
    std::env::var_os(SCRATCH_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir)
}

fn quote(path: &Path) -> String {
    let s = path.to_string_lossy();
    shlex::try_quote(&s).map(|q| q.into_owned()).unwrap_or_else(|_| s.into_owned())
}

fn read_lossy(path: &Path) -> String {
    std::fs::read(path)
        .map(|b| String::from_utf8_lossy(&b).into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct ExternalVerifier {
    config: VerifierConfig,
}

impl ExternalVerifier {
    pub fn new(config: VerifierConfig) -> Result<Self> {
        config.validate()?;
        Ok(ExternalVerifier { config })
    }

    pub fn config(&self) -> &VerifierConfig {
        &self.config
    }

    /// Writes the query files, runs the command and reads its answer.
    /// Never fails: infrastructure problems become ERROR outcomes.
    pub fn invoke(&self, query: &VerificationQuery) -> VerdictOutcome {
        let start = Instant::now();
        match self.run(query, start) {
            Ok(outcome) => outcome,
            Err(e) => VerdictOutcome::error(format!("{}: {e}", self.config.name)),
        }
        .timed(start.elapsed())
    }

    fn run(&self, query: &VerificationQuery, start: Instant) -> Result<VerdictOutcome> {
        let root = scratch_root();
        std::fs::create_dir_all(&root)?;
        let dir = tempfile::Builder::new().prefix("delbug-").tempdir_in(&root)?;
        let network = dir.path().join("network.onnx");
        let property = dir.path().join("property.vnnlib");
        let result = dir.path().join("result.txt");
        std::fs::write(&network, export_onnx(query.network()))?;
        std::fs::write(&property, emit_vnnlib(query.property()))?;

        let timeout = self.config.invocation_timeout;
        let command = self
            .config
            .command_template
            .replace("{network}", &quote(&network))
            .replace("{property}", &quote(&property))
            .replace("{result}", &quote(&result))
            .replace("{timeout_s}", &timeout.as_secs_f64().ceil().to_string());
        let stdout = dir.path().join("stdout.txt");
        let stderr = dir.path().join("stderr.txt");
        let mut cmd = Command::new("sh");
        cmd.arg("-c")
            .arg(&command)
            .stdin(Stdio::null())
            .stdout(File::create(&stdout)?)
            .stderr(File::create(&stderr)?)
            .process_group(0);
        if let Some(wd) = &self.config.workdir {
            cmd.current_dir(wd);
        }
        let mut child = cmd.spawn()?;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if start.elapsed() >= timeout {
                // the whole group, so grandchildren of `sh` go too
                unsafe {
                    libc::kill(-(child.id() as i32), libc::SIGKILL);
                }
                let _ = child.wait();
                break None;
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        let mut raw = read_lossy(&stdout);
        raw.push_str(&read_lossy(&stderr));
        let Some(status) = status else {
            return Ok(VerdictOutcome {
                raw_output: raw,
                ..VerdictOutcome::timeout()
            });
        };
        if !result.exists() {
            let why = if status.success() {
                "no result file"
            } else {
                "nonzero exit without a result file"
            };
            return Ok(VerdictOutcome::error(format!("{why} ({status})\n{raw}")));
        }
        let text = read_lossy(&result);
        raw.push_str(&text);
        Ok(match parse_result(&text, query.network().input_dim()) {
            Ok((verdict, witness)) => VerdictOutcome {
                verdict,
                witness,
                wall_time: 0.0,
                raw_output: raw,
            },
            Err(e) => VerdictOutcome::error(format!("unparseable result: {e}\n{raw}")),
        })
    }
}

impl Verifier for ExternalVerifier {
    fn name(&self) -> &str {
        &self.config.name
    }

    fn verify(&self, query: &VerificationQuery) -> VerdictOutcome {
        self.invoke(query)
    }
}
