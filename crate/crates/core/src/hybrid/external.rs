//! Adapters for external SAT, #SAT and projected model counters run as subprocesses.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Duration;

use num_bigint::BigUint;
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::formula::{CnfFormula, Var};

/// Environment variable naming the directory searched for bare solver names.
pub const SOLVER_DIR_ENV: &str = "TDCOUNT_SOLVER_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Sat,
    SharpSat,
    Pmc,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Sat => "sat",
            SolverKind::SharpSat => "sharpsat",
            SolverKind::Pmc => "pmc",
        })
    }
}

/// Program and arguments. An argument `{}` is replaced by the path of a temporary DIMACS
/// file; without one the formula is written to standard input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl SolverCommand {
    pub fn parse(cmd: &str) -> Option<Self> {
        let mut parts = cmd.split_whitespace().map(str::to_owned);
        let program = parts.next()?;
        Some(SolverCommand {
            program,
            args: parts.collect(),
        })
    }

    pub fn uses_file(&self) -> bool {
        self.args.iter().any(|a| a == "{}")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverFailure {
    #[error("no {0} solver configured")]
    NotConfigured(SolverKind),
    #[error("{kind} solver could not be started: {message}")]
    Spawn { kind: SolverKind, message: String },
    #[error("{kind} solver timed out after {millis} ms")]
    Timeout { kind: SolverKind, millis: u64 },
    #[error("{kind} solver exited with status {code:?}")]
    Exit { kind: SolverKind, code: Option<i32> },
    #[error("{kind} solver output not understood")]
    Unparsable { kind: SolverKind },
}

/// Bare names are looked up in `TDCOUNT_SOLVER_DIR` first, then on `PATH`.
pub fn resolve_program(program: &str) -> PathBuf {
    if !program.contains('/') {
        if let Some(dir) = std::env::var_os(SOLVER_DIR_ENV) {
            let candidate = PathBuf::from(dir).join(program);
            if candidate.is_file() {
                return candidate;
            }
        }
    }
    PathBuf::from(program)
}

/// Reads the answer from solver output. Understands `s SATISFIABLE` / `s UNSATISFIABLE`,
/// `s mc N`, `s pmc N`, `c s exact arb int N`, and a number following a `# solutions` line.
pub fn parse_output(kind: SolverKind, out: &str) -> Option<BigUint> {
    let lines: Vec<&str> = out.lines().map(str::trim).collect();
    let mut verdict = None;
    let mut count = None;
    for (i, line) in lines.iter().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["s", "SATISFIABLE"] => verdict = Some(true),
            ["s", "UNSATISFIABLE"] => verdict = Some(false),
            ["s", "mc" | "pmc", n] => count = n.parse().ok().or(count),
            ["c", "s", "exact", "arb", "int", n] => count = n.parse().ok().or(count),
            ["#", "solutions"] => {
                if let Some(n) = lines.get(i + 1).and_then(|l| l.parse().ok()) {
                    count = Some(n);
                }
            }
            _ => {}
        }
    }
    match kind {
        SolverKind::Sat => verdict.map(|b| BigUint::from(b as u32)),
        _ => count.or_else(|| (verdict == Some(false)).then(BigUint::default)),
    }
}

/// Runs the configured solver on (F, P). Failures are values, never wrong counts.
pub fn external_solver_call(
    kind: SolverKind,
    cmd: Option<&SolverCommand>,
    f: &CnfFormula,
    p: &[Var],
    timeout: Duration,
) -> Result<BigUint, SolverFailure> {
    let cmd = cmd.ok_or(SolverFailure::NotConfigured(kind))?;
    let dimacs = f.to_dimacs((kind == SolverKind::Pmc).then_some(p));
    let spawn_err = |e: std::io::Error| SolverFailure::Spawn {
        kind,
        message: e.to_string(),
    };
    let mut file = None;
    let args: Vec<String> = if cmd.uses_file() {
        let mut tmp = tempfile::Builder::new().suffix(".cnf").tempfile().map_err(spawn_err)?;
        tmp.write_all(dimacs.as_bytes()).map_err(spawn_err)?;
        tmp.flush().map_err(spawn_err)?;
        let path = tmp.path().to_string_lossy().into_owned();
        file = Some(tmp);
        cmd.args
            .iter()
            .map(|a| if a == "{}" { path.clone() } else { a.clone() })
            .collect()
    } else {
        cmd.args.clone()
    };
    let mut child = Command::new(resolve_program(&cmd.program))
        .args(&args)
        .stdin(if file.is_some() { Stdio::null() } else { Stdio::piped() })
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(spawn_err)?;
    let writer = child.stdin.take().map(|mut stdin| {
        let text = dimacs.clone();
        std::thread::spawn(move || {
            let _ = stdin.write_all(text.as_bytes());
        })
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let status = match child.wait_timeout(timeout).map_err(spawn_err)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SolverFailure::Timeout {
                kind,
                millis: timeout.as_millis() as u64,
            });
        }
    };
    if let Some(w) = writer {
        let _ = w.join();
    }
    let out = reader.join().unwrap_or_default();
    drop(file);
    if !matches!(status.code(), Some(0 | 10 | 20)) {
        return Err(SolverFailure::Exit {
            kind,
            code: status.code(),
        });
    }
    parse_output(kind, &out).ok_or(SolverFailure::Unparsable { kind })
}
