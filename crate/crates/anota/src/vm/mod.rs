//! AnotaScript: compiler and instrumented interpreter.
//!
//! ```
//! use anota::vm::{compile, execute, ExecConfig, ExecStatus};
//!
//! let program = compile("x = len(input())\nprint(x)\n").unwrap();
//! let result = execute(&program, b"abc", &ExecConfig::default());
//! assert_eq!(result.status, ExecStatus::Clean);
//! assert_eq!(result.output, vec!["3".to_string()]);
//! ```

mod ast;
mod builtins;
mod compile;
mod interp;
mod lexer;
mod parser;
pub mod url;
mod value;
mod vfs;

use std::collections::{BTreeMap, BTreeSet};

pub use compile::{compile, AnnotationSite, Builtin, Callee, Const, Function, Method, Op, Program};
pub use interp::execute;
pub use value::{Kind, Value};
pub use vfs::{Vfs, VfsError};

use crate::annot::Site;
use crate::policy::PolicyId;
use crate::report::Violation;
use crate::syscall::SyscallEvent;

pub use ast::BinOp;

/// Instruction budget per execution unless configured otherwise.
pub const DEFAULT_COST_LIMIT: u64 = 10_000_000;
/// Exit status for a detected policy violation.
pub const VIOLATION_EXIT_CODE: i32 = 77;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: u32, msg: String },
    #[error("line {line}: undefined function `{name}`")]
    UndefinedName { line: u32, name: String },
    #[error("line {line}: `{name}` takes {expected} argument(s), got {got}")]
    Arity {
        line: u32,
        name: String,
        expected: String,
        got: usize,
    },
    #[error("line {line}: invalid annotation: {msg}")]
    Annotation { line: u32, msg: String },
}

impl CompileError {
    pub fn line(&self) -> u32 {
        match self {
            CompileError::Syntax { line, .. }
            | CompileError::UndefinedName { line, .. }
            | CompileError::Arity { line, .. }
            | CompileError::Annotation { line, .. } => *line,
        }
    }
}

/// Runtime failure of the script itself. Not a policy violation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ScriptError {
    pub line: u32,
    pub msg: String,
}

/// What happens once a monitor reports a violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Escalation {
    /// Abort the process.
    Trap,
    /// Report on stderr and exit with status 77.
    #[default]
    Exit,
    /// Record and keep executing.
    Collect,
}

#[derive(Debug, Clone)]
pub struct ExecConfig {
    pub cost_limit: u64,
    pub escalation: Escalation,
    /// When false no monitor runs: annotations are inert, no events are
    /// synthesized and no taint is tracked.
    pub monitors: bool,
    /// Attach a label to every value the script creates.
    pub taint_all: bool,
    /// Keep every pseudo-syscall event in [`ExecResult::trace`].
    pub record_trace: bool,
    pub vfs: Vfs,
    /// Functions whose per-invocation cost is sampled.
    pub timing_targets: Vec<String>,
    /// Also sample any call that receives a labelled argument.
    pub auto_target: bool,
    pub max_call_depth: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            cost_limit: DEFAULT_COST_LIMIT,
            escalation: Escalation::Exit,
            monitors: true,
            taint_all: false,
            record_trace: false,
            vfs: Vfs::default(),
            timing_targets: Vec::new(),
            auto_target: false,
            max_call_depth: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecStatus {
    Clean,
    Violation,
    ScriptError,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicySummary {
    pub id: PolicyId,
    pub text: String,
    pub enabled: bool,
}

/// Per-invocation cost of a sampled function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostSample {
    pub function: String,
    pub cost: u64,
}

#[derive(Debug, Clone)]
pub struct ExecResult {
    pub status: ExecStatus,
    pub violations: Vec<Violation>,
    /// Executed `(from, to)` edges at branches, calls and returns.
    pub coverage: BTreeSet<(u32, u32)>,
    /// Instructions executed.
    pub cost: u64,
    /// Lines written by `print`.
    pub output: Vec<String>,
    pub trace: Vec<SyscallEvent>,
    pub samples: Vec<CostSample>,
    pub error: Option<ScriptError>,
    pub diagnostics: Vec<String>,
    /// Rendered global bindings at exit.
    pub globals: BTreeMap<String, String>,
    pub policies: Vec<PolicySummary>,
    /// Timing policies installed during the run, by target function.
    pub timing_policies: BTreeMap<String, (PolicyId, Site)>,
}

impl ExecResult {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            ExecStatus::Clean => 0,
            ExecStatus::Violation => VIOLATION_EXIT_CODE,
            ExecStatus::ScriptError | ExecStatus::Timeout => 1,
        }
    }
}

/// Act on a violation according to `mode`. Returns only for
/// [`Escalation::Collect`].
pub fn escalate(violation: &Violation, mode: Escalation) {
    match mode {
        Escalation::Trap => {
            eprintln!("{}", violation.to_json_line());
            std::process::abort();
        }
        Escalation::Exit => {
            eprintln!("{}", violation.to_json_line());
            std::process::exit(VIOLATION_EXIT_CODE);
        }
        Escalation::Collect => {}
    }
}
