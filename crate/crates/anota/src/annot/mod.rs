//! Annotation front end.
//!
//! Annotations are ordinary-looking calls whose dotted head starts with one
//! of the reserved roots (`SYSCALL`, `TAINT`, `WATCH`, `EXECUTION`,
//! `CLEAR`). This module turns their source text into an [`AnnotationAst`]
//! and lowers that into a [`PolicySpec`] the monitors understand.

mod lower;
mod parse;
mod spec;

use std::fmt;

pub use lower::{lower_to_policy, LoweringError};
pub use parse::{parse_annotation, AnnotationError};
pub use spec::{
    ClearSelector, DataFlowRule, Dimension, Domain, ExecRule, Mode, OptionFilter, PatternValue,
    Perms, PolicySpec, Rule, SyscallRule, TimingRule, WatchRule,
};

/// Reserved annotation roots. Matching is case-sensitive.
pub const ROOTS: [&str; 5] = ["SYSCALL", "TAINT", "WATCH", "EXECUTION", "CLEAR"];

/// A position in a compiled program: source line plus instruction index.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[derive(serde::Serialize, serde::Deserialize)]
pub struct Site {
    pub line: u32,
    pub op: u32,
}

impl Site {
    pub fn new(line: u32, op: u32) -> Self {
        Site { line, op }
    }
}

/// Returns true iff the first segment of a dotted name is a reserved root.
pub fn is_annotation_head(name: &str) -> bool {
    let first = name.split('.').next().unwrap_or("").trim();
    ROOTS.contains(&first)
}

/// Parsed annotation call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationAst {
    pub head: Vec<String>,
    pub args: Vec<Arg>,
    pub kwargs: Vec<(String, Arg)>,
}

/// One argument of an annotation call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Str(String),
    Int(i64),
    List(Vec<Arg>),
    /// A bare identifier: a binding, a callable, or a class name.
    Name(String),
    /// Unevaluated expression source (only produced for `EXECUTION`).
    Expr(String),
    Annotation(Box<AnnotationAst>),
}

impl AnnotationAst {
    pub fn root(&self) -> &str {
        &self.head[0]
    }

    pub fn dotted_head(&self) -> String {
        self.head.join(".")
    }

    pub fn kwarg(&self, key: &str) -> Option<&Arg> {
        self.kwargs.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

pub(crate) fn write_str_literal(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('\'')?;
    for c in s.chars() {
        match c {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c if (c as u32) < 0x20 => write!(f, "\\x{:02x}", c as u32)?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('\'')
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Str(s) => write_str_literal(f, s),
            Arg::Int(i) => write!(f, "{i}"),
            Arg::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
            Arg::Name(n) => f.write_str(n),
            Arg::Expr(e) => f.write_str(e),
            Arg::Annotation(a) => write!(f, "{a}"),
        }
    }
}

impl fmt::Display for AnnotationAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.dotted_head())?;
        let mut first = true;
        for a in &self.args {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{a}")?;
        }
        for (k, v) in &self.kwargs {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}
