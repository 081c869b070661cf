use std::collections::BTreeSet;
use std::fmt;

use super::{write_str_literal, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Domain {
    Syscall,
    DataFlow,
    ObjectAccess,
    Execution,
    TimingCon,
    Clear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Mode {
    Allow,
    Block,
}

impl Mode {
    pub fn keyword(self) -> &'static str {
        match self {
            Mode::Allow => "ALLOW",
            Mode::Block => "BLOCK",
        }
    }
}

/// Argument dimension a syscall policy may constrain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Dimension {
    Path,
    Scheme,
    Host,
    Port,
}

impl Dimension {
    pub fn keyword(self) -> &'static str {
        match self {
            Dimension::Path => "PATH",
            Dimension::Scheme => "SCHEME",
            Dimension::Host => "HOST",
            Dimension::Port => "PORT",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "PATH" => Dimension::Path,
            "SCHEME" => Dimension::Scheme,
            "HOST" => Dimension::Host,
            "PORT" => Dimension::Port,
            _ => return None,
        })
    }
}

/// A pattern value in an option filter. Bindings name a script variable
/// whose value becomes the pattern when the policy is installed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatternValue {
    Literal(String),
    Binding(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OptionFilter {
    pub dimension: Dimension,
    pub patterns: Vec<PatternValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SyscallRule {
    pub mode: Mode,
    /// Syscall names (lower case) and class names (upper case). Empty = all.
    pub selector: BTreeSet<String>,
    pub option: Option<OptionFilter>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataFlowRule {
    pub target: String,
    pub sanitizers: Vec<String>,
    pub sinks: Vec<String>,
}

/// Subset of `{r, w, x}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Perms(u8);

impl Perms {
    pub const READ: Perms = Perms(1);
    pub const WRITE: Perms = Perms(2);
    pub const EXECUTE: Perms = Perms(4);

    pub fn parse(s: &str) -> Option<Perms> {
        if s.is_empty() {
            return None;
        }
        let mut bits = 0;
        for c in s.chars() {
            bits |= match c {
                'r' => 1,
                'w' => 2,
                'x' => 4,
                _ => return None,
            };
        }
        Some(Perms(bits))
    }

    pub fn contains(self, other: Perms) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn union(self, other: Perms) -> Perms {
        Perms(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Perms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (bit, c) in [(1, 'r'), (2, 'w'), (4, 'x')] {
            if self.0 & bit != 0 {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WatchRule {
    pub mode: Mode,
    pub target: String,
    pub perms: Perms,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExecRule {
    /// Source text of the guard expression; `None` blocks unconditionally.
    pub condition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimingRule {
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClearSelector {
    /// `CLEAR()`: every enabled policy.
    All,
    /// `SYSCALL[.CLASS|.NAME].CLEAR()`: syscall policies whose selector
    /// intersects the named class or syscall; `None` means every syscall policy.
    Syscall(Option<String>),
    /// `CLEAR(<annotation>)`: policies structurally equal to the given rule.
    Spec(Box<Rule>),
}

/// Domain-specific body of a policy. Each variant carries exactly the
/// fields its domain needs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rule {
    Syscall(SyscallRule),
    DataFlow(DataFlowRule),
    ObjectAccess(WatchRule),
    Execution(ExecRule),
    TimingCon(TimingRule),
    Clear(ClearSelector),
}

impl Rule {
    pub fn domain(&self) -> Domain {
        match self {
            Rule::Syscall(_) => Domain::Syscall,
            Rule::DataFlow(_) => Domain::DataFlow,
            Rule::ObjectAccess(_) => Domain::ObjectAccess,
            Rule::Execution(_) => Domain::Execution,
            Rule::TimingCon(_) => Domain::TimingCon,
            Rule::Clear(_) => Domain::Clear,
        }
    }

    pub fn mode(&self) -> Option<Mode> {
        match self {
            Rule::Syscall(r) => Some(r.mode),
            Rule::ObjectAccess(r) => Some(r.mode),
            _ => None,
        }
    }

    /// Replace binding patterns with the values `resolve` yields. Bindings
    /// that fail to resolve are reported by name.
    pub fn resolve_bindings(
        &mut self,
        mut resolve: impl FnMut(&str) -> Option<String>,
    ) -> Result<(), String> {
        let mut fix = |opt: &mut Option<OptionFilter>| -> Result<(), String> {
            if let Some(o) = opt {
                for p in &mut o.patterns {
                    if let PatternValue::Binding(name) = p {
                        let v = resolve(name).ok_or_else(|| name.clone())?;
                        *p = PatternValue::Literal(v);
                    }
                }
            }
            Ok(())
        };
        match self {
            Rule::Syscall(r) => fix(&mut r.option),
            Rule::Clear(ClearSelector::Spec(inner)) => match inner.as_mut() {
                Rule::Syscall(r) => fix(&mut r.option),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// A lowered annotation together with the program site it came from.
/// Structural comparisons (for `CLEAR`) use [`PolicySpec::rule`] only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicySpec {
    pub rule: Rule,
    pub site: Site,
}

impl PolicySpec {
    pub fn domain(&self) -> Domain {
        self.rule.domain()
    }

    pub fn mode(&self) -> Option<Mode> {
        self.rule.mode()
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.rule.fmt(f)
    }
}

fn write_pattern(f: &mut fmt::Formatter<'_>, p: &PatternValue) -> fmt::Result {
    match p {
        PatternValue::Literal(s) => write_str_literal(f, s),
        PatternValue::Binding(n) => f.write_str(n),
    }
}

fn write_name_list(f: &mut fmt::Formatter<'_>, names: &[String]) -> fmt::Result {
    f.write_str("[")?;
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        f.write_str(n)?;
    }
    f.write_str("]")
}

fn selector_segment(name: &str) -> String {
    name.to_ascii_uppercase()
}

impl fmt::Display for Rule {
    /// Canonical annotation text; parsing and lowering it yields an equal rule.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Syscall(r) => {
                f.write_str("SYSCALL")?;
                let single = (r.selector.len() == 1).then(|| r.selector.iter().next().unwrap());
                if let Some(sel) = single {
                    write!(f, ".{}", selector_segment(sel))?;
                }
                write!(f, ".{}", r.mode.keyword())?;
                match (&r.option, single) {
                    (Some(opt), _) => {
                        write!(f, ".{}(", opt.dimension.keyword())?;
                        for (i, p) in opt.patterns.iter().enumerate() {
                            if i > 0 {
                                f.write_str(", ")?;
                            }
                            write_pattern(f, p)?;
                        }
                        f.write_str(")")
                    }
                    (None, Some(_)) => f.write_str("()"),
                    (None, None) => {
                        f.write_str("(")?;
                        for (i, s) in r.selector.iter().enumerate() {
                            if i > 0 {
                                f.write_str(", ")?;
                            }
                            write_str_literal(f, s)?;
                        }
                        f.write_str(")")
                    }
                }
            }
            Rule::DataFlow(r) => {
                write!(f, "TAINT({}", r.target)?;
                if !r.sanitizers.is_empty() {
                    f.write_str(", sanitization=")?;
                    write_name_list(f, &r.sanitizers)?;
                }
                f.write_str(", Sink=")?;
                write_name_list(f, &r.sinks)?;
                f.write_str(")")
            }
            Rule::ObjectAccess(r) => {
                write!(f, "WATCH.{}({}, ", r.mode.keyword(), r.target)?;
                write_str_literal(f, &r.perms.to_string())?;
                f.write_str(")")
            }
            Rule::Execution(r) => match &r.condition {
                Some(c) => write!(f, "EXECUTION.BLOCK({c})"),
                None => f.write_str("EXECUTION.BLOCK()"),
            },
            Rule::TimingCon(r) => write!(f, "WATCH.CON({})", r.target),
            Rule::Clear(ClearSelector::All) => f.write_str("CLEAR()"),
            Rule::Clear(ClearSelector::Syscall(None)) => f.write_str("SYSCALL.CLEAR()"),
            Rule::Clear(ClearSelector::Syscall(Some(c))) => {
                write!(f, "SYSCALL.{}.CLEAR()", selector_segment(c))
            }
            Rule::Clear(ClearSelector::Spec(inner)) => write!(f, "CLEAR({inner})"),
        }
    }
}
