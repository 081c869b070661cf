//! Offline checking of recorded syscall traces against a policy file.
//!
//! A policy file holds one annotation per line; blank lines and lines
//! starting with `#` are ignored. Only syscall annotations are accepted.

use crate::annot::{lower_to_policy, parse_annotation, PolicySpec, Rule, Site};
use crate::policy::PolicyStore;
use crate::report::{input_digest, syscall_report, Violation};
use crate::syscall::trace::{read_trace, TraceError};
use crate::syscall::{Phase, SyscallEvent, SyscallMonitor};

use super::{ERROR_EXIT_CODE, USAGE_EXIT_CODE};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("policy file line {line}: {msg}")]
    Policy { line: usize, msg: String },
    #[error("policy file line {line}: only SYSCALL annotations can be replayed")]
    NotSyscall { line: usize },
    #[error("trace line {line}: {msg}")]
    Trace { line: usize, msg: String },
}

impl ReplayError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ReplayError::Policy { .. } | ReplayError::NotSyscall { .. } => USAGE_EXIT_CODE,
            ReplayError::Trace { .. } => ERROR_EXIT_CODE,
        }
    }
}

pub fn parse_policy_file(text: &str) -> Result<Vec<PolicySpec>, ReplayError> {
    let mut specs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let src = raw.trim();
        if src.is_empty() || src.starts_with('#') {
            continue;
        }
        let err = |msg: String| ReplayError::Policy { line, msg };
        let ast = parse_annotation(src).map_err(|e| err(e.to_string()))?;
        let spec = lower_to_policy(&ast, Site::new(line as u32, 0)).map_err(|e| err(e.to_string()))?;
        if !matches!(spec.rule, Rule::Syscall(_)) {
            return Err(ReplayError::NotSyscall { line });
        }
        if spec.rule.clone().resolve_bindings(|_| None).is_err() {
            return Err(err("policy files take literal arguments only".into()));
        }
        specs.push(spec);
    }
    Ok(specs)
}

/// Parse a JSONL trace. Blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<(usize, SyscallEvent)>, ReplayError> {
    let events = read_trace(text.as_bytes()).map_err(|e| match e {
        TraceError::Malformed { line, source } => ReplayError::Trace {
            line,
            msg: source.to_string(),
        },
        TraceError::Io(e) => ReplayError::Trace { line: 0, msg: e.to_string() },
    })?;
    if let Some((line, _)) = events.iter().find(|(_, ev)| ev.phase == Phase::Exit && ev.ret.is_none()) {
        return Err(ReplayError::Trace {
            line: *line,
            msg: "exit event without ret".into(),
        });
    }
    Ok(events)
}

/// Feed `events` through a fresh syscall monitor with `policies` installed
/// in order. Every finding is collected; the report site is the trace line.
pub fn replay(policies: &[PolicySpec], events: &[(usize, SyscallEvent)], trace_bytes: &[u8]) -> Replayed {
    let mut store = PolicyStore::new();
    for p in policies {
        store.install(p.clone());
    }
    let digest = input_digest(trace_bytes);
    let mut monitor = SyscallMonitor::new();
    let mut violations = Vec::new();
    for (line, ev) in events {
        for found in monitor.process(&store, ev) {
            violations.push(syscall_report(&store, ev, &found, Site::new(*line as u32, 0), &digest));
        }
    }
    Replayed {
        violations,
        diagnostics: monitor.diagnostics().to_vec(),
    }
}

#[derive(Debug, Clone)]
pub struct Replayed {
    pub violations: Vec<Violation>,
    pub diagnostics: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRACE: &str = r#"{"seq":1,"phase":"enter","name":"openat","args":[["path","/etc/passwd"],["mode","r"]],"ret":null,"pid":100,"ts":0}
{"seq":1,"phase":"exit","name":"openat","args":[],"ret":3,"pid":100,"ts":1}
{"seq":2,"phase":"enter","name":"read","args":[["fd",3]],"ret":null,"pid":100,"ts":2}
{"seq":2,"phase":"exit","name":"read","args":[],"ret":10,"pid":100,"ts":3}
"#;

    #[test]
    fn read_under_blocked_prefix() {
        let policies = parse_policy_file("# etc is off limits\nSYSCALL.READ.BLOCK(PATH='/etc/')\n").unwrap();
        let events = parse_trace(TRACE).unwrap();
        let out = replay(&policies, &events, TRACE.as_bytes());
        assert_eq!(out.violations.len(), 1);
        assert_eq!(out.violations[0].event["seq"], 2);
        assert_eq!(out.violations[0].site, Site::new(3, 0));
        assert!(replay(&[], &events, TRACE.as_bytes()).violations.is_empty());
    }

    #[test]
    fn policy_file_errors() {
        assert_eq!(
            parse_policy_file("SYSCALL.BLOCK('execve')\nTAINT(pwd)\n").unwrap_err(),
            ReplayError::NotSyscall { line: 2 }
        );
        assert_eq!(parse_policy_file("SYSCALL.CLEAR()").unwrap_err().exit_code(), 2);
        assert!(matches!(parse_policy_file("SYSCALL.BLOCK(").unwrap_err(), ReplayError::Policy { line: 1, .. }));
    }

    #[test]
    fn malformed_trace_line_is_reported() {
        let e = parse_trace("\n{\"seq\":1}\n").unwrap_err();
        assert_eq!(e, ReplayError::Trace { line: 2, msg: e_msg(&e) });
        assert_eq!(e.exit_code(), 1);
    }

    fn e_msg(e: &ReplayError) -> String {
        match e {
            ReplayError::Trace { msg, .. } => msg.clone(),
            _ => unreachable!(),
        }
    }
}
