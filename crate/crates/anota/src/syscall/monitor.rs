use std::collections::{BTreeMap, HashMap, HashSet};

use super::event::{ArgKind, Phase, SyscallEvent};
use super::fdtable::{FdTable, ResourceDesc, ResourceKind, UnknownFd};
use super::path::normalize_path;
use crate::annot::{Dimension, Domain, Mode, Rule};
use crate::policy::{selector_covers, Policy, PolicyId, PolicyStore};

/// Attribute checks that open a TOCTOU window.
pub const CHECK_CALLS: &[&str] = &["access", "stat", "lstat"];
/// Uses that close a pattern-A window.
pub const USE_CALLS: &[&str] = &["openat", "read", "write"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToctouPattern {
    /// check (access/stat) followed by a use of the same path
    CheckThenUse,
    /// create, write, then change permissions
    CreateWriteChmod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationCause {
    /// A matching BLOCK policy.
    Blocked,
    /// An active allowlist dimension with no matching ALLOW.
    NotAllowed,
    Toctou(ToctouPattern),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SyscallViolation {
    pub policy: PolicyId,
    pub seq: u64,
    pub pid: u32,
    pub cause: ViolationCause,
    /// Resolved resource the decision was made on, if any.
    pub resource: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Violation(SyscallViolation),
}

/// Argument values an event exposes per option dimension, after fd resolution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventView {
    pub path: Option<String>,
    pub scheme: Option<String>,
    pub host: Option<String>,
    pub port: Option<String>,
}

impl EventView {
    pub fn get(&self, dim: Dimension) -> Option<&str> {
        match dim {
            Dimension::Path => self.path.as_deref(),
            Dimension::Scheme => self.scheme.as_deref(),
            Dimension::Host => self.host.as_deref(),
            Dimension::Port => self.port.as_deref(),
        }
    }

    fn describe(&self) -> Option<String> {
        if let Some(p) = &self.path {
            return Some(p.clone());
        }
        self.host.as_ref().map(|h| {
            format!(
                "{}://{}:{}",
                self.scheme.as_deref().unwrap_or(""),
                h,
                self.port.as_deref().unwrap_or("")
            )
        })
    }
}

/// Return the descriptor recorded for the event's fd argument.
pub fn resolve_resource<'t>(fdtable: &'t FdTable, event: &SyscallEvent) -> Result<&'t ResourceDesc, UnknownFd> {
    let fd = event.fd().ok_or(UnknownFd(-1))?;
    fdtable.get(fd)
}

/// Build the per-dimension view of an event. Path arguments win over fd
/// arguments; fd arguments resolve through the table.
pub fn view_event(fdtable: &FdTable, event: &SyscallEvent) -> Result<EventView, UnknownFd> {
    let mut view = EventView {
        path: event.str_arg(ArgKind::Path).map(normalize_path),
        scheme: event.str_arg(ArgKind::Scheme).map(str::to_string),
        host: event.str_arg(ArgKind::Host).map(str::to_string),
        port: event.int_arg(ArgKind::Port).map(|p| p.to_string()),
    };
    if view.path.is_none() && view.host.is_none() && event.fd().is_some() {
        match &resolve_resource(fdtable, event)?.kind {
            ResourceKind::File { path } => view.path = Some(path.clone()),
            ResourceKind::Socket { scheme, host, port } => {
                view.scheme = Some(scheme.clone());
                view.host = Some(host.clone());
                view.port = Some(port.to_string());
            }
        }
    }
    Ok(view)
}

fn option_matches(policy: &Policy, view: &EventView) -> Option<bool> {
    let Rule::Syscall(rule) = policy.rule() else {
        return None;
    };
    match &rule.option {
        None => Some(true),
        Some(opt) => {
            let value = view.get(opt.dimension)?;
            Some(policy.patterns().iter().any(|g| g.matches(value)))
        }
    }
}

/// Decide an enter event against the enabled syscall policies.
///
/// Any matching BLOCK wins. Otherwise every allowlist group that applies to
/// the event must contain a matching ALLOW. Groups are keyed by option
/// dimension; ALLOW policies without an option form a name-level group
/// that applies to every syscall.
pub fn decide(store: &PolicyStore, name: &str, view: &EventView) -> Option<(PolicyId, ViolationCause)> {
    let policies: Vec<&Policy> = store.enabled_in(Domain::Syscall).collect();
    for p in &policies {
        let Rule::Syscall(rule) = p.rule() else { continue };
        if rule.mode == Mode::Block && selector_covers(&rule.selector, name) && option_matches(p, view) == Some(true) {
            return Some((p.id, ViolationCause::Blocked));
        }
    }
    // (first applicable policy, any matched) per dimension group
    let mut groups: BTreeMap<Option<Dimension>, (PolicyId, bool)> = BTreeMap::new();
    for p in &policies {
        let Rule::Syscall(rule) = p.rule() else { continue };
        if rule.mode != Mode::Allow {
            continue;
        }
        let key = rule.option.as_ref().map(|o| o.dimension);
        let covered = selector_covers(&rule.selector, name);
        let matched = match key {
            None => covered,
            Some(dim) => {
                if !covered || view.get(dim).is_none() {
                    continue;
                }
                option_matches(p, view) == Some(true)
            }
        };
        let entry = groups.entry(key).or_insert((p.id, false));
        entry.1 |= matched;
    }
    groups
        .values()
        .filter(|(_, matched)| !matched)
        .map(|(id, _)| *id)
        .min()
        .map(|id| (id, ViolationCause::NotAllowed))
}

/// Judge one enter event against the policy store.
pub fn observe(store: &PolicyStore, event: &SyscallEvent, fdtable: &FdTable) -> Result<Outcome, UnknownFd> {
    if event.phase != Phase::Enter {
        return Ok(Outcome::Pass);
    }
    let view = view_event(fdtable, event)?;
    Ok(match decide(store, &event.name, &view) {
        Some((policy, cause)) => Outcome::Violation(SyscallViolation {
            policy,
            seq: event.seq,
            pid: event.pid,
            cause,
            resource: view.describe(),
        }),
        None => Outcome::Pass,
    })
}

#[derive(Debug, Clone)]
struct Created {
    fd: i64,
    wrote: bool,
    sensitive_by: Option<PolicyId>,
}

/// Per-process TOCTOU bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct ToctouState {
    checks: HashMap<String, u64>,
    created: HashMap<String, Created>,
    reported: HashSet<(String, u64, ToctouPattern)>,
}

impl ToctouState {
    pub fn new() -> Self {
        Self::default()
    }
}

fn is_create_mode(mode: Option<&str>) -> bool {
    mode.is_some_and(|m| m.contains(['w', 'a', 'x', 'c']) || m.contains("O_CREAT"))
}

/// Detect check-then-use and create-write-chmod sequences on files whose
/// traffic carried tainted data.
pub fn detect_toctou(
    state: &mut ToctouState,
    event: &SyscallEvent,
    fdtable: &FdTable,
    sensitive_paths: &HashMap<String, PolicyId>,
    store: &PolicyStore,
) -> Outcome {
    if event.phase != Phase::Enter {
        return Outcome::Pass;
    }
    let Ok(view) = view_event(fdtable, event) else {
        return Outcome::Pass;
    };
    let Some(path) = view.path else {
        return Outcome::Pass;
    };
    let fd_sensitive = event
        .fd()
        .and_then(|fd| fdtable.get(fd).ok())
        .and_then(|r| r.sensitive_by);
    let live = |p: Option<PolicyId>| p.filter(|id| store.is_enabled(*id));
    let name = event.name.as_str();

    if name == "write" {
        if let (Some(fd), Some(c)) = (event.fd(), state.created.get_mut(&path)) {
            if c.fd == fd {
                c.wrote = true;
                c.sensitive_by = c.sensitive_by.or(fd_sensitive);
            }
        }
    }

    let mut hit = None;
    if CHECK_CALLS.contains(&name) {
        state.checks.insert(path.clone(), event.seq);
    } else if USE_CALLS.contains(&name) {
        if let Some(&check_seq) = state.checks.get(&path) {
            let sensitive = live(fd_sensitive).or_else(|| live(sensitive_paths.get(&path).copied()));
            if let Some(policy) = sensitive {
                let key = (path.clone(), check_seq, ToctouPattern::CheckThenUse);
                if state.reported.insert(key) {
                    hit = Some((policy, ToctouPattern::CheckThenUse));
                }
            }
        }
    } else if name == "fchmod" {
        if let Some(c) = state.created.get(&path).filter(|c| c.wrote) {
            let sensitive = live(c.sensitive_by).or_else(|| live(sensitive_paths.get(&path).copied()));
            if let Some(policy) = sensitive {
                let key = (path.clone(), c.fd as u64, ToctouPattern::CreateWriteChmod);
                if state.reported.insert(key) {
                    hit = Some((policy, ToctouPattern::CreateWriteChmod));
                }
            }
        }
    }
    match hit {
        Some((policy, pattern)) => Outcome::Violation(SyscallViolation {
            policy,
            seq: event.seq,
            pid: event.pid,
            cause: ViolationCause::Toctou(pattern),
            resource: Some(path),
        }),
        None => Outcome::Pass,
    }
}

#[derive(Debug, Default, Clone)]
struct ProcessState {
    fds: FdTable,
    toctou: ToctouState,
    pending: HashMap<u64, SyscallEvent>,
}

/// Consumes an event stream, keeping one fd table and TOCTOU state per pid.
#[derive(Debug, Default, Clone)]
pub struct SyscallMonitor {
    procs: BTreeMap<u32, ProcessState>,
    sensitive_paths: HashMap<String, PolicyId>,
    diagnostics: Vec<String>,
}

impl SyscallMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fdtable(&self, pid: u32) -> Option<&FdTable> {
        self.procs.get(&pid).map(|p| &p.fds)
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// Record that tainted data is about to be written through `fd`.
    pub fn mark_sensitive(&mut self, pid: u32, fd: i64, policy: PolicyId) {
        self.procs.entry(pid).or_default().fds.mark_sensitive(fd, policy);
    }

    /// Feed one event; returns policy and TOCTOU violations it triggers.
    pub fn process(&mut self, store: &PolicyStore, event: &SyscallEvent) -> Vec<SyscallViolation> {
        let proc = self.procs.entry(event.pid).or_default();
        let mut out = Vec::new();
        match event.phase {
            Phase::Exit => {
                let enter = proc.pending.remove(&event.seq);
                apply_exit(proc, enter.as_ref(), event);
            }
            Phase::Enter => {
                proc.pending.insert(event.seq, event.clone());
                match observe(store, event, &proc.fds) {
                    Ok(Outcome::Violation(v)) => out.push(v),
                    Ok(Outcome::Pass) => {}
                    Err(e) => self.diagnostics.push(format!("seq {}: {} in {}", event.seq, e, event.name)),
                }
                if event.name == "write" {
                    if let Some(fd) = event.fd() {
                        if let Ok(r) = proc.fds.get(fd) {
                            if let (Some(path), Some(policy)) = (r.path(), r.sensitive_by) {
                                self.sensitive_paths.entry(path.to_string()).or_insert(policy);
                            }
                        }
                    }
                }
                if let Outcome::Violation(v) =
                    detect_toctou(&mut proc.toctou, event, &proc.fds, &self.sensitive_paths, store)
                {
                    out.push(v);
                }
            }
        }
        out
    }
}

fn apply_exit(proc: &mut ProcessState, enter: Option<&SyscallEvent>, exit: &SyscallEvent) {
    let Some(enter) = enter else { return };
    let ret = exit.ret.unwrap_or(-1);
    match enter.name.as_str() {
        "openat" | "open" | "creat" if ret >= 0 => {
            if let Some(path) = enter.str_arg(ArgKind::Path) {
                let path = normalize_path(path);
                if enter.name == "creat" || is_create_mode(enter.str_arg(ArgKind::Mode)) {
                    proc.toctou.created.insert(
                        path.clone(),
                        Created {
                            fd: ret,
                            wrote: false,
                            sensitive_by: None,
                        },
                    );
                }
                proc.fds.open(ret, ResourceKind::File { path }, enter.seq);
            }
        }
        "connect" if ret >= 0 => {
            let kind = ResourceKind::Socket {
                scheme: enter.str_arg(ArgKind::Scheme).unwrap_or("").to_string(),
                host: enter.str_arg(ArgKind::Host).unwrap_or("").to_string(),
                port: enter.int_arg(ArgKind::Port).unwrap_or(0),
            };
            proc.fds.open(ret, kind, enter.seq);
        }
        "close" => {
            if let Some(fd) = enter.fd() {
                proc.fds.close(fd);
            }
        }
        _ => {}
    }
}
