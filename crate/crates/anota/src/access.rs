//! Object-access watch list and the execution guard.

use std::collections::HashMap;

use crate::annot::{Mode, Perms};
use crate::policy::{PolicyId, PolicyStore};

/// Frame id of the global frame.
pub const GLOBAL_FRAME: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    Global,
    Frame(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Read,
    Write,
    Execute,
}

impl AccessKind {
    pub fn perm(self) -> Perms {
        match self {
            AccessKind::Read => Perms::READ,
            AccessKind::Write => Perms::WRITE,
            AccessKind::Execute => Perms::EXECUTE,
        }
    }

    pub fn word(self) -> &'static str {
        match self {
            AccessKind::Read => "read",
            AccessKind::Write => "write",
            AccessKind::Execute => "execute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatchEntry {
    pub policy: PolicyId,
    pub target: String,
    pub scope: Scope,
    pub mode: Mode,
    pub perms: Perms,
}

#[derive(Debug, Clone, Default)]
pub struct WatchList {
    by_name: HashMap<String, Vec<WatchEntry>>,
}

impl WatchList {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }

    /// Record an entry. `scope` is resolved by the caller where the
    /// annotation executes.
    pub fn watch(&mut self, entry: WatchEntry) {
        self.by_name.entry(entry.target.clone()).or_default().push(entry);
    }

    /// Like [`WatchList::watch`], skipping an entry already present for the
    /// same policy and scope.
    pub fn watch_once(&mut self, entry: WatchEntry) {
        let list = self.by_name.entry(entry.target.clone()).or_default();
        if !list.iter().any(|e| e.policy == entry.policy && e.scope == entry.scope) {
            list.push(entry);
        }
    }

    pub fn is_watched(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    /// Decide an access to `name` resolved in `scope`. Returns the policy a
    /// violation is charged to.
    pub fn on_access(&self, store: &PolicyStore, name: &str, kind: AccessKind, scope: Scope) -> Option<PolicyId> {
        let entries = self.by_name.get(name)?;
        let live = || {
            entries
                .iter()
                .filter(move |e| e.scope == scope && store.is_enabled(e.policy))
        };
        if let Some(e) = live().find(|e| e.mode == Mode::Block && e.perms.contains(kind.perm())) {
            return Some(e.policy);
        }
        let mut first_allow = None;
        let mut allowed = Perms::default();
        for e in live().filter(|e| e.mode == Mode::Allow) {
            first_allow.get_or_insert(e.policy);
            allowed = allowed.union(e.perms);
        }
        match first_allow {
            Some(p) if !allowed.contains(kind.perm()) => Some(p),
            _ => None,
        }
    }
}

/// Flipped assertion: a truthy or absent condition is a violation.
pub fn on_execution_block(condition: Option<bool>) -> bool {
    condition.unwrap_or(true)
}
