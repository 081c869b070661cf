use std::collections::BTreeMap;

use crate::policy::PolicyId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResourceKind {
    File { path: String },
    Socket { scheme: String, host: String, port: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceDesc {
    pub kind: ResourceKind,
    pub opened_at: u64,
    pub closed: bool,
    /// Taint policy whose labelled data was written through this fd.
    pub sensitive_by: Option<PolicyId>,
}

impl ResourceDesc {
    pub fn carried_sensitive(&self) -> bool {
        self.sensitive_by.is_some()
    }

    pub fn path(&self) -> Option<&str> {
        match &self.kind {
            ResourceKind::File { path } => Some(path),
            ResourceKind::Socket { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("unknown file descriptor {0}")]
pub struct UnknownFd(pub i64);

/// Maps live descriptors to the resources their creating events named.
#[derive(Debug, Clone, Default)]
pub struct FdTable {
    entries: BTreeMap<i64, ResourceDesc>,
}

impl FdTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open(&mut self, fd: i64, kind: ResourceKind, seq: u64) {
        self.entries.insert(
            fd,
            ResourceDesc {
                kind,
                opened_at: seq,
                closed: false,
                sensitive_by: None,
            },
        );
    }

    pub fn close(&mut self, fd: i64) {
        if let Some(e) = self.entries.get_mut(&fd) {
            e.closed = true;
        }
    }

    /// Look up an open descriptor.
    pub fn get(&self, fd: i64) -> Result<&ResourceDesc, UnknownFd> {
        self.entries.get(&fd).filter(|e| !e.closed).ok_or(UnknownFd(fd))
    }

    /// Record that tainted data flowed through `fd`. The flag never resets.
    pub fn mark_sensitive(&mut self, fd: i64, policy: PolicyId) {
        if let Some(e) = self.entries.get_mut(&fd) {
            e.sensitive_by.get_or_insert(policy);
        }
    }
}
