//! Violation reports.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annot::Site;
use crate::policy::{PolicyId, PolicyStore};
use crate::syscall::{SyscallEvent, SyscallViolation, ToctouPattern, ViolationCause};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    Syscall,
    DataFlowSink,
    ObjectAccess,
    Execution,
    Toctou,
    TimingLeak,
}

/// A detected policy breach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub policy_id: PolicyId,
    pub policy_text: String,
    pub kind: ViolationKind,
    pub site: Site,
    /// Triggering syscall event, access descriptor or test statistic.
    pub event: serde_json::Value,
    pub message: String,
    pub input_digest: String,
}

#[derive(Serialize)]
struct Line<'a> {
    schema_version: u32,
    #[serde(flatten)]
    v: &'a Violation,
}

impl Violation {
    /// Single-line JSON report.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&Line {
            schema_version: SCHEMA_VERSION,
            v: self,
        })
        .expect("report serialization cannot fail")
    }

    /// Deduplication key used by the fuzzer.
    pub fn key(&self) -> (PolicyId, Site) {
        (self.policy_id, self.site)
    }
}

/// Build the report for a syscall monitor finding on `event`.
pub fn syscall_report(
    store: &PolicyStore,
    event: &SyscallEvent,
    found: &SyscallViolation,
    site: Site,
    input_digest: &str,
) -> Violation {
    let resource = found.resource.as_deref().unwrap_or("");
    let (kind, message) = match found.cause {
        ViolationCause::Blocked => (
            ViolationKind::Syscall,
            format!("{} on `{resource}` matches a BLOCK policy", event.name),
        ),
        ViolationCause::NotAllowed => (
            ViolationKind::Syscall,
            format!("{} on `{resource}` is outside every ALLOW policy", event.name),
        ),
        ViolationCause::Toctou(ToctouPattern::CheckThenUse) => {
            (ViolationKind::Toctou, format!("`{resource}` used after an attribute check"))
        }
        ViolationCause::Toctou(ToctouPattern::CreateWriteChmod) => (
            ViolationKind::Toctou,
            format!("permissions of `{resource}` changed after it was created and written"),
        ),
    };
    Violation {
        policy_id: found.policy,
        policy_text: store.get(found.policy).map(|p| p.text()).unwrap_or_default(),
        kind,
        site,
        event: serde_json::to_value(event).expect("event serialization cannot fail"),
        message,
        input_digest: input_digest.to_string(),
    }
}

/// Lowercase hex SHA-256 of `input`.
pub fn input_digest(input: &[u8]) -> String {
    hex::encode(Sha256::digest(input))
}
