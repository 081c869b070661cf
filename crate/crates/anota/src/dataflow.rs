//! Data-flow monitor: taint labels keyed by TAINT policy, sink checks and
//! sanitizer handling.

use std::collections::BTreeMap;

use smallvec::SmallVec;

use crate::annot::Rule;
use crate::policy::{PolicyId, PolicyStore};

/// Label id used by taint-all mode. It has no sinks and no sanitizers.
pub const TAINT_ALL_LABEL: PolicyId = PolicyId::MAX;

/// Sorted, duplicate-free set of label ids (TAINT policy ids).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TaintSet(SmallVec<[PolicyId; 2]>);

impl TaintSet {
    pub const fn new() -> Self {
        TaintSet(SmallVec::new_const())
    }

    pub fn single(label: PolicyId) -> Self {
        let mut s = SmallVec::new();
        s.push(label);
        TaintSet(s)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, label: PolicyId) -> bool {
        self.0.binary_search(&label).is_ok()
    }

    pub fn insert(&mut self, label: PolicyId) {
        if let Err(i) = self.0.binary_search(&label) {
            self.0.insert(i, label);
        }
    }

    pub fn remove(&mut self, label: PolicyId) {
        if let Ok(i) = self.0.binary_search(&label) {
            self.0.remove(i);
        }
    }

    #[inline]
    pub fn union_with(&mut self, other: &TaintSet) {
        if other.0.is_empty() || self.0 == other.0 {
            return;
        }
        if self.0.is_empty() {
            self.0.clone_from(&other.0);
            return;
        }
        for &l in &other.0 {
            self.insert(l);
        }
    }

    pub fn union(&self, other: &TaintSet) -> TaintSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = PolicyId> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<PolicyId> for TaintSet {
    fn from_iter<I: IntoIterator<Item = PolicyId>>(iter: I) -> Self {
        let mut s = TaintSet::new();
        for l in iter {
            s.insert(l);
        }
        s
    }
}

/// Operation kinds that produce values. Every kind propagates the union of
/// its inputs; literals have no inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagateOp {
    Literal,
    Copy,
    BinOp,
    Index,
    Construct,
    Insert,
    Call,
}

pub fn propagate<'a>(op: PropagateOp, inputs: impl IntoIterator<Item = &'a TaintSet>) -> TaintSet {
    let mut out = TaintSet::new();
    if op != PropagateOp::Literal {
        for t in inputs {
            out.union_with(t);
        }
    }
    out
}

/// Map a callee to the sink name it is checked under. `log` writes through
/// a file descriptor and counts as `write`.
pub fn sink_name(callee: &str) -> &str {
    match callee {
        "log" => "write",
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallCheck {
    /// A labelled argument reached a sink of its policy.
    SinkViolation { policy: PolicyId, sink: String, arg: usize },
    /// The return value must drop these labels.
    Sanitized(TaintSet),
    Pass,
}

/// Inspect a call's argument labels against the enabled TAINT policies.
/// Sinks take precedence over sanitizers; labels of disabled policies are
/// ignored.
pub fn check_call<'a>(store: &PolicyStore, callee: &str, args: impl IntoIterator<Item = &'a TaintSet>) -> CallCheck {
    let sink = sink_name(callee);
    let mut sanitized = TaintSet::new();
    for (i, taint) in args.into_iter().enumerate() {
        for label in taint.iter() {
            let Some(policy) = store.get(label).filter(|p| p.enabled) else {
                continue;
            };
            let Rule::DataFlow(rule) = policy.rule() else { continue };
            if rule.sinks.iter().any(|s| s == sink || s == callee) {
                return CallCheck::SinkViolation {
                    policy: label,
                    sink: sink.to_string(),
                    arg: i,
                };
            }
            if rule.sanitizers.iter().any(|s| s == callee) {
                sanitized.insert(label);
            }
        }
    }
    if sanitized.is_empty() {
        CallCheck::Pass
    } else {
        CallCheck::Sanitized(sanitized)
    }
}

/// Per-execution data-flow state: callables whose return values are sources.
#[derive(Debug, Clone, Default)]
pub struct DataflowMonitor {
    callable_sources: BTreeMap<String, Vec<PolicyId>>,
}

impl DataflowMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_callable_source(&mut self, callee: &str, policy: PolicyId) {
        self.callable_sources.entry(callee.to_string()).or_default().push(policy);
    }

    pub fn has_callable_sources(&self) -> bool {
        !self.callable_sources.is_empty()
    }

    /// Labels to attach to a value returned by `callee`.
    pub fn return_labels(&self, store: &PolicyStore, callee: &str) -> TaintSet {
        match self.callable_sources.get(callee) {
            Some(ids) => ids.iter().copied().filter(|&id| store.is_enabled(id)).collect(),
            None => TaintSet::new(),
        }
    }
}

/// Whether any label in `taint` belongs to an enabled TAINT policy.
pub fn first_live_label(store: &PolicyStore, taint: &TaintSet) -> Option<PolicyId> {
    taint.iter().find(|&l| l != TAINT_ALL_LABEL && store.is_enabled(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annot::{lower_to_policy, parse_annotation, ClearSelector, Site};

    fn install(store: &mut PolicyStore, s: &str) -> PolicyId {
        store.install(lower_to_policy(&parse_annotation(s).unwrap(), Site::default()).unwrap())
    }

    #[test]
    fn set_ops() {
        let mut a: TaintSet = [3, 1, 3].into_iter().collect();
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![1, 3]);
        a.union_with(&TaintSet::single(2));
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![1, 2, 3]);
        a.remove(2);
        assert!(!a.contains(2) && a.contains(3));
    }

    #[test]
    fn propagation_rules() {
        let t = TaintSet::single(1);
        let c = TaintSet::new();
        assert_eq!(propagate(PropagateOp::BinOp, [&t, &c]), t);
        assert!(propagate(PropagateOp::BinOp, [&c, &c]).is_empty());
        assert!(propagate(PropagateOp::Literal, [&t]).is_empty());
    }

    #[test]
    fn sink_and_sanitizer() {
        let mut store = PolicyStore::new();
        let pwd = install(&mut store, "TAINT(pwd, sanitization=[hash], Sink=[print])");
        let cred = install(&mut store, "TAINT(cred, sanitization=[hash])");
        let t = TaintSet::single(pwd);
        assert!(matches!(check_call(&store, "print", [&t]), CallCheck::SinkViolation { policy, .. } if policy == pwd));
        assert_eq!(check_call(&store, "hash", [&t]), CallCheck::Sanitized(t.clone()));
        let c = TaintSet::single(cred);
        match check_call(&store, "log", [&c]) {
            CallCheck::SinkViolation { sink, .. } => assert_eq!(sink, "write"),
            other => panic!("{other:?}"),
        }
        store.clear(&ClearSelector::All);
        assert_eq!(check_call(&store, "print", [&t]), CallCheck::Pass);
    }

    #[test]
    fn sanitizing_one_label_keeps_the_other() {
        let mut store = PolicyStore::new();
        let a = install(&mut store, "TAINT(a, sanitization=[hash], Sink=[print])");
        let b = install(&mut store, "TAINT(b, Sink=[print])");
        let both: TaintSet = [a, b].into_iter().collect();
        let CallCheck::Sanitized(strip) = check_call(&store, "hash", [&both]) else { panic!() };
        let mut ret = both.clone();
        for l in strip.iter() {
            ret.remove(l);
        }
        assert_eq!(ret, TaintSet::single(b));
    }
}
