//! Active policy set, enable/disable lifecycle, and shared matchers.

pub mod classes;
mod glob;

pub use glob::{match_glob, GlobPattern};

use crate::annot::{ClearSelector, Domain, PatternValue, PolicySpec, Rule, Site};

pub type PolicyId = u32;

/// An installed policy.
#[derive(Debug, Clone)]
pub struct Policy {
    pub id: PolicyId,
    pub spec: PolicySpec,
    pub enabled: bool,
    pub install_site: Site,
    globs: Vec<GlobPattern>,
}

impl Policy {
    /// Compiled option patterns. Unresolved bindings are dropped and so never match.
    pub fn patterns(&self) -> &[GlobPattern] {
        &self.globs
    }

    pub fn rule(&self) -> &Rule {
        &self.spec.rule
    }

    pub fn text(&self) -> String {
        self.spec.rule.to_string()
    }
}

/// Installed policies in installation order.
#[derive(Debug, Clone, Default)]
pub struct PolicyStore {
    policies: Vec<Policy>,
    next_id: PolicyId,
}

impl PolicyStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Install a policy and return its id. Ids start at 1 and are never reused.
    ///
    /// Panics if given a `Clear` spec; clears go through [`PolicyStore::clear`].
    pub fn install(&mut self, spec: PolicySpec) -> PolicyId {
        assert!(spec.domain() != Domain::Clear, "CLEAR is not installable");
        self.next_id += 1;
        let globs = match &spec.rule {
            Rule::Syscall(r) => r
                .option
                .iter()
                .flat_map(|o| &o.patterns)
                .filter_map(|p| match p {
                    PatternValue::Literal(s) => Some(GlobPattern::new(s)),
                    PatternValue::Binding(_) => None,
                })
                .collect(),
            _ => Vec::new(),
        };
        let install_site = spec.site;
        self.policies.push(Policy {
            id: self.next_id,
            spec,
            enabled: true,
            install_site,
            globs,
        });
        self.next_id
    }

    /// Disable every enabled policy the selector names; returns how many.
    pub fn clear(&mut self, selector: &ClearSelector) -> usize {
        let mut count = 0;
        for p in self.policies.iter_mut().filter(|p| p.enabled) {
            let hit = match selector {
                ClearSelector::All => true,
                ClearSelector::Syscall(class) => match (&p.spec.rule, class) {
                    (Rule::Syscall(_), None) => true,
                    (Rule::Syscall(r), Some(c)) => selector_intersects(&r.selector, c),
                    _ => false,
                },
                ClearSelector::Spec(rule) => p.spec.rule == **rule,
            };
            if hit {
                p.enabled = false;
                count += 1;
            }
        }
        count
    }

    pub fn get(&self, id: PolicyId) -> Option<&Policy> {
        // ids are dense and 1-based
        self.policies.get((id as usize).checked_sub(1)?)
    }

    pub fn is_enabled(&self, id: PolicyId) -> bool {
        self.get(id).is_some_and(|p| p.enabled)
    }

    /// All policies, including disabled ones, in installation order.
    pub fn iter(&self) -> impl Iterator<Item = &Policy> {
        self.policies.iter()
    }

    pub fn enabled(&self) -> impl Iterator<Item = &Policy> {
        self.policies.iter().filter(|p| p.enabled)
    }

    pub fn enabled_in(&self, domain: Domain) -> impl Iterator<Item = &Policy> {
        self.enabled().filter(move |p| p.spec.domain() == domain)
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn class_members(class: &str) -> Option<&'static [&'static str]> {
        classes::members(class)
    }
}

/// Whether a syscall selector covers `syscall`. Empty selectors cover everything.
pub fn selector_covers<'a>(selector: impl IntoIterator<Item = &'a String>, syscall: &str) -> bool {
    let mut empty = true;
    for entry in selector {
        empty = false;
        if classes::entry_covers(entry, syscall) {
            return true;
        }
    }
    empty
}

fn selector_intersects(selector: &std::collections::BTreeSet<String>, class: &str) -> bool {
    if selector.is_empty() || selector.contains(class) {
        return true;
    }
    let names: &[&str] = match classes::members(class) {
        Some(m) => m,
        None => &[class],
    };
    names.iter().any(|n| selector_covers(selector, n))
}
