//! Literal reference evaluator for syscall policy decisions.
//!
//! Policies are described by hand next to their annotation text, so the
//! evaluator shares no parsing or lowering code with the library.

use std::collections::HashMap;
use std::sync::LazyLock;

use rand::{Rng, RngCore};

use regex::Regex;

use super::glob::glob_to_regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMode {
    Allow,
    Block,
}

#[derive(Debug, Clone)]
pub struct RefPolicy {
    pub text: &'static str,
    pub mode: RefMode,
    /// Syscall or class names; empty covers every syscall.
    pub selector: &'static [&'static str],
    /// Option dimension: "path", "scheme", "host" or "port".
    pub dim: Option<&'static str>,
    pub patterns: &'static [&'static str],
}

pub const POOL: [RefPolicy; 12] = [
    RefPolicy { text: "SYSCALL.BLOCK('execve')", mode: RefMode::Block, selector: &["execve"], dim: None, patterns: &[] },
    RefPolicy { text: "SYSCALL.READ.BLOCK(PATH='/etc/')", mode: RefMode::Block, selector: &["read"], dim: Some("path"), patterns: &["/etc/"] },
    RefPolicy { text: "SYSCALL.EXECVE.ALLOW(PATH='/bin/ls')", mode: RefMode::Allow, selector: &["execve"], dim: Some("path"), patterns: &["/bin/ls"] },
    RefPolicy { text: "SYSCALL.FILE.ALLOW(PATH='/static/')", mode: RefMode::Allow, selector: &["FILE"], dim: Some("path"), patterns: &["/static/"] },
    RefPolicy { text: "SYSCALL.NETWORK.BLOCK.HOST('youtube.com', 'instagram.com')", mode: RefMode::Block, selector: &["NETWORK"], dim: Some("host"), patterns: &["youtube.com", "instagram.com"] },
    RefPolicy { text: "SYSCALL.NETWORK.BLOCK.SCHEME('file', 'ftp')", mode: RefMode::Block, selector: &["NETWORK"], dim: Some("scheme"), patterns: &["file", "ftp"] },
    RefPolicy { text: "SYSCALL.NETWORK.ALLOW.PORT('443', '80')", mode: RefMode::Allow, selector: &["NETWORK"], dim: Some("port"), patterns: &["443", "80"] },
    RefPolicy { text: "SYSCALL.ALLOW('openat', 'read', 'close')", mode: RefMode::Allow, selector: &["openat", "read", "close"], dim: None, patterns: &[] },
    RefPolicy { text: "SYSCALL.WRITE.BLOCK(PATH='/tmp/*.log')", mode: RefMode::Block, selector: &["write"], dim: Some("path"), patterns: &["/tmp/*.log"] },
    RefPolicy { text: "SYSCALL.OPENAT.ALLOW(PATH='/tmp/*')", mode: RefMode::Allow, selector: &["openat"], dim: Some("path"), patterns: &["/tmp/*"] },
    RefPolicy { text: "SYSCALL.NETWORK.ALLOW.HOST('*.example.com', 'example.com')", mode: RefMode::Allow, selector: &["NETWORK"], dim: Some("host"), patterns: &["*.example.com", "example.com"] },
    RefPolicy { text: "SYSCALL.UNLINK.BLOCK()", mode: RefMode::Block, selector: &["unlink"], dim: None, patterns: &[] },
];

static POOL_REGEXES: LazyLock<Vec<Vec<Regex>>> =
    LazyLock::new(|| POOL.iter().map(|p| p.patterns.iter().map(|g| glob_to_regex(g)).collect()).collect());

const FILE_CLASS: &[&str] = &["openat", "read", "write", "close", "stat", "access", "fchmod", "unlink", "mkdir", "rename"];
const NETWORK_CLASS: &[&str] = &["connect", "send", "recv"];

fn covers(selector: &[&str], name: &str) -> bool {
    selector.is_empty()
        || selector.iter().any(|s| match *s {
            "FILE" => FILE_CLASS.contains(&name),
            "NETWORK" => NETWORK_CLASS.contains(&name),
            s => s == name,
        })
}

/// Resolved resource of one enter event, by dimension.
pub type View = HashMap<&'static str, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefCause {
    Blocked,
    NotAllowed,
}

/// Decide an event. `store` lists pool indices in installation order; the
/// policy id of `store[i]` is `i + 1`.
pub fn decide(store: &[usize], name: &str, view: &View) -> Option<(u32, RefCause)> {
    let matches = |k: usize| match POOL[k].dim {
        None => true,
        Some(d) => match view.get(d) {
            Some(v) => POOL_REGEXES[k].iter().any(|re| re.is_match(v)),
            None => false,
        },
    };
    let ids = || store.iter().enumerate().map(|(i, &k)| ((i + 1) as u32, k, &POOL[k]));
    let blocked = ids()
        .filter(|&(_, k, p)| p.mode == RefMode::Block && covers(p.selector, name) && matches(k))
        .map(|(id, _, _)| id)
        .min();
    if let Some(id) = blocked {
        return Some((id, RefCause::Blocked));
    }
    // Allowlists, one group per dimension. Option-less allows bind every
    // syscall; dimensioned allows bind covered syscalls that have a value.
    let mut violated = Vec::new();
    for dim in [None, Some("path"), Some("scheme"), Some("host"), Some("port")] {
        let group: Vec<(u32, usize, &RefPolicy)> = ids()
            .filter(|(_, _, p)| p.mode == RefMode::Allow && p.dim == dim)
            .filter(|(_, _, p)| dim.is_none() || (covers(p.selector, name) && view.contains_key(dim.unwrap())))
            .collect();
        if group.is_empty() {
            continue;
        }
        let ok = group.iter().any(|&(_, k, p)| covers(p.selector, name) && matches(k));
        if !ok {
            violated.push(group.iter().map(|(id, _, _)| *id).min().unwrap());
        }
    }
    violated.into_iter().min().map(|id| (id, RefCause::NotAllowed))
}

/// Lexical `.`/`..` resolution against `/`.
pub fn normalize(path: &str) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    let mut out = format!("/{}", parts.join("/"));
    if path.ends_with('/') && out.len() > 1 {
        out.push('/');
    }
    out
}

/// One generated call: enter arguments plus return value.
#[derive(Debug, Clone)]
pub struct RefCall {
    pub pid: u32,
    pub seq: u64,
    pub name: &'static str,
    pub path: Option<String>,
    pub fd: Option<i64>,
    pub mode: Option<&'static str>,
    pub net: Option<(&'static str, &'static str, i64)>,
    pub ret: i64,
}

const PATHS: &[&str] = &[
    "/etc/passwd",
    "/static/index.html",
    "/static/../etc/passwd",
    "/tmp/a.log",
    "/tmp/b.txt",
    "/tmp/sub/c.log",
    "/bin/ls",
    "/bin/cat",
];
const SCHEMES: &[&str] = &["https", "http", "ftp", "file"];
const HOSTS: &[&str] = &["example.com", "api.example.com", "youtube.com", "instagram.com", "evil.org"];
const PORTS: &[i64] = &[443, 80, 8080, 21];

/// `calls` random calls across two pids. Each becomes an enter and an exit
/// event, so the trace has `2 * calls` events.
pub fn random_trace(rng: &mut impl RngCore, calls: usize) -> Vec<RefCall> {
    let mut next_fd: HashMap<u32, i64> = HashMap::new();
    let mut out = Vec::new();
    for seq in 1..=calls as u64 {
        let pid = if rng.random_bool(0.7) { 100 } else { 101 };
        let fd_hint = next_fd.get(&pid).copied().unwrap_or(3);
        let any_fd = rng.random_range(2..fd_hint.max(3) + 1);
        let path = PATHS[rng.random_range(0..PATHS.len())].to_string();
        let mut call = RefCall { pid, seq, name: "", path: None, fd: None, mode: None, net: None, ret: 0 };
        match rng.random_range(0..10) {
            0 | 1 => {
                call.name = "openat";
                call.path = Some(path);
                call.mode = Some(["r", "w"][rng.random_range(0..2)]);
                call.ret = if rng.random_bool(0.85) { fd_hint } else { -2 };
                if call.ret >= 0 {
                    next_fd.insert(pid, fd_hint + 1);
                }
            }
            2 => {
                call.name = "connect";
                call.net = Some((
                    SCHEMES[rng.random_range(0..SCHEMES.len())],
                    HOSTS[rng.random_range(0..HOSTS.len())],
                    PORTS[rng.random_range(0..PORTS.len())],
                ));
                call.ret = fd_hint;
                next_fd.insert(pid, fd_hint + 1);
            }
            3 | 4 => {
                call.name = ["read", "write"][rng.random_range(0..2)];
                call.fd = Some(any_fd);
                call.ret = 1;
            }
            5 => {
                call.name = ["send", "recv"][rng.random_range(0..2)];
                call.fd = Some(any_fd);
            }
            6 => {
                call.name = "close";
                call.fd = Some(any_fd);
            }
            7 => {
                call.name = "execve";
                call.path = Some(path);
            }
            8 => {
                call.name = ["unlink", "stat", "access"][rng.random_range(0..3)];
                call.path = Some(path);
            }
            _ => {
                call.name = "mkdir";
                call.path = Some(path);
            }
        }
        out.push(call);
    }
    out
}

#[derive(Debug, Clone)]
enum Res {
    File(String),
    Sock(&'static str, &'static str, i64),
}

/// Expected `(policy id, seq, cause)` for every enter event of `trace`.
pub fn evaluate(store: &[usize], trace: &[RefCall]) -> Vec<(u32, u64, RefCause)> {
    let mut fds: HashMap<(u32, i64), Res> = HashMap::new();
    let mut out = Vec::new();
    for c in trace {
        let mut view = View::new();
        let mut known = true;
        if let Some(p) = &c.path {
            view.insert("path", normalize(p));
        } else if let Some((s, h, p)) = c.net {
            view.insert("scheme", s.to_string());
            view.insert("host", h.to_string());
            view.insert("port", p.to_string());
        } else if let Some(fd) = c.fd {
            match fds.get(&(c.pid, fd)) {
                Some(Res::File(p)) => {
                    view.insert("path", p.clone());
                }
                Some(Res::Sock(s, h, p)) => {
                    view.insert("scheme", s.to_string());
                    view.insert("host", h.to_string());
                    view.insert("port", p.to_string());
                }
                None => known = false,
            }
        }
        if known {
            if let Some((id, cause)) = decide(store, c.name, &view) {
                out.push((id, c.seq, cause));
            }
        }
        match c.name {
            "openat" if c.ret >= 0 => {
                fds.insert((c.pid, c.ret), Res::File(normalize(c.path.as_deref().unwrap())));
            }
            "connect" if c.ret >= 0 => {
                let (s, h, p) = c.net.unwrap();
                fds.insert((c.pid, c.ret), Res::Sock(s, h, p));
            }
            "close" => {
                fds.remove(&(c.pid, c.fd.unwrap()));
            }
            _ => {}
        }
    }
    out
}

/// Every subset of `0..n` with at most `k` elements, in ascending order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&l: &usize| l + 1);
            for i in start..n {
                let mut t = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
