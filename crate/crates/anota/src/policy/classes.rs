//! Syscall class sugar and the set of syscall names policies may name.

pub const FILE: &[&str] = &[
    "openat", "read", "write", "close", "stat", "access", "fchmod", "unlink", "mkdir", "rename",
];
pub const NETWORK: &[&str] = &["connect", "send", "recv"];

/// Names accepted in syscall selectors. Superset of what the VM emits so
/// replayed traces from real programs can be constrained too.
pub const KNOWN_SYSCALLS: &[&str] = &[
    "openat", "open", "creat", "read", "pread64", "readv", "write", "pwrite64", "writev", "close",
    "stat", "lstat", "fstat", "newfstatat", "statx", "access", "faccessat", "faccessat2", "chmod",
    "fchmod", "fchmodat", "chown", "fchown", "unlink", "unlinkat", "mkdir", "mkdirat", "rmdir",
    "rename", "renameat", "renameat2", "link", "symlink", "readlink", "truncate", "ftruncate",
    "connect", "send", "sendto", "sendmsg", "recv", "recvfrom", "recvmsg", "socket", "bind",
    "listen", "accept", "accept4", "execv", "execve", "execveat", "fork", "vfork", "clone",
    "clone3", "kill", "ptrace", "mmap", "mprotect", "dup", "dup2", "dup3", "ioctl",
];

pub fn is_class(name: &str) -> bool {
    members(name).is_some()
}

pub fn members(class: &str) -> Option<&'static [&'static str]> {
    match class {
        "FILE" => Some(FILE),
        "NETWORK" => Some(NETWORK),
        _ => None,
    }
}

pub fn is_known_syscall(name: &str) -> bool {
    KNOWN_SYSCALLS.contains(&name)
}

/// True iff a selector entry (syscall or class name) covers `syscall`.
pub fn entry_covers(entry: &str, syscall: &str) -> bool {
    match members(entry) {
        Some(m) => m.contains(&syscall),
        None => entry == syscall,
    }
}
