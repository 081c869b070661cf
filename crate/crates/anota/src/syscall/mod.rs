//! Pseudo-syscall events, fd resolution, policy decisions and TOCTOU detection.

mod event;
mod fdtable;
mod monitor;
mod path;
pub mod trace;

pub use event::{ArgKind, ArgValue, EventArg, Phase, SyscallEvent, VM_PID};
pub use fdtable::{FdTable, ResourceDesc, ResourceKind, UnknownFd};
pub use monitor::{
    decide, detect_toctou, observe, resolve_resource, view_event, EventView, Outcome, SyscallMonitor,
    SyscallViolation, ToctouPattern, ToctouState, ViolationCause, CHECK_CALLS, USE_CALLS,
};
pub use path::normalize_path;
