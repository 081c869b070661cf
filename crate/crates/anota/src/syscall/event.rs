use serde::{Deserialize, Serialize};

/// Process id stamped on every event the VM emits.
pub const VM_PID: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Enter,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgKind {
    Path,
    Fd,
    Mode,
    Len,
    Scheme,
    Host,
    Port,
    Argv,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgValue {
    Int(i64),
    Str(String),
    List(Vec<String>),
}

/// One `[kind, value]` pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventArg(pub ArgKind, pub ArgValue);

impl EventArg {
    pub fn path(p: impl Into<String>) -> Self {
        EventArg(ArgKind::Path, ArgValue::Str(p.into()))
    }
    pub fn fd(fd: i64) -> Self {
        EventArg(ArgKind::Fd, ArgValue::Int(fd))
    }
    pub fn mode(m: impl Into<String>) -> Self {
        EventArg(ArgKind::Mode, ArgValue::Str(m.into()))
    }
    pub fn len(n: usize) -> Self {
        EventArg(ArgKind::Len, ArgValue::Int(n as i64))
    }
}

/// A pseudo-syscall observation. Enter and exit halves share `seq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyscallEvent {
    pub seq: u64,
    pub phase: Phase,
    pub name: String,
    pub args: Vec<EventArg>,
    pub ret: Option<i64>,
    pub pid: u32,
    pub ts: f64,
}

impl SyscallEvent {
    pub fn arg(&self, kind: ArgKind) -> Option<&ArgValue> {
        self.args.iter().find(|a| a.0 == kind).map(|a| &a.1)
    }

    pub fn str_arg(&self, kind: ArgKind) -> Option<&str> {
        match self.arg(kind)? {
            ArgValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn int_arg(&self, kind: ArgKind) -> Option<i64> {
        match self.arg(kind)? {
            ArgValue::Int(i) => Some(*i),
            ArgValue::Str(s) => s.parse().ok(),
            _ => None,
        }
    }

    pub fn fd(&self) -> Option<i64> {
        self.int_arg(ArgKind::Fd)
    }

    /// Serialize as one JSONL trace line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let ev = SyscallEvent {
            seq: 3,
            phase: Phase::Enter,
            name: "openat".into(),
            args: vec![EventArg::path("/etc/passwd"), EventArg::mode("r")],
            ret: None,
            pid: VM_PID,
            ts: 12.0,
        };
        assert_eq!(
            ev.to_json_line(),
            r#"{"seq":3,"phase":"enter","name":"openat","args":[["path","/etc/passwd"],["mode","r"]],"ret":null,"pid":100,"ts":12.0}"#
        );
        let back: SyscallEvent = serde_json::from_str(&ev.to_json_line()).unwrap();
        assert_eq!(back, ev);
    }

    #[test]
    fn rejects_unknown_fields_and_kinds() {
        let extra = r#"{"seq":1,"phase":"enter","name":"read","args":[],"ret":null,"pid":1,"ts":0,"x":1}"#;
        assert!(serde_json::from_str::<SyscallEvent>(extra).is_err());
        let kind = r#"{"seq":1,"phase":"enter","name":"read","args":[["colour",1]],"ret":null,"pid":1,"ts":0}"#;
        assert!(serde_json::from_str::<SyscallEvent>(kind).is_err());
        let argv = r#"{"seq":1,"phase":"enter","name":"execve","args":[["argv",["ls","-l"]]],"ret":null,"pid":1,"ts":0.5}"#;
        let ev: SyscallEvent = serde_json::from_str(argv).unwrap();
        assert_eq!(ev.arg(ArgKind::Argv), Some(&ArgValue::List(vec!["ls".into(), "-l".into()])));
    }
}
