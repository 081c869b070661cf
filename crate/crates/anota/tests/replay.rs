//! Offline trace checking.

use anota::harness::replay::{parse_policy_file, parse_trace, replay};
use anota::report::ViolationKind;
use anota::syscall::trace::write_trace;
use anota::vm::{compile, execute, ExecConfig};

const TRACE: &str = r#"{"seq":1,"phase":"enter","name":"openat","args":[["path","/static/index.html"],["mode","r"]],"ret":null,"pid":100,"ts":0}
{"seq":1,"phase":"exit","name":"openat","args":[],"ret":3,"pid":100,"ts":1}
{"seq":2,"phase":"enter","name":"openat","args":[["path","/static/../etc/shadow"],["mode","r"]],"ret":null,"pid":200,"ts":2}
{"seq":2,"phase":"exit","name":"openat","args":[],"ret":3,"pid":200,"ts":3}
{"seq":3,"phase":"enter","name":"read","args":[["fd",3]],"ret":null,"pid":100,"ts":4}
{"seq":3,"phase":"exit","name":"read","args":[],"ret":15,"pid":100,"ts":5}
{"seq":4,"phase":"enter","name":"read","args":[["fd",3]],"ret":null,"pid":200,"ts":6}
{"seq":4,"phase":"exit","name":"read","args":[],"ret":15,"pid":200,"ts":7}
"#;

const POLICY: &str = "# static content only
SYSCALL.FILE.ALLOW(PATH='/static/')

SYSCALL.READ.BLOCK(PATH='/etc/')
";

#[test]
fn per_pid_fd_tables() {
    let policies = parse_policy_file(POLICY).unwrap();
    let events = parse_trace(TRACE).unwrap();
    assert_eq!(events.len(), 8);
    let out = replay(&policies, &events, TRACE.as_bytes());
    assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
    let got: Vec<(u32, u64, u32)> = out
        .violations
        .iter()
        .map(|v| (v.policy_id, v.event["seq"].as_u64().unwrap(), v.site.line))
        .collect();
    // pid 200's openat leaves the static dir, and its fd 3 names /etc/shadow
    assert_eq!(got, [(1, 2, 3), (2, 4, 7)]);
    assert!(out.violations.iter().all(|v| v.kind == ViolationKind::Syscall));
    assert_eq!(out.violations[0].event["pid"], 200);
}

#[test]
fn unknown_fd_is_a_diagnostic() {
    let trace = r#"{"seq":9,"phase":"enter","name":"write","args":[["fd",42]],"ret":null,"pid":100,"ts":0}
"#;
    let policies = parse_policy_file("SYSCALL.WRITE.BLOCK()").unwrap();
    let out = replay(&policies, &parse_trace(trace).unwrap(), trace.as_bytes());
    assert!(out.violations.is_empty());
    assert_eq!(out.diagnostics.len(), 1);
}

#[test]
fn rejects_bad_input() {
    assert_eq!(parse_policy_file("TAINT(x, Sink=[print])").unwrap_err().exit_code(), 2);
    assert_eq!(parse_policy_file("SYSCALL.FILE.ALLOW(dir)").unwrap_err().exit_code(), 2);
    assert_eq!(parse_trace("{\"seq\":1}\n").unwrap_err().exit_code(), 1);
    let no_ret = r#"{"seq":1,"phase":"exit","name":"read","args":[],"ret":null,"pid":100,"ts":0}"#;
    assert!(parse_trace(no_ret).is_err());
}

#[test]
fn replay_matches_live_run() {
    let path = format!("{}/../../scripts/safe_url_opener.anota", env!("CARGO_MANIFEST_DIR"));
    let program = compile(&std::fs::read_to_string(path).unwrap()).unwrap();
    let cfg = ExecConfig {
        record_trace: true,
        ..ExecConfig::default()
    };
    let live = execute(&program, b"   https://youtube.com", &cfg);
    assert_eq!(live.violations.len(), 1);
    let mut bytes = Vec::new();
    write_trace(&mut bytes, &live.trace).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();

    let policies = parse_policy_file(
        "SYSCALL.NETWORK.BLOCK.SCHEME(\"file\", \"php\", \"ftp\", \"data\")\nSYSCALL.NETWORK.BLOCK.HOST(\"youtube.com\", \"instagram.com\")\n",
    )
    .unwrap();
    let out = replay(&policies, &parse_trace(&text).unwrap(), &bytes);
    assert_eq!(out.violations.len(), 1);
    let (l, r) = (&live.violations[0], &out.violations[0]);
    assert_eq!(l.policy_id, r.policy_id);
    assert_eq!(l.event["seq"], r.event["seq"]);
    assert_eq!(l.kind, r.kind);
    assert_eq!(l.policy_text, r.policy_text);
}
