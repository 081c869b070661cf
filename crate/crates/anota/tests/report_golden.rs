use anota::report::ViolationKind;
use anota::vm::{compile, execute, ExecConfig};

#[test]
fn credential_report_line() {
    let path = format!("{}/../../scripts/credential_log.anota", env!("CARGO_MANIFEST_DIR"));
    let program = compile(&std::fs::read_to_string(path).unwrap()).unwrap();
    let r = execute(&program, b"alice", &ExecConfig::default());
    assert_eq!(r.violations.len(), 1);
    let v = &r.violations[0];
    assert_eq!(v.kind, ViolationKind::DataFlowSink);
    let line = v.to_json_line();
    let parsed: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(parsed["schema_version"], 1);
    assert_eq!(parsed["input_digest"], "2bd806c97f0e00af1a1fc3328fa763a9269723c8db8fac4f93af71db186d6e90");
    assert_eq!(line, GOLDEN);
}

const GOLDEN: &str = r#"{"schema_version":1,"policy_id":1,"policy_text":"TAINT(user_credential, sanitization=[hash], Sink=[write])","kind":"DataFlowSink","site":{"line":7,"op":11},"event":{"arg":0,"callee":"log","sink":"write","source":"user_credential"},"message":"data labelled by `user_credential` reaches sink `write`","input_digest":"2bd806c97f0e00af1a1fc3328fa763a9269723c8db8fac4f93af71db186d6e90"}"#;
