//! End-to-end scripts under the instrumented VM.

use anota::report::ViolationKind;
use anota::vm::{compile, execute, Escalation, ExecConfig, ExecResult, ExecStatus, Program, Vfs};

fn script(name: &str) -> String {
    let path = format!("{}/../../scripts/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn run_with(src: &str, input: &str, cfg: &ExecConfig) -> ExecResult {
    let program = compile(src).unwrap_or_else(|e| panic!("{e}"));
    execute(&program, input.as_bytes(), cfg)
}

fn run(src: &str, input: &str) -> ExecResult {
    run_with(src, input, &ExecConfig::default())
}

fn collect() -> ExecConfig {
    ExecConfig {
        escalation: Escalation::Collect,
        ..ExecConfig::default()
    }
}

fn kinds(r: &ExecResult) -> Vec<ViolationKind> {
    r.violations.iter().map(|v| v.kind).collect()
}

#[test]
fn url_opener_blocks_padded_host() {
    let src = script("safe_url_opener.anota");
    let r = run(&src, "   https://youtube.com");
    assert_eq!(r.exit_code(), 77);
    assert_eq!(kinds(&r), [ViolationKind::Syscall]);
    assert_eq!(r.violations[0].event["name"], "connect");
    for ok in ["https://youtube.com", "https://example.com"] {
        let r = run(&src, ok);
        assert_eq!(r.exit_code(), 0, "{ok}: {:?}", r.violations);
    }
}

#[test]
fn annotated_opener_call_sites() {
    let program = compile(&script("url_opener_annotated.anota")).unwrap();
    assert_eq!(program.call_sites(), (7, 3));
    assert_eq!(execute(&program, b"https://youtube.com", &ExecConfig::default()).exit_code(), 77);
    assert_eq!(execute(&program, b"ftp://example.com", &ExecConfig::default()).exit_code(), 77);
    assert_eq!(execute(&program, b"https://example.com", &ExecConfig::default()).exit_code(), 0);
}

#[test]
fn credential_reaches_log() {
    let r = run(&script("credential_log.anota"), "alice");
    assert_eq!(kinds(&r), [ViolationKind::DataFlowSink]);
    assert_eq!(r.violations[0].event["sink"], "write");
    let again = run(&script("credential_log.anota"), "alice");
    assert_eq!(again.violations, r.violations);
    assert_eq!(run(&script("credential_log_hashed.anota"), "alice").exit_code(), 0);
}

#[test]
fn static_dir_traversal() {
    let src = script("static_files.anota");
    let r = run(&src, "../../etc/passwd");
    assert_eq!(kinds(&r), [ViolationKind::Syscall]);
    let r = run(&src, "index.html");
    assert_eq!(r.status, ExecStatus::Clean);
    assert_eq!(r.output, ["<h1>hello</h1>\n"]);
}

#[test]
fn read_only_user_list() {
    let src = script("user_admin.anota");
    let r = run(&src, "admin-token");
    assert_eq!(kinds(&r), [ViolationKind::ObjectAccess]);
    assert_eq!(r.violations[0].event["access"], "write");
    let r = run(&src, "guest");
    assert_eq!(r.status, ExecStatus::Clean);
    assert_eq!(r.output, ["not authenticated", "2"]);
}

#[test]
fn execution_block_fires_iff_truthy() {
    let src = script("admin_guard.anota");
    assert_eq!(kinds(&run(&src, "guest")), [ViolationKind::Execution]);
    let r = run(&src, "admin");
    assert_eq!(r.status, ExecStatus::Clean);
    assert_eq!(r.output, ["welcome, admin"]);
    for (cond, fires) in [("1", true), ("0", false), ("\"\"", false), ("[0]", true), ("None", false)] {
        let r = run(&format!("EXECUTION.BLOCK({cond})\n"), "");
        assert_eq!(r.status == ExecStatus::Violation, fires, "{cond}");
    }
    assert_eq!(kinds(&run("EXECUTION.BLOCK()\n", "")), [ViolationKind::Execution]);
}

const TRIPLE: &str = "SYSCALL.BLOCK('unlink')
unlink('/tmp/a')
x = input()
TAINT(x, Sink=[print])
print(x)
EXECUTION.BLOCK(1 == 1)
print('done')
";

#[test]
fn collect_keeps_going() {
    let r = run_with(TRIPLE, "s", &collect());
    assert_eq!(r.status, ExecStatus::Violation);
    assert_eq!(
        kinds(&r),
        [ViolationKind::Syscall, ViolationKind::DataFlowSink, ViolationKind::Execution]
    );
    assert_eq!(r.output.last().map(String::as_str), Some("done"));

    let r = run(TRIPLE, "s");
    assert_eq!(kinds(&r), [ViolationKind::Syscall]);
    assert!(r.output.is_empty());
}

fn toctou_script(payload: &str) -> String {
    format!(
        "secret = input()
TAINT(secret, Sink=[print])
fd = open('/tmp/report.txt', 'w')
write(fd, {payload})
close(fd)
if access('/tmp/report.txt') == 0:
    fd = open('/tmp/report.txt', 'r')
    close(fd)
"
    )
}

#[test]
fn toctou_check_then_use() {
    let r = run_with(&toctou_script("secret"), "hunter2", &collect());
    assert_eq!(kinds(&r), [ViolationKind::Toctou]);
    assert_eq!(r.violations[0].policy_id, 1);
    let clean = run_with(&toctou_script("'public'"), "hunter2", &collect());
    assert_eq!(clean.status, ExecStatus::Clean, "{:?}", clean.violations);
    // same syscall sequence either way
    let cfg = ExecConfig {
        record_trace: true,
        ..collect()
    };
    let a = run_with(&toctou_script("secret"), "hunter2", &cfg);
    let b = run_with(&toctou_script("'public'"), "hunter2", &cfg);
    let seq = |r: &ExecResult| r.trace.iter().map(|e| (e.name.clone(), e.phase)).collect::<Vec<_>>();
    assert_eq!(seq(&a), seq(&b));
}

#[test]
fn toctou_create_write_chmod() {
    let src = |payload: &str| {
        format!(
            "key = input()
TAINT(key, Sink=[print])
fd = open('/tmp/key.pem', 'w')
write(fd, {payload})
chmod('/tmp/key.pem', 384)
"
        )
    };
    let r = run_with(&src("key"), "k", &collect());
    assert_eq!(kinds(&r), [ViolationKind::Toctou]);
    assert_eq!(r.violations[0].event["name"], "fchmod");
    assert_eq!(run_with(&src("'x'"), "k", &collect()).status, ExecStatus::Clean);
}

#[test]
fn local_watch_is_frame_scoped() {
    let src = "def f(touch):
    tmp = [1]
    WATCH.ALLOW(tmp, 'r')
    if touch:
        tmp.append(2)
    return len(tmp)

def g():
    tmp = [1]
    tmp.append(2)
    return len(tmp)

tmp = [0]
print(f(0))
print(g())
tmp.append(1)
print(f(input() == 'yes'))
";
    let r = run(src, "no");
    assert_eq!(r.status, ExecStatus::Clean, "{:?}", r.violations);
    assert_eq!(r.output, ["1", "2", "1"]);
    assert_eq!(kinds(&run(src, "yes")), [ViolationKind::ObjectAccess]);
}

#[test]
fn execution_leaves_config_vfs_alone() {
    let src = "fd = open('/tmp/out.txt', 'w')
write(fd, input())
close(fd)
unlink('/etc/passwd')
print(read(open('/tmp/out.txt')))
";
    let cfg = ExecConfig::default();
    let before: Vec<(String, String)> = cfg.vfs.files().map(|(a, b)| (a.into(), b.into())).collect();
    let r1 = execute(&compile(src).unwrap(), b"one", &cfg);
    let r2 = execute(&compile(src).unwrap(), b"one", &cfg);
    let after: Vec<(String, String)> = cfg.vfs.files().map(|(a, b)| (a.into(), b.into())).collect();
    assert_eq!(before, after);
    assert_eq!(r1.output, ["one"]);
    assert_eq!((&r1.output, &r1.coverage, r1.cost), (&r2.output, &r2.coverage, r2.cost));
}

#[test]
fn custom_vfs_manifest() {
    let vfs = Vfs::from_manifest("\"/srv/a.txt\" = \"alpha\"\n").unwrap();
    let cfg = ExecConfig {
        vfs,
        ..ExecConfig::default()
    };
    let r = run_with("print(read(open('/srv/a.txt')))\nprint(open('/etc/passwd'))\n", "", &cfg);
    assert_eq!(r.output, ["alpha", "-2"]);
}

fn clean_corpus() -> Vec<(String, String, &'static str)> {
    let mut out: Vec<(String, String, &'static str)> = anota::harness::bench::SUITE
        .iter()
        .map(|(n, s)| (n.to_string(), s.to_string(), ""))
        .collect();
    out.push(("opener".into(), script("safe_url_opener.anota"), "https://example.com"));
    out.push(("hashed".into(), script("credential_log_hashed.anota"), "bob"));
    out.push(("static".into(), script("static_files.anota"), "index.html"));
    out.push(("users".into(), script("user_admin.anota"), "guest"));
    out.push(("guard".into(), script("admin_guard.anota"), "admin"));
    out
}

#[test]
fn monitors_do_not_change_clean_runs() {
    let off = ExecConfig {
        monitors: false,
        ..ExecConfig::default()
    };
    for (name, src, input) in clean_corpus() {
        let program = compile(&src).unwrap();
        let on = execute(&program, input.as_bytes(), &ExecConfig::default());
        let bare = execute(&program, input.as_bytes(), &off);
        assert_eq!(on.status, ExecStatus::Clean, "{name}");
        assert_eq!(bare.status, ExecStatus::Clean, "{name}");
        assert_eq!(on.output, bare.output, "{name}");
        assert_eq!(on.globals, bare.globals, "{name}");
        assert_eq!(on.cost, bare.cost, "{name}");
    }
}

#[test]
fn compilation_is_deterministic() {
    let mut corpus: Vec<String> = clean_corpus().into_iter().map(|(_, s, _)| s).collect();
    for name in ["credential_log.anota", "secret_compare.anota", "secret_compare_ct.anota", "url_opener_annotated.anota"] {
        corpus.push(script(name));
    }
    let mut i = 0;
    while corpus.len() < 50 {
        corpus.push(format!(
            "def h{i}(a, b):\n    while a < b:\n        a = a + {i}\n    return [a, b, '{i}']\nx = h{i}(len(input()), {})\nif x[0] > 3:\n    print(x)\nelse:\n    SYSCALL.FILE.BLOCK(PATH='/tmp/{i}')\n",
            i * 7 + 1
        ));
        i += 1;
    }
    for src in &corpus {
        let a: Program = compile(src).unwrap();
        let b = compile(src).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let src = script("secret_compare.anota");
    let cfg = ExecConfig {
        record_trace: true,
        timing_targets: vec!["check".into()],
        ..collect()
    };
    let a = run_with(&src, "k3y-guess", &cfg);
    let b = run_with(&src, "k3y-guess", &cfg);
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.coverage, b.coverage);
    assert_eq!(a.trace, b.trace);
}
