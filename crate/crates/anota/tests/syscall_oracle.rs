//! Monitor decisions against an independent reference evaluator, over every
//! small policy set drawn from a fixed pool.

mod oracles;

use anota::annot::{lower_to_policy, parse_annotation, Site};
use anota::policy::PolicyStore;
use anota::syscall::{ArgKind, ArgValue, EventArg, Phase, SyscallEvent, SyscallMonitor, ViolationCause};
use oracles::syscall::{evaluate, random_trace, subsets, RefCall, RefCause, POOL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_events(trace: &[RefCall]) -> Vec<SyscallEvent> {
    let mut out = Vec::new();
    for c in trace {
        let mut args = Vec::new();
        if let Some(p) = &c.path {
            args.push(EventArg::path(p.clone()));
        }
        if let Some(m) = c.mode {
            args.push(EventArg::mode(m));
        }
        if let Some(fd) = c.fd {
            args.push(EventArg::fd(fd));
        }
        if let Some((s, h, p)) = c.net {
            args.push(EventArg(ArgKind::Scheme, ArgValue::Str(s.into())));
            args.push(EventArg(ArgKind::Host, ArgValue::Str(h.into())));
            args.push(EventArg(ArgKind::Port, ArgValue::Int(p)));
        }
        for (phase, ret) in [(Phase::Enter, None), (Phase::Exit, Some(c.ret))] {
            out.push(SyscallEvent {
                seq: c.seq,
                phase,
                name: c.name.into(),
                args: if phase == Phase::Enter { args.clone() } else { vec![] },
                ret,
                pid: c.pid,
                ts: c.seq as f64,
            });
        }
    }
    out
}

fn monitor_decisions(store: &PolicyStore, events: &[SyscallEvent]) -> Vec<(u32, u64, RefCause)> {
    let mut monitor = SyscallMonitor::new();
    let mut out = Vec::new();
    for e in events {
        for v in monitor.process(store, e) {
            let cause = match v.cause {
                ViolationCause::Blocked => RefCause::Blocked,
                ViolationCause::NotAllowed => RefCause::NotAllowed,
                ViolationCause::Toctou(p) => panic!("unexpected TOCTOU report {p:?} without sensitive data"),
            };
            out.push((v.policy, v.seq, cause));
        }
    }
    out
}

#[test]
fn pool_annotations_lower() {
    for p in &POOL {
        let ast = parse_annotation(p.text).unwrap_or_else(|e| panic!("{}: {e}", p.text));
        lower_to_policy(&ast, Site::default()).unwrap_or_else(|e| panic!("{}: {e}", p.text));
    }
}

#[test]
fn every_small_policy_set_agrees_with_reference() {
    let specs: Vec<_> = POOL
        .iter()
        .map(|p| lower_to_policy(&parse_annotation(p.text).unwrap(), Site::default()).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let traces: Vec<Vec<RefCall>> = (0..200).map(|_| random_trace(&mut rng, 10)).collect();
    let events: Vec<Vec<SyscallEvent>> = traces.iter().map(|t| to_events(t)).collect();
    let sets = subsets(POOL.len(), 5);
    assert_eq!(sets.len(), 1586);
    let mut decisions = 0usize;
    let mut violations = 0usize;
    for set in &sets {
        let mut store = PolicyStore::new();
        for &i in set {
            store.install(specs[i].clone());
        }
        for (trace, evs) in traces.iter().zip(&events) {
            let expected = evaluate(set, trace);
            let actual = monitor_decisions(&store, evs);
            assert_eq!(
                actual,
                expected,
                "policies {:?}\ntrace {:#?}",
                set.iter().map(|&i| POOL[i].text).collect::<Vec<_>>(),
                trace
            );
            decisions += trace.len();
            violations += expected.len();
        }
    }
    // the pool must exercise both outcomes heavily
    assert!(violations > decisions / 10, "{violations} of {decisions}");
    assert!(violations < decisions * 9 / 10, "{violations} of {decisions}");
}
