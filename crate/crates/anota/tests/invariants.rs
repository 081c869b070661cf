use anota::annot::{parse_annotation, AnnotationAst, Arg};
use anota::dataflow::TaintSet;
use anota::syscall::normalize_path;
use anota::vm::{compile, execute, ExecConfig};
use proptest::prelude::*;

fn arg() -> impl Strategy<Value = Arg> {
    let leaf = prop_oneof![
        "[a-z/.* ]{0,8}".prop_map(Arg::Str),
        (-1000i64..1000).prop_map(Arg::Int),
        "[a-z_][a-z0-9_]{0,6}".prop_map(Arg::Name),
    ];
    leaf.prop_recursive(2, 6, 3, |inner| prop::collection::vec(inner, 0..3).prop_map(Arg::List))
}

fn ast() -> impl Strategy<Value = AnnotationAst> {
    (
        prop::sample::select(vec!["SYSCALL", "TAINT", "WATCH"]),
        prop::collection::vec("[A-Z]{1,6}", 0..3),
        prop::collection::vec(arg(), 0..3),
        prop::collection::vec(("[a-z][a-z_]{0,5}", arg()), 0..2),
    )
        .prop_map(|(root, rest, args, kwargs)| {
            let mut head = vec![root.to_string()];
            head.extend(rest);
            AnnotationAst { head, args, kwargs }
        })
}

proptest! {
    #[test]
    fn normalize_is_idempotent(p in "[a-c./]{0,20}") {
        let once = normalize_path(&p);
        prop_assert_eq!(normalize_path(&once), once.clone());
        prop_assert!(!once.split('/').any(|s| s == ".." || s == "."));
    }

    #[test]
    fn printed_annotations_reparse(a in ast()) {
        let printed = a.to_string();
        prop_assert_eq!(parse_annotation(&printed).unwrap(), a);
    }

    #[test]
    fn parser_never_panics(s in "[A-Za-z()'\"=,.\\[\\] ]{0,40}") {
        let _ = parse_annotation(&s);
    }

    #[test]
    fn compiler_never_panics(s in "[a-z0-9()\\[\\]:=+ \n\"'.,]{0,60}") {
        if let Ok(p) = compile(&s) {
            let cfg = ExecConfig { cost_limit: 10_000, ..ExecConfig::default() };
            let _ = execute(&p, b"x", &cfg);
        }
    }

    #[test]
    fn taint_union_is_a_join(a in prop::collection::vec(1u32..8, 0..5), b in prop::collection::vec(1u32..8, 0..5)) {
        let (x, y): (TaintSet, TaintSet) = (a.iter().copied().collect(), b.iter().copied().collect());
        let u = x.union(&y);
        prop_assert_eq!(u.clone(), y.union(&x));
        prop_assert_eq!(u.union(&x), u.clone());
        for l in 1..8 {
            prop_assert_eq!(u.contains(l), x.contains(l) || y.contains(l));
        }
    }
}
