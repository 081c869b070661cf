mod oracles;

use anota::policy::GlobPattern;
use oracles::glob::{glob_to_regex, random_pair};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn match_glob(pattern: &str, path: &str) -> bool {
    GlobPattern::new(pattern).matches(path)
}

#[test]
fn ten_thousand_seeded_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut hits = 0;
    for _ in 0..10_000 {
        let (pattern, path) = random_pair(&mut rng);
        let expected = glob_to_regex(&pattern).is_match(&path);
        assert_eq!(match_glob(&pattern, &path), expected, "pattern {pattern:?} path {path:?}");
        hits += expected as usize;
    }
    assert!((1000..9000).contains(&hits), "only {hits} matches");
}

#[test]
fn table_cases() {
    let cases = [
        ("/etc/", "/etc/passwd", true),
        ("/etc/", "/etc/", false),
        ("/etc/", "/etcx/passwd", false),
        ("/etc/", "/etc/ssh/sshd_config", true),
        ("/tmp/*", "/tmp/a", true),
        ("/tmp/*", "/tmp/a/b", false),
        ("*.example.com", "api.example.com", true),
        ("*.example.com", "example.com", false),
        ("/bin/l?", "/bin/ls", true),
        ("/bin/l?", "/bin/l/", false),
        ("", "", true),
    ];
    for (p, s, want) in cases {
        assert_eq!(match_glob(p, s), want, "{p:?} vs {s:?}");
    }
}

proptest! {
    #[test]
    fn agrees_with_regex(pattern in "[ab./*?]{0,8}", path in "[ab./]{0,10}") {
        prop_assert_eq!(match_glob(&pattern, &path), glob_to_regex(&pattern).is_match(&path));
    }

    #[test]
    fn literal_patterns_match_themselves(s in "[a-z./]{0,12}") {
        prop_assume!(!s.ends_with('/'));
        prop_assert!(match_glob(&s, &s));
    }

    #[test]
    fn star_never_crosses_slash(a in "[a-z]{1,5}", b in "[a-z]{1,5}") {
        let path = format!("/{a}/{b}");
        prop_assert!(!match_glob("/*", &path));
        prop_assert!(match_glob("/*/*", &path));
    }
}
