//! Glob semantics by translation to a regular expression.

use rand::{Rng, RngCore};
use regex::Regex;

/// `*` → `[^/]*`, `?` → `[^/]`, anything else literal. A trailing `/`
/// requires at least one more character after the directory prefix.
pub fn glob_to_regex(pattern: &str) -> Regex {
    let mut re = String::from("(?s)^");
    for c in pattern.chars() {
        match c {
            '*' => re.push_str("[^/]*"),
            '?' => re.push_str("[^/]"),
            c => re.push_str(&regex::escape(&c.to_string())),
        }
    }
    if pattern.ends_with('/') {
        re.push_str(".+");
    }
    re.push('$');
    Regex::new(&re).expect("translated glob is a valid regex")
}

const PATTERN_ALPHABET: &[char] = &['a', 'b', '.', '/', '/', '*', '?'];
const PATH_ALPHABET: &[char] = &['a', 'b', '.', '/', '/'];

fn draw(rng: &mut impl RngCore, alphabet: &[char], max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

/// A random pattern, and a path that is either random or derived from the
/// pattern so that roughly half the pairs match.
pub fn random_pair(rng: &mut impl RngCore) -> (String, String) {
    let pattern = draw(rng, PATTERN_ALPHABET, 8);
    let path = if rng.random_bool(0.5) {
        draw(rng, PATH_ALPHABET, 10)
    } else {
        let mut p = String::new();
        for c in pattern.chars() {
            match c {
                '*' => p.push_str(&draw(rng, &['a', 'b', '.'], 3)),
                '?' => p.push(['a', 'b', '.', '/'][rng.random_range(0..4)]),
                c => p.push(c),
            }
        }
        if pattern.ends_with('/') || rng.random_bool(0.2) {
            p.push_str(&draw(rng, PATH_ALPHABET, 3));
        }
        p
    };
    (pattern, path)
}
