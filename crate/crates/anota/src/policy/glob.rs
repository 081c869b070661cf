//! Shell-style path globs.
//!
//! `*` matches any run of characters other than `/`, `?` matches a single
//! character other than `/`, and every other character matches itself. A
//! pattern ending in `/` names a directory and matches any path strictly
//! inside it.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token {
    Lit(char),
    One,
    Star,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobPattern {
    raw: String,
    tokens: Vec<Token>,
    dir_prefix: bool,
}

impl GlobPattern {
    pub fn new(raw: &str) -> Self {
        let tokens = raw
            .chars()
            .map(|c| match c {
                '*' => Token::Star,
                '?' => Token::One,
                c => Token::Lit(c),
            })
            .collect();
        GlobPattern {
            raw: raw.to_string(),
            tokens,
            dir_prefix: raw.ends_with('/'),
        }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn matches(&self, path: &str) -> bool {
        let chars: Vec<char> = path.chars().collect();
        if !self.dir_prefix {
            return match_tokens(&self.tokens, &chars);
        }
        // Try every prefix that ends at a separator and leaves something after it.
        chars
            .iter()
            .enumerate()
            .filter(|&(i, &c)| c == '/' && i + 1 < chars.len())
            .any(|(i, _)| match_tokens(&self.tokens, &chars[..=i]))
    }
}

/// Match `path` against the glob `pattern`.
pub fn match_glob(pattern: &GlobPattern, path: &str) -> bool {
    pattern.matches(path)
}

fn match_tokens(tokens: &[Token], text: &[char]) -> bool {
    // reachable[j]: tokens consumed so far can match text[..j]
    let mut reachable = vec![false; text.len() + 1];
    reachable[0] = true;
    for tok in tokens {
        let mut next = vec![false; text.len() + 1];
        match *tok {
            Token::Star => {
                for j in 0..=text.len() {
                    if reachable[j] || (j > 0 && next[j - 1] && text[j - 1] != '/') {
                        next[j] = true;
                    }
                }
            }
            Token::One => {
                for j in 1..=text.len() {
                    next[j] = reachable[j - 1] && text[j - 1] != '/';
                }
            }
            Token::Lit(c) => {
                for j in 1..=text.len() {
                    next[j] = reachable[j - 1] && text[j - 1] == c;
                }
            }
        }
        reachable = next;
        if !reachable.iter().any(|&r| r) {
            return false;
        }
    }
    reachable[text.len()]
}
