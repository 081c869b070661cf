//! URL splitting for `urlparse` and `connect`.
//!
//! `urlparse` accepts a scheme only when the text before the first `:`
//! starts with a letter and contains only letters, digits, `+`, `-` and `.`.
//! A URL with leading whitespace therefore parses with an empty scheme and,
//! lacking a leading `//`, an empty host. `connect` strips leading
//! whitespace and control characters first and so resolves the real host.

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UrlParts {
    pub scheme: String,
    pub netloc: String,
    pub host: String,
    pub port: Option<i64>,
    pub path: String,
}

pub fn urlparse(url: &str) -> UrlParts {
    let mut rest = url;
    let mut scheme = String::new();
    if let Some(i) = url.find(':') {
        let cand = &url[..i];
        let valid = cand.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && cand.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
        if valid {
            scheme = cand.to_ascii_lowercase();
            rest = &url[i + 1..];
        }
    }
    let mut netloc = String::new();
    if let Some(after) = rest.strip_prefix("//") {
        let end = after.find(['/', '?', '#']).unwrap_or(after.len());
        netloc = after[..end].to_string();
        rest = &after[end..];
    }
    let path = rest.split(['?', '#']).next().unwrap_or("").to_string();
    let hostport = netloc.rsplit('@').next().unwrap_or("");
    let (host, port) = match hostport.rsplit_once(':') {
        Some((h, p)) if !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()) => (h, p.parse().ok()),
        Some((h, "")) => (h, None),
        _ => (hostport, None),
    };
    UrlParts {
        scheme,
        netloc: netloc.clone(),
        host: host.to_ascii_lowercase(),
        port,
        path,
    }
}

/// Strip what a network stack would ignore before resolving: leading ASCII
/// whitespace and C0 control characters.
pub fn trim_for_connect(url: &str) -> &str {
    url.trim_start_matches(|c: char| c <= ' ')
}

pub fn default_port(scheme: &str) -> i64 {
    match scheme {
        "http" | "ws" => 80,
        "https" | "wss" => 443,
        "ftp" => 21,
        "ssh" => 22,
        _ => 0,
    }
}

/// Scheme, host and port `connect` resolves for `url`.
pub fn resolve_connect(url: &str) -> (String, String, i64) {
    let parts = urlparse(trim_for_connect(url));
    let port = parts.port.unwrap_or_else(|| default_port(&parts.scheme));
    (parts.scheme, parts.host, port)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_url() {
        let p = urlparse("https://YouTube.com:8443/watch?v=1");
        assert_eq!(p.scheme, "https");
        assert_eq!(p.host, "youtube.com");
        assert_eq!(p.port, Some(8443));
        assert_eq!(p.path, "/watch");
    }

    #[test]
    fn leading_whitespace_hides_scheme_and_host() {
        let p = urlparse("   https://youtube.com");
        assert_eq!(p.scheme, "");
        assert_eq!(p.host, "");
        assert_eq!(resolve_connect("   https://youtube.com"), ("https".into(), "youtube.com".into(), 443));
        assert_eq!(resolve_connect("\x01https://a.b"), ("https".into(), "a.b".into(), 443));
    }

    #[test]
    fn userinfo_and_no_scheme() {
        let p = urlparse("ftp://u:pw@files.example:21/x");
        assert_eq!((p.host.as_str(), p.port), ("files.example", Some(21)));
        let p = urlparse("example.com/path");
        assert_eq!((p.scheme.as_str(), p.host.as_str()), ("", ""));
        let p = urlparse("file:///etc/passwd");
        assert_eq!((p.scheme.as_str(), p.host.as_str(), p.path.as_str()), ("file", "", "/etc/passwd"));
    }
}
