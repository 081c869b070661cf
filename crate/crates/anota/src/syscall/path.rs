/// Lexically resolve `.`, `..` and repeated separators against the virtual
/// working directory `/`. The result is always absolute.
pub fn normalize_path(path: &str) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    let mut out = String::with_capacity(path.len() + 1);
    for p in &parts {
        out.push('/');
        out.push_str(p);
    }
    if out.is_empty() || (path.ends_with('/') && !parts.is_empty()) {
        out.push('/');
    }
    out
}
