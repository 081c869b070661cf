//! Random loop-free programs with their expected taint, computed as a
//! dependency closure over the statements.
//!
//! `src` is the single source. `hash` removes its label and `print` is the
//! sink, so every `print(v)` of a labelled `v` must be reported.

use rand::{Rng, RngCore};

const PRELUDE: &str = "def f(x):
    return x + \"!\"
src = input()
TAINT(src, sanitization=[hash], Sink=[print])
";

/// Statements per program; six statements compile to at most 36
/// instructions.
pub const MAX_STATEMENTS: usize = 6;
pub const MAX_SANITIZERS: usize = 2;

pub struct TaintProgram {
    pub source: String,
    /// Source lines of the generated statements.
    pub body: std::ops::RangeInclusive<u32>,
    pub sanitizer_calls: usize,
    /// Lines of the `print` calls expected to be reported.
    pub expected: Vec<u32>,
    /// Lines of the `print` calls expected to stay silent.
    pub clean: Vec<u32>,
}

pub fn random_program(rng: &mut impl RngCore, statements: usize) -> TaintProgram {
    let mut vars: Vec<(String, bool)> = vec![("src".into(), true)];
    let mut body = String::new();
    let mut sanitizer_calls = 0;
    for i in 0..statements {
        let (a, ta) = vars[rng.random_range(0..vars.len())].clone();
        let (b, tb) = vars[rng.random_range(0..vars.len())].clone();
        let mut choice = rng.random_range(0..10);
        if choice == 5 && sanitizer_calls == MAX_SANITIZERS {
            choice = 1;
        }
        let (expr, taint) = match choice {
            0 => (format!("\"lit{i}\""), false),
            1 => (a.clone(), ta),
            2 => (format!("{a} + {b}"), ta || tb),
            3 => (format!("{a}[0]"), ta),
            4 => (format!("str(len({a}))"), ta),
            5 => {
                sanitizer_calls += 1;
                (format!("hash({a})"), false)
            }
            6 => (format!("[{a}, {b}][1]"), ta || tb),
            7 => (format!("{{\"k\": {a}}}[\"k\"]"), ta),
            8 => (format!("str({a} == {b})"), ta || tb),
            _ => (format!("f({a})"), ta),
        };
        let name = format!("v{i}");
        body.push_str(&format!("{name} = {expr}\n"));
        vars.push((name, taint));
    }
    let first = PRELUDE.lines().count() as u32 + 1;
    let mut source = format!("{PRELUDE}{body}");
    let mut line = source.lines().count() as u32;
    let body_range = first..=line;
    let (mut expected, mut clean) = (Vec::new(), Vec::new());
    for (name, taint) in &vars {
        line += 1;
        source.push_str(&format!("print({name})\n"));
        if *taint { &mut expected } else { &mut clean }.push(line);
    }
    TaintProgram {
        source,
        body: body_range,
        sanitizer_calls,
        expected,
        clean,
    }
}
