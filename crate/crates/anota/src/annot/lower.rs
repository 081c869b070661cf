use std::collections::BTreeSet;

use super::spec::*;
use super::{AnnotationAst, Arg, Site};
use crate::policy::classes;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoweringError {
    #[error("inconsistent annotation head `{0}`: {1}")]
    InconsistentHead(String, &'static str),
    #[error("unknown name `{0}` in annotation head")]
    UnknownName(String),
    #[error("invalid permission string `{0}` (expected letters from r, w, x)")]
    BadPermissions(String),
    #[error("invalid arguments for `{head}`: {msg}")]
    BadArguments { head: String, msg: String },
}

fn bad_args(ast: &AnnotationAst, msg: impl Into<String>) -> LoweringError {
    LoweringError::BadArguments {
        head: ast.dotted_head(),
        msg: msg.into(),
    }
}

/// Lower a parsed annotation into a policy spec.
///
/// Bare names in syscall option positions stay as [`PatternValue::Binding`];
/// the VM resolves them against live variables before installing.
pub fn lower_to_policy(ast: &AnnotationAst, site: Site) -> Result<PolicySpec, LoweringError> {
    Ok(PolicySpec {
        rule: lower_rule(ast)?,
        site,
    })
}

fn lower_rule(ast: &AnnotationAst) -> Result<Rule, LoweringError> {
    match ast.root() {
        "SYSCALL" => lower_syscall(ast),
        "TAINT" => lower_taint(ast),
        "WATCH" => lower_watch(ast),
        "EXECUTION" => lower_execution(ast),
        "CLEAR" => lower_clear(ast),
        other => Err(LoweringError::UnknownName(other.to_string())),
    }
}

fn selector_name(seg: &str) -> Option<String> {
    if classes::is_class(seg) {
        return Some(seg.to_string());
    }
    let lower = seg.to_ascii_lowercase();
    classes::is_known_syscall(&lower).then_some(lower)
}

fn lower_syscall(ast: &AnnotationAst) -> Result<Rule, LoweringError> {
    let head = ast.dotted_head();
    let mut mode = None;
    let mut clear = false;
    let mut dimension = None;
    let mut head_selector: Option<String> = None;
    for seg in &ast.head[1..] {
        match seg.as_str() {
            "ALLOW" | "BLOCK" => {
                if mode.is_some() || clear {
                    return Err(LoweringError::InconsistentHead(head, "more than one mode"));
                }
                mode = Some(if seg == "ALLOW" { Mode::Allow } else { Mode::Block });
            }
            "CLEAR" => {
                if mode.is_some() || clear {
                    return Err(LoweringError::InconsistentHead(head, "CLEAR combined with a mode"));
                }
                clear = true;
            }
            s => {
                if let Some(d) = Dimension::from_keyword(s) {
                    if dimension.replace(d).is_some() {
                        return Err(LoweringError::InconsistentHead(head, "more than one option"));
                    }
                } else if let Some(name) = selector_name(s) {
                    if head_selector.replace(name).is_some() {
                        return Err(LoweringError::InconsistentHead(head, "more than one syscall selector"));
                    }
                } else {
                    return Err(LoweringError::UnknownName(s.to_string()));
                }
            }
        }
    }

    if clear {
        if dimension.is_some() {
            return Err(LoweringError::InconsistentHead(head, "CLEAR takes no option"));
        }
        if !ast.args.is_empty() || !ast.kwargs.is_empty() {
            return Err(bad_args(ast, "class clear takes no arguments"));
        }
        return Ok(Rule::Clear(ClearSelector::Syscall(head_selector)));
    }
    let Some(mode) = mode else {
        return Err(LoweringError::InconsistentHead(head, "missing ALLOW or BLOCK"));
    };

    let mut kw_values = None;
    for (key, value) in &ast.kwargs {
        let Some(d) = Dimension::from_keyword(key) else {
            return Err(bad_args(ast, format!("unknown option `{key}`")));
        };
        if dimension.replace(d).is_some() {
            return Err(bad_args(ast, "only one option dimension per policy"));
        }
        kw_values = Some(value);
    }
    if kw_values.is_some() && !ast.args.is_empty() {
        return Err(bad_args(ast, "positional values mixed with a keyword option"));
    }

    let mut selector = BTreeSet::new();
    selector.extend(head_selector.clone());

    let option = match (dimension, kw_values) {
        (Some(d), Some(v)) => Some(OptionFilter {
            dimension: d,
            patterns: patterns(ast, std::slice::from_ref(v))?,
        }),
        (Some(d), None) => Some(OptionFilter {
            dimension: d,
            patterns: patterns(ast, &ast.args)?,
        }),
        (None, _) if ast.args.is_empty() => None,
        (None, _) if head_selector.is_some() => Some(OptionFilter {
            dimension: Dimension::Path,
            patterns: patterns(ast, &ast.args)?,
        }),
        (None, _) => {
            for a in flatten(&ast.args) {
                let raw = match a {
                    Arg::Str(s) | Arg::Name(s) => s,
                    _ => return Err(bad_args(ast, "syscall list must contain names")),
                };
                let name = selector_name(raw)
                    .or_else(|| classes::is_known_syscall(raw).then(|| raw.clone()))
                    .ok_or_else(|| LoweringError::UnknownName(raw.clone()))?;
                selector.insert(name);
            }
            None
        }
    };
    if let Some(o) = &option {
        if o.patterns.is_empty() {
            return Err(bad_args(ast, "option needs at least one value"));
        }
    }
    Ok(Rule::Syscall(SyscallRule {
        mode,
        selector,
        option,
    }))
}

fn flatten(args: &[Arg]) -> Vec<&Arg> {
    let mut out = Vec::new();
    for a in args {
        match a {
            Arg::List(items) => out.extend(flatten(items)),
            other => out.push(other),
        }
    }
    out
}

fn patterns(ast: &AnnotationAst, args: &[Arg]) -> Result<Vec<PatternValue>, LoweringError> {
    flatten(args)
        .into_iter()
        .map(|a| match a {
            Arg::Str(s) => Ok(PatternValue::Literal(s.clone())),
            Arg::Int(i) => Ok(PatternValue::Literal(i.to_string())),
            Arg::Name(n) => Ok(PatternValue::Binding(n.clone())),
            _ => Err(bad_args(ast, "option values must be strings, integers, or names")),
        })
        .collect()
}

fn names(ast: &AnnotationAst, value: &Arg) -> Result<Vec<String>, LoweringError> {
    flatten(std::slice::from_ref(value))
        .into_iter()
        .map(|a| match a {
            Arg::Name(n) | Arg::Str(n) => Ok(n.clone()),
            _ => Err(bad_args(ast, "expected function names")),
        })
        .collect()
}

fn target(ast: &AnnotationAst, arg: Option<&Arg>) -> Result<String, LoweringError> {
    match arg {
        Some(Arg::Name(n)) | Some(Arg::Str(n)) => Ok(n.clone()),
        _ => Err(bad_args(ast, "expected a target name")),
    }
}

fn lower_taint(ast: &AnnotationAst) -> Result<Rule, LoweringError> {
    if ast.head.len() != 1 {
        return Err(LoweringError::InconsistentHead(ast.dotted_head(), "TAINT takes no segments"));
    }
    if ast.args.len() != 1 {
        return Err(bad_args(ast, "exactly one taint target"));
    }
    let target = target(ast, ast.args.first())?;
    let mut sanitizers = Vec::new();
    let mut sinks = Vec::new();
    for (key, value) in &ast.kwargs {
        match key.to_ascii_lowercase().as_str() {
            "sanitization" | "sanitizer" | "sanitizers" => sanitizers = names(ast, value)?,
            "sink" | "sinks" => sinks = names(ast, value)?,
            _ => return Err(bad_args(ast, format!("unknown keyword `{key}`"))),
        }
    }
    if sinks.is_empty() {
        sinks.push("write".to_string());
    }
    Ok(Rule::DataFlow(DataFlowRule {
        target,
        sanitizers,
        sinks,
    }))
}

fn lower_watch(ast: &AnnotationAst) -> Result<Rule, LoweringError> {
    let head = ast.dotted_head();
    if ast.head.len() != 2 {
        return Err(LoweringError::InconsistentHead(head, "expected WATCH.ALLOW, WATCH.BLOCK or WATCH.CON"));
    }
    if !ast.kwargs.is_empty() {
        return Err(bad_args(ast, "WATCH takes no keyword arguments"));
    }
    let mode = match ast.head[1].as_str() {
        "ALLOW" => Mode::Allow,
        "BLOCK" => Mode::Block,
        "CON" => {
            if ast.args.len() != 1 {
                return Err(bad_args(ast, "WATCH.CON takes one target"));
            }
            return Ok(Rule::TimingCon(TimingRule {
                target: target(ast, ast.args.first())?,
            }));
        }
        other => return Err(LoweringError::UnknownName(other.to_string())),
    };
    if ast.args.len() != 2 {
        return Err(bad_args(ast, "expected (target, permissions)"));
    }
    let target = target(ast, ast.args.first())?;
    let perms = match &ast.args[1] {
        Arg::Str(s) => Perms::parse(s).ok_or_else(|| LoweringError::BadPermissions(s.clone()))?,
        other => return Err(LoweringError::BadPermissions(other.to_string())),
    };
    Ok(Rule::ObjectAccess(WatchRule { mode, target, perms }))
}

fn lower_execution(ast: &AnnotationAst) -> Result<Rule, LoweringError> {
    if ast.head.len() != 2 || ast.head[1] != "BLOCK" {
        return Err(LoweringError::InconsistentHead(ast.dotted_head(), "expected EXECUTION.BLOCK"));
    }
    let condition = match ast.args.as_slice() {
        [] => None,
        [Arg::Expr(e)] => Some(e.clone()),
        _ => return Err(bad_args(ast, "expected a single condition expression")),
    };
    Ok(Rule::Execution(ExecRule { condition }))
}

fn lower_clear(ast: &AnnotationAst) -> Result<Rule, LoweringError> {
    if ast.head.len() != 1 {
        return Err(LoweringError::InconsistentHead(ast.dotted_head(), "CLEAR takes no segments"));
    }
    if !ast.kwargs.is_empty() {
        return Err(bad_args(ast, "CLEAR takes no keyword arguments"));
    }
    let selector = match ast.args.as_slice() {
        [] => ClearSelector::All,
        [Arg::Annotation(inner)] => match lower_rule(inner)? {
            Rule::Clear(_) => return Err(bad_args(ast, "cannot clear a CLEAR")),
            rule => ClearSelector::Spec(Box::new(rule)),
        },
        [Arg::Name(n) | Arg::Str(n)] => {
            let name = selector_name(n).ok_or_else(|| LoweringError::UnknownName(n.clone()))?;
            ClearSelector::Syscall(Some(name))
        }
        _ => return Err(bad_args(ast, "expected nothing, an annotation, or a class name")),
    };
    Ok(Rule::Clear(selector))
}
