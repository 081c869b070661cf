//! Runtime values. Every value carries a taint set.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use crate::dataflow::TaintSet;

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    Unit,
    Int(i64),
    Bool(bool),
    Str(Rc<str>),
    List(Rc<Vec<Value>>),
    Map(Rc<BTreeMap<String, Value>>),
    /// Index into the program's function table.
    Func(u32),
    Fd(i64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Value {
    pub kind: Kind,
    pub taint: TaintSet,
}

impl Value {
    pub const UNIT: Value = Value {
        kind: Kind::Unit,
        taint: TaintSet::new(),
    };

    pub fn new(kind: Kind) -> Self {
        Value {
            kind,
            taint: TaintSet::new(),
        }
    }

    pub fn int(v: i64) -> Self {
        Value::new(Kind::Int(v))
    }

    pub fn bool(v: bool) -> Self {
        Value::new(Kind::Bool(v))
    }

    pub fn str(s: &str) -> Self {
        Value::new(Kind::Str(Rc::from(s)))
    }

    pub fn list(items: Vec<Value>) -> Self {
        Value::new(Kind::List(Rc::new(items)))
    }

    pub fn map(items: BTreeMap<String, Value>) -> Self {
        Value::new(Kind::Map(Rc::new(items)))
    }

    pub fn with_taint(mut self, taint: TaintSet) -> Self {
        self.taint = taint;
        self
    }

    pub fn type_name(&self) -> &'static str {
        match self.kind {
            Kind::Unit => "none",
            Kind::Int(_) => "int",
            Kind::Bool(_) => "bool",
            Kind::Str(_) => "str",
            Kind::List(_) => "list",
            Kind::Map(_) => "map",
            Kind::Func(_) => "function",
            Kind::Fd(_) => "fd",
        }
    }

    pub fn truthy(&self) -> bool {
        match &self.kind {
            Kind::Unit => false,
            Kind::Int(v) => *v != 0,
            Kind::Bool(b) => *b,
            Kind::Str(s) => !s.is_empty(),
            Kind::List(l) => !l.is_empty(),
            Kind::Map(m) => !m.is_empty(),
            Kind::Func(_) | Kind::Fd(_) => true,
        }
    }

    /// Equality on payloads only; taint is ignored.
    pub fn same(&self, other: &Value) -> bool {
        match (&self.kind, &other.kind) {
            (Kind::List(a), Kind::List(b)) => a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.same(y)),
            (Kind::Map(a), Kind::Map(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|((ka, va), (kb, vb))| ka == kb && va.same(vb))
            }
            (Kind::Int(a), Kind::Bool(b)) | (Kind::Bool(b), Kind::Int(a)) => *a == *b as i64,
            (a, b) => a == b,
        }
    }

    /// Copy of the value with every taint set (including nested) cleared.
    pub fn untainted(&self) -> Value {
        let kind = match &self.kind {
            Kind::List(l) => Kind::List(Rc::new(l.iter().map(Value::untainted).collect())),
            Kind::Map(m) => Kind::Map(Rc::new(m.iter().map(|(k, v)| (k.clone(), v.untainted())).collect())),
            k => k.clone(),
        };
        Value::new(kind)
    }
}

/// Script-visible rendering, as produced by `str()` and `print()`.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Unit => f.write_str("None"),
            Kind::Int(v) => write!(f, "{v}"),
            Kind::Bool(b) => f.write_str(if *b { "True" } else { "False" }),
            Kind::Str(s) => f.write_str(s),
            Kind::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write_repr(f, v)?;
                }
                f.write_str("]")
            }
            Kind::Map(m) => {
                f.write_str("{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k:?}: ")?;
                    write_repr(f, v)?;
                }
                f.write_str("}")
            }
            Kind::Func(i) => write!(f, "<function {i}>"),
            Kind::Fd(n) => write!(f, "<fd {n}>"),
        }
    }
}

fn write_repr(f: &mut fmt::Formatter<'_>, v: &Value) -> fmt::Result {
    match &v.kind {
        Kind::Str(s) => write!(f, "{:?}", &**s),
        _ => write!(f, "{v}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_truth() {
        let v = Value::list(vec![Value::int(1), Value::str("a")]);
        assert_eq!(v.to_string(), "[1, \"a\"]");
        assert!(v.truthy());
        assert!(!Value::str("").truthy());
        assert!(Value::int(1).same(&Value::bool(true)));
    }

    #[test]
    fn untainted_clears_nested() {
        let inner = Value::str("s").with_taint(TaintSet::single(1));
        let v = Value::list(vec![inner]).with_taint(TaintSet::single(1));
        let u = v.untainted();
        let Kind::List(items) = &u.kind else { panic!() };
        assert!(u.taint.is_empty() && items[0].taint.is_empty());
        assert!(u.same(&v));
    }
}
