//! Lowering of the syntax tree to stack bytecode.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use sha2::{Digest, Sha256};

use super::ast::{BinOp, Call, Expr, Stmt, Target};
use super::parser::parse_script;
use super::CompileError;
use crate::annot::{lower_to_policy, parse_annotation, PolicySpec, Site};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Const {
    Unit,
    Int(i64),
    Bool(bool),
    Str(String),
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Unit => f.write_str("None"),
            Const::Int(v) => write!(f, "{v}"),
            Const::Bool(b) => write!(f, "{b}"),
            Const::Str(s) => write!(f, "{s:?}"),
        }
    }
}

macro_rules! builtins {
    ($($variant:ident = $name:literal ($min:literal, $max:literal)),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Builtin { $($variant),* }

        impl Builtin {
            pub const ALL: &'static [Builtin] = &[$(Builtin::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(Builtin::$variant => $name),* }
            }

            pub fn from_name(name: &str) -> Option<Builtin> {
                match name { $($name => Some(Builtin::$variant),)* _ => None }
            }

            /// Accepted argument counts, inclusive.
            pub fn arity(self) -> (usize, usize) {
                match self { $(Builtin::$variant => ($min, $max)),* }
            }
        }
    };
}

builtins! {
    Open = "open" (1, 2),
    Read = "read" (1, 1),
    Write = "write" (2, 2),
    Close = "close" (1, 1),
    Connect = "connect" (1, 1),
    Send = "send" (2, 2),
    Recv = "recv" (1, 1),
    Exec = "exec" (1, 2),
    Stat = "stat" (1, 1),
    Access = "access" (1, 1),
    Chmod = "chmod" (2, 2),
    Unlink = "unlink" (1, 1),
    Mkdir = "mkdir" (1, 1),
    Rename = "rename" (2, 2),
    Urlparse = "urlparse" (1, 1),
    Hash = "hash" (1, 1),
    Print = "print" (0, 255),
    Log = "log" (1, 1),
    Input = "input" (0, 0),
    Len = "len" (1, 1),
    Str = "str" (1, 1),
    Int = "int" (1, 1),
    PathJoin = "path_join" (1, 255),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Append,
    Remove,
    Pop,
}

impl Method {
    fn from_name(name: &str) -> Option<Method> {
        match name {
            "append" => Some(Method::Append),
            "remove" => Some(Method::Remove),
            "pop" => Some(Method::Pop),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Append => "append",
            Method::Remove => "remove",
            Method::Pop => "pop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Callee {
    Builtin(Builtin),
    /// Index into [`Program::functions`].
    User(u32),
    /// Index into [`Program::annotations`].
    Annotation(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    PushConst(u32),
    LoadVar(u32),
    StoreVar(u32),
    /// Pops index and container, pushes the element.
    LoadIndex,
    /// Pops value and index, stores into the named container.
    StoreIndex(u32),
    Call { callee: Callee, argc: u32 },
    /// Mutating method call on the named binding.
    CallMethod { var: u32, method: Method, argc: u32 },
    BinOp(BinOp),
    Not,
    Neg,
    Jump(u32),
    /// Pops the condition.
    JumpIfFalse(u32),
    /// Jumps keeping the value if falsy; pops it otherwise.
    JumpIfFalseKeep(u32),
    /// Jumps keeping the value if truthy; pops it otherwise.
    JumpIfTrueKeep(u32),
    Return,
    MakeList(u32),
    MakeMap(u32),
    Pop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    /// Name-table indices of the parameters.
    pub params: Vec<u32>,
    pub entry: u32,
    pub line: u32,
}

/// A lowered annotation call site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSite {
    /// Annotation source as written.
    pub text: String,
    /// Lowered policy; bindings are resolved when the call executes.
    pub spec: PolicySpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub consts: Vec<Const>,
    pub names: Vec<String>,
    pub functions: Vec<Function>,
    /// Main code occupies `code[..main_len]`; function bodies follow.
    pub code: Vec<Op>,
    /// Source line per instruction.
    pub lines: Vec<u32>,
    pub main_len: u32,
    pub annotations: Vec<AnnotationSite>,
    /// For each name index, the function it names, if any.
    pub name_funcs: Vec<Option<u32>>,
}

impl Program {
    pub fn name(&self, idx: u32) -> &str {
        &self.names[idx as usize]
    }

    pub fn function_named(&self, name: &str) -> Option<u32> {
        self.functions.iter().position(|f| f.name == name).map(|i| i as u32)
    }

    pub fn name_index(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32)
    }

    /// Number of call instructions and how many of them are annotations.
    pub fn call_sites(&self) -> (usize, usize) {
        let mut calls = 0;
        let mut annotations = 0;
        for op in &self.code {
            match op {
                Op::Call { callee, .. } => {
                    calls += 1;
                    if matches!(callee, Callee::Annotation(_)) {
                        annotations += 1;
                    }
                }
                Op::CallMethod { .. } => calls += 1,
                _ => {}
            }
        }
        (calls, annotations)
    }

    /// Human-readable listing, one instruction per line.
    pub fn disassemble(&self) -> String {
        let mut out = String::new();
        for (i, f) in self.functions.iter().enumerate() {
            let params: Vec<&str> = f.params.iter().map(|&p| self.name(p)).collect();
            let _ = writeln!(out, "fn {i} {}({}) @{}", f.name, params.join(", "), f.entry);
        }
        for (pc, op) in self.code.iter().enumerate() {
            let _ = write!(out, "{pc:5} L{:<4} ", self.lines[pc]);
            let _ = match *op {
                Op::PushConst(c) => writeln!(out, "PUSH {}", self.consts[c as usize]),
                Op::LoadVar(n) => writeln!(out, "LOAD_VAR {}", self.name(n)),
                Op::StoreVar(n) => writeln!(out, "STORE_VAR {}", self.name(n)),
                Op::LoadIndex => writeln!(out, "LOAD_INDEX"),
                Op::StoreIndex(n) => writeln!(out, "STORE_INDEX {}", self.name(n)),
                Op::Call { callee, argc } => match callee {
                    Callee::Builtin(b) => writeln!(out, "CALL builtin {} {argc}", b.name()),
                    Callee::User(f) => writeln!(out, "CALL fn {} {argc}", self.functions[f as usize].name),
                    Callee::Annotation(a) => writeln!(out, "CALL annotation {} {argc}", self.annotations[a as usize].text),
                },
                Op::CallMethod { var, method, argc } => {
                    writeln!(out, "CALL_METHOD {}.{} {argc}", self.name(var), method.name())
                }
                Op::BinOp(b) => writeln!(out, "BINOP {}", b.symbol()),
                Op::Not => writeln!(out, "NOT"),
                Op::Neg => writeln!(out, "NEG"),
                Op::Jump(t) => writeln!(out, "JUMP {t}"),
                Op::JumpIfFalse(t) => writeln!(out, "JUMP_IF_FALSE {t}"),
                Op::JumpIfFalseKeep(t) => writeln!(out, "JUMP_IF_FALSE_KEEP {t}"),
                Op::JumpIfTrueKeep(t) => writeln!(out, "JUMP_IF_TRUE_KEEP {t}"),
                Op::Return => writeln!(out, "RETURN"),
                Op::MakeList(n) => writeln!(out, "MAKE_LIST {n}"),
                Op::MakeMap(n) => writeln!(out, "MAKE_MAP {n}"),
                Op::Pop => writeln!(out, "POP"),
            };
        }
        out
    }

    /// SHA-256 of the disassembly, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.disassemble().as_bytes()))
    }
}

pub fn compile(source: &str) -> Result<Program, CompileError> {
    let stmts = parse_script(source)?;
    let mut c = Compiler::default();
    // Functions are visible from anywhere in the script.
    let mut defs = Vec::new();
    for s in &stmts {
        if let Stmt::Def { name, params, body, line } = s {
            if c.func_index.contains_key(name) {
                return Err(CompileError::Syntax {
                    line: *line,
                    msg: format!("function `{name}` defined twice"),
                });
            }
            if Builtin::from_name(name).is_some() {
                return Err(CompileError::Syntax {
                    line: *line,
                    msg: format!("`{name}` shadows a builtin"),
                });
            }
            c.func_index.insert(name.clone(), c.functions.len() as u32);
            let params = params.iter().map(|p| c.name(p)).collect();
            c.functions.push(Function {
                name: name.clone(),
                params,
                entry: 0,
                line: *line,
            });
            defs.push(body);
        }
    }
    for s in &stmts {
        if !matches!(s, Stmt::Def { .. }) {
            c.stmt(s)?;
        }
    }
    let main_len = c.code.len() as u32;
    let unit = c.konst(Const::Unit);
    for (i, body) in defs.into_iter().enumerate() {
        let entry = c.code.len() as u32;
        c.functions[i].entry = entry;
        c.in_function = true;
        c.line = c.functions[i].line;
        c.block(body)?;
        if c.here() == entry || !matches!(c.code.last(), Some(Op::Return)) || c.pending_patch_here() {
            c.emit(Op::PushConst(unit));
            c.emit(Op::Return);
        }
    }
    let name_funcs = c.names.iter().map(|n| c.func_index.get(n).copied()).collect();
    Ok(Program {
        consts: c.consts,
        names: c.names,
        functions: c.functions,
        code: c.code,
        lines: c.lines,
        main_len,
        annotations: c.annotations,
        name_funcs,
    })
}

#[derive(Default)]
struct Compiler {
    consts: Vec<Const>,
    names: Vec<String>,
    name_index: HashMap<String, u32>,
    functions: Vec<Function>,
    func_index: HashMap<String, u32>,
    code: Vec<Op>,
    lines: Vec<u32>,
    annotations: Vec<AnnotationSite>,
    in_function: bool,
    line: u32,
    /// Jump targets equal to the current end of code; a function body that
    /// ends in `return` inside a branch still needs a trailing return.
    targets: Vec<u32>,
}

impl Compiler {
    fn emit(&mut self, op: Op) -> usize {
        self.code.push(op);
        self.lines.push(self.line);
        self.code.len() - 1
    }

    fn here(&self) -> u32 {
        self.code.len() as u32
    }

    fn pending_patch_here(&self) -> bool {
        self.targets.contains(&self.here())
    }

    fn patch(&mut self, at: usize, target: u32) {
        self.targets.push(target);
        self.code[at] = match self.code[at] {
            Op::Jump(_) => Op::Jump(target),
            Op::JumpIfFalse(_) => Op::JumpIfFalse(target),
            Op::JumpIfFalseKeep(_) => Op::JumpIfFalseKeep(target),
            Op::JumpIfTrueKeep(_) => Op::JumpIfTrueKeep(target),
            other => unreachable!("patching non-jump {other:?}"),
        };
    }

    fn konst(&mut self, c: Const) -> u32 {
        if let Some(i) = self.consts.iter().position(|k| *k == c) {
            return i as u32;
        }
        self.consts.push(c);
        self.consts.len() as u32 - 1
    }

    fn name(&mut self, n: &str) -> u32 {
        if let Some(&i) = self.name_index.get(n) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(n.to_string());
        self.name_index.insert(n.to_string(), i);
        i
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, CompileError> {
        Err(CompileError::Syntax {
            line: self.line,
            msg: msg.into(),
        })
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), CompileError> {
        body.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), CompileError> {
        match s {
            Stmt::Pass => Ok(()),
            Stmt::Def { line, .. } => {
                self.line = *line;
                self.syntax("functions can only be defined at the top level")
            }
            Stmt::Expr { expr, line } => {
                self.line = *line;
                self.expr(expr)?;
                self.emit(Op::Pop);
                Ok(())
            }
            Stmt::Assign { target, value, line } => {
                self.line = *line;
                match target {
                    Target::Name(n) => {
                        self.expr(value)?;
                        let idx = self.name(n);
                        self.emit(Op::StoreVar(idx));
                    }
                    Target::Index(n, index) => {
                        self.expr(index)?;
                        self.expr(value)?;
                        let idx = self.name(n);
                        self.emit(Op::StoreIndex(idx));
                    }
                }
                Ok(())
            }
            Stmt::Return { value, line } => {
                self.line = *line;
                if !self.in_function {
                    return self.syntax("`return` outside a function");
                }
                match value {
                    Some(v) => self.expr(v)?,
                    None => {
                        let unit = self.konst(Const::Unit);
                        self.emit(Op::PushConst(unit));
                    }
                }
                self.emit(Op::Return);
                Ok(())
            }
            Stmt::If { branches, orelse, line } => {
                self.line = *line;
                let mut exits = Vec::new();
                for (cond, body) in branches {
                    self.expr(cond)?;
                    let skip = self.emit(Op::JumpIfFalse(0));
                    self.block(body)?;
                    exits.push(self.emit(Op::Jump(0)));
                    let here = self.here();
                    self.patch(skip, here);
                }
                self.block(orelse)?;
                let end = self.here();
                for j in exits {
                    self.patch(j, end);
                }
                Ok(())
            }
            Stmt::While { cond, body, line } => {
                self.line = *line;
                let start = self.here();
                self.expr(cond)?;
                let exit = self.emit(Op::JumpIfFalse(0));
                self.block(body)?;
                self.line = *line;
                self.emit(Op::Jump(start));
                let end = self.here();
                self.patch(exit, end);
                Ok(())
            }
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<(), CompileError> {
        match e {
            Expr::Int(v) => {
                let c = self.konst(Const::Int(*v));
                self.emit(Op::PushConst(c));
            }
            Expr::Str(s) => {
                let c = self.konst(Const::Str(s.clone()));
                self.emit(Op::PushConst(c));
            }
            Expr::Bool(b) => {
                let c = self.konst(Const::Bool(*b));
                self.emit(Op::PushConst(c));
            }
            Expr::List(items) => {
                for i in items {
                    self.expr(i)?;
                }
                self.emit(Op::MakeList(items.len() as u32));
            }
            Expr::Map(pairs) => {
                for (k, v) in pairs {
                    self.expr(k)?;
                    self.expr(v)?;
                }
                self.emit(Op::MakeMap(pairs.len() as u32));
            }
            Expr::Name(n) => {
                let idx = self.name(n);
                self.emit(Op::LoadVar(idx));
            }
            Expr::Attr(base, field) => {
                self.expr(base)?;
                let c = self.konst(Const::Str(field.clone()));
                self.emit(Op::PushConst(c));
                self.emit(Op::LoadIndex);
            }
            Expr::Index(base, idx) => {
                self.expr(base)?;
                self.expr(idx)?;
                self.emit(Op::LoadIndex);
            }
            Expr::Binary(op, l, r) => {
                self.expr(l)?;
                self.expr(r)?;
                self.emit(Op::BinOp(*op));
            }
            Expr::And(l, r) => {
                self.expr(l)?;
                let j = self.emit(Op::JumpIfFalseKeep(0));
                self.expr(r)?;
                let end = self.here();
                self.patch(j, end);
            }
            Expr::Or(l, r) => {
                self.expr(l)?;
                let j = self.emit(Op::JumpIfTrueKeep(0));
                self.expr(r)?;
                let end = self.here();
                self.patch(j, end);
            }
            Expr::Not(x) => {
                self.expr(x)?;
                self.emit(Op::Not);
            }
            Expr::Neg(x) => {
                self.expr(x)?;
                self.emit(Op::Neg);
            }
            Expr::Call(call) => self.call(call)?,
        }
        Ok(())
    }

    fn call(&mut self, call: &Call) -> Result<(), CompileError> {
        match call {
            Call::Named { name, args, line } => {
                let saved = self.line;
                self.line = *line;
                let callee = if let Some(&f) = self.func_index.get(name) {
                    let want = self.functions[f as usize].params.len();
                    if args.len() != want {
                        return Err(CompileError::Arity {
                            line: *line,
                            name: name.clone(),
                            expected: want.to_string(),
                            got: args.len(),
                        });
                    }
                    Callee::User(f)
                } else if let Some(b) = Builtin::from_name(name) {
                    let (min, max) = b.arity();
                    if args.len() < min || args.len() > max {
                        let expected = if min == max { min.to_string() } else { format!("{min}..={max}") };
                        return Err(CompileError::Arity {
                            line: *line,
                            name: name.clone(),
                            expected,
                            got: args.len(),
                        });
                    }
                    Callee::Builtin(b)
                } else {
                    return Err(CompileError::UndefinedName {
                        line: *line,
                        name: name.clone(),
                    });
                };
                // intern so the watch list can name the callee
                self.name(name);
                for a in args {
                    self.expr(a)?;
                }
                self.line = *line;
                self.emit(Op::Call {
                    callee,
                    argc: args.len() as u32,
                });
                self.line = saved;
            }
            Call::Method {
                receiver,
                method,
                args,
                line,
            } => {
                self.line = *line;
                let Some(m) = Method::from_name(method) else {
                    return Err(CompileError::UndefinedName {
                        line: *line,
                        name: format!("{receiver}.{method}"),
                    });
                };
                let ok = match m {
                    Method::Append | Method::Remove => args.len() == 1,
                    Method::Pop => args.len() <= 1,
                };
                if !ok {
                    return Err(CompileError::Arity {
                        line: *line,
                        name: format!("{receiver}.{method}"),
                        expected: if m == Method::Pop { "0..=1".into() } else { "1".into() },
                        got: args.len(),
                    });
                }
                let var = self.name(receiver);
                for a in args {
                    self.expr(a)?;
                }
                self.emit(Op::CallMethod {
                    var,
                    method: m,
                    argc: args.len() as u32,
                });
            }
            Call::Annotation { text, guard, line } => {
                self.line = *line;
                let annotation_err = |msg: String| CompileError::Annotation { line: *line, msg };
                let ast = parse_annotation(text).map_err(|e| annotation_err(e.to_string()))?;
                let argc = match guard {
                    Some(g) => {
                        self.expr(g)?;
                        1
                    }
                    None => 0,
                };
                self.line = *line;
                let site = Site::new(*line, self.here());
                let spec = lower_to_policy(&ast, site).map_err(|e| annotation_err(e.to_string()))?;
                let idx = self.annotations.len() as u32;
                self.annotations.push(AnnotationSite { text: text.clone(), spec });
                self.emit(Op::Call {
                    callee: Callee::Annotation(idx),
                    argc,
                });
            }
        }
        Ok(())
    }
}
