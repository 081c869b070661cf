//! The bytecode interpreter and its monitor hooks.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use serde_json::json;

use super::ast::BinOp;
use super::compile::{Callee, Const, Method, Op, Program};
use super::value::{Kind, Value};
use super::vfs::Vfs;
use super::{CostSample, Escalation, ExecConfig, ExecResult, ExecStatus, PolicySummary, ScriptError};
use crate::access::{on_execution_block, AccessKind, Scope, WatchEntry, WatchList, GLOBAL_FRAME};
use crate::annot::{PolicySpec, Rule, Site};
use crate::dataflow::{check_call, first_live_label, CallCheck, DataflowMonitor, TaintSet, TAINT_ALL_LABEL};
use crate::policy::{PolicyId, PolicyStore};
use crate::report::{input_digest, syscall_report, Violation, ViolationKind};
use crate::syscall::{EventArg, Phase, SyscallEvent, SyscallMonitor, VM_PID};

pub(super) enum Halt {
    Violation,
    Error(ScriptError),
    Timeout,
}

pub(super) type Step<T> = Result<T, Halt>;

struct Frame {
    id: u32,
    func: Option<u32>,
    locals: Vec<(u32, Value)>,
    ret_pc: u32,
    profile_start: Option<u64>,
    /// Labels the return value loses (sanitizer call).
    sanitize: TaintSet,
}

pub(super) enum OpenFile {
    File { path: String, pos: usize, append: bool },
    Socket,
}

pub(super) struct Vm<'p> {
    pub(super) prog: &'p Program,
    pub(super) cfg: &'p ExecConfig,
    consts: Vec<Value>,
    globals: Vec<Option<Value>>,
    frames: Vec<Frame>,
    next_frame_id: u32,
    stack: Vec<Value>,
    pc: u32,
    pub(super) cost: u64,
    /// Per instruction: bit 0 fall-through taken, bit 1 jump/call taken.
    branch_bits: Vec<u8>,
    return_edges: HashSet<(u32, u32)>,
    pub(super) monitors: bool,
    pub(super) store: PolicyStore,
    pub(super) syscalls: SyscallMonitor,
    dataflow: DataflowMonitor,
    watch: WatchList,
    any_taint_policy: bool,
    timing_targets: HashSet<String>,
    site_policies: HashMap<u32, PolicyId>,
    timing_policies: BTreeMap<String, (PolicyId, Site)>,
    pub(super) input: Value,
    digest: String,
    violations: Vec<Violation>,
    pub(super) trace: Vec<SyscallEvent>,
    pub(super) output: Vec<String>,
    samples: Vec<CostSample>,
    pub(super) vfs: Vfs,
    pub(super) open_files: HashMap<i64, OpenFile>,
    pub(super) next_fd: i64,
    pub(super) log_fd: Option<i64>,
    seq: u64,
}

/// Run `program` on `input` under `config`. All monitor state is created
/// fresh and dropped on return.
pub fn execute(program: &Program, input: &[u8], config: &ExecConfig) -> ExecResult {
    let mut vm = Vm::new(program, input, config);
    let halt = vm.run().err();
    vm.finish(halt)
}

impl<'p> Vm<'p> {
    fn new(prog: &'p Program, input: &[u8], cfg: &'p ExecConfig) -> Self {
        let all = if cfg.taint_all && cfg.monitors {
            TaintSet::single(TAINT_ALL_LABEL)
        } else {
            TaintSet::new()
        };
        let consts = prog
            .consts
            .iter()
            .map(|c| {
                let kind = match c {
                    Const::Unit => Kind::Unit,
                    Const::Int(v) => Kind::Int(*v),
                    Const::Bool(b) => Kind::Bool(*b),
                    Const::Str(s) => Kind::Str(Rc::from(s.as_str())),
                };
                Value::new(kind).with_taint(all.clone())
            })
            .collect();
        // Latin-1: every byte maps to the code point of the same value.
        let text: String = input.iter().map(|&b| b as char).collect();
        Vm {
            prog,
            cfg,
            consts,
            globals: vec![None; prog.names.len()],
            frames: vec![Frame {
                id: GLOBAL_FRAME,
                func: None,
                locals: Vec::new(),
                ret_pc: 0,
                profile_start: None,
                sanitize: TaintSet::new(),
            }],
            next_frame_id: GLOBAL_FRAME + 1,
            stack: Vec::with_capacity(64),
            pc: 0,
            cost: 0,
            branch_bits: vec![0; prog.code.len()],
            return_edges: HashSet::new(),
            monitors: cfg.monitors,
            store: PolicyStore::new(),
            syscalls: SyscallMonitor::new(),
            dataflow: DataflowMonitor::new(),
            watch: WatchList::new(),
            any_taint_policy: false,
            timing_targets: cfg.timing_targets.iter().cloned().collect(),
            site_policies: HashMap::new(),
            timing_policies: BTreeMap::new(),
            input: Value::str(&text).with_taint(all),
            digest: input_digest(input),
            violations: Vec::new(),
            trace: Vec::new(),
            output: Vec::new(),
            samples: Vec::new(),
            vfs: cfg.vfs.clone(),
            open_files: HashMap::new(),
            next_fd: 3,
            log_fd: None,
            seq: 0,
        }
    }

    fn finish(self, halt: Option<Halt>) -> ExecResult {
        let mut status = ExecStatus::Clean;
        let mut error = None;
        match halt {
            None | Some(Halt::Violation) => {}
            Some(Halt::Error(e)) => {
                status = ExecStatus::ScriptError;
                error = Some(e);
            }
            Some(Halt::Timeout) => status = ExecStatus::Timeout,
        }
        if !self.violations.is_empty() {
            status = ExecStatus::Violation;
        }
        let mut coverage = BTreeSet::new();
        for (pc, &bits) in self.branch_bits.iter().enumerate() {
            if bits == 0 {
                continue;
            }
            let pc32 = pc as u32;
            let taken = match self.prog.code[pc] {
                Op::JumpIfFalse(t) | Op::JumpIfFalseKeep(t) | Op::JumpIfTrueKeep(t) => t,
                Op::Call {
                    callee: Callee::User(f), ..
                } => self.prog.functions[f as usize].entry,
                _ => continue,
            };
            if bits & 1 != 0 {
                coverage.insert((pc32, pc32 + 1));
            }
            if bits & 2 != 0 {
                coverage.insert((pc32, taken));
            }
        }
        coverage.extend(self.return_edges.iter().copied());
        let globals = self
            .globals
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.as_ref().map(|v| (self.prog.names[i].clone(), v.to_string())))
            .collect::<BTreeMap<_, _>>();
        let policies = self
            .store
            .iter()
            .map(|p| PolicySummary {
                id: p.id,
                text: p.text(),
                enabled: p.enabled,
            })
            .collect();
        ExecResult {
            status,
            violations: self.violations,
            coverage,
            cost: self.cost,
            output: self.output,
            trace: self.trace,
            samples: self.samples,
            error,
            diagnostics: self.syscalls.diagnostics().to_vec(),
            globals,
            policies,
            timing_policies: self.timing_policies,
        }
    }

    pub(super) fn err<T>(&self, pc: u32, msg: impl Into<String>) -> Step<T> {
        Err(Halt::Error(ScriptError {
            line: self.prog.lines.get(pc as usize).copied().unwrap_or(0),
            msg: msg.into(),
        }))
    }

    fn site(&self, pc: u32) -> Site {
        Site::new(self.prog.lines[pc as usize], pc)
    }

    fn in_function(&self) -> bool {
        self.frames.len() > 1
    }

    fn pop(&mut self) -> Value {
        self.stack.pop().expect("operand stack underflow")
    }

    fn run(&mut self) -> Step<()> {
        let prog = self.prog;
        let main_len = prog.main_len;
        loop {
            let pc = self.pc;
            if pc >= main_len && self.frames.len() == 1 {
                return Ok(());
            }
            if self.cost >= self.cfg.cost_limit {
                return Err(Halt::Timeout);
            }
            self.cost += 1;
            self.pc = pc + 1;
            match prog.code[pc as usize] {
                Op::PushConst(c) => {
                    let v = self.consts[c as usize].clone();
                    self.stack.push(v);
                }
                Op::LoadVar(n) => {
                    let (v, scope) = self.load(n, pc)?;
                    self.check_access(n, AccessKind::Read, scope, pc)?;
                    self.stack.push(v);
                }
                Op::StoreVar(n) => {
                    let v = self.pop();
                    let scope = self.current_scope();
                    self.check_access(n, AccessKind::Write, scope, pc)?;
                    self.store_var(n, v);
                }
                Op::LoadIndex => {
                    let idx = self.pop();
                    let base = self.pop();
                    let v = self.index(&base, &idx, pc)?;
                    self.stack.push(v);
                }
                Op::StoreIndex(n) => {
                    let v = self.pop();
                    let idx = self.pop();
                    self.store_index(n, idx, v, pc)?;
                }
                Op::Call { callee, argc } => self.call(callee, argc as usize, pc)?,
                Op::CallMethod { var, method, argc } => {
                    let arg = if argc == 1 { Some(self.pop()) } else { None };
                    let v = self.call_method(var, method, arg, pc)?;
                    self.stack.push(v);
                }
                Op::BinOp(op) => {
                    let b = self.pop();
                    let a = self.pop();
                    let v = self.binop(op, a, b, pc)?;
                    self.stack.push(v);
                }
                Op::Not => {
                    let a = self.pop();
                    let v = Value::bool(!a.truthy()).with_taint(a.taint);
                    self.stack.push(v);
                }
                Op::Neg => {
                    let a = self.pop();
                    let v = match a.kind {
                        Kind::Int(x) => Value::int(x.wrapping_neg()).with_taint(a.taint),
                        _ => return self.err(pc, format!("bad operand type for unary -: {}", a.type_name())),
                    };
                    self.stack.push(v);
                }
                Op::Jump(t) => self.pc = t,
                Op::JumpIfFalse(t) => {
                    let c = self.pop();
                    self.branch(pc, !c.truthy(), t);
                }
                Op::JumpIfFalseKeep(t) => {
                    let take = !self.stack.last().expect("operand stack underflow").truthy();
                    if !take {
                        self.pop();
                    }
                    self.branch(pc, take, t);
                }
                Op::JumpIfTrueKeep(t) => {
                    let take = self.stack.last().expect("operand stack underflow").truthy();
                    if !take {
                        self.pop();
                    }
                    self.branch(pc, take, t);
                }
                Op::Return => self.ret(pc),
                Op::MakeList(n) => {
                    let items = self.stack.split_off(self.stack.len() - n as usize);
                    let mut taint = TaintSet::new();
                    if self.monitors {
                        for i in &items {
                            taint.union_with(&i.taint);
                        }
                    }
                    self.stack.push(Value::list(items).with_taint(taint));
                }
                Op::MakeMap(n) => {
                    let flat = self.stack.split_off(self.stack.len() - 2 * n as usize);
                    let mut map = BTreeMap::new();
                    let mut taint = TaintSet::new();
                    let mut it = flat.into_iter();
                    while let (Some(k), Some(v)) = (it.next(), it.next()) {
                        let Kind::Str(key) = &k.kind else {
                            return self.err(pc, format!("map keys must be str, not {}", k.type_name()));
                        };
                        if self.monitors {
                            taint.union_with(&k.taint);
                            taint.union_with(&v.taint);
                        }
                        map.insert(key.to_string(), v);
                    }
                    self.stack.push(Value::map(map).with_taint(taint));
                }
                Op::Pop => {
                    self.pop();
                }
            }
        }
    }

    #[inline]
    fn branch(&mut self, pc: u32, take: bool, target: u32) {
        if take {
            self.pc = target;
            self.branch_bits[pc as usize] |= 2;
        } else {
            self.branch_bits[pc as usize] |= 1;
        }
    }

    fn current_scope(&self) -> Scope {
        if self.in_function() {
            Scope::Frame(self.frames.last().unwrap().id)
        } else {
            Scope::Global
        }
    }

    /// Look a name up in the current frame, then globals, then the
    /// function table.
    fn lookup(&self, n: u32) -> Option<(Value, Scope)> {
        let frame = self.frames.last().unwrap();
        if self.in_function() {
            if let Some((_, v)) = frame.locals.iter().find(|(k, _)| *k == n) {
                return Some((v.clone(), Scope::Frame(frame.id)));
            }
        }
        if let Some(v) = &self.globals[n as usize] {
            return Some((v.clone(), Scope::Global));
        }
        self.prog.name_funcs[n as usize].map(|f| (Value::new(Kind::Func(f)), Scope::Global))
    }

    fn load(&self, n: u32, pc: u32) -> Step<(Value, Scope)> {
        match self.lookup(n) {
            Some(found) => Ok(found),
            None => self.err(pc, format!("name `{}` is not defined", self.prog.name(n))),
        }
    }

    fn store_var(&mut self, n: u32, v: Value) {
        if self.in_function() {
            let frame = self.frames.last_mut().unwrap();
            match frame.locals.iter_mut().find(|(k, _)| *k == n) {
                Some(slot) => slot.1 = v,
                None => frame.locals.push((n, v)),
            }
        } else {
            self.globals[n as usize] = Some(v);
        }
    }

    /// Mutable slot for an existing binding, with the scope it lives in.
    fn slot_mut(&mut self, n: u32) -> Option<(&mut Value, Scope)> {
        let in_fn = self.in_function();
        let frame = self.frames.last_mut().unwrap();
        let id = frame.id;
        if in_fn {
            if let Some(i) = frame.locals.iter().position(|(k, _)| *k == n) {
                return Some((&mut frame.locals[i].1, Scope::Frame(id)));
            }
        }
        self.globals[n as usize].as_mut().map(|v| (v, Scope::Global))
    }

    fn binding_scope(&self, n: u32) -> Option<Scope> {
        let frame = self.frames.last().unwrap();
        if self.in_function() && frame.locals.iter().any(|(k, _)| *k == n) {
            return Some(Scope::Frame(frame.id));
        }
        self.globals[n as usize].as_ref().map(|_| Scope::Global)
    }

    #[inline]
    fn check_access(&mut self, n: u32, kind: AccessKind, scope: Scope, pc: u32) -> Step<()> {
        if !self.monitors || self.watch.is_empty() {
            return Ok(());
        }
        self.check_access_named(self.prog.name(n), kind, scope, pc)
    }

    fn check_access_named(&mut self, name: &str, kind: AccessKind, scope: Scope, pc: u32) -> Step<()> {
        if !self.monitors || self.watch.is_empty() {
            return Ok(());
        }
        if let Some(policy) = self.watch.on_access(&self.store, name, kind, scope) {
            let scope_text = match scope {
                Scope::Global => "global".to_string(),
                Scope::Frame(id) => format!("frame {id}"),
            };
            let v = self.violation(
                policy,
                ViolationKind::ObjectAccess,
                pc,
                json!({"name": name, "access": kind.word(), "scope": scope_text}),
                format!("{} access to `{name}` is not permitted", kind.word()),
            );
            self.violate(v)?;
        }
        Ok(())
    }

    fn index(&self, base: &Value, idx: &Value, pc: u32) -> Step<Value> {
        let mut out = match (&base.kind, &idx.kind) {
            (Kind::List(items), Kind::Int(i)) => match norm_index(*i, items.len()) {
                Some(i) => items[i].clone(),
                None => return self.err(pc, "list index out of range"),
            },
            (Kind::Str(s), Kind::Int(i)) => {
                let n = s.chars().count();
                match norm_index(*i, n) {
                    Some(i) => Value::new(Kind::Str(Rc::from(s.chars().nth(i).unwrap().to_string()))),
                    None => return self.err(pc, "string index out of range"),
                }
            }
            (Kind::Map(m), Kind::Str(k)) => match m.get(&**k) {
                Some(v) => v.clone(),
                None => return self.err(pc, format!("key {:?} not found", &**k)),
            },
            _ => {
                return self.err(
                    pc,
                    format!("cannot index {} with {}", base.type_name(), idx.type_name()),
                )
            }
        };
        if self.monitors {
            out.taint.union_with(&base.taint);
            out.taint.union_with(&idx.taint);
        }
        Ok(out)
    }

    fn store_index(&mut self, n: u32, idx: Value, v: Value, pc: u32) -> Step<()> {
        let Some(scope) = self.binding_scope(n) else {
            return self.err(pc, format!("name `{}` is not defined", self.prog.name(n)));
        };
        self.check_access(n, AccessKind::Write, scope, pc)?;
        let monitors = self.monitors;
        let (slot, _) = self.slot_mut(n).expect("binding checked above");
        if monitors {
            slot.taint.union_with(&v.taint);
            slot.taint.union_with(&idx.taint);
        }
        let msg = match (&mut slot.kind, &idx.kind) {
            (Kind::List(items), Kind::Int(i)) => match norm_index(*i, items.len()) {
                Some(i) => {
                    Rc::make_mut(items)[i] = v;
                    return Ok(());
                }
                None => "list assignment index out of range".to_string(),
            },
            (Kind::Map(m), Kind::Str(k)) => {
                Rc::make_mut(m).insert(k.to_string(), v);
                return Ok(());
            }
            (k, _) => format!("cannot assign into {} with {}", kind_name(k), idx.type_name()),
        };
        self.err(pc, msg)
    }

    fn call_method(&mut self, n: u32, method: Method, arg: Option<Value>, pc: u32) -> Step<Value> {
        let Some(scope) = self.binding_scope(n) else {
            return self.err(pc, format!("name `{}` is not defined", self.prog.name(n)));
        };
        self.check_access(n, AccessKind::Write, scope, pc)?;
        let monitors = self.monitors;
        let name = self.prog.name(n);
        let (slot, _) = self.slot_mut(n).expect("binding checked above");
        let container_taint = slot.taint.clone();
        let Kind::List(items) = &mut slot.kind else {
            let t = slot.kind.clone();
            return self.err(pc, format!("`{name}` is a {}, not a list", kind_name(&t)));
        };
        let res = match (method, arg) {
            (Method::Append, Some(v)) => {
                if monitors {
                    slot.taint.union_with(&v.taint);
                }
                let Kind::List(items) = &mut slot.kind else { unreachable!() };
                Rc::make_mut(items).push(v);
                Ok(Value::UNIT)
            }
            (Method::Remove, Some(v)) => match items.iter().position(|x| x.same(&v)) {
                Some(i) => {
                    Rc::make_mut(items).remove(i);
                    Ok(Value::UNIT)
                }
                None => Err(format!("{}.remove(x): x not in list", name)),
            },
            (Method::Pop, arg) => {
                let len = items.len();
                let i = match arg.map(|a| a.kind) {
                    None => len.checked_sub(1),
                    Some(Kind::Int(i)) => norm_index(i, len),
                    Some(_) => None,
                };
                match i {
                    Some(i) => {
                        let mut v = Rc::make_mut(items).remove(i);
                        if monitors {
                            v.taint.union_with(&container_taint);
                        }
                        Ok(v)
                    }
                    None => Err("pop index out of range".to_string()),
                }
            }
            _ => Err("bad method arguments".to_string()),
        };
        res.or_else(|m| self.err(pc, m))
    }

    fn binop(&self, op: BinOp, a: Value, b: Value, pc: u32) -> Step<Value> {
        let kind = match (op, &a.kind, &b.kind) {
            (BinOp::Eq, ..) => Kind::Bool(a.same(&b)),
            (BinOp::Ne, ..) => Kind::Bool(!a.same(&b)),
            (BinOp::Add, Kind::Int(x), Kind::Int(y)) => Kind::Int(x.wrapping_add(*y)),
            (BinOp::Sub, Kind::Int(x), Kind::Int(y)) => Kind::Int(x.wrapping_sub(*y)),
            (BinOp::Mul, Kind::Int(x), Kind::Int(y)) => Kind::Int(x.wrapping_mul(*y)),
            (BinOp::Div | BinOp::Mod, Kind::Int(_), Kind::Int(0)) => {
                return self.err(pc, "division by zero");
            }
            (BinOp::Div, Kind::Int(x), Kind::Int(y)) => Kind::Int(x.wrapping_div_euclid(*y)),
            (BinOp::Mod, Kind::Int(x), Kind::Int(y)) => Kind::Int(x.wrapping_rem_euclid(*y)),
            (BinOp::Add, Kind::Str(x), Kind::Str(y)) => {
                let mut s = String::with_capacity(x.len() + y.len());
                s.push_str(x);
                s.push_str(y);
                Kind::Str(Rc::from(s))
            }
            (BinOp::Mul, Kind::Str(s), Kind::Int(n)) | (BinOp::Mul, Kind::Int(n), Kind::Str(s)) => {
                if *n > 1_000_000 {
                    return self.err(pc, "string repetition too large");
                }
                Kind::Str(Rc::from(s.repeat((*n).max(0) as usize)))
            }
            (BinOp::Add, Kind::List(x), Kind::List(y)) => {
                let mut v = Vec::with_capacity(x.len() + y.len());
                v.extend(x.iter().cloned());
                v.extend(y.iter().cloned());
                Kind::List(Rc::new(v))
            }
            (BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge, Kind::Int(x), Kind::Int(y)) => Kind::Bool(cmp(op, x, y)),
            (BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge, Kind::Str(x), Kind::Str(y)) => Kind::Bool(cmp(op, x, y)),
            (BinOp::In, _, Kind::List(items)) => Kind::Bool(items.iter().any(|x| x.same(&a))),
            (BinOp::In, Kind::Str(x), Kind::Str(y)) => Kind::Bool(y.contains(&**x)),
            (BinOp::In, Kind::Str(x), Kind::Map(m)) => Kind::Bool(m.contains_key(&**x)),
            _ => {
                return self.err(
                    pc,
                    format!(
                        "unsupported operand types for {}: {} and {}",
                        op.symbol(),
                        a.type_name(),
                        b.type_name()
                    ),
                )
            }
        };
        let mut taint = a.taint;
        if self.monitors {
            taint.union_with(&b.taint);
        }
        Ok(Value { kind, taint })
    }

    fn call(&mut self, callee: Callee, argc: usize, pc: u32) -> Step<()> {
        let prog = self.prog;
        match callee {
            Callee::Annotation(i) => {
                let guard = if argc == 1 { Some(self.pop()) } else { None };
                if self.monitors {
                    self.annotation(i, guard, pc)?;
                }
                self.stack.push(Value::UNIT);
            }
            Callee::Builtin(b) => {
                let start = self.stack.len() - argc;
                let sanitize = if self.monitors {
                    self.call_checks(b.name(), start, pc)?
                } else {
                    TaintSet::new()
                };
                let args = self.stack.split_off(start);
                let mut taint = TaintSet::new();
                if self.monitors {
                    for a in &args {
                        taint.union_with(&a.taint);
                    }
                    if self.cfg.taint_all {
                        taint.insert(TAINT_ALL_LABEL);
                    }
                }
                let mut ret = self.builtin(b, args, pc)?;
                if self.monitors {
                    ret.taint.union_with(&taint);
                    self.finish_return(b.name(), &mut ret, &sanitize);
                }
                self.stack.push(ret);
            }
            Callee::User(f) => {
                let func = &prog.functions[f as usize];
                self.branch_bits[pc as usize] |= 2;
                let start = self.stack.len() - argc;
                let mut sanitize = TaintSet::new();
                let mut profile_start = None;
                if self.monitors {
                    sanitize = self.call_checks(&func.name, start, pc)?;
                    let targeted = self.timing_targets.contains(&func.name)
                        || (self.cfg.auto_target
                            && self.stack[start..].iter().any(|a| first_live_label(&self.store, &a.taint).is_some()));
                    if targeted {
                        profile_start = Some(self.cost);
                    }
                }
                if self.frames.len() > self.cfg.max_call_depth {
                    return self.err(pc, "maximum call depth exceeded");
                }
                let args = self.stack.split_off(start);
                let locals = func.params.iter().copied().zip(args).collect();
                let id = self.next_frame_id;
                self.next_frame_id += 1;
                self.frames.push(Frame {
                    id,
                    func: Some(f),
                    locals,
                    ret_pc: self.pc,
                    profile_start,
                    sanitize,
                });
                self.pc = func.entry;
            }
        }
        Ok(())
    }

    fn ret(&mut self, pc: u32) {
        let mut v = self.pop();
        let frame = self.frames.pop().expect("return from main");
        self.return_edges.insert((pc, frame.ret_pc));
        self.pc = frame.ret_pc;
        if self.monitors {
            let f = frame.func.expect("function frame");
            let name = &self.prog.functions[f as usize].name;
            self.finish_return(name, &mut v, &frame.sanitize);
            if let Some(start) = frame.profile_start {
                self.samples.push(CostSample {
                    function: name.clone(),
                    cost: self.cost - start,
                });
            }
        }
        self.stack.push(v);
    }

    fn finish_return(&self, name: &str, v: &mut Value, sanitize: &TaintSet) {
        for l in sanitize.iter() {
            v.taint.remove(l);
        }
        if self.dataflow.has_callable_sources() {
            let extra = self.dataflow.return_labels(&self.store, name);
            v.taint.union_with(&extra);
        }
    }

    /// Hooks run on every call before dispatch: execute permission on the
    /// callee name and sink/sanitizer handling. Returns labels to strip from
    /// the return value.
    fn call_checks(&mut self, name: &str, args_start: usize, pc: u32) -> Step<TaintSet> {
        if !self.watch.is_empty() {
            let scope = match self.prog.name_index(name) {
                Some(n) => self.binding_scope(n).unwrap_or(Scope::Global),
                None => Scope::Global,
            };
            self.check_access_named(name, AccessKind::Execute, scope, pc)?;
        }
        if !self.any_taint_policy {
            return Ok(TaintSet::new());
        }
        match check_call(&self.store, name, self.stack[args_start..].iter().map(|a| &a.taint)) {
            CallCheck::SinkViolation { policy, sink, arg } => {
                let target = match self.store.get(policy).map(|p| p.rule()) {
                    Some(Rule::DataFlow(r)) => r.target.clone(),
                    _ => String::new(),
                };
                let v = self.violation(
                    policy,
                    ViolationKind::DataFlowSink,
                    pc,
                    json!({"callee": name, "sink": sink, "arg": arg, "source": target}),
                    format!("data labelled by `{target}` reaches sink `{sink}`"),
                );
                self.violate(v)?;
                Ok(TaintSet::new())
            }
            CallCheck::Sanitized(set) => Ok(set),
            CallCheck::Pass => Ok(TaintSet::new()),
        }
    }

    fn annotation(&mut self, idx: u32, guard: Option<Value>, pc: u32) -> Step<()> {
        let site = &self.prog.annotations[idx as usize];
        let mut rule = site.spec.rule.clone();
        let resolved = rule.resolve_bindings(|name| {
            let n = self.prog.name_index(name)?;
            match self.lookup(n)?.0.kind {
                Kind::Str(s) => Some(s.to_string()),
                Kind::Int(i) => Some(i.to_string()),
                _ => None,
            }
        });
        if let Err(name) = resolved {
            return self.err(pc, format!("annotation argument `{name}` is not bound to a str or int"));
        }
        let policy = match &rule {
            Rule::Clear(sel) => {
                self.store.clear(sel);
                return Ok(());
            }
            _ => self.install(idx, rule.clone(), pc),
        };
        match rule {
            Rule::Syscall(_) | Rule::Clear(_) => {}
            Rule::DataFlow(r) => {
                self.any_taint_policy = true;
                self.taint_source(policy, &r.target, pc)?;
            }
            Rule::ObjectAccess(w) => {
                let scope = match self.prog.name_index(&w.target).and_then(|n| self.binding_scope(n)) {
                    Some(s) => s,
                    None if self.in_function() && self.prog.function_named(&w.target).is_none() => self.current_scope(),
                    None => Scope::Global,
                };
                let entry = WatchEntry {
                    policy,
                    target: w.target,
                    scope,
                    mode: w.mode,
                    perms: w.perms,
                };
                self.watch.watch_once(entry);
            }
            Rule::Execution(e) => {
                if on_execution_block(guard.as_ref().map(Value::truthy)) {
                    let message = match &e.condition {
                        Some(c) => format!("guarded code reached while `{c}` holds"),
                        None => "unconditionally blocked code reached".to_string(),
                    };
                    let v = self.violation(
                        policy,
                        ViolationKind::Execution,
                        pc,
                        json!({"condition": e.condition}),
                        message,
                    );
                    self.violate(v)?;
                }
            }
            Rule::TimingCon(t) => {
                self.timing_policies.insert(t.target.clone(), (policy, self.site(pc)));
                self.timing_targets.insert(t.target);
            }
        }
        Ok(())
    }

    /// Install `rule` for annotation site `idx`, reusing the policy from a
    /// previous visit while it is still enabled and unchanged.
    fn install(&mut self, idx: u32, rule: Rule, pc: u32) -> PolicyId {
        if let Some(&id) = self.site_policies.get(&idx) {
            if self.store.get(id).is_some_and(|p| p.enabled && p.spec.rule == rule) {
                return id;
            }
        }
        let id = self.store.install(PolicySpec {
            rule,
            site: self.site(pc),
        });
        self.site_policies.insert(idx, id);
        id
    }

    fn taint_source(&mut self, policy: PolicyId, target: &str, pc: u32) -> Step<()> {
        if let Some(n) = self.prog.name_index(target) {
            if let Some((slot, _)) = self.slot_mut(n) {
                slot.taint.insert(policy);
                return Ok(());
            }
        }
        if self.prog.function_named(target).is_some() || super::compile::Builtin::from_name(target).is_some() {
            if !self.dataflow.return_labels(&self.store, target).contains(policy) {
                self.dataflow.add_callable_source(target, policy);
            }
            return Ok(());
        }
        self.err(pc, format!("TAINT target `{target}` is not bound"))
    }

    fn violation(
        &self,
        policy: PolicyId,
        kind: ViolationKind,
        pc: u32,
        event: serde_json::Value,
        message: String,
    ) -> Violation {
        Violation {
            policy_id: policy,
            policy_text: self.store.get(policy).map(|p| p.text()).unwrap_or_default(),
            kind,
            site: self.site(pc),
            event,
            message,
            input_digest: self.digest.clone(),
        }
    }

    fn violate(&mut self, v: Violation) -> Step<()> {
        self.violations.push(v);
        match self.cfg.escalation {
            Escalation::Collect => Ok(()),
            Escalation::Trap | Escalation::Exit => Err(Halt::Violation),
        }
    }

    /// Emit the enter half of a pseudo-syscall and judge it. Returns the
    /// event sequence number.
    pub(super) fn sys_enter(&mut self, name: &str, args: Vec<EventArg>, pc: u32) -> Step<u64> {
        self.seq += 1;
        let seq = self.seq;
        if !self.monitors {
            return Ok(seq);
        }
        let ev = SyscallEvent {
            seq,
            phase: Phase::Enter,
            name: name.to_string(),
            args,
            ret: None,
            pid: VM_PID,
            ts: self.cost as f64,
        };
        let found = self.syscalls.process(&self.store, &ev);
        let reports: Vec<Violation> = found
            .iter()
            .map(|sv| syscall_report(&self.store, &ev, sv, self.site(pc), &self.digest))
            .collect();
        if self.cfg.record_trace {
            self.trace.push(ev);
        }
        for v in reports {
            self.violate(v)?;
        }
        Ok(seq)
    }

    pub(super) fn sys_exit(&mut self, seq: u64, name: &str, ret: i64) {
        if !self.monitors {
            return;
        }
        let ev = SyscallEvent {
            seq,
            phase: Phase::Exit,
            name: name.to_string(),
            args: Vec::new(),
            ret: Some(ret),
            pid: VM_PID,
            ts: self.cost as f64,
        };
        self.syscalls.process(&self.store, &ev);
        if self.cfg.record_trace {
            self.trace.push(ev);
        }
    }

    /// Tell the syscall monitor that labelled data is written through `fd`.
    pub(super) fn note_sensitive_write(&mut self, fd: i64, taint: &TaintSet) {
        if self.monitors {
            if let Some(label) = first_live_label(&self.store, taint) {
                self.syscalls.mark_sensitive(VM_PID, fd, label);
            }
        }
    }
}

fn norm_index(i: i64, len: usize) -> Option<usize> {
    let i = if i < 0 { i + len as i64 } else { i };
    (0..len as i64).contains(&i).then_some(i as usize)
}

fn cmp<T: PartialOrd + ?Sized>(op: BinOp, a: &T, b: &T) -> bool {
    match op {
        BinOp::Lt => a < b,
        BinOp::Gt => a > b,
        BinOp::Le => a <= b,
        BinOp::Ge => a >= b,
        _ => unreachable!(),
    }
}

fn kind_name(k: &Kind) -> &'static str {
    Value::new(k.clone()).type_name()
}
