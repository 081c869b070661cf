//! Syntax tree for AnotaScript.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    In,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::In => "in",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Str(String),
    Bool(bool),
    List(Vec<Expr>),
    Map(Vec<(Expr, Expr)>),
    Name(String),
    /// `base.field`, read as `base["field"]`.
    Attr(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Call(Call),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Neg(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Call {
    /// `f(args)` where `f` is a plain name.
    Named { name: String, args: Vec<Expr>, line: u32 },
    /// `receiver.method(args)` on a variable binding.
    Method {
        receiver: String,
        method: String,
        args: Vec<Expr>,
        line: u32,
    },
    /// An annotation call kept as source text. For `EXECUTION` the guard
    /// expression is parsed as script code as well.
    Annotation {
        text: String,
        guard: Option<Box<Expr>>,
        line: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Name(String),
    Index(String, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign { target: Target, value: Expr, line: u32 },
    Expr { expr: Expr, line: u32 },
    If {
        branches: Vec<(Expr, Vec<Stmt>)>,
        orelse: Vec<Stmt>,
        line: u32,
    },
    While { cond: Expr, body: Vec<Stmt>, line: u32 },
    Def {
        name: String,
        params: Vec<String>,
        body: Vec<Stmt>,
        line: u32,
    },
    Return { value: Option<Expr>, line: u32 },
    Pass,
}
