//! Recursive-descent parser from tokens to [`Stmt`] lists.

use super::ast::{BinOp, Call, Expr, Stmt, Target};
use super::lexer::{tokenize, Tok, Token};
use super::CompileError;
use crate::annot::ROOTS;

pub fn parse_script(src: &str) -> Result<Vec<Stmt>, CompileError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { src, toks: &tokens, pos: 0 };
    let mut body = Vec::new();
    while !p.at(&Tok::Eof) {
        body.push(p.statement()?);
    }
    Ok(body)
}

struct Parser<'a> {
    src: &'a str,
    toks: &'a [Token],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        self.toks.get(self.pos + n).map_or(&Tok::Eof, |t| &t.tok)
    }

    fn line(&self) -> u32 {
        self.toks[self.pos].line
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, CompileError> {
        Err(CompileError::Syntax {
            line: self.line(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), CompileError> {
        if self.eat(t) {
            Ok(())
        } else {
            self.err(format!("expected {what}, found {:?}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, CompileError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected a name, found {other:?}")),
        }
    }

    fn end_of_simple(&mut self) -> Result<(), CompileError> {
        if self.eat(&Tok::Newline) || self.at(&Tok::Eof) {
            Ok(())
        } else {
            self.err(format!("expected end of line, found {:?}", self.peek()))
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, CompileError> {
        self.expect(&Tok::Colon, "`:`")?;
        if !self.eat(&Tok::Newline) {
            return Ok(vec![self.simple_statement()?]);
        }
        self.expect(&Tok::Indent, "an indented block")?;
        let mut body = Vec::new();
        while !self.eat(&Tok::Dedent) {
            if self.at(&Tok::Eof) {
                return self.err("unexpected end of input in block");
            }
            body.push(self.statement()?);
        }
        Ok(body)
    }

    fn statement(&mut self) -> Result<Stmt, CompileError> {
        let line = self.line();
        match self.peek() {
            Tok::Def => {
                self.bump();
                let name = self.ident()?;
                self.expect(&Tok::LParen, "`(`")?;
                let mut params = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        let p = self.ident()?;
                        if params.contains(&p) {
                            return self.err(format!("duplicate parameter `{p}`"));
                        }
                        params.push(p);
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(&Tok::Comma, "`,` or `)`")?;
                    }
                }
                let body = self.block()?;
                Ok(Stmt::Def { name, params, body, line })
            }
            Tok::If => {
                self.bump();
                let mut branches = vec![(self.expr()?, self.block()?)];
                let mut orelse = Vec::new();
                loop {
                    if self.eat(&Tok::Elif) {
                        branches.push((self.expr()?, self.block()?));
                    } else if self.eat(&Tok::Else) {
                        orelse = self.block()?;
                        break;
                    } else {
                        break;
                    }
                }
                Ok(Stmt::If { branches, orelse, line })
            }
            Tok::While => {
                self.bump();
                let cond = self.expr()?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body, line })
            }
            _ => self.simple_statement(),
        }
    }

    fn simple_statement(&mut self) -> Result<Stmt, CompileError> {
        let line = self.line();
        let stmt = match self.peek() {
            Tok::Pass => {
                self.bump();
                Stmt::Pass
            }
            Tok::Return => {
                self.bump();
                let value = if matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent) {
                    None
                } else {
                    Some(self.expr()?)
                };
                Stmt::Return { value, line }
            }
            _ => {
                let expr = self.expr()?;
                if self.eat(&Tok::Assign) {
                    let target = match expr {
                        Expr::Name(n) => Target::Name(n),
                        Expr::Index(base, idx) => match *base {
                            Expr::Name(n) => Target::Index(n, *idx),
                            _ => return self.err("only `name[index]` element assignment is supported"),
                        },
                        _ => return self.err("invalid assignment target"),
                    };
                    let value = self.expr()?;
                    Stmt::Assign { target, value, line }
                } else {
                    Stmt::Expr { expr, line }
                }
            }
        };
        self.end_of_simple()?;
        Ok(stmt)
    }

    fn expr(&mut self) -> Result<Expr, CompileError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::Or) {
            lhs = Expr::Or(Box::new(lhs), Box::new(self.and_expr()?));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.not_expr()?;
        while self.eat(&Tok::And) {
            lhs = Expr::And(Box::new(lhs), Box::new(self.not_expr()?));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, CompileError> {
        if self.eat(&Tok::Not) {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, CompileError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Gt => BinOp::Gt,
            Tok::Le => BinOp::Le,
            Tok::Ge => BinOp::Ge,
            Tok::In => BinOp::In,
            Tok::Not if self.peek_at(1) == &Tok::In => {
                self.bump();
                self.bump();
                let rhs = self.additive()?;
                return Ok(Expr::Not(Box::new(Expr::Binary(BinOp::In, Box::new(lhs), Box::new(rhs)))));
            }
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, CompileError> {
        if self.eat(&Tok::Minus) {
            return Ok(match self.unary()? {
                Expr::Int(v) => Expr::Int(v.wrapping_neg()),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.postfix()
    }

    fn args(&mut self, close: &Tok) -> Result<Vec<Expr>, CompileError> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(&Tok::Comma, "`,`")?;
            if self.eat(close) {
                return Ok(out);
            }
        }
    }

    fn postfix(&mut self) -> Result<Expr, CompileError> {
        if let Tok::Ident(name) = self.peek() {
            if ROOTS.contains(&name.as_str()) {
                if let Some(call) = self.annotation()? {
                    return Ok(call);
                }
            }
        }
        let mut e = self.atom()?;
        loop {
            let line = self.line();
            match self.peek() {
                Tok::LParen => {
                    self.bump();
                    let args = self.args(&Tok::RParen)?;
                    e = match e {
                        Expr::Name(name) => Expr::Call(Call::Named { name, args, line }),
                        Expr::Attr(base, method) => match *base {
                            Expr::Name(receiver) => Expr::Call(Call::Method {
                                receiver,
                                method,
                                args,
                                line,
                            }),
                            _ => return self.err("methods can only be called on a variable"),
                        },
                        _ => return self.err("only named functions can be called"),
                    };
                }
                Tok::LBracket => {
                    self.bump();
                    let idx = self.expr()?;
                    self.expect(&Tok::RBracket, "`]`")?;
                    e = Expr::Index(Box::new(e), Box::new(idx));
                }
                Tok::Dot => {
                    self.bump();
                    let field = self.ident()?;
                    e = Expr::Attr(Box::new(e), field);
                }
                _ => return Ok(e),
            }
        }
    }

    /// Try to read `ROOT{.NAME}(...)` as an annotation call. Returns `None`
    /// (without consuming) when the dotted name is not followed by `(`.
    fn annotation(&mut self) -> Result<Option<Expr>, CompileError> {
        let start_pos = self.pos;
        let line = self.line();
        let mut i = self.pos + 1;
        while self.toks[i].tok == Tok::Dot && matches!(self.toks.get(i + 1).map(|t| &t.tok), Some(Tok::Ident(_))) {
            i += 2;
        }
        if self.toks[i].tok != Tok::LParen {
            return Ok(None);
        }
        let open = i;
        let mut depth = 0usize;
        let close = loop {
            match self.toks[i].tok {
                Tok::LParen | Tok::LBracket | Tok::LBrace => depth += 1,
                Tok::RParen | Tok::RBracket | Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        break i;
                    }
                }
                Tok::Eof | Tok::Newline => return self.err("unbalanced parentheses in annotation"),
                _ => {}
            }
            i += 1;
        };
        let text = self.src[self.toks[start_pos].start..self.toks[close].end].to_string();
        let guard = if matches!(&self.toks[start_pos].tok, Tok::Ident(r) if r == "EXECUTION") && close > open + 1 {
            let mut inner: Vec<Token> = self.toks[open + 1..close].to_vec();
            let end = self.toks[close].start;
            inner.push(Token {
                tok: Tok::Eof,
                line: self.toks[close].line,
                start: end,
                end,
            });
            let mut sub = Parser {
                src: self.src,
                toks: &inner,
                pos: 0,
            };
            let g = sub.expr()?;
            if !sub.at(&Tok::Eof) {
                return sub.err("EXECUTION takes a single condition expression");
            }
            Some(Box::new(g))
        } else {
            None
        };
        self.pos = close + 1;
        Ok(Some(Expr::Call(Call::Annotation { text, guard, line })))
    }

    fn atom(&mut self) -> Result<Expr, CompileError> {
        match self.bump() {
            Tok::Int(v) => Ok(Expr::Int(v)),
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::True => Ok(Expr::Bool(true)),
            Tok::False => Ok(Expr::Bool(false)),
            Tok::Ident(n) => Ok(Expr::Name(n)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBracket => Ok(Expr::List(self.args(&Tok::RBracket)?)),
            Tok::LBrace => {
                let mut pairs = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        let k = self.expr()?;
                        self.expect(&Tok::Colon, "`:`")?;
                        let v = self.expr()?;
                        pairs.push((k, v));
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(&Tok::Comma, "`,`")?;
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                    }
                }
                Ok(Expr::Map(pairs))
            }
            other => {
                self.pos = self.pos.saturating_sub(1);
                self.err(format!("unexpected token {other:?}"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let s = parse_script("x = 1 + 2 * 3 == 7 and not y\n").unwrap();
        let Stmt::Assign { value, .. } = &s[0] else { panic!() };
        assert!(matches!(value, Expr::And(..)));
    }

    #[test]
    fn annotation_text_is_kept() {
        let s = parse_script("SYSCALL.NETWORK.BLOCK.SCHEME(\"file\", 'php')\n").unwrap();
        let Stmt::Expr { expr: Expr::Call(Call::Annotation { text, guard, .. }), .. } = &s[0] else {
            panic!("{s:?}")
        };
        assert_eq!(text, "SYSCALL.NETWORK.BLOCK.SCHEME(\"file\", 'php')");
        assert!(guard.is_none());
    }

    #[test]
    fn execution_guard_is_parsed() {
        let s = parse_script("EXECUTION.BLOCK(user_type != 'admin')\n").unwrap();
        let Stmt::Expr { expr: Expr::Call(Call::Annotation { guard, .. }), .. } = &s[0] else { panic!() };
        assert!(matches!(guard.as_deref(), Some(Expr::Binary(BinOp::Ne, ..))));
    }

    #[test]
    fn method_and_index_targets() {
        let s = parse_script("xs.append(1)\nxs[0] = 2\nv = parts.scheme\n").unwrap();
        assert!(matches!(&s[0], Stmt::Expr { expr: Expr::Call(Call::Method { .. }), .. }));
        assert!(matches!(&s[1], Stmt::Assign { target: Target::Index(..), .. }));
        assert!(matches!(&s[2], Stmt::Assign { value: Expr::Attr(..), .. }));
    }

    #[test]
    fn syntax_errors_carry_lines() {
        for (src, line) in [("x = \n", 1), ("a = 1\nif x\n  y = 1\n", 2), ("f(1,,2)\n", 1), ("1 = x\n", 1)] {
            match parse_script(src) {
                Err(CompileError::Syntax { line: l, .. }) => assert_eq!(l, line, "{src:?}"),
                other => panic!("{src:?}: {other:?}"),
            }
        }
    }
}
