use super::{AnnotationAst, Arg, ROOTS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotationError {
    #[error("syntax error at column {col}: {msg}")]
    Syntax { col: usize, msg: String },
    #[error("unknown annotation head `{0}`")]
    UnknownHead(String),
    #[error("duplicate keyword argument `{0}`")]
    DuplicateKwarg(String),
}

/// Parse a single annotation call such as `SYSCALL.READ.BLOCK(PATH='/etc/')`.
pub fn parse_annotation(text: &str) -> Result<AnnotationAst, AnnotationError> {
    let mut p = Parser {
        src: text.chars().collect(),
        pos: 0,
    };
    p.skip_ws();
    let ast = p.annotation()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input after annotation"));
    }
    Ok(ast)
}

struct Parser {
    src: Vec<char>,
    pos: usize,
}

impl Parser {
    fn err(&self, msg: impl Into<String>) -> AnnotationError {
        AnnotationError::Syntax {
            col: self.pos + 1,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), AnnotationError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, AnnotationError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => self.pos += 1,
            _ => return Err(self.err("expected identifier")),
        }
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        Ok(self.src[start..self.pos].iter().collect())
    }

    /// `NAME {"." NAME}`; whitespace around dots is tolerated.
    fn dotted(&mut self) -> Result<Vec<String>, AnnotationError> {
        let mut segs = vec![self.ident()?];
        loop {
            let save = self.pos;
            if self.eat('.') {
                segs.push(self.ident()?);
            } else {
                self.pos = save;
                return Ok(segs);
            }
        }
    }

    fn annotation(&mut self) -> Result<AnnotationAst, AnnotationError> {
        let head = self.dotted()?;
        self.finish_annotation(head)
    }

    fn finish_annotation(&mut self, head: Vec<String>) -> Result<AnnotationAst, AnnotationError> {
        if !ROOTS.contains(&head[0].as_str()) {
            return Err(AnnotationError::UnknownHead(head.join(".")));
        }
        self.expect('(')?;
        if head[0] == "EXECUTION" {
            let text = self.raw_until_close()?;
            let args = if text.is_empty() {
                vec![]
            } else {
                vec![Arg::Expr(text)]
            };
            return Ok(AnnotationAst {
                head,
                args,
                kwargs: vec![],
            });
        }
        let mut args = Vec::new();
        let mut kwargs: Vec<(String, Arg)> = Vec::new();
        if !self.eat(')') {
            loop {
                match self.arg()? {
                    (Some(key), value) => {
                        if kwargs.iter().any(|(k, _)| *k == key) {
                            return Err(AnnotationError::DuplicateKwarg(key));
                        }
                        kwargs.push((key, value));
                    }
                    (None, value) => {
                        if !kwargs.is_empty() {
                            return Err(self.err("positional argument after keyword argument"));
                        }
                        args.push(value);
                    }
                }
                if self.eat(',') {
                    continue;
                }
                self.expect(')')?;
                break;
            }
        }
        Ok(AnnotationAst { head, args, kwargs })
    }

    /// Raw text up to the matching close paren, respecting quotes.
    fn raw_until_close(&mut self) -> Result<String, AnnotationError> {
        let start = self.pos;
        let mut depth = 0usize;
        let mut quote: Option<char> = None;
        while let Some(c) = self.peek() {
            self.pos += 1;
            match (quote, c) {
                (Some(_), '\\') => self.pos += 1,
                (Some(q), c) if c == q => quote = None,
                (Some(_), _) => {}
                (None, '\'' | '"') => quote = Some(c),
                (None, '(' | '[') => depth += 1,
                (None, ']') => depth = depth.saturating_sub(1),
                (None, ')') if depth == 0 => {
                    let text: String = self.src[start..self.pos - 1].iter().collect();
                    return Ok(text.trim().to_string());
                }
                (None, ')') => depth -= 1,
                _ => {}
            }
        }
        Err(if quote.is_some() {
            self.err("unterminated string")
        } else {
            self.err("unbalanced parentheses")
        })
    }

    fn arg(&mut self) -> Result<(Option<String>, Arg), AnnotationError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => {
                let segs = self.dotted()?;
                if segs.len() == 1 && self.eat('=') {
                    let value = self.value()?;
                    return Ok((Some(segs.into_iter().next().unwrap()), value));
                }
                let save = self.pos;
                self.skip_ws();
                if self.peek() == Some('(') {
                    self.pos = save;
                    let nested = self.finish_annotation(segs)?;
                    return Ok((None, Arg::Annotation(Box::new(nested))));
                }
                self.pos = save;
                Ok((None, Arg::Name(segs.join("."))))
            }
            _ => Ok((None, self.value()?)),
        }
    }

    /// literal | NAME
    fn value(&mut self) -> Result<Arg, AnnotationError> {
        self.skip_ws();
        match self.peek() {
            Some('\'' | '"') => Ok(Arg::Str(self.string()?)),
            Some('[') => {
                self.pos += 1;
                let mut items = Vec::new();
                if !self.eat(']') {
                    loop {
                        items.push(self.value()?);
                        if self.eat(',') {
                            continue;
                        }
                        self.expect(']')?;
                        break;
                    }
                }
                Ok(Arg::List(items))
            }
            Some(c) if c.is_ascii_digit() || c == '-' => self.int(),
            Some(c) if c.is_alphabetic() || c == '_' => Ok(Arg::Name(self.dotted()?.join("."))),
            Some(c) => Err(self.err(format!("unexpected character `{c}`"))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn int(&mut self) -> Result<Arg, AnnotationError> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.pos += 1;
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.src[start..self.pos].iter().collect();
        text.parse()
            .map(Arg::Int)
            .map_err(|_| self.err(format!("invalid integer `{text}`")))
    }

    fn string(&mut self) -> Result<String, AnnotationError> {
        let quote = self.peek().unwrap();
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.err("unterminated string"));
            };
            self.pos += 1;
            if c == quote {
                return Ok(out);
            }
            if c != '\\' {
                out.push(c);
                continue;
            }
            let Some(e) = self.peek() else {
                return Err(self.err("unterminated string"));
            };
            self.pos += 1;
            match e {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                '0' => out.push('\0'),
                'x' => {
                    let hex: String = self.src.get(self.pos..self.pos + 2).unwrap_or(&[]).iter().collect();
                    let v = u8::from_str_radix(&hex, 16).map_err(|_| self.err("bad \\x escape"))?;
                    self.pos += 2;
                    out.push(v as char);
                }
                other => out.push(other),
            }
        }
    }
}
