//! Indentation-aware tokenizer for AnotaScript.

use super::CompileError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Int(i64),
    Str(String),
    Ident(String),
    Def,
    Return,
    If,
    Elif,
    Else,
    While,
    Pass,
    True,
    False,
    And,
    Or,
    Not,
    In,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
    Assign,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    /// Byte range in the source.
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, CompileError> {
    Lexer {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        line: 1,
        depth: 0,
        indents: vec![0],
        out: Vec::new(),
    }
    .run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    /// bracket nesting; newlines inside brackets are ignored
    depth: usize,
    indents: Vec<usize>,
    out: Vec<Token>,
}

impl Lexer<'_> {
    fn err(&self, msg: impl Into<String>) -> CompileError {
        CompileError::Syntax {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn push(&mut self, tok: Tok, start: usize) {
        self.out.push(Token {
            tok,
            line: self.line,
            start,
            end: self.pos,
        });
    }

    fn run(mut self) -> Result<Vec<Token>, CompileError> {
        let mut at_line_start = true;
        while self.pos < self.bytes.len() {
            if at_line_start && self.depth == 0 {
                at_line_start = false;
                if self.indentation()? {
                    continue;
                }
            }
            let c = self.bytes[self.pos];
            match c {
                b'\n' => {
                    if self.depth == 0 && !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline)) {
                        self.pos += 1;
                        self.push(Tok::Newline, self.pos - 1);
                    } else {
                        self.pos += 1;
                    }
                    self.line += 1;
                    at_line_start = true;
                }
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'\'' | b'"' => self.string(c)?,
                b'0'..=b'9' => self.number()?,
                c if c.is_ascii_alphabetic() || c == b'_' => self.word(),
                _ => self.punct()?,
            }
        }
        if !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline)) {
            self.push(Tok::Newline, self.pos);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, self.pos);
        }
        self.push(Tok::Eof, self.pos);
        Ok(self.out)
    }

    /// Measure leading whitespace and emit INDENT/DEDENT. Returns true when
    /// the line is blank or a comment (and has been consumed up to `\n`).
    fn indentation(&mut self) -> Result<bool, CompileError> {
        let start = self.pos;
        let mut width = 0;
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' => width += 1,
                b'\t' => width += 8 - width % 8,
                b'\r' => {}
                _ => break,
            }
            self.pos += 1;
        }
        if self.pos >= self.bytes.len() || matches!(self.bytes[self.pos], b'\n' | b'#') {
            return Ok(self.pos >= self.bytes.len());
        }
        let current = *self.indents.last().unwrap();
        if width > current {
            self.indents.push(width);
            self.push(Tok::Indent, start);
        } else {
            while width < *self.indents.last().unwrap() {
                self.indents.pop();
                self.push(Tok::Dedent, start);
            }
            if width != *self.indents.last().unwrap() {
                return Err(self.err("inconsistent indentation"));
            }
        }
        Ok(false)
    }

    fn string(&mut self, quote: u8) -> Result<(), CompileError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(ch) = self.src[self.pos..].chars().next() else {
                return Err(self.err("unterminated string"));
            };
            self.pos += ch.len_utf8();
            match ch {
                '\n' => return Err(self.err("unterminated string")),
                c if c as u32 == quote as u32 => break,
                '\\' => {
                    let Some(e) = self.src[self.pos..].chars().next() else {
                        return Err(self.err("unterminated string"));
                    };
                    self.pos += e.len_utf8();
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '0' => out.push('\0'),
                        'x' => {
                            let hex = self.src.get(self.pos..self.pos + 2).unwrap_or("");
                            let v = u8::from_str_radix(hex, 16).map_err(|_| self.err("bad \\x escape"))?;
                            self.pos += 2;
                            out.push(v as char);
                        }
                        other => out.push(other),
                    }
                }
                c => out.push(c),
            }
        }
        self.push(Tok::Str(out), start);
        Ok(())
    }

    fn number(&mut self) -> Result<(), CompileError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let v = self.src[start..self.pos]
            .parse()
            .map_err(|_| self.err("integer literal out of range"))?;
        self.push(Tok::Int(v), start);
        Ok(())
    }

    fn word(&mut self) {
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_') {
            self.pos += 1;
        }
        let tok = match &self.src[start..self.pos] {
            "def" => Tok::Def,
            "return" => Tok::Return,
            "if" => Tok::If,
            "elif" => Tok::Elif,
            "else" => Tok::Else,
            "while" => Tok::While,
            "pass" => Tok::Pass,
            "True" => Tok::True,
            "False" => Tok::False,
            "and" => Tok::And,
            "or" => Tok::Or,
            "not" => Tok::Not,
            "in" => Tok::In,
            w => Tok::Ident(w.to_string()),
        };
        self.push(tok, start);
    }

    fn punct(&mut self) -> Result<(), CompileError> {
        let start = self.pos;
        let two = self.src.get(self.pos..self.pos + 2).unwrap_or("");
        let (tok, len) = match two {
            "==" => (Tok::Eq, 2),
            "!=" => (Tok::Ne, 2),
            "<=" => (Tok::Le, 2),
            ">=" => (Tok::Ge, 2),
            _ => {
                let tok = match self.bytes[self.pos] {
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'[' => Tok::LBracket,
                    b']' => Tok::RBracket,
                    b'{' => Tok::LBrace,
                    b'}' => Tok::RBrace,
                    b',' => Tok::Comma,
                    b':' => Tok::Colon,
                    b'.' => Tok::Dot,
                    b'=' => Tok::Assign,
                    b'<' => Tok::Lt,
                    b'>' => Tok::Gt,
                    b'+' => Tok::Plus,
                    b'-' => Tok::Minus,
                    b'*' => Tok::Star,
                    b'/' => Tok::Slash,
                    b'%' => Tok::Percent,
                    _ => {
                        let ch = self.src[self.pos..].chars().next().unwrap();
                        return Err(self.err(format!("unexpected character `{ch}`")));
                    }
                };
                (tok, 1)
            }
        };
        match tok {
            Tok::LParen | Tok::LBracket | Tok::LBrace => self.depth += 1,
            Tok::RParen | Tok::RBracket | Tok::RBrace => self.depth = self.depth.saturating_sub(1),
            _ => {}
        }
        self.pos += len;
        self.push(tok, start);
        Ok(())
    }
}
