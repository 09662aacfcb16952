//! S-expression grammar:
//!
//! ```text
//! expr    := literal | var | (let ((name expr)+) expr) | (if expr expr expr)
//!          | (head expr*)
//! literal := int | float | true | false | "string" | (list expr*)
//! ```
//!
//! `;` starts a comment running to end of line.

use std::fmt;

use thiserror::Error;

use super::builtins::Builtin;

/// Nesting limit for parsed expressions.
pub const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub offset: usize,
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Callee {
    Builtin(Builtin),
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    List(Vec<Expr>),
    Var(String),
    Let(Vec<(String, Expr)>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Callee, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl Expr {
    /// Pre-order walk over this node and all descendants.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::List(items) | ExprKind::Call(_, items) => {
                items.iter().for_each(|e| e.walk(f));
            }
            ExprKind::Let(binds, body) => {
                binds.iter().for_each(|(_, e)| e.walk(f));
                body.walk(f);
            }
            ExprKind::If(c, t, e) => {
                c.walk(f);
                t.walk(f);
                e.walk(f);
            }
            _ => {}
        }
    }
}

const RESERVED: [&str; 5] = ["let", "if", "list", "true", "false"];

pub fn is_reserved(name: &str) -> bool {
    RESERVED.contains(&name)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Str(String),
    Atom(String),
}

struct Lexer<'a> {
    src: &'a str,
    offset: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn pos(&self) -> Pos {
        Pos {
            offset: self.offset,
            line: self.line,
            col: self.col,
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.offset..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError {
            pos,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Pos)>, ParseError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek_char() {
            let start = self.pos();
            match c {
                c if c.is_whitespace() => {
                    self.bump();
                }
                ';' => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                '(' => {
                    self.bump();
                    out.push((Tok::Open, start));
                }
                ')' => {
                    self.bump();
                    out.push((Tok::Close, start));
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None => return Err(self.err(start, "unterminated string")),
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some(other) => {
                                    return Err(self.err(
                                        self.pos(),
                                        format!("unknown escape \\{other}"),
                                    ))
                                }
                                None => return Err(self.err(start, "unterminated string")),
                            },
                            Some(c) => s.push(c),
                        }
                    }
                    out.push((Tok::Str(s), start));
                }
                _ => {
                    let mut s = String::new();
                    while let Some(c) = self.peek_char() {
                        if c.is_whitespace() || matches!(c, '(' | ')' | '"' | ';') {
                            break;
                        }
                        s.push(c);
                        self.bump();
                    }
                    out.push((Tok::Atom(s), start));
                }
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    end: Pos,
}

impl Parser {
    fn err(pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError {
            pos,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<(Tok, Pos), ParseError> {
        let t = self
            .toks
            .get(self.i)
            .cloned()
            .ok_or_else(|| Self::err(self.end, "unexpected end of input"))?;
        self.i += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&(Tok, Pos)> {
        self.toks.get(self.i)
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        match self.next()? {
            (Tok::Close, _) => Ok(()),
            (_, pos) => Err(Self::err(pos, "expected ')'")),
        }
    }

    fn expr(&mut self, depth: usize) -> Result<Expr, ParseError> {
        let (tok, pos) = self.next()?;
        if depth > MAX_DEPTH {
            return Err(Self::err(pos, format!("nesting deeper than {MAX_DEPTH}")));
        }
        let kind = match tok {
            Tok::Close => return Err(Self::err(pos, "unexpected ')'")),
            Tok::Str(s) => ExprKind::Str(s),
            Tok::Atom(a) => atom(&a, pos)?,
            Tok::Open => return self.form(pos, depth),
        };
        Ok(Expr { kind, pos })
    }

    fn form(&mut self, open: Pos, depth: usize) -> Result<Expr, ParseError> {
        let (head, hpos) = self.next()?;
        let name = match head {
            Tok::Atom(a) => a,
            Tok::Close => return Err(Self::err(open, "empty form ()")),
            _ => return Err(Self::err(hpos, "form head must be a name")),
        };
        let kind = match name.as_str() {
            "let" => {
                match self.next()? {
                    (Tok::Open, _) => {}
                    (_, p) => return Err(Self::err(p, "let expects a binding list")),
                }
                let mut binds = Vec::new();
                loop {
                    match self.next()? {
                        (Tok::Close, _) => break,
                        (Tok::Open, _) => {}
                        (_, p) => return Err(Self::err(p, "let binding must be (name expr)")),
                    }
                    let bname = match self.next()? {
                        (Tok::Atom(a), p) => {
                            if is_reserved(&a) || a.parse::<f64>().is_ok() {
                                return Err(Self::err(p, format!("cannot bind {a:?}")));
                            }
                            a
                        }
                        (_, p) => return Err(Self::err(p, "binding name must be a symbol")),
                    };
                    let value = self.expr(depth + 1)?;
                    self.expect_close()?;
                    binds.push((bname, value));
                }
                if binds.is_empty() {
                    return Err(Self::err(open, "let needs at least one binding"));
                }
                let body = self.expr(depth + 1)?;
                self.expect_close()?;
                ExprKind::Let(binds, Box::new(body))
            }
            "if" => {
                let c = self.expr(depth + 1)?;
                let t = self.expr(depth + 1)?;
                let e = self.expr(depth + 1)?;
                self.expect_close()
                    .map_err(|e| Self::err(e.pos, "if takes exactly three expressions"))?;
                ExprKind::If(Box::new(c), Box::new(t), Box::new(e))
            }
            _ => {
                let mut args = Vec::new();
                while !matches!(self.peek(), Some((Tok::Close, _))) {
                    if self.peek().is_none() {
                        return Err(Self::err(open, "unclosed '('"));
                    }
                    args.push(self.expr(depth + 1)?);
                }
                self.i += 1;
                if name == "list" {
                    ExprKind::List(args)
                } else {
                    let callee = match Builtin::from_name(&name) {
                        Some(b) => Callee::Builtin(b),
                        None => Callee::Unknown(name),
                    };
                    ExprKind::Call(callee, args)
                }
            }
        };
        Ok(Expr { kind, pos: open })
    }
}

fn atom(a: &str, pos: Pos) -> Result<ExprKind, ParseError> {
    match a {
        "true" | "#t" => return Ok(ExprKind::Bool(true)),
        "false" | "#f" => return Ok(ExprKind::Bool(false)),
        _ => {}
    }
    let first = a.chars().next().unwrap_or(' ');
    let numeric_start = first.is_ascii_digit()
        || ((first == '-' || first == '+' || first == '.') && a.len() > 1
            && a[1..].starts_with(|c: char| c.is_ascii_digit() || c == '.'));
    if numeric_start {
        if let Ok(i) = a.parse::<i64>() {
            return Ok(ExprKind::Int(i));
        }
        return match a.parse::<f64>() {
            Ok(f) if f.is_finite() => Ok(ExprKind::Float(f)),
            _ => Err(ParseError {
                pos,
                message: format!("malformed number {a:?}"),
            }),
        };
    }
    Ok(ExprKind::Var(a.to_string()))
}

/// Parses exactly one expression from `src`.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let lexer = Lexer {
        src,
        offset: 0,
        line: 1,
        col: 1,
    };
    let end = {
        let mut l = Lexer {
            src,
            offset: 0,
            line: 1,
            col: 1,
        };
        while l.bump().is_some() {}
        l.pos()
    };
    let toks = lexer.tokens()?;
    let mut p = Parser { toks, i: 0, end };
    if p.peek().is_none() {
        return Err(Parser::err(end, "empty program"));
    }
    let e = p.expr(0)?;
    if let Some((_, pos)) = p.peek() {
        return Err(Parser::err(*pos, "trailing input after expression"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_program_shape() {
        let e = parse("(exists (segment image arg))").unwrap();
        match e.kind {
            ExprKind::Call(Callee::Builtin(Builtin::Exists), args) => match &args[0].kind {
                ExprKind::Call(Callee::Builtin(Builtin::Segment), inner) => {
                    assert_eq!(inner[0].kind, ExprKind::Var("image".into()));
                    assert_eq!(inner[1].kind, ExprKind::Var("arg".into()));
                }
                other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_heads_parse() {
        let e = parse("(foo image)").unwrap();
        assert!(matches!(e.kind, ExprKind::Call(Callee::Unknown(ref n), _) if n == "foo"));
    }

    #[test]
    fn literals_and_forms() {
        assert!(matches!(parse("(if true 1 2)").unwrap().kind, ExprKind::If(..)));
        assert_eq!(parse("-3").unwrap().kind, ExprKind::Int(-3));
        assert_eq!(parse("2.5").unwrap().kind, ExprKind::Float(2.5));
        assert_eq!(parse("-").unwrap().kind, ExprKind::Var("-".into()));
        assert_eq!(parse("\"a\\\"b\"").unwrap().kind, ExprKind::Str("a\"b".into()));
        assert!(matches!(
            parse("(list \"a\" 1)").unwrap().kind,
            ExprKind::List(ref v) if v.len() == 2
        ));
        let l = parse("; comment\n(let ((x 1) (y x)) (+ x y))").unwrap();
        assert!(matches!(l.kind, ExprKind::Let(ref b, _) if b.len() == 2));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("(exists (segment image arg)").unwrap_err();
        assert_eq!(e.pos.line, 1);
        let e = parse("(area\n  x))").unwrap_err();
        assert_eq!((e.pos.line, e.pos.col), (2, 5));
        assert!(parse("").is_err());
        assert!(parse("()").is_err());
        assert!(parse("(if 1 2)").is_err());
        assert!(parse("(let () 1)").is_err());
        assert!(parse("(let ((if 1)) 1)").is_err());
        assert!(parse("\"open").is_err());
        assert!(parse("1e999").is_err());
    }

    #[test]
    fn depth_is_bounded() {
        let deep = "(not ".repeat(MAX_DEPTH + 5) + "true" + &")".repeat(MAX_DEPTH + 5);
        assert!(parse(&deep).is_err());
    }
}
