//! Coordinate expressions.
//!
//! Grammar (precedence from loosest to tightest):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' expo)?
//! expo    := '-' expo | power
//! atom    := number | ident | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | ln | sqrt | abs
//! number  := digits ('.' digits?)? ([eE] [+-]? digits)? | '.' digits ...
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^-1` is `0.5`.

use std::fmt;

use thiserror::Error;

use crate::jets::{DomainError, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Empty => None,
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                Some(*offset)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sin, Func::Cos, Func::Exp, Func::Ln, Func::Sqrt, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn apply<S: Scalar>(self, x: S) -> Result<S, DomainError> {
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Exp => Ok(x.exp()),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => Ok(x.abs()),
        }
    }
}

/// Parsed expression. Variables carry their index into the coordinate list.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Constant(f64),
    Var { name: String, index: usize },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Evaluate with `env[i]` bound to coordinate `i`.
    pub fn eval<S: Scalar>(&self, env: &[S]) -> Result<S, DomainError> {
        match self {
            Expr::Constant(c) => Ok(S::from_f64(*c)),
            Expr::Var { index, .. } => Ok(env[*index]),
            Expr::Unary(UnaryOp::Neg, e) => Ok(-e.eval(env)?),
            Expr::Binary(op, l, r) => {
                if *op == BinaryOp::Pow {
                    let base = l.eval(env)?;
                    // exponents without variables are folded to a real power
                    return if r.arity() == 0 {
                        base.powf(r.eval::<f64>(&[])?)
                    } else {
                        base.pow(r.eval(env)?)
                    };
                }
                let a = l.eval(env)?;
                let b = r.eval(env)?;
                match op {
                    BinaryOp::Add => Ok(a + b),
                    BinaryOp::Sub => Ok(a - b),
                    BinaryOp::Mul => Ok(a * b),
                    BinaryOp::Div => a.checked_div(b),
                    BinaryOp::Pow => unreachable!(),
                }
            }
            Expr::Call(f, e) => f.apply(e.eval(env)?),
        }
    }

    /// Number of coordinates the expression needs, i.e. max index + 1.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Constant(_) => 0,
            Expr::Var { index, .. } => index + 1,
            Expr::Unary(_, e) | Expr::Call(_, e) => e.arity(),
            Expr::Binary(_, l, r) => l.arity().max(r.arity()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Constant(c) => write!(f, "{c}"),
            Expr::Var { name, .. } => write!(f, "{name}"),
            Expr::Unary(UnaryOp::Neg, e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

/// Parse `text` over the coordinate names `coords`.
pub fn parse<S: AsRef<str>>(text: &str, coords: &[S]) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser { src: text.as_bytes(), pos: 0, coords };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("operator or end of input"));
    }
    Ok(e)
}

struct Parser<'a, S> {
    src: &'a [u8],
    pos: usize,
    coords: &'a [S],
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, expected: expected.to_string() }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinaryOp::Add,
                Some(b'-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinaryOp::Mul,
                Some(b'/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let e = self.exponent()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(e)));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.exponent()?)));
        }
        self.power()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.error("number, identifier or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let s = self.src;
        let digits = |mut i: usize| {
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
            }
            i
        };
        let mut i = digits(start);
        let int_len = i - start;
        let mut frac_len = 0;
        if i < s.len() && s[i] == b'.' {
            let j = digits(i + 1);
            frac_len = j - i - 1;
            i = j;
        }
        if int_len == 0 && frac_len == 0 {
            return Err(ParseError::Syntax { offset: start, expected: "digit".into() });
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            let k = digits(j);
            if k > j {
                i = k;
            }
        }
        // the slice is ASCII by construction
        let text = std::str::from_utf8(&s[start..i]).expect("ascii literal");
        let v: f64 = text
            .parse()
            .map_err(|_| ParseError::Syntax { offset: start, expected: "number".into() })?;
        if !v.is_finite() {
            return Err(ParseError::Syntax { offset: start, expected: "finite number".into() });
        }
        self.pos = i;
        Ok(Expr::Constant(v))
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut i = start;
        while i < self.src.len() && (self.src[i].is_ascii_alphanumeric() || self.src[i] == b'_') {
            i += 1;
        }
        let name = std::str::from_utf8(&self.src[start..i]).expect("ascii identifier");
        self.pos = i;
        if let Some(index) = self.coords.iter().position(|c| c.as_ref() == name) {
            return Ok(Expr::Var { name: name.to_string(), index });
        }
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.error("'(' after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("')'"));
            }
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        Err(ParseError::UnknownIdentifier { name: name.to_string(), offset: start })
    }
}
