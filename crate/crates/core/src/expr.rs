//! Closed-form component expressions.
//!
//! The grammar is deliberately small: numbers, `pi`, coordinate names,
//! `+ - * /`, integer powers `^k`, unary minus and the functions `sin`,
//! `cos`, `exp`. Expressions evaluate over any [`Real`], so the same tree
//! yields values and exact derivatives.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

impl Expr {
    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn sin(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(v.sin()),
            e => Expr::Sin(Box::new(e)),
        }
    }

    pub fn cos(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(v.cos()),
            e => Expr::Cos(Box::new(e)),
        }
    }

    pub fn exp(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(v.exp()),
            e => Expr::Exp(Box::new(e)),
        }
    }

    pub fn powi(self, k: i32) -> Expr {
        match (self, k) {
            (_, 0) => Expr::one(),
            (e, 1) => e,
            (Expr::Const(v), k) => Expr::Const(v.powi(k)),
            (e, k) => Expr::Pow(Box::new(e), k),
        }
    }

    pub fn eval<S: Real>(&self, x: &[S]) -> S {
        match self {
            Expr::Const(v) => S::cst(*v),
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => match a.as_ref() {
                Expr::Const(c) => b.eval(x).scale(*c),
                _ => a.eval(x) * b.eval(x),
            },
            Expr::Div(a, b) => match b.as_ref() {
                Expr::Const(c) => a.eval(x).scale(1.0 / *c),
                _ => a.eval(x) / b.eval(x),
            },
            Expr::Neg(a) => -a.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Exp(a) => a.eval(x).exp(),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => match (a.max_var(), b.max_var()) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => a.max_var(),
        }
    }

    /// Substitute every `Var(i)` with `subs[i]`.
    pub fn compose(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(*v),
            Expr::Var(i) => subs[*i].clone(),
            Expr::Add(a, b) => a.compose(subs) + b.compose(subs),
            Expr::Sub(a, b) => a.compose(subs) - b.compose(subs),
            Expr::Mul(a, b) => a.compose(subs) * b.compose(subs),
            Expr::Div(a, b) => a.compose(subs) / b.compose(subs),
            Expr::Neg(a) => -a.compose(subs),
            Expr::Pow(a, k) => a.compose(subs).powi(*k),
            Expr::Sin(a) => a.compose(subs).sin(),
            Expr::Cos(a) => a.compose(subs).cos(),
            Expr::Exp(a) => a.compose(subs).exp(),
        }
    }

    /// Parse `src`, resolving identifiers against `names` (coordinate order).
    pub fn parse(src: &str, names: &[String]) -> Result<Expr, ExprError> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
            names,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.err(format!("unexpected `{}`", p.src[p.pos] as char)));
        }
        Ok(e)
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::Const(v)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, o: Expr) -> Expr {
        match (self, o) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => b,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, o: Expr) -> Expr {
        match (self, o) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a - b),
            (a, b) if b.is_zero() => a,
            (a, b) if a.is_zero() => -b,
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, o: Expr) -> Expr {
        match (self, o) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
            (a, b) if a.is_zero() || b.is_zero() => Expr::zero(),
            (Expr::Const(1.0), b) => b,
            (a, Expr::Const(1.0)) => a,
            // constants are kept on the left so evaluation can scale
            (a, Expr::Const(c)) => Expr::Mul(Box::new(Expr::Const(c)), Box::new(a)),
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, o: Expr) -> Expr {
        match (self, o) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a / b),
            (a, _) if a.is_zero() => Expr::zero(),
            (a, Expr::Const(1.0)) => a,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(-v),
            Expr::Neg(a) => *a,
            e => Expr::Neg(Box::new(e)),
        }
    }
}

impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, o: Expr) -> Expr {
        Expr::Const(self) * o
    }
}

impl Add<f64> for Expr {
    type Output = Expr;
    fn add(self, o: f64) -> Expr {
        self + Expr::Const(o)
    }
}

impl Mul<f64> for Expr {
    type Output = Expr;
    fn mul(self, o: f64) -> Expr {
        Expr::Const(o) * self
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn err(&self, msg: String) -> ExprError {
        ExprError::Parse { pos: self.pos, msg }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = lhs + self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = lhs * self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = lhs / self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            if self.src.get(self.pos) == Some(&b'-') {
                self.pos += 1;
            }
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            let k: i32 = text.parse().map_err(|_| ExprError::Parse {
                pos: start,
                msg: "exponent must be an integer literal".into(),
            })?;
            return Ok(base.powi(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression".into())),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                if self.peek() == Some(b'(') {
                    let f: fn(Expr) -> Expr = match ident {
                        "sin" => Expr::sin,
                        "cos" => Expr::cos,
                        "exp" => Expr::exp,
                        other => {
                            return Err(ExprError::Parse {
                                pos: start,
                                msg: format!("unknown function `{other}`"),
                            })
                        }
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(b')') {
                        return Err(self.err("expected `)`".into()));
                    }
                    self.pos += 1;
                    return Ok(f(arg));
                }
                if ident == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                match self.names.iter().position(|n| n == ident) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(ExprError::Parse {
                        pos: start,
                        msg: format!("unknown symbol `{ident}`"),
                    }),
                }
            }
            Some(c) => Err(self.err(format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map(Expr::Const).map_err(|_| ExprError::Parse {
            pos: start,
            msg: format!("malformed number `{text}`"),
        })
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl<'a> ExprDisplay<'a> {
    fn child(&self, expr: &'a Expr) -> ExprDisplay<'a> {
        ExprDisplay {
            expr,
            names: self.names,
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = |e| self.child(e);
        match self.expr {
            Expr::Const(v) => write!(f, "{v:?}"),
            Expr::Var(i) => match self.names.get(*i) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "x{i}"),
            },
            Expr::Add(a, b) => write!(f, "({} + {})", d(a), d(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", d(a), d(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", d(a), d(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", d(a), d(b)),
            Expr::Neg(a) => write!(f, "(-{})", d(a)),
            Expr::Pow(a, k) => write!(f, "({}^{k})", d(a)),
            Expr::Sin(a) => write!(f, "sin({})", d(a)),
            Expr::Cos(a) => write!(f, "cos({})", d(a)),
            Expr::Exp(a) => write!(f, "exp({})", d(a)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_precedence() {
        let n = names(&["x", "u"]);
        let e = Expr::parse("1 + 2*x^2 - u/4", &n).unwrap();
        assert!((e.eval(&[3.0, 2.0]) - (1.0 + 18.0 - 0.5)).abs() < 1e-15);
        let e = Expr::parse("-x^2", &n).unwrap();
        assert_eq!(e.eval(&[3.0, 0.0]), -9.0);
        let e = Expr::parse("2e-1 * sin(pi/2) + exp(0)", &n).unwrap();
        assert!((e.eval(&[0.0, 0.0]) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn unknown_function_is_named() {
        let n = names(&["x"]);
        let err = Expr::parse("1 + tanh(x)", &n).unwrap_err();
        let ExprError::Parse { pos, msg } = err;
        assert_eq!(pos, 4);
        assert!(msg.contains("tanh"), "{msg}");
    }

    #[test]
    fn unknown_symbol_and_garbage() {
        let n = names(&["x"]);
        assert!(Expr::parse("y + 1", &n).is_err());
        assert!(Expr::parse("x +", &n).is_err());
        assert!(Expr::parse("(x", &n).is_err());
        assert!(Expr::parse("x ^ 1.5", &n).is_err());
        assert!(Expr::parse("x $", &n).is_err());
    }

    #[test]
    fn display_round_trips_through_parser() {
        let n = names(&["x", "u"]);
        let e = Expr::parse("cos(x)*(1 + 0.3*sin(u)) / (2 - x^3)", &n).unwrap();
        let text = e.display(&n).to_string();
        let back = Expr::parse(&text, &n).unwrap();
        for p in [[0.1, 0.2], [-0.7, 2.0]] {
            assert!((e.eval(&p) - back.eval(&p)).abs() < 1e-15);
        }
    }

    #[test]
    fn compose_substitutes() {
        let n = names(&["a", "b"]);
        let e = Expr::parse("a*b + a", &n).unwrap();
        let c = e.compose(&[Expr::var(1), Expr::c(2.0)]);
        assert_eq!(c.eval(&[0.0, 3.0]), 9.0);
    }
}
