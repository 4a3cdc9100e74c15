//! Time-dependent coefficient expressions.
//!
//! The grammar is closed: real literals, the symbol `t`, the operators
//! `+ - * / ^` (integer exponents only), unary minus, and the functions
//! `sin cos exp tanh abs` (one argument) and `min max` (two arguments).
//! Precedence from tightest to loosest is `^`, unary `-`, `* /`, `+ -`;
//! binary operators associate to the left.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Slack allowed when validating samples against declared bounds.
pub const DECLARED_BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("non-integer exponent `{text}` at offset {offset}")]
    NonIntegerExponent { offset: usize, text: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::NonIntegerExponent { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at t = {t}")]
    DivisionByZero { t: f64 },
    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("bound estimation needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("value {value} at t = {t} lies outside the declared range [{inf}, {sup}]")]
    DeclaredBoundViolation { t: f64, value: f64, inf: f64, sup: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func1 {
    Sin,
    Cos,
    Exp,
    Tanh,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func2 {
    Min,
    Max,
}

impl Func1 {
    fn name(self) -> &'static str {
        match self {
            Func1::Sin => "sin",
            Func1::Cos => "cos",
            Func1::Exp => "exp",
            Func1::Tanh => "tanh",
            Func1::Abs => "abs",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func1::Sin => x.sin(),
            Func1::Cos => x.cos(),
            Func1::Exp => x.exp(),
            Func1::Tanh => x.tanh(),
            Func1::Abs => x.abs(),
        }
    }
}

impl Func2 {
    fn name(self) -> &'static str {
        match self {
            Func2::Min => "min",
            Func2::Max => "max",
        }
    }

    fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            Func2::Min => x.min(y),
            Func2::Max => x.max(y),
        }
    }
}

/// Expression tree over the time variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Time,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call1(Func1, Box<Expr>),
    Call2(Func2, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(x) => *x,
            Expr::Time => t,
            Expr::Neg(e) => -e.eval(t)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval(t)?;
                let b = r.eval(t)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero { t });
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(base, k) => {
                let b = base.eval(t)?;
                if *k < 0 && b == 0.0 {
                    return Err(EvalError::DivisionByZero { t });
                }
                b.powi(*k)
            }
            Expr::Call1(f, e) => f.apply(e.eval(t)?),
            Expr::Call2(f, x, y) => f.apply(x.eval(t)?, y.eval(t)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { t })
        }
    }

    pub fn depends_on_time(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Time => true,
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call1(_, e) => e.depends_on_time(),
            Expr::Bin(_, l, r) | Expr::Call2(_, l, r) => l.depends_on_time() || r.depends_on_time(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_with(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let paren = self.precedence() < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(x) => write!(f, "{x:?}")?,
            Expr::Time => f.write_str("t")?,
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.write_with(f, 3)?;
            }
            Expr::Bin(op, l, r) => {
                let (p, sym) = match op {
                    BinOp::Add => (1, " + "),
                    BinOp::Sub => (1, " - "),
                    BinOp::Mul => (2, " * "),
                    BinOp::Div => (2, " / "),
                };
                l.write_with(f, p)?;
                f.write_str(sym)?;
                r.write_with(f, p + 1)?;
            }
            Expr::Pow(base, k) => {
                base.write_with(f, 4)?;
                write!(f, "^{k}")?;
            }
            Expr::Call1(func, e) => {
                write!(f, "{}(", func.name())?;
                e.write_with(f, 0)?;
                f.write_str(")")?;
            }
            Expr::Call2(func, x, y) => {
                write!(f, "{}(", func.name())?;
                x.write_with(f, 0)?;
                f.write_str(", ")?;
                y.write_with(f, 0)?;
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_with(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((Tok::Num(value, text.to_string()), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            Tok::Num(_, s) | Tok::Ident(s) => format!("`{s}`"),
            other => format!("`{}`", tok_text(other)),
        };
        ParseError::Syntax { offset: self.offset(), message: format!("expected {what}, found {found}") }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.atom()?;
        while *self.peek() == Tok::Caret {
            self.bump();
            let offset = self.offset();
            let negative = match self.peek() {
                Tok::Minus => {
                    self.bump();
                    true
                }
                Tok::Plus => {
                    self.bump();
                    false
                }
                _ => false,
            };
            let (value, text) = match self.bump() {
                (Tok::Num(v, s), _) => (v, s),
                _ => {
                    self.pos -= 1;
                    return Err(self.unexpected("integer exponent"));
                }
            };
            if value.fract() != 0.0 || value > i32::MAX as f64 {
                let text = if negative { format!("-{text}") } else { text };
                return Err(ParseError::NonIntegerExponent { offset, text });
            }
            let k = value as i32;
            base = Expr::Pow(Box::new(base), if negative { -k } else { k });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v, _) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == "t" {
                    return Ok(Expr::Time);
                }
                let f1 = match name.as_str() {
                    "sin" => Some(Func1::Sin),
                    "cos" => Some(Func1::Cos),
                    "exp" => Some(Func1::Exp),
                    "tanh" => Some(Func1::Tanh),
                    "abs" => Some(Func1::Abs),
                    _ => None,
                };
                let f2 = match name.as_str() {
                    "min" => Some(Func2::Min),
                    "max" => Some(Func2::Max),
                    _ => None,
                };
                if f1.is_none() && f2.is_none() {
                    return Err(ParseError::UnknownIdentifier { offset, name });
                }
                self.expect(Tok::LParen, "`(` after function name")?;
                let first = self.expr()?;
                let e = if let Some(f) = f1 {
                    Expr::Call1(f, Box::new(first))
                } else {
                    self.expect(Tok::Comma, "`,`")?;
                    let second = self.expr()?;
                    Expr::Call2(f2.unwrap(), Box::new(first), Box::new(second))
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.unexpected("a number, `t`, a function call or `(`")),
        }
    }
}

fn tok_text(t: &Tok) -> &'static str {
    match t {
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::Slash => "/",
        Tok::Caret => "^",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::Comma => ",",
        _ => "",
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

/// Where a pair of bounds came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSource {
    Declared,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub inf: f64,
    pub sup: f64,
    pub source: BoundSource,
}

/// Uniform grid of `samples` points covering `[lo, hi]`, endpoints included.
pub fn uniform_grid(window: (f64, f64), samples: usize) -> impl Iterator<Item = f64> {
    let (lo, hi) = window;
    let step = if samples > 1 { (hi - lo) / (samples - 1) as f64 } else { 0.0 };
    (0..samples).map(move |k| if k + 1 == samples { hi } else { lo + k as f64 * step })
}

/// A parsed scalar function of time, optionally carrying user-declared
/// global bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFn {
    expr: Expr,
    constant: Option<f64>,
    declared: Option<(f64, f64)>,
}

impl TimeFn {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        Ok(Self::from_expr(parse_expr(src)?))
    }

    pub fn from_expr(expr: Expr) -> Self {
        let constant = if expr.depends_on_time() { None } else { expr.eval(0.0).ok() };
        TimeFn { expr, constant, declared: None }
    }

    pub fn constant(value: f64) -> Self {
        Self::from_expr(Expr::Num(value))
    }

    pub fn with_declared_bounds(mut self, inf: f64, sup: f64) -> Self {
        self.declared = Some((inf, sup));
        self
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn declared_bounds(&self) -> Option<(f64, f64)> {
        self.declared
    }

    /// Value when the expression does not depend on `t`.
    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    #[inline]
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        match self.constant {
            Some(c) => Ok(c),
            None => self.expr.eval(t),
        }
    }

    /// Global inf/sup estimate. Declared bounds win after every sample has
    /// been checked against them; otherwise the grid extrema are returned.
    pub fn estimate_bounds(&self, window: (f64, f64), samples: usize) -> Result<Bounds, BoundsError> {
        if samples < 2 {
            return Err(BoundsError::TooFewSamples(samples));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in uniform_grid(window, samples) {
            let v = self.eval(t)?;
            if let Some((inf, sup)) = self.declared {
                if v < inf - DECLARED_BOUND_SLACK || v > sup + DECLARED_BOUND_SLACK {
                    return Err(BoundsError::DeclaredBoundViolation { t, value: v, inf, sup });
                }
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(match self.declared {
            Some((inf, sup)) => Bounds { inf, sup, source: BoundSource::Declared },
            None => Bounds { inf: lo, sup: hi, source: BoundSource::Sampled },
        })
    }
}

impl fmt::Display for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

impl Serialize for TimeFn {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.expr)
    }
}

impl<'de> Deserialize<'de> for TimeFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let src = String::deserialize(d)?;
        TimeFn::parse(&src).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, t: f64) -> f64 {
        TimeFn::parse(src).unwrap().eval(t).unwrap()
    }

    #[test]
    fn constants_and_time() {
        assert_eq!(ev("1", 17.3), 1.0);
        assert_eq!(ev("2+sin(t)", 0.0), 2.0);
        assert_eq!(ev("3*exp(0-t)", 0.0), 3.0);
        assert_eq!(ev("t^2", -2.0), 4.0);
        assert!(TimeFn::parse("1").unwrap().constant_value().is_some());
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2+3*4", 0.0), 14.0);
        assert_eq!(ev("8-3-2", 0.0), 3.0);
        assert_eq!(ev("8/4/2", 0.0), 1.0);
        // ^ binds tighter than unary minus
        assert_eq!(ev("-t^2", 3.0), -9.0);
        assert_eq!(ev("(-t)^2", 3.0), 9.0);
        assert_eq!(ev("2*-t", 3.0), -6.0);
        assert_eq!(ev("t^-1", 4.0), 0.25);
        assert_eq!(ev("min(t, 2) + max(1, abs(-5))", 7.0), 7.0);
        assert_eq!(ev("1.5e1 + tanh(0)", 0.0), 15.0);
    }

    #[test]
    fn syntax_error_offsets() {
        assert_eq!(parse_expr("2+*t").unwrap_err().offset(), 2);
        assert!(matches!(parse_expr("2+"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("(t"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("t t"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("2 # 3"), Err(ParseError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn unknown_identifier_and_bad_exponent() {
        assert_eq!(
            parse_expr("1 + foo(t)"),
            Err(ParseError::UnknownIdentifier { offset: 4, name: "foo".into() })
        );
        assert!(matches!(parse_expr("t^2.5"), Err(ParseError::NonIntegerExponent { offset: 2, .. })));
        assert!(matches!(parse_expr("t^t"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let f = TimeFn::parse("1/(t-1)").unwrap();
        assert_eq!(f.eval(1.0), Err(EvalError::DivisionByZero { t: 1.0 }));
        assert!(TimeFn::parse("t^-2").unwrap().eval(0.0).is_err());
        assert!(TimeFn::parse("exp(t)").unwrap().eval(1000.0).is_err());
    }

    #[test]
    fn sampled_bounds_of_shifted_sine() {
        let b = TimeFn::parse("2+sin(t)").unwrap().estimate_bounds((-100.0, 100.0), 100_001).unwrap();
        assert_eq!(b.source, BoundSource::Sampled);
        assert!((b.inf - 1.0).abs() < 1e-6, "{b:?}");
        assert!((b.sup - 3.0).abs() < 1e-6, "{b:?}");
    }

    #[test]
    fn declared_bounds() {
        let b = TimeFn::parse("5").unwrap().with_declared_bounds(5.0, 5.0);
        let got = b.estimate_bounds((-10.0, 10.0), 11).unwrap();
        assert_eq!((got.inf, got.sup, got.source), (5.0, 5.0, BoundSource::Declared));

        let bad = TimeFn::parse("sin(t)").unwrap().with_declared_bounds(-0.5, 0.5);
        match bad.estimate_bounds((-10.0, 10.0), 2001) {
            Err(BoundsError::DeclaredBoundViolation { t, value, .. }) => {
                assert!(value.abs() > 0.5);
                assert!((t.sin() - value).abs() < 1e-15);
            }
            other => panic!("expected violation, got {other:?}"),
        }
        assert!(matches!(bad.estimate_bounds((0.0, 1.0), 1), Err(BoundsError::TooFewSamples(1))));
    }

    #[test]
    fn pretty_print_round_trips_corpus() {
        let corpus = [
            "1",
            "2+sin(t)",
            "3*exp(0-t)",
            "t^2",
            "-t^2",
            "(-t)^2",
            "1-(2-3)",
            "1-2-3",
            "a",
            "8/(4/2)",
            "-(1+t)*2",
            "--t",
            "t^2^3",
            "t^-3",
            "max(min(t,1),cos(2*t))+abs(-t)",
            "1e-7*t + 2.5E3",
            "0.1*sin(0.7*t+1)",
            "2 + 0.5*tanh(t/3) - exp(-(t^2))",
        ];
        for src in corpus {
            let Ok(e) = parse_expr(src) else { continue };
            let printed = e.to_string();
            let again = parse_expr(&printed).unwrap_or_else(|err| panic!("{src} -> {printed}: {err}"));
            assert_eq!(e, again, "{src} -> {printed}");
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                (0u32..1000).prop_map(|k| Expr::Num(k as f64 / 8.0)),
                Just(Expr::Time),
            ];
            leaf.prop_recursive(4, 32, 2, |inner| {
                prop_oneof![
                    inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                    (inner.clone(), inner.clone(), 0usize..4).prop_map(|(l, r, k)| {
                        let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][k];
                        Expr::Bin(op, Box::new(l), Box::new(r))
                    }),
                    (inner.clone(), -3i32..4).prop_map(|(b, k)| Expr::Pow(Box::new(b), k)),
                    (inner.clone(), 0usize..5).prop_map(|(e, k)| {
                        let f = [Func1::Sin, Func1::Cos, Func1::Exp, Func1::Tanh, Func1::Abs][k];
                        Expr::Call1(f, Box::new(e))
                    }),
                    (inner.clone(), inner, any::<bool>()).prop_map(|(x, y, m)| {
                        Expr::Call2(if m { Func2::Min } else { Func2::Max }, Box::new(x), Box::new(y))
                    }),
                ]
            })
        }

        proptest! {
            #[test]
            fn print_then_parse_is_identity(e in arb_expr()) {
                let printed = e.to_string();
                prop_assert_eq!(parse_expr(&printed).unwrap(), e);
            }

            #[test]
            fn finer_grids_widen_sampled_range(k in 2usize..40) {
                let f = TimeFn::parse("sin(t) + 0.3*cos(3*t)").unwrap();
                // nested grids: every point of the coarse grid is on the fine one
                let coarse = f.estimate_bounds((-10.0, 10.0), k).unwrap();
                let fine = f.estimate_bounds((-10.0, 10.0), 2 * k - 1).unwrap();
                prop_assert!(fine.inf <= coarse.inf + 1e-15);
                prop_assert!(fine.sup >= coarse.sup - 1e-15);
            }
        }
    }
}
