//! Closed-form velocity profiles in the depth variable `x2`.
//!
//! Grammar: decimal constants, `x2`, `+ - * /`, unary minus, `^` with an
//! integer exponent, and `tanh exp sin cos` applied to a parenthesised
//! argument.

use std::fmt;

use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("unexpected character {found:?} at byte {pos}")]
    UnexpectedChar { pos: usize, found: char },
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unknown identifier {0:?}")]
    UnknownIdent(String),
    #[error("malformed number at byte {0}")]
    BadNumber(usize),
    #[error("exponent must be an integer literal (byte {0})")]
    BadExponent(usize),
    #[error("trailing input at byte {0}")]
    Trailing(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Tanh,
    Exp,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Func::Tanh),
            "exp" => Some(Func::Exp),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Depth,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Apply(Func, Box<Expr>),
}

/// A parsed profile `U(x2)`, kept both as source text and as a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileExpr {
    tree: Expr,
}

impl ProfileExpr {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut parser = Parser { src: text.as_bytes(), pos: 0 };
        let tree = parser.expr()?;
        parser.skip_ws();
        if parser.pos < parser.src.len() {
            return Err(ParseError::Trailing(parser.pos));
        }
        Ok(Self { tree })
    }

    pub fn from_tree(tree: Expr) -> Self {
        Self { tree }
    }

    pub fn tree(&self) -> &Expr {
        &self.tree
    }

    pub fn eval<S: Scalar>(&self, x: S) -> S {
        eval(&self.tree, x)
    }

    /// Symbolic derivative with light algebraic simplification.
    pub fn derivative(&self) -> Self {
        Self { tree: diff(&self.tree) }
    }

    pub fn node_count(&self) -> usize {
        count(&self.tree)
    }
}

impl fmt::Display for ProfileExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, &self.tree, 0)
    }
}

fn count(e: &Expr) -> usize {
    match e {
        Expr::Const(_) | Expr::Depth => 1,
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Apply(_, a) => 1 + count(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + count(a) + count(b),
    }
}

fn eval<S: Scalar>(e: &Expr, x: S) -> S {
    match e {
        Expr::Const(v) => S::from_f64(*v),
        Expr::Depth => x,
        Expr::Neg(a) => -eval(a, x),
        Expr::Add(a, b) => eval(a, x) + eval(b, x),
        Expr::Sub(a, b) => eval(a, x) - eval(b, x),
        Expr::Mul(a, b) => eval(a, x) * eval(b, x),
        Expr::Div(a, b) => eval(a, x) / eval(b, x),
        Expr::Pow(a, n) => eval(a, x).powi(*n),
        Expr::Apply(func, a) => {
            let v = eval(a, x);
            match func {
                Func::Tanh => v.tanh(),
                Func::Exp => v.exp(),
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
            }
        }
    }
}

// ---- simplifying constructors ----

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

fn cnst(v: f64) -> Expr {
    Expr::Const(v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(v) => cnst(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => cnst(x + y),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        (_, Expr::Neg(inner)) => sub(a, (**inner).clone()),
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => cnst(x - y),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => neg(b),
        (_, Expr::Neg(inner)) => add(a, (**inner).clone()),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => cnst(x * y),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => cnst(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ if is_const(&a, -1.0) => neg(b),
        _ if is_const(&b, -1.0) => neg(a),
        (Expr::Neg(x), _) => neg(mul((**x).clone(), b)),
        (_, Expr::Neg(y)) => neg(mul(a, (**y).clone())),
        // keep constants on the left so they fold together
        (_, Expr::Const(_)) => mul(b, a),
        (Expr::Const(x), Expr::Mul(l, r)) => match **l {
            Expr::Const(y) => mul(cnst(x * y), (**r).clone()),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        },
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => cnst(x / y),
        _ if is_const(&a, 0.0) => cnst(0.0),
        _ if is_const(&b, 1.0) => a,
        (_, Expr::Const(y)) if *y != 0.0 => mul(cnst(1.0 / y), a),
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, n: i32) -> Expr {
    match (&a, n) {
        (_, 0) => cnst(1.0),
        (_, 1) => a,
        (Expr::Const(v), _) => cnst(v.powi(n)),
        _ => Expr::Pow(Box::new(a), n),
    }
}

fn apply(func: Func, a: Expr) -> Expr {
    Expr::Apply(func, Box::new(a))
}

fn diff(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) => cnst(0.0),
        Expr::Depth => cnst(1.0),
        Expr::Neg(a) => neg(diff(a)),
        Expr::Add(a, b) => add(diff(a), diff(b)),
        Expr::Sub(a, b) => sub(diff(a), diff(b)),
        Expr::Mul(a, b) => add(mul(diff(a), (**b).clone()), mul((**a).clone(), diff(b))),
        Expr::Div(a, b) => {
            let da = diff(a);
            let db = diff(b);
            if is_const(&db, 0.0) {
                div(da, (**b).clone())
            } else {
                div(sub(mul(da, (**b).clone()), mul((**a).clone(), db)), pow((**b).clone(), 2))
            }
        }
        Expr::Pow(a, n) => mul(mul(cnst(f64::from(*n)), pow((**a).clone(), n - 1)), diff(a)),
        Expr::Apply(func, a) => {
            let inner = (**a).clone();
            let outer = match func {
                Func::Tanh => sub(cnst(1.0), pow(apply(Func::Tanh, inner), 2)),
                Func::Exp => apply(Func::Exp, inner),
                Func::Sin => apply(Func::Cos, inner),
                Func::Cos => neg(apply(Func::Sin, inner)),
            };
            mul(outer, diff(a))
        }
    }
}

// ---- printing ----

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => PREC_SUM,
        Expr::Mul(..) | Expr::Div(..) => PREC_PRODUCT,
        Expr::Neg(_) => PREC_UNARY,
        Expr::Const(v) if v.is_sign_negative() => PREC_UNARY,
        Expr::Pow(..) => PREC_POWER,
        _ => PREC_POWER + 1,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    let own = precedence(e);
    let paren = own < min_prec;
    if paren {
        f.write_str("(")?;
    }
    match e {
        Expr::Const(v) => write!(f, "{v:?}")?,
        Expr::Depth => f.write_str("x2")?,
        Expr::Neg(a) => {
            f.write_str("-")?;
            write_expr(f, a, PREC_UNARY)?;
        }
        Expr::Add(a, b) => {
            write_expr(f, a, PREC_SUM)?;
            f.write_str(" + ")?;
            write_expr(f, b, PREC_SUM + 1)?;
        }
        Expr::Sub(a, b) => {
            write_expr(f, a, PREC_SUM)?;
            f.write_str(" - ")?;
            write_expr(f, b, PREC_SUM + 1)?;
        }
        Expr::Mul(a, b) => {
            write_expr(f, a, PREC_PRODUCT)?;
            f.write_str("*")?;
            write_expr(f, b, PREC_PRODUCT + 1)?;
        }
        Expr::Div(a, b) => {
            write_expr(f, a, PREC_PRODUCT)?;
            f.write_str("/")?;
            write_expr(f, b, PREC_PRODUCT + 1)?;
        }
        Expr::Pow(a, n) => {
            write_expr(f, a, PREC_POWER + 1)?;
            if *n < 0 {
                write!(f, "^({n})")?;
            } else {
                write!(f, "^{n}")?;
            }
        }
        Expr::Apply(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, a, 0)?;
            f.write_str(")")?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

// ---- parsing ----

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, ch: u8) -> Result<(), ParseError> {
        match self.peek() {
            Some(c) if c == ch => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(ParseError::UnexpectedChar { pos: self.pos, found: c as char }),
            None => Err(ParseError::UnexpectedEnd),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek() == Some(b'+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let start = self.pos;
        let wrapped = self.peek() == Some(b'(');
        if wrapped {
            self.pos += 1;
        }
        let negative = self.peek() == Some(b'-');
        if negative {
            self.pos += 1;
        }
        self.skip_ws();
        let digits_from = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if digits_from == self.pos {
            return Err(ParseError::BadExponent(start));
        }
        let text = std::str::from_utf8(&self.src[digits_from..self.pos]).expect("ascii digits");
        let magnitude: i32 = text.parse().map_err(|_| ParseError::BadExponent(start))?;
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'.' | b'e' | b'E') {
            return Err(ParseError::BadExponent(start));
        }
        if wrapped {
            self.expect(b')')?;
        }
        let n = if negative { -magnitude } else { magnitude };
        Ok(Expr::Pow(Box::new(base), n))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(ParseError::UnexpectedEnd),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii ident");
                if ident == "x2" {
                    return Ok(Expr::Depth);
                }
                let func = Func::from_name(ident).ok_or_else(|| ParseError::UnknownIdent(ident.to_string()))?;
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Apply(func, Box::new(arg)))
            }
            Some(c) => Err(ParseError::UnexpectedChar { pos: self.pos, found: c as char }),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let from = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - from
        };
        let mut n = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(ParseError::BadNumber(start));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                return Err(ParseError::BadNumber(start));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>().map(Expr::Const).map_err(|_| ParseError::BadNumber(start))
    }
}
