//! Weight-perturbation expressions.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' unsigned-int)?
//! base   := number | ident | func '(' expr ')' | '(' expr ')'
//! ident  := z | zbar | t | tbar | pi
//! func   := exp | log | sin | cos | re | im | abs2
//! ```
//!
//! Sums and products are stored as flat n-ary nodes. Tree depth counts
//! internal nodes along the longest path; leaves have depth 0.

use crate::error::{Error, Result};
use crate::jet::Jet;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Z,
    Zbar,
    T,
    Tbar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Re,
    Im,
    Abs2,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "re" => Func::Re,
            "im" => Func::Im,
            "abs2" => Func::Abs2,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Re => "re",
            Func::Im => "im",
            Func::Abs2 => "abs2",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Pi,
    /// Terms with their signs (`true` = subtracted).
    Sum(Vec<(bool, Expr)>),
    /// Factors with their operators (`true` = divided).
    Product(Vec<(bool, Expr)>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
    Neg(Box<Expr>),
}

/// Values an expression can be evaluated over.
pub trait Scalar: Clone {
    fn num(&self, c: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn apply(&self, f: Func) -> Self;
    fn powi(&self, k: u32) -> Self;
}

impl Scalar for C64 {
    fn num(&self, c: f64) -> Self {
        C64::new(c, 0.0)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn apply(&self, f: Func) -> Self {
        match f {
            Func::Exp => self.exp(),
            Func::Log => self.ln(),
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Re => C64::new(self.re, 0.0),
            Func::Im => C64::new(self.im, 0.0),
            Func::Abs2 => C64::new(self.norm_sqr(), 0.0),
        }
    }
    fn powi(&self, k: u32) -> Self {
        self.powu(k)
    }
}

impl Scalar for Jet {
    fn num(&self, c: f64) -> Self {
        Jet::real(self.nv, c)
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn sub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn mul(&self, o: &Self) -> Self {
        *self * *o
    }
    fn div(&self, o: &Self) -> Self {
        *self / *o
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn apply(&self, f: Func) -> Self {
        match f {
            Func::Exp => self.exp(),
            Func::Log => self.ln(),
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Re => self.re(),
            Func::Im => self.im(),
            Func::Abs2 => self.abs2(),
        }
    }
    fn powi(&self, k: u32) -> Self {
        Jet::powi(self, k)
    }
}

/// Variable bindings for evaluation. `zbar` and `tbar` are bound separately so
/// jets can carry their own conjugates.
pub struct Bindings<S> {
    pub z: S,
    pub zbar: S,
    pub t: S,
    pub tbar: S,
}

impl Bindings<C64> {
    pub fn at(z: C64, t: C64) -> Self {
        Bindings { z, zbar: z.conj(), t, tbar: t.conj() }
    }
}

impl Bindings<Jet> {
    pub fn jets(z: Jet, t: Jet) -> Self {
        Bindings { zbar: z.conj(), tbar: t.conj(), z, t }
    }
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Pi => 0,
            Expr::Sum(items) | Expr::Product(items) => {
                1 + items.iter().map(|(_, e)| e.depth()).max().unwrap_or(0)
            }
            Expr::Pow(b, _) | Expr::Call(_, b) | Expr::Neg(b) => 1 + b.depth(),
        }
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, Expr::Num(c) if *c == 0.0)
    }

    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Var(w) => *w == v,
            Expr::Num(_) | Expr::Pi => false,
            Expr::Sum(items) | Expr::Product(items) => items.iter().any(|(_, e)| e.uses(v)),
            Expr::Pow(b, _) | Expr::Call(_, b) | Expr::Neg(b) => b.uses(v),
        }
    }

    pub fn eval<S: Scalar>(&self, b: &Bindings<S>) -> S {
        match self {
            Expr::Num(c) => b.z.num(*c),
            Expr::Pi => b.z.num(PI),
            Expr::Var(Var::Z) => b.z.clone(),
            Expr::Var(Var::Zbar) => b.zbar.clone(),
            Expr::Var(Var::T) => b.t.clone(),
            Expr::Var(Var::Tbar) => b.tbar.clone(),
            Expr::Sum(items) => {
                let mut acc = b.z.num(0.0);
                for (minus, e) in items {
                    let v = e.eval(b);
                    acc = if *minus { acc.sub(&v) } else { acc.add(&v) };
                }
                acc
            }
            Expr::Product(items) => {
                let mut acc = b.z.num(1.0);
                for (divide, e) in items {
                    let v = e.eval(b);
                    acc = if *divide { acc.div(&v) } else { acc.mul(&v) };
                }
                acc
            }
            Expr::Pow(base, k) => base.eval(b).powi(*k),
            Expr::Call(f, arg) => arg.eval(b).apply(*f),
            Expr::Neg(e) => e.eval(b).neg(),
        }
    }

    pub fn eval_at(&self, z: C64, t: C64) -> C64 {
        self.eval(&Bindings::at(z, t))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => write!(
                f,
                "{}",
                match v {
                    Var::Z => "z",
                    Var::Zbar => "zbar",
                    Var::T => "t",
                    Var::Tbar => "tbar",
                }
            ),
            Expr::Sum(items) => {
                write!(f, "(")?;
                for (i, (minus, e)) in items.iter().enumerate() {
                    if i > 0 || *minus {
                        write!(f, "{}", if *minus { "-" } else { "+" })?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            Expr::Product(items) => {
                for (i, (div, e)) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{}", if *div { "/" } else { "*" })?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
            Expr::Pow(b, k) => write!(f, "({b})^{k}"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Neg(e) => write!(f, "-({e})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i].1 == 'e' || chars[i].1 == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j].1 == '+' || chars[j].1 == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    while j < chars.len() && chars[j].1.is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let end = if i < chars.len() { chars[i].0 } else { src.len() };
            let text = &src[chars[start].0..end];
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                position: pos,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((Tok::Num(v), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let end = if i < chars.len() { chars[i].0 } else { src.len() };
            out.push((Tok::Ident(src[chars[start].0..end].to_string()), pos));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), pos));
            i += 1;
        } else {
            return Err(Error::Syntax { position: pos, message: format!("unexpected character '{c}'") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Syntax { position: self.here(), message: format!("expected '{c}'") })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut items = vec![(false, self.term()?)];
        loop {
            if self.eat('+') {
                items.push((false, self.term()?));
            } else if self.eat('-') {
                items.push((true, self.term()?));
            } else {
                break;
            }
        }
        Ok(if items.len() == 1 { items.pop().unwrap().1 } else { Expr::Sum(items) })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut items = vec![(false, self.factor()?)];
        loop {
            if self.eat('*') {
                items.push((false, self.factor()?));
            } else if self.eat('/') {
                items.push((true, self.factor()?));
            } else {
                break;
            }
        }
        Ok(if items.len() == 1 { items.pop().unwrap().1 } else { Expr::Product(items) })
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.eat('^') {
            let p = self.here();
            match self.peek().cloned() {
                Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                    self.pos += 1;
                    Ok(Expr::Pow(Box::new(base), v as u32))
                }
                _ => Err(Error::Syntax { position: p, message: "exponent must be an unsigned integer".into() }),
            }
        } else {
            Ok(base)
        }
    }

    fn base(&mut self) -> Result<Expr> {
        let p = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(f) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "z" => Ok(Expr::Var(Var::Z)),
                    "zbar" => Ok(Expr::Var(Var::Zbar)),
                    "t" => Ok(Expr::Var(Var::T)),
                    "tbar" => Ok(Expr::Var(Var::Tbar)),
                    "pi" => Ok(Expr::Pi),
                    _ => Err(Error::UnknownIdentifier { name, position: p }),
                }
            }
            Some(Tok::Sym(c)) => Err(Error::Syntax { position: p, message: format!("unexpected '{c}'") }),
            None => Err(Error::Syntax { position: p, message: "unexpected end of input".into() }),
        }
    }
}

pub fn parse_weight_expression(text: &str) -> Result<Expr> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len() };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Syntax { position: p.here(), message: "trailing input".into() });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_constant() {
        let e = parse_weight_expression("0").unwrap();
        assert!(e.is_zero_constant());
        assert_eq!(e.depth(), 0);
    }

    #[test]
    fn modulus_squared() {
        let e = parse_weight_expression("re(z)^2+im(z)^2").unwrap();
        for &(x, y) in &[(0.3, -1.2), (2.0, 0.5), (0.0, 0.0)] {
            let z = C64::new(x, y);
            let v = e.eval_at(z, C64::new(0.1, 1.0));
            assert!((v.re - z.norm_sqr()).abs() < 1e-14 && v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_cancels() {
        let e = parse_weight_expression("exp(-abs2(z-0.5*t))").unwrap();
        let v = e.eval_at(C64::new(0.5, 0.0), C64::new(1.0, 0.0));
        assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn depth_of_spec_example() {
        let e = parse_weight_expression("0.1*cos(2*pi*re(z))*im(t)").unwrap();
        assert_eq!(e.depth(), 4);
    }

    #[test]
    fn errors_carry_positions() {
        match parse_weight_expression("1 + foo") {
            Err(Error::UnknownIdentifier { name, position }) => {
                assert_eq!(name, "foo");
                assert_eq!(position, 4);
            }
            other => panic!("{other:?}"),
        }
        match parse_weight_expression("(1 + z") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 6),
            other => panic!("{other:?}"),
        }
        assert!(parse_weight_expression("z^1.5").is_err());
        assert!(parse_weight_expression("2 z").is_err());
    }

    #[test]
    fn scientific_literals() {
        let e = parse_weight_expression("1e-3*t + 2.5E2").unwrap();
        let v = e.eval_at(C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        assert!((v.re - 250.001).abs() < 1e-12);
    }
}
