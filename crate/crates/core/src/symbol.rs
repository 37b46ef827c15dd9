//! Symbols of Toeplitz operators and a small expression language for them.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' integer)?
//! primary := number | 'i' | 'z' | 'conj' '(' 'z' ')' | 'abs2' '(' 'z' ')'
//!          | 'exp' '(' expr ')' | 'indicator' '(' expr ',' expr ')' | '(' expr ')'
//! ```
//!
//! `indicator(c, r)` is the characteristic function of the open disc `B(c, r)`;
//! both arguments must be constant expressions.

use std::fmt;

use crate::error::{FockError, Result};
use crate::linalg::{C64, ONE, ZERO};

/// Angular bandwidth assumed for symbols with no finite trigonometric degree.
pub const DEFAULT_BANDWIDTH: usize = 64;

/// A function on the plane used as a Toeplitz symbol.
pub trait Symbol: Sync {
    fn eval(&self, z: C64) -> C64;

    /// True when `eval` depends on `|z|` only.
    fn is_radial(&self) -> bool {
        false
    }

    /// Radii of circles about the origin where the symbol may jump.
    fn radial_breaks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// A disc outside of which the symbol vanishes, if known.
    fn support(&self) -> Option<(C64, f64)> {
        None
    }

    /// Upper bound on the angular Fourier degree of `θ ↦ f(re^{iθ})`.
    fn angular_bandwidth(&self) -> usize {
        DEFAULT_BANDWIDTH
    }
}

/// Wraps a closure as a general (non-radial) symbol.
pub struct FnSymbol<F>(pub F);

impl<F: Fn(C64) -> C64 + Sync> Symbol for FnSymbol<F> {
    fn eval(&self, z: C64) -> C64 {
        (self.0)(z)
    }
}

/// Wraps a closure of the radius as a radial symbol with known breakpoints.
pub struct RadialSymbol<F> {
    pub profile: F,
    pub breaks: Vec<f64>,
}

impl<F: Fn(f64) -> C64 + Sync> Symbol for RadialSymbol<F> {
    fn eval(&self, z: C64) -> C64 {
        (self.profile)(z.norm())
    }

    fn is_radial(&self) -> bool {
        true
    }

    fn radial_breaks(&self) -> Vec<f64> {
        self.breaks.clone()
    }

    fn angular_bandwidth(&self) -> usize {
        0
    }
}

/// Characteristic function of the open disc `B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indicator {
    pub center: C64,
    pub radius: f64,
}

impl Indicator {
    pub fn new(center: C64, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn unit_disc() -> Self {
        Self::new(ZERO, 1.0)
    }
}

impl Symbol for Indicator {
    fn eval(&self, z: C64) -> C64 {
        if (z - self.center).norm() < self.radius {
            ONE
        } else {
            ZERO
        }
    }

    fn is_radial(&self) -> bool {
        self.center == ZERO
    }

    fn radial_breaks(&self) -> Vec<f64> {
        if self.center == ZERO {
            vec![self.radius]
        } else {
            Vec::new()
        }
    }

    fn support(&self) -> Option<(C64, f64)> {
        Some((self.center, self.radius))
    }

    fn angular_bandwidth(&self) -> usize {
        if self.center == ZERO {
            0
        } else {
            DEFAULT_BANDWIDTH
        }
    }
}

/// Constant symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub C64);

impl Symbol for Constant {
    fn eval(&self, _z: C64) -> C64 {
        self.0
    }

    fn is_radial(&self) -> bool {
        true
    }

    fn angular_bandwidth(&self) -> usize {
        0
    }
}

/// Parsed symbol expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(C64),
    Z,
    ConjZ,
    Abs2,
    Exp(Box<Expr>),
    Indicator(Indicator),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(parse_err(format!("unexpected trailing input in {src:?}")));
        }
        Ok(e)
    }

    fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Z | Expr::ConjZ | Expr::Abs2 | Expr::Indicator(_) => false,
            Expr::Exp(a) | Expr::Neg(a) | Expr::Pow(a, _) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    fn radial(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Abs2 => true,
            Expr::Z | Expr::ConjZ => false,
            Expr::Indicator(ind) => ind.is_radial(),
            Expr::Exp(a) | Expr::Neg(a) | Expr::Pow(a, _) => a.radial(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.radial() && b.radial(),
        }
    }

    fn collect_breaks(&self, out: &mut Vec<f64>) {
        match self {
            Expr::Indicator(ind) => out.extend(ind.radial_breaks()),
            Expr::Exp(a) | Expr::Neg(a) | Expr::Pow(a, _) => a.collect_breaks(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_breaks(out);
                b.collect_breaks(out);
            }
            _ => {}
        }
    }

    fn bandwidth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Abs2 => 0,
            Expr::Z | Expr::ConjZ => 1,
            Expr::Indicator(ind) => ind.angular_bandwidth(),
            Expr::Neg(a) => a.bandwidth(),
            Expr::Pow(a, n) => a.bandwidth().saturating_mul(*n as usize).min(DEFAULT_BANDWIDTH),
            Expr::Exp(a) => {
                if a.bandwidth() == 0 {
                    0
                } else {
                    DEFAULT_BANDWIDTH
                }
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => a.bandwidth().max(b.bandwidth()),
            Expr::Mul(a, b) => (a.bandwidth() + b.bandwidth()).min(DEFAULT_BANDWIDTH),
            Expr::Div(a, b) => {
                if b.bandwidth() == 0 {
                    a.bandwidth()
                } else {
                    DEFAULT_BANDWIDTH
                }
            }
        }
    }

    fn disc(&self) -> Option<(C64, f64)> {
        match self {
            Expr::Indicator(ind) => ind.support(),
            Expr::Neg(a) | Expr::Pow(a, _) => a.disc(),
            Expr::Mul(a, b) => match (a.disc(), b.disc()) {
                (Some(x), Some(y)) => Some(if x.1 <= y.1 { x } else { y }),
                (x, y) => x.or(y),
            },
            Expr::Div(a, _) => a.disc(),
            _ => None,
        }
    }
}

impl Symbol for Expr {
    fn eval(&self, z: C64) -> C64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Z => z,
            Expr::ConjZ => z.conj(),
            Expr::Abs2 => C64::new(z.norm_sqr(), 0.0),
            Expr::Exp(a) => a.eval(z).exp(),
            Expr::Indicator(ind) => ind.eval(z),
            Expr::Neg(a) => -a.eval(z),
            Expr::Add(a, b) => a.eval(z) + b.eval(z),
            Expr::Sub(a, b) => a.eval(z) - b.eval(z),
            Expr::Mul(a, b) => a.eval(z) * b.eval(z),
            Expr::Div(a, b) => a.eval(z) / b.eval(z),
            Expr::Pow(a, n) => a.eval(z).powu(*n),
        }
    }

    fn is_radial(&self) -> bool {
        self.radial()
    }

    fn radial_breaks(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.collect_breaks(&mut v);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    }

    fn support(&self) -> Option<(C64, f64)> {
        self.disc()
    }

    fn angular_bandwidth(&self) -> usize {
        self.bandwidth()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if c.im == 0.0 => write!(f, "{}", c.re),
            Expr::Const(c) => write!(f, "({}+{}*i)", c.re, c.im),
            Expr::Z => write!(f, "z"),
            Expr::ConjZ => write!(f, "conj(z)"),
            Expr::Abs2 => write!(f, "abs2(z)"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Indicator(ind) => write!(
                f,
                "indicator({}, {})",
                Expr::Const(ind.center),
                ind.radius
            ),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, n) => write!(f, "({a})^{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn parse_err(msg: impl Into<String>) -> FockError {
    FockError::Parse(msg.into())
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| parse_err(format!("bad number {s:?}")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(parse_err(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
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
            Err(parse_err(format!("expected {c:?} at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.primary()?;
        if self.eat('^') {
            match self.tokens.get(self.pos) {
                Some(Tok::Num(n)) if n.fract() == 0.0 && *n >= 0.0 && *n <= 64.0 => {
                    let n = *n as u32;
                    self.pos += 1;
                    return Ok(Expr::Pow(Box::new(base), n));
                }
                _ => return Err(parse_err("exponent must be an integer in 0..=64")),
            }
        }
        Ok(base)
    }

    fn z_argument(&mut self, name: &str) -> Result<()> {
        self.expect('(')?;
        match self.tokens.get(self.pos) {
            Some(Tok::Ident(s)) if s == "z" => self.pos += 1,
            _ => return Err(parse_err(format!("{name}() takes the variable z"))),
        }
        self.expect(')')
    }

    fn constant(&mut self, what: &str) -> Result<C64> {
        let e = self.expr()?;
        if !e.is_constant() {
            return Err(parse_err(format!("{what} must be a constant expression")));
        }
        Ok(e.eval(ZERO))
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return Err(parse_err("unexpected end of expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Const(C64::new(v, 0.0))),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Sym(c) => Err(parse_err(format!("unexpected {c:?}"))),
            Tok::Ident(name) => match name.as_str() {
                "i" => Ok(Expr::Const(C64::new(0.0, 1.0))),
                "z" => Ok(Expr::Z),
                "conj" => self.z_argument("conj").map(|_| Expr::ConjZ),
                "abs2" => self.z_argument("abs2").map(|_| Expr::Abs2),
                "exp" => {
                    self.expect('(')?;
                    let e = self.expr()?;
                    self.expect(')')?;
                    Ok(Expr::Exp(Box::new(e)))
                }
                "indicator" => {
                    self.expect('(')?;
                    let center = self.constant("indicator center")?;
                    self.expect(',')?;
                    let r = self.constant("indicator radius")?;
                    self.expect(')')?;
                    if r.im != 0.0 || !(r.re > 0.0) || !r.re.is_finite() {
                        return Err(parse_err("indicator radius must be a positive real"));
                    }
                    Ok(Expr::Indicator(Indicator::new(center, r.re)))
                }
                other => Err(parse_err(format!("unknown identifier {other:?}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("2*z + conj(z)^2 - abs2(z)/4").unwrap();
        let z = c(1.0, 2.0);
        let want = z * 2.0 + z.conj() * z.conj() - c(z.norm_sqr() / 4.0, 0.0);
        assert!((e.eval(z) - want).norm() < 1e-14);
        assert!(!e.is_radial());
        assert_eq!(e.angular_bandwidth(), 2);
    }

    #[test]
    fn gaussian_is_radial() {
        let e = Expr::parse("exp(-abs2(z))").unwrap();
        assert!(e.is_radial());
        assert!((e.eval(c(1.0, 1.0)).re - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn indicator_breaks_and_support() {
        let e = Expr::parse("3 * indicator(0, 1.5)").unwrap();
        assert!(e.is_radial());
        assert_eq!(e.radial_breaks(), vec![1.5]);
        assert_eq!(e.support(), Some((ZERO, 1.5)));
        let off = Expr::parse("indicator(1 + 2*i, 0.5)").unwrap();
        assert!(!off.is_radial());
        assert_eq!(off.eval(c(1.0, 2.2)), ONE);
        assert_eq!(off.eval(c(0.0, 0.0)), ZERO);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in ["", "z +", "foo(z)", "conj(2)", "indicator(z, 1)", "z^1.5", "indicator(0, -1)", "(z"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for src in ["z*conj(z) - 1", "exp(-abs2(z)/2)", "indicator(0.5, 2) * z^3"] {
            let e = Expr::parse(src).unwrap();
            let again = Expr::parse(&e.to_string()).unwrap();
            for z in [c(0.3, -0.2), c(1.1, 0.7)] {
                assert!((e.eval(z) - again.eval(z)).norm() < 1e-14);
            }
        }
    }
}
