//! Dense univariate polynomials over ℚ.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{parse_rational, to_f64, ExactRational};

/// Largest degree `iterate` will build unless told otherwise.
pub const DEFAULT_DEGREE_CAP: usize = 8192;

/// Polynomial with rational coefficients `a_0 .. a_d`, stored without
/// trailing zeros. The zero polynomial has no coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    coeffs: Vec<ExactRational>,
}

/// `scale * (sum coeffs[i] x^i)` with the integer coefficients having
/// content 1 and a positive leading coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimitiveIntPoly {
    pub coeffs: Vec<BigInt>,
    pub scale: ExactRational,
}

impl PrimitiveIntPoly {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> &BigInt {
        self.coeffs.last().expect("primitive polynomial is nonzero")
    }

    /// The integer polynomial as a `Poly` (scale dropped).
    pub fn to_poly(&self) -> Poly {
        Poly::new(self.coeffs.iter().cloned().map(BigRational::from_integer).collect())
    }

    /// `scale * F`, which reproduces the polynomial this came from.
    pub fn reconstruct(&self) -> Poly {
        self.to_poly().scale(&self.scale)
    }
}

impl Poly {
    pub fn new(mut coeffs: Vec<ExactRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| BigRational::from_integer(c.into())).collect())
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: ExactRational) -> Self {
        Poly::new(vec![c])
    }

    /// The identity map `x`.
    pub fn x() -> Self {
        Poly::from_i64(&[0, 1])
    }

    /// `x^d`
    pub fn power_map(d: usize) -> Self {
        let mut c = vec![ExactRational::zero(); d + 1];
        c[d] = ExactRational::one();
        Poly { coeffs: c }
    }

    pub fn coeffs(&self) -> &[ExactRational] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> ExactRational {
        self.coeffs.get(i).cloned().unwrap_or_else(ExactRational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Option<&ExactRational> {
        self.coeffs.last()
    }

    pub fn is_monic(&self) -> bool {
        self.leading().is_some_and(One::is_one)
    }

    pub fn has_integer_coeffs(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integer())
    }

    /// True for `±x^d` with `d >= 1`.
    pub fn is_power_map(&self) -> bool {
        self.degree() >= 1
            && self.coeffs[..self.degree()].iter().all(Zero::is_zero)
            && self.leading().is_some_and(|c| c.abs().is_one())
    }

    pub fn require_degree(&self, needed: usize) -> Result<usize> {
        let d = self.degree();
        if self.is_zero() || d < needed {
            return Err(Error::DegreeTooSmall { needed, got: d });
        }
        Ok(d)
    }

    pub fn scale(&self, k: &ExactRational) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn sub_constant(&self, c: &ExactRational) -> Poly {
        let mut coeffs = self.coeffs.clone();
        if coeffs.is_empty() {
            coeffs.push(ExactRational::zero());
        }
        coeffs[0] -= c;
        Poly::new(coeffs)
    }

    /// Product, computed over ℤ after clearing denominators.
    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let (a, da) = self.cleared();
        let (b, db) = other.cleared();
        let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                if !y.is_zero() {
                    out[i + j] += x * y;
                }
            }
        }
        let den = da * db;
        let coeffs = if den.is_one() {
            out.into_iter().map(BigRational::from_integer).collect()
        } else {
            out.into_iter().map(|c| BigRational::new(c, den.clone())).collect()
        };
        Poly::new(coeffs)
    }

    /// Integer numerators over the lcm of the denominators.
    fn cleared(&self) -> (Vec<BigInt>, BigInt) {
        let l = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints = self
            .coeffs
            .iter()
            .map(|c| c.numer() * (&l / c.denom()))
            .collect();
        (ints, l)
    }

    /// `self(inner(x))` by Horner's scheme.
    pub fn compose(&self, inner: &Poly) -> Poly {
        let mut acc = Poly::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(inner).add(&Poly::constant(c.clone()));
        }
        acc
    }

    /// `n`-fold composition; `phi^0 = x`. Fails if `d^n` exceeds `cap`.
    pub fn iterate_capped(&self, n: u32, cap: usize) -> Result<Poly> {
        let d = self.require_degree(1)?;
        check_degree(d, n, cap)?;
        let mut acc = Poly::x();
        for _ in 0..n {
            acc = self.compose(&acc);
        }
        Ok(acc)
    }

    pub fn iterate(&self, n: u32) -> Result<Poly> {
        self.iterate_capped(n, DEFAULT_DEGREE_CAP)
    }

    /// Exact Horner evaluation.
    pub fn eval(&self, q: &ExactRational) -> ExactRational {
        let mut acc = ExactRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * q + c;
        }
        acc
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.to_complex_coeffs()
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn to_complex_coeffs(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|c| Complex64::new(to_f64(c), 0.0)).collect()
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    pub fn to_primitive(&self) -> Result<PrimitiveIntPoly> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let (ints, l) = self.cleared();
        let mut g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        if ints.last().unwrap().is_negative() {
            g = -g;
        }
        let coeffs: Vec<BigInt> = ints.iter().map(|c| c / &g).collect();
        Ok(PrimitiveIntPoly {
            coeffs,
            scale: BigRational::new(g, l),
        })
    }

    /// Parse a polynomial in `x` such as `"x^2 - 1/2"` or `"3x^3/4 + 2*x"`,
    /// or a JSON array of coefficients (low to high) such as `["-1/2", 0, 1]`.
    pub fn parse(s: &str) -> Result<Poly> {
        let t = s.trim();
        if t.starts_with('[') {
            return Poly::from_json(t);
        }
        Parser::new(t).parse()
    }

    pub fn from_json(s: &str) -> Result<Poly> {
        let v: Vec<serde_json::Value> =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("coefficient array: {e}")))?;
        let coeffs = v
            .iter()
            .map(|c| match c {
                serde_json::Value::String(s) => parse_rational(s),
                serde_json::Value::Number(n) => parse_rational(&n.to_string()),
                other => Err(Error::Parse(format!("bad coefficient {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Poly::new(coeffs))
    }
}

pub(crate) fn check_degree(d: usize, n: u32, cap: usize) -> Result<u128> {
    let degree = (d as u128).checked_pow(n).unwrap_or(u128::MAX);
    if degree > cap as u128 {
        return Err(Error::DegreeCapExceeded { degree, cap });
    }
    Ok(degree)
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            match (i, a.is_one()) {
                (0, _) => write!(f, "{a}")?,
                (_, true) => {}
                (_, false) => write!(f, "{a}*")?,
            }
            match i {
                0 => {}
                1 => write!(f, "x")?,
                _ => write!(f, "x^{i}")?,
            }
        }
        Ok(())
    }
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.coeffs.iter().map(|c| c.to_string()))
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        Poly::from_json(&v.to_string()).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(String),
    X,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    src: String,
}

impl Parser {
    fn new(src: &str) -> Self {
        Parser {
            tokens: Vec::new(),
            pos: 0,
            src: src.to_string(),
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{:?}: {msg}", self.src))
    }

    fn lex(&mut self) -> Result<()> {
        let chars: Vec<char> = self.src.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match c {
                ' ' | '\t' => {}
                'x' | 'X' | 'z' => self.tokens.push(Token::X),
                '+' => self.tokens.push(Token::Plus),
                '-' | '−' => self.tokens.push(Token::Minus),
                '*' => self.tokens.push(Token::Star),
                '/' => self.tokens.push(Token::Slash),
                '^' => self.tokens.push(Token::Caret),
                d if d.is_ascii_digit() || d == '.' => {
                    let start = i;
                    while i + 1 < chars.len() && (chars[i + 1].is_ascii_digit() || chars[i + 1] == '.') {
                        i += 1;
                    }
                    self.tokens.push(Token::Num(chars[start..=i].iter().collect()));
                }
                other => return Err(self.err(&format!("unexpected character {other:?}"))),
            }
            i += 1;
        }
        if self.tokens.is_empty() {
            return Err(self.err("empty polynomial"));
        }
        Ok(())
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn parse(mut self) -> Result<Poly> {
        self.lex()?;
        let mut acc = Poly::zero();
        let mut first = true;
        while self.peek().is_some() {
            let negative = match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    false
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    true
                }
                _ if first => false,
                _ => return Err(self.err("expected '+' or '-' between terms")),
            };
            first = false;
            let (mut coeff, exp) = self.term()?;
            if negative {
                coeff = -coeff;
            }
            let mut c = vec![ExactRational::zero(); exp + 1];
            c[exp] = coeff;
            acc = acc.add(&Poly::new(c));
        }
        Ok(acc)
    }

    fn number(&mut self) -> Result<ExactRational> {
        match self.next() {
            Some(Token::Num(s)) => parse_rational(&s),
            _ => Err(self.err("expected a number")),
        }
    }

    /// term := factor (('*')? factor | '/' number)*
    fn term(&mut self) -> Result<(ExactRational, usize)> {
        let mut coeff = ExactRational::one();
        let mut exp = 0usize;
        let mut seen = false;
        loop {
            match self.peek() {
                Some(Token::Num(_)) => {
                    coeff *= self.number()?;
                    seen = true;
                }
                Some(Token::X) => {
                    self.pos += 1;
                    let mut e = 1usize;
                    if self.peek() == Some(&Token::Caret) {
                        self.pos += 1;
                        match self.next() {
                            Some(Token::Num(s)) => {
                                e = s.parse().map_err(|_| self.err("bad exponent"))?;
                            }
                            _ => return Err(self.err("expected exponent after '^'")),
                        }
                    }
                    exp += e;
                    seen = true;
                }
                Some(Token::Star) if seen => {
                    self.pos += 1;
                    if !matches!(self.peek(), Some(Token::Num(_)) | Some(Token::X)) {
                        return Err(self.err("dangling '*'"));
                    }
                }
                Some(Token::Slash) if seen => {
                    self.pos += 1;
                    let d = self.number()?;
                    if d.is_zero() {
                        return Err(self.err("division by zero"));
                    }
                    coeff /= d;
                }
                _ => break,
            }
        }
        if !seen {
            return Err(self.err("expected a term"));
        }
        Ok((coeff, exp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Poly {
        Poly::parse(s).unwrap()
    }

    fn q(s: &str) -> ExactRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn iterate_examples() {
        assert_eq!(p("x^2 + 1").iterate(0).unwrap(), Poly::x());
        assert_eq!(p("x^2").iterate(3).unwrap(), Poly::power_map(8));
        // (x^2 - 2)^2 - 2 = x^4 - 4x^2 + 2
        assert_eq!(p("x^2 - 2").iterate(2).unwrap(), Poly::from_i64(&[2, 0, -4, 0, 1]));
    }

    #[test]
    fn iterate_cap() {
        let err = p("x^2 + 1").iterate_capped(4, 10).unwrap_err();
        assert!(matches!(err, Error::DegreeCapExceeded { degree: 16, cap: 10 }));
        assert!(err.to_string().contains("10"));
        assert!(p("x^3").iterate(9).is_err());
    }

    #[test]
    fn eval_examples() {
        assert_eq!(p("x^2 + 1").eval(&q("1/2")), q("5/4"));
        assert_eq!(p("x^2 - 2").eval(&q("2")), q("2"));
        assert_eq!(p("x^3").eval(&q("-1")), q("-1"));
    }

    #[test]
    fn primitive_examples() {
        let a = p("x/2 + 1/3").to_primitive().unwrap();
        assert_eq!(a.coeffs, vec![BigInt::from(2), BigInt::from(3)]);
        assert_eq!(a.scale, q("1/6"));
        let b = p("2x^2 + 4").to_primitive().unwrap();
        assert_eq!(b.coeffs, vec![BigInt::from(2), BigInt::from(0), BigInt::from(1)]);
        assert_eq!(b.scale, q("2"));
        let c = p("x^2 - 2").to_primitive().unwrap();
        assert_eq!(c.coeffs, vec![BigInt::from(-2), BigInt::from(0), BigInt::from(1)]);
        assert_eq!(c.scale, q("1"));
        let d = p("-3x^2 + 6").to_primitive().unwrap();
        assert_eq!(d.coeffs, vec![BigInt::from(-2), BigInt::from(0), BigInt::from(1)]);
        assert_eq!(d.scale, q("-3"));
        assert!(matches!(Poly::zero().to_primitive(), Err(Error::ZeroPolynomial)));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(p("x^2 - 1/2"), Poly::new(vec![q("-1/2"), q("0"), q("1")]));
        assert_eq!(p("3x^3/4 + 2*x"), Poly::new(vec![q("0"), q("2"), q("0"), q("3/4")]));
        assert_eq!(p("-x + 1"), Poly::from_i64(&[1, -1]));
        assert_eq!(p("1/2 x^2"), Poly::new(vec![q("0"), q("0"), q("1/2")]));
        assert_eq!(p("x^2 + x^2"), Poly::from_i64(&[0, 0, 2]));
        assert_eq!(p("[\"-1/2\", 0, 1]"), p("x^2 - 1/2"));
        assert_eq!(p("0"), Poly::zero());
        for bad in ["", "x^", "x +", "2 3 +", "y^2", "x/0", "x^2 ** 3"] {
            assert!(Poly::parse(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["x^2 - 1/2", "-x^3 + 2*x - 7", "3/4*x^5 + x", "x", "5", "0"] {
            let a = p(s);
            assert_eq!(a.to_string(), s);
            assert_eq!(p(&a.to_string()), a);
        }
    }

    #[test]
    fn serde_round_trip() {
        let a = p("x^3/7 - 2x + 5");
        let js = serde_json::to_string(&a).unwrap();
        assert_eq!(js, r#"["5","-2","0","1/7"]"#);
        let b: Poly = serde_json::from_str(&js).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn power_map_detection() {
        assert!(p("x^3").is_power_map());
        assert!(p("-x^2").is_power_map());
        assert!(!p("x^2 + 1").is_power_map());
        assert!(!p("2x^2").is_power_map());
    }
}
