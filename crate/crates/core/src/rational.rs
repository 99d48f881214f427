//! Exact rationals, primes, places of ℚ and p-adic valuations.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Arbitrary-precision rational number, always stored in lowest terms with a
/// positive denominator.
pub type ExactRational = BigRational;

/// Default trial-division bound used when extracting support primes.
pub const DEFAULT_PRIME_BOUND: u64 = 1_000_000;

/// A rational prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prime(u64);

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if is_prime_u64(p) {
            Ok(Prime(p))
        } else {
            Err(Error::NotPrime(p))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn ln(self) -> f64 {
        (self.0 as f64).ln()
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Prime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u64(self.0)
    }
}

impl<'de> Deserialize<'de> for Prime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let p = u64::deserialize(d)?;
        Prime::new(p).map_err(serde::de::Error::custom)
    }
}

/// A place of ℚ. Every place has local degree weight 1.
///
/// Ordering puts the archimedean place first, then primes ascending.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Place {
    Archimedean,
    Finite(Prime),
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Archimedean => write!(f, "inf"),
            Place::Finite(p) => write!(f, "{p}"),
        }
    }
}

/// p-adic valuation of a nonzero rational: the exponent of `p` in `q`.
pub fn valuation(q: &ExactRational, p: Prime) -> Result<i64> {
    if q.is_zero() {
        return Err(Error::ZeroValuation);
    }
    Ok(int_valuation(q.numer(), p) - int_valuation(q.denom(), p))
}

/// Valuation of a nonzero integer.
pub(crate) fn int_valuation(n: &BigInt, p: Prime) -> i64 {
    debug_assert!(!n.is_zero());
    let p = BigUint::from(p.get());
    let mut m = n.magnitude().clone();
    let mut v = 0;
    loop {
        let (quot, rem) = m.div_rem(&p);
        if !rem.is_zero() {
            return v;
        }
        m = quot;
        v += 1;
    }
}

/// `ln |q|_v` for a nonzero rational `q` at the place `v`.
pub fn log_abs(q: &ExactRational, place: Place) -> Result<f64> {
    if q.is_zero() {
        return Err(Error::ZeroValuation);
    }
    match place {
        Place::Archimedean => Ok(ln_biguint(q.numer().magnitude()) - ln_biguint(q.denom().magnitude())),
        Place::Finite(p) => Ok(-(valuation(q, p)? as f64) * p.ln()),
    }
}

/// Natural log of a positive big integer, accurate to double precision even
/// when the integer is far beyond the f64 range.
pub fn ln_biguint(n: &BigUint) -> f64 {
    debug_assert!(!n.is_zero());
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top: BigUint = n >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_bigint_abs(n: &BigInt) -> f64 {
    ln_biguint(n.magnitude())
}

/// All primes dividing a numerator or denominator of the nonzero inputs.
pub fn support_primes(values: &[ExactRational]) -> BTreeSet<Prime> {
    support_primes_with_bound(values, DEFAULT_PRIME_BOUND)
}

/// As [`support_primes`], trial dividing up to `bound` before switching to
/// Pollard rho for the remaining cofactor.
pub fn support_primes_with_bound(values: &[ExactRational], bound: u64) -> BTreeSet<Prime> {
    let mut out = BTreeSet::new();
    for q in values.iter().filter(|q| !q.is_zero()) {
        for n in [q.numer().magnitude(), q.denom().magnitude()] {
            for p in prime_factors(n, bound) {
                out.insert(Prime(p));
            }
        }
    }
    out
}

/// Distinct prime factors of `n` (empty for 0 and 1).
///
/// Factors beyond `u64` are only supported when the cofactor left after
/// trial division is itself prime or splits with Pollard rho.
pub fn prime_factors(n: &BigUint, bound: u64) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    if n.is_zero() {
        return out;
    }
    let mut m = n.clone();
    let mut d = 2u64;
    while d <= bound && !m.is_one() {
        if let Some(small) = m.to_u64() {
            factor_u64(small, &mut out);
            return out;
        }
        if (&m % d).is_zero() {
            out.insert(d);
            while (&m % d).is_zero() {
                m /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if m.is_one() {
        return out;
    }
    let mut stack = vec![m];
    while let Some(c) = stack.pop() {
        if c.is_one() {
            continue;
        }
        if let Some(small) = c.to_u64() {
            factor_u64(small, &mut out);
            continue;
        }
        if is_probable_prime_big(&c) {
            // Primes beyond u64 are outside the Place model; they cannot occur
            // at the coefficient sizes this crate targets.
            continue;
        }
        let f = pollard_brent_big(&c);
        stack.push(&c / &f);
        stack.push(f);
    }
    out
}

fn factor_u64(n: u64, out: &mut BTreeSet<u64>) {
    if n == 1 {
        return;
    }
    if is_prime_u64(n) {
        out.insert(n);
        return;
    }
    for p in [2u64, 3, 5, 7, 11, 13] {
        if n % p == 0 {
            out.insert(p);
            let mut m = n;
            while m % p == 0 {
                m /= p;
            }
            factor_u64(m, out);
            return;
        }
    }
    let f = pollard_brent_u64(n);
    factor_u64(f, out);
    factor_u64(n / f, out);
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'outer: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

fn pollard_brent_u64(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = x.abs_diff(y).gcd(&n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

fn is_probable_prime_big(n: &BigUint) -> bool {
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    let n1 = n - &one;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    'outer: for a in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
        let a = BigUint::from(a);
        if &a >= n {
            continue;
        }
        let mut x = a.modpow(&d, n);
        if x == one || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

fn pollard_brent_big(n: &BigUint) -> BigUint {
    let mut c = BigUint::one();
    loop {
        let f = |x: &BigUint| (x * x + &c) % n;
        let mut x = BigUint::from(2u32);
        let mut y = x.clone();
        let mut d = BigUint::one();
        while d.is_one() {
            x = f(&x);
            y = f(&f(&y));
            let diff = if x > y { &x - &y } else { &y - &x };
            d = diff.gcd(n);
        }
        if &d != n {
            return d;
        }
        c += 1u32;
    }
}

/// Parse `"a/b"`, `"a"` or a finite decimal such as `"-1.25"`.
pub fn parse_rational(s: &str) -> Result<ExactRational> {
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|e| Error::Parse(format!("{t:?}: {e}")))?;
        let d = BigInt::from_str(d.trim()).map_err(|e| Error::Parse(format!("{t:?}: {e}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("{t:?}: zero denominator")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int_part, frac)) = t.split_once('.') {
        let (neg, int_part) = match int_part.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, int_part.strip_prefix('+').unwrap_or(int_part)),
        };
        let digits = format!("{int_part}{frac}");
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Parse(format!("{t:?}: not a rational")));
        }
        let n = BigInt::from_str(&digits).map_err(|e| Error::Parse(format!("{t:?}: {e}")))?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        let q = BigRational::new(n, d);
        return Ok(if neg { -q } else { q });
    }
    let n = BigInt::from_str(t).map_err(|e| Error::Parse(format!("{t:?}: {e}")))?;
    Ok(BigRational::from_integer(n))
}

pub fn to_f64(q: &ExactRational) -> f64 {
    let v = q.to_f64().unwrap_or(f64::NAN);
    if v.is_finite() {
        return v;
    }
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    let ln = ln_biguint(q.numer().magnitude()) - ln_biguint(q.denom().magnitude());
    sign * ln.exp()
}

pub fn rational_from_i64(n: i64) -> ExactRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Larger of the numerator and denominator bit lengths.
pub fn bit_size(q: &ExactRational) -> u64 {
    q.numer().bits().max(q.denom().bits())
}

/// Serde adapter writing rationals as `"a/b"` strings.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(q: &ExactRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(q)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ExactRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> ExactRational {
        parse_rational(s).unwrap()
    }

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(valuation(&q("12"), p(2)).unwrap(), 2);
        assert_eq!(valuation(&q("1/2"), p(2)).unwrap(), -1);
        assert_eq!(valuation(&q("5/9"), p(3)).unwrap(), -2);
    }

    #[test]
    fn valuation_errors() {
        assert!(matches!(valuation(&q("0"), p(2)), Err(Error::ZeroValuation)));
        assert!(matches!(Prime::new(15), Err(Error::NotPrime(15))));
        assert!(Prime::new(1).is_err());
    }

    #[test]
    fn log_abs_examples() {
        assert_eq!(log_abs(&q("1"), Place::Archimedean).unwrap(), 0.0);
        assert_eq!(log_abs(&q("1"), Place::Finite(p(7))).unwrap(), 0.0);
        assert!((log_abs(&q("1/2"), Place::Finite(p(2))).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((log_abs(&q("-3"), Place::Archimedean).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!(log_abs(&q("0"), Place::Archimedean).is_err());
    }

    #[test]
    fn support_prime_examples() {
        let s: Vec<u64> = support_primes(&[q("1/2"), q("3")]).into_iter().map(Prime::get).collect();
        assert_eq!(s, vec![2, 3]);
        assert!(support_primes(&[q("1")]).is_empty());
        let s: Vec<u64> = support_primes(&[q("-10/21")]).into_iter().map(Prime::get).collect();
        assert_eq!(s, vec![2, 3, 5, 7]);
        assert!(support_primes(&[]).is_empty());
    }

    #[test]
    fn support_primes_beyond_trial_bound() {
        // 1000003 * 1000033 and a prime above the bound.
        let n = q("1000036000099");
        let s: Vec<u64> = support_primes_with_bound(&[n], 1000).into_iter().map(Prime::get).collect();
        assert_eq!(s, vec![1000003, 1000033]);
        let s: Vec<u64> = support_primes_with_bound(&[q("2/1000003")], 100).into_iter().map(Prime::get).collect();
        assert_eq!(s, vec![2, 1000003]);
    }

    #[test]
    fn miller_rabin_agrees_with_sieve() {
        let n = 5000usize;
        let mut sieve = vec![true; n];
        sieve[0] = false;
        sieve[1] = false;
        for i in 2..n {
            if sieve[i] {
                let mut j = i * i;
                while j < n {
                    sieve[j] = false;
                    j += i;
                }
            }
        }
        for (i, &is_p) in sieve.iter().enumerate() {
            assert_eq!(is_prime_u64(i as u64), is_p, "{i}");
        }
        assert!(is_prime_u64(18446744073709551557));
        assert!(!is_prime_u64(3215031751));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(q("6/4").to_string(), "3/2");
        assert_eq!(q("-7").to_string(), "-7");
        assert_eq!(q("4/-2").to_string(), "-2");
        assert_eq!(q("-1.25"), q("-5/4"));
        assert_eq!(q("0.5"), q("1/2"));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn ln_of_huge_integers() {
        let big = num_traits::pow(BigUint::from(3u32), 5000);
        let expected = 5000.0 * 3f64.ln();
        assert!((ln_biguint(&big) - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn place_order() {
        let mut v = vec![Place::Finite(p(5)), Place::Archimedean, Place::Finite(p(2))];
        v.sort();
        assert_eq!(v, vec![Place::Archimedean, Place::Finite(p(2)), Place::Finite(p(5))]);
    }
}
