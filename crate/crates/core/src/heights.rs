//! Weil heights, Mahler measures and Call-Silverman canonical heights.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Poly, PrimitiveIntPoly};
use crate::rational::{
    bit_size, ln_bigint_abs, parse_rational, prime_factors, support_primes, to_f64, valuation,
    ExactRational, DEFAULT_PRIME_BOUND,
};
use crate::roots::{complex_roots, RootCluster};

/// Default cap on the bit size of orbit points in [`canonical_height`].
pub const DEFAULT_BIT_BUDGET: u64 = 1 << 20;

/// A point of the projective line over ℚ.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjPoint {
    Finite(#[serde(with = "crate::rational::serde_rational")] ExactRational),
    Infinity,
}

impl ProjPoint {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(ProjPoint::Infinity),
            t => parse_rational(t).map(ProjPoint::Finite),
        }
    }
}

impl From<ExactRational> for ProjPoint {
    fn from(q: ExactRational) -> Self {
        ProjPoint::Finite(q)
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjPoint::Finite(q) => write!(f, "{q}"),
            ProjPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// A real value with an error radius. `rigorous` is set only when the radius
/// is a proven bound from the telescoping constant (or the value is exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightEstimate {
    pub value: f64,
    pub error_radius: f64,
    pub rigorous: bool,
    /// Number of exact iterates used (0 for Mahler-measure estimates).
    pub iterations: u32,
}

impl HeightEstimate {
    pub fn exact(value: f64) -> Self {
        HeightEstimate {
            value,
            error_radius: 0.0,
            rigorous: true,
            iterations: 0,
        }
    }
}

/// Logarithmic Weil height; `h(a/b) = ln max(|a|, |b|)` and `h(∞) = 0`.
pub fn weil_height(x: &ProjPoint) -> f64 {
    match x {
        ProjPoint::Infinity => 0.0,
        ProjPoint::Finite(q) => rational_height(q),
    }
}

pub fn rational_height(q: &ExactRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let n = q.numer().magnitude();
    let d = q.denom().magnitude();
    crate::rational::ln_biguint(if n > d { n } else { d })
}

/// `ln |a_d| + sum over roots of log+ |root|`, with the error radius
/// propagated from the root clusters' inclusion radii.
pub fn log_mahler_measure(f: &PrimitiveIntPoly) -> Result<HeightEstimate> {
    f.to_poly().require_degree(1)?;
    let clusters = complex_roots(&f.to_poly(), 1e-15)?;
    Ok(mahler_from_clusters(ln_bigint_abs(f.leading()), &clusters))
}

fn mahler_from_clusters(ln_lead: f64, clusters: &[RootCluster]) -> HeightEstimate {
    let log_plus = |r: f64| if r > 1.0 { r.ln() } else { 0.0 };
    let mut value = ln_lead;
    let mut err = 0.0;
    for c in clusters {
        let m = c.multiplicity as f64;
        let r = c.center.norm();
        value += m * log_plus(r);
        err += m * (log_plus(r + c.residual_radius) - log_plus((r - c.residual_radius).max(0.0)));
    }
    HeightEstimate {
        value,
        error_radius: err,
        rigorous: false,
        iterations: 0,
    }
}

/// Sum of the Weil heights of all roots of `f`, with multiplicity.
///
/// For the primitive integer form `F` of `f` this is `log M(F)`.
pub fn sum_root_heights(f: &Poly) -> Result<HeightEstimate> {
    if f.is_zero() || f.degree() == 0 {
        return Err(Error::DegreeTooSmall { needed: 1, got: 0 });
    }
    log_mahler_measure(&f.to_primitive()?)
}

/// Sum of root heights given the roots directly (one entry per multiplicity).
pub fn sum_root_heights_from_roots(f: &Poly, roots: &[num_complex::Complex64]) -> Result<f64> {
    let prim = f.to_primitive()?;
    let ln_lead = ln_bigint_abs(prim.leading());
    Ok(ln_lead + roots.iter().map(|z| z.norm().ln().max(0.0)).sum::<f64>())
}

/// Height of the coefficient vector: sum over places of `max_i log+ |a_i|_v`.
pub fn coefficient_height(phi: &Poly) -> f64 {
    let arch = phi
        .coeffs()
        .iter()
        .map(|c| to_f64(&c.abs()))
        .fold(1.0, f64::max)
        .ln();
    let lcm = phi
        .coeffs()
        .iter()
        .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    arch + ln_bigint_abs(&lcm)
}

/// A constant `C` with `|h(phi(y)) - d h(y)| <= C` for every rational `y`.
///
/// Zero for the power maps `±x^d`. Otherwise the larger of `coefficient_height + ln(d+1) + ln 2` (which
/// bounds the upper side) and a per-place escape-radius bound for the lower
/// side.
pub fn telescoping_constant(phi: &Poly) -> f64 {
    if phi.is_power_map() {
        // h(±y^d) = d h(y) exactly
        return 0.0;
    }
    let d = phi.degree();
    let df = d as f64;
    let upper = coefficient_height(phi) + (df + 1.0).ln() + 2f64.ln();

    let lead = phi.leading().expect("nonzero polynomial");
    let lead_abs = to_f64(&lead.abs());
    let tail: f64 = phi.coeffs()[..d].iter().map(|c| to_f64(&c.abs())).sum();
    let r_inf = (2.0 * tail / lead_abs).max(1.0);
    let mut lower = (df * r_inf.ln()).max(2f64.ln() - lead_abs.ln());
    for p in support_primes(phi.coeffs()) {
        let vd = valuation(lead, p).expect("leading coefficient is nonzero");
        let ln_r = phi.coeffs()[..d]
            .iter()
            .filter(|c| !c.is_zero())
            .map(|c| vd - valuation(c, p).unwrap())
            .fold(0, i64::max) as f64
            * p.ln();
        lower += (df * ln_r).max(vd as f64 * p.ln());
    }
    upper.max(lower)
}

/// Integer form of `phi`: `phi(a/b) = sum A_i a^i b^(d-i) / (L b^d)`.
struct Homogeneous {
    ints: Vec<BigInt>,
    lcm: BigInt,
    /// Primes of `lcm * A_d`, the only ones the numerator and denominator can share.
    primes: Vec<BigInt>,
}

impl Homogeneous {
    fn new(phi: &Poly) -> Self {
        let lcm = phi
            .coeffs()
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints = phi
            .coeffs()
            .iter()
            .map(|c| c.numer() * (&lcm / c.denom()))
            .collect::<Vec<BigInt>>();
        let lead = ints.last().expect("nonzero polynomial");
        let primes = prime_factors((&lcm * lead).magnitude(), DEFAULT_PRIME_BOUND)
            .into_iter()
            .map(BigInt::from)
            .collect();
        Homogeneous { ints, lcm, primes }
    }

    fn eval(&self, y: &ExactRational) -> ExactRational {
        let (a, b) = (y.numer(), y.denom());
        let d = self.ints.len() - 1;
        let mut bpow = vec![BigInt::one()];
        for i in 1..=d {
            let next = &bpow[i - 1] * b;
            bpow.push(next);
        }
        let mut acc = self.ints[d].clone();
        for i in (0..d).rev() {
            acc = acc * a;
            if !self.ints[i].is_zero() {
                acc += &self.ints[i] * &bpow[d - i];
            }
        }
        let mut den = &self.lcm * &bpow[d];
        // For a prime dividing b, it divides the numerator iff it divides A_d.
        let g = if b.is_one() || self.ints[d].gcd(b).is_one() {
            // reduce first: a binary gcd against a huge operand is slow
            (&acc % &self.lcm).gcd(&self.lcm)
        } else {
            let mut g = BigInt::one();
            for p in &self.primes {
                let v = capped_valuation(&den, p, u64::MAX);
                let v = capped_valuation(&acc, p, v);
                if v > 0 {
                    g *= num_traits::pow::pow(p.clone(), v as usize);
                }
            }
            g
        };
        if !g.is_one() {
            acc /= &g;
            den /= &g;
        }
        BigRational::new_raw(acc, den)
    }
}

/// `min(v_p(n), cap)` for nonzero `n`, dividing by `p^(2^j)` from the top down.
fn capped_valuation(n: &BigInt, p: &BigInt, cap: u64) -> u64 {
    let mut powers = vec![p.clone()];
    while powers.last().unwrap().bits() * 2 <= n.bits() + 1 && (1u64 << powers.len()) <= cap {
        let sq = powers.last().unwrap() * powers.last().unwrap();
        powers.push(sq);
    }
    let mut m = n.clone();
    let mut v = 0u64;
    for (j, pw) in powers.iter().enumerate().rev() {
        let step = 1u64 << j;
        if v + step <= cap {
            let (quo, rem) = m.div_rem(pw);
            if rem.is_zero() {
                m = quo;
                v += step;
            }
        }
    }
    v
}

/// Call-Silverman canonical height `lim h(phi^n(x)) / d^n`.
///
/// Iterates exactly until the telescoping bound `C/(d^n (d-1))` is at most
/// `eps`, or until an orbit point exceeds the bit budget, in which case the
/// estimate from the last affordable iterate is returned with its larger
/// (still rigorous) error radius. A detected cycle gives exactly 0.
pub fn canonical_height(phi: &Poly, x: &ProjPoint, eps: f64) -> Result<HeightEstimate> {
    canonical_height_with_budget(phi, x, eps, DEFAULT_BIT_BUDGET)
}

pub fn canonical_height_with_budget(
    phi: &Poly,
    x: &ProjPoint,
    eps: f64,
    budget_bits: u64,
) -> Result<HeightEstimate> {
    let d = phi.require_degree(2)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let start = match x {
        // polynomials fix infinity and h(inf) = 0
        ProjPoint::Infinity => return Ok(HeightEstimate::exact(0.0)),
        ProjPoint::Finite(q) => q.clone(),
    };
    if bit_size(&start) > budget_bits {
        return Err(Error::HeightBudget { budget_bits });
    }
    let c = telescoping_constant(phi);
    let df = d as f64;
    let bound = |n: u32| c / (df.powi(n as i32) * (df - 1.0));
    let mut target = 0u32;
    while bound(target) > eps {
        target += 1;
    }

    let hom = Homogeneous::new(phi);
    let mut seen: HashSet<ExactRational> = HashSet::new();
    let mut y = start;
    let mut n = 0u32;
    let mut truncated = false;
    while n < target {
        if bit_size(&y) <= 4096 && !seen.insert(y.clone()) {
            return Ok(HeightEstimate {
                iterations: n,
                ..HeightEstimate::exact(0.0)
            });
        }
        // the next iterate has at least d times the bits of y, minus slack
        if bit_size(&y).saturating_mul(d as u64) > budget_bits.saturating_add(64 * d as u64) {
            truncated = true;
            break;
        }
        let next = hom.eval(&y);
        if bit_size(&next) > budget_bits {
            truncated = true;
            break;
        }
        y = next;
        n += 1;
    }
    if !truncated && bit_size(&y) <= 4096 && seen.contains(&y) {
        return Ok(HeightEstimate {
            iterations: n,
            ..HeightEstimate::exact(0.0)
        });
    }
    Ok(HeightEstimate {
        value: rational_height(&y) / df.powi(n as i32),
        error_radius: bound(n),
        rigorous: true,
        iterations: n,
    })
}

/// Exact forward orbit of `x` for preperiodicity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitFate {
    Preperiodic { preperiod: u32, period: u32 },
    Escapes { step: u32 },
    Undecided,
}

/// Follows the orbit of `x` for at most `max_steps` steps, reporting a cycle,
/// an escape past `escape_radius` (archimedean), or neither.
pub fn orbit_fate(phi: &Poly, x: &ExactRational, escape_radius: f64, max_steps: u32) -> OrbitFate {
    let hom = Homogeneous::new(phi);
    let mut first_seen: std::collections::HashMap<ExactRational, u32> = Default::default();
    let mut y = x.clone();
    for step in 0..=max_steps {
        if let Some(&k) = first_seen.get(&y) {
            return OrbitFate::Preperiodic {
                preperiod: k,
                period: step - k,
            };
        }
        if to_f64(&y.abs()) > escape_radius {
            return OrbitFate::Escapes { step };
        }
        if bit_size(&y) > DEFAULT_BIT_BUDGET {
            break;
        }
        first_seen.insert(y.clone(), step);
        y = hom.eval(&y);
    }
    OrbitFate::Undecided
}
