//! Backward-iteration sampling of the canonical measure on ℂ and the
//! archimedean unit-disk integral.

use std::io::Write;

use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::rational::{support_primes, to_f64, valuation, ExactRational};
use crate::roots::{solve_complex, RootOptions};

/// Endpoints of backward chains. Points come in contiguous groups of
/// `group_size` that share a chain (1 for plain chains).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSample {
    pub points: Vec<Complex64>,
    pub depth: u32,
    pub seed: u64,
    pub source_beta: Complex64,
    pub group_size: usize,
}

impl MeasureSample {
    pub fn chains(&self) -> usize {
        self.points.len() / self.group_size
    }

    /// Writes `re,im` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re", "im"])?;
        for z in &self.points {
            w.write_record([format!("{:e}", z.re), format!("{:e}", z.im)])?;
        }
        w.flush()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Fraction of points with `|z| < clip_radius`.
    pub clipped_mass: f64,
    pub clip_radius: f64,
}

/// Solves `phi(w) = z` in doubles.
struct Preimager {
    base: Vec<Complex64>,
    opts: RootOptions,
}

impl Preimager {
    fn new(phi: &Poly) -> Self {
        Preimager {
            base: phi.to_complex_coeffs(),
            opts: RootOptions::default(),
        }
    }

    fn degree(&self) -> usize {
        self.base.len() - 1
    }

    fn roots(&self, z: Complex64) -> Result<Vec<Complex64>> {
        let mut c = self.base.clone();
        c[0] -= z;
        let r = solve_complex(&c, &self.opts)?;
        if r.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite preimage of {z}")));
        }
        Ok(r)
    }
}

/// Fails with [`Error::ExceptionalBeta`] when `phi(w) = z` has a single
/// distinct solution for three consecutive levels starting at `beta`.
///
/// For a polynomial this happens exactly when `phi = a (w - r)^d + r` and
/// `beta = r`, which is what is tested (exactly, on the coefficients).
pub fn check_not_exceptional(phi: &Poly, beta: Complex64) -> Result<()> {
    let d = phi.require_degree(2)?;
    let lead = phi.leading().expect("degree >= 2").clone();
    let r = -phi.coeff(d - 1) / (&lead * ExactRational::from_integer(d.into()));
    let centered = Poly::new(vec![-r.clone(), ExactRational::one()]);
    let mut power = Poly::constant(lead);
    for _ in 0..d {
        power = power.mul(&centered);
    }
    let is_centered_power = power.add(&Poly::constant(r.clone())) == *phi;
    let rf = Complex64::new(to_f64(&r), 0.0);
    if is_centered_power && (beta - rf).norm() <= 1e-12 * rf.norm().max(1.0) {
        return Err(Error::ExceptionalBeta);
    }
    Ok(())
}

fn validate(phi: &Poly, depth: u32, count: usize) -> Result<()> {
    phi.require_degree(2)?;
    if depth == 0 || count == 0 {
        return Err(Error::InvalidArgument("depth and count must be at least 1".into()));
    }
    Ok(())
}

/// `count` independent chains from `beta`; each step replaces `z` by a
/// uniformly chosen root of `phi(w) = z` (roots listed with multiplicity).
/// Chain `i` draws from stream `i` of a ChaCha generator keyed by `seed`, so
/// the result does not depend on the thread count.
pub fn backward_sample(phi: &Poly, beta: Complex64, depth: u32, count: usize, seed: u64) -> Result<MeasureSample> {
    backward_sample_expanded(phi, beta, depth, count, seed, 0)
}

/// Like [`backward_sample`], but the last `expand` steps follow every
/// branch, so each chain contributes all `d^expand` of its leaves.
/// Averaging over a chain's leaves has the same mean and smaller variance.
pub fn backward_sample_expanded(
    phi: &Poly,
    beta: Complex64,
    depth: u32,
    count: usize,
    seed: u64,
    expand: u32,
) -> Result<MeasureSample> {
    validate(phi, depth, count)?;
    if expand > depth {
        return Err(Error::InvalidArgument(format!("expand ({expand}) exceeds depth ({depth})")));
    }
    check_not_exceptional(phi, beta)?;
    let pre = Preimager::new(phi);
    let d = pre.degree();
    let group_size = d.pow(expand);

    let run_chain = |i: usize| -> Result<Vec<Complex64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut z = beta;
        for _ in 0..depth - expand {
            let roots = pre.roots(z)?;
            z = roots[rng.gen_range(0..roots.len())];
        }
        let mut frontier = vec![z];
        for _ in 0..expand {
            let mut next = Vec::with_capacity(frontier.len() * d);
            for &w in &frontier {
                next.extend(pre.roots(w)?);
            }
            frontier = next;
        }
        Ok(frontier)
    };

    let chains: Vec<Result<Vec<Complex64>>> = (0..count).into_par_iter().map(run_chain).collect();
    let mut points = Vec::with_capacity(count * group_size);
    for (chain, r) in chains.into_iter().enumerate() {
        match r {
            Ok(pts) => points.extend(pts),
            Err(e) => {
                return Err(Error::Chain {
                    chain,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(MeasureSample {
        points,
        depth,
        seed,
        source_beta: beta,
        group_size,
    })
}

/// Mean of `ln|z|` over `|z| < 1`, with `ln clip_eps` for `|z| < clip_eps`.
/// The standard error is computed over chain means.
pub fn local_integral_arch(sample: &MeasureSample, clip_eps: f64) -> Result<IntegralEstimate> {
    if !(clip_eps > 0.0 && clip_eps < 1.0) {
        return Err(Error::InvalidArgument(format!("clip_eps must lie in (0, 1), got {clip_eps}")));
    }
    if sample.points.is_empty() || sample.group_size == 0 || sample.points.len() % sample.group_size != 0 {
        return Err(Error::InvalidArgument("malformed sample".into()));
    }
    let ln_clip = clip_eps.ln();
    let mut clipped = 0usize;
    let f = |z: &Complex64, clipped: &mut usize| {
        let r = z.norm();
        if r >= 1.0 {
            0.0
        } else if r < clip_eps {
            *clipped += 1;
            ln_clip
        } else {
            r.ln()
        }
    };
    let means: Vec<f64> = sample
        .points
        .chunks(sample.group_size)
        .map(|g| g.iter().map(|z| f(z, &mut clipped)).sum::<f64>() / g.len() as f64)
        .collect();
    let n = means.len() as f64;
    let value = means.iter().sum::<f64>() / n;
    let std_error = if means.len() > 1 {
        let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(IntegralEstimate {
        value,
        std_error,
        clipped_mass: clipped as f64 / sample.points.len() as f64,
        clip_radius: clip_eps,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut dmax) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        dmax = dmax.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * dmax;
    (dmax, kolmogorov_q(lambda))
}

/// `Q(l) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 l^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Largest positive root of `|a_d| r^d - sum_{i<d} |a_i| r^i - r`. Every
/// `z` with `|z|` beyond it escapes to infinity under `phi`.
pub fn escape_radius(phi: &Poly) -> f64 {
    let abs: Vec<f64> = phi.coeffs().iter().map(|c| to_f64(&c.abs())).collect();
    let d = abs.len() - 1;
    let g = |r: f64| {
        let mut acc = abs[d];
        for i in (0..d).rev() {
            acc = acc * r - abs[i];
        }
        acc - r
    };
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Proves that the Julia set misses the open unit disk, either because
/// `phi = ±x^d` or because `|phi(z)|` exceeds the escape radius on the
/// whole closed disk (checked on a quadtree with a derivative bound).
/// `false` means "not certified", not "intersects".
pub fn certify_disjoint_from_unit_disk(phi: &Poly) -> bool {
    if phi.degree() < 2 {
        return false;
    }
    if phi.is_power_map() {
        return true;
    }
    let target = escape_radius(phi) * (1.0 + 1e-9) + 1e-12;
    let c = phi.to_complex_coeffs();
    let abs: Vec<f64> = c.iter().map(|z| z.norm()).collect();
    let deriv_bound = |rad: f64| {
        let mut acc = 0.0;
        for k in (1..abs.len()).rev() {
            acc = acc * rad + k as f64 * abs[k];
        }
        acc
    };
    let eval = |z: Complex64| c.iter().rev().fold(Complex64::zero(), |acc, a| acc * z + a);

    let mut stack = vec![(0.0f64, 0.0f64, 1.0f64, 0u32)];
    let mut visited = 0usize;
    while let Some((x, y, h, level)) = stack.pop() {
        visited += 1;
        if visited > 4_000_000 {
            return false;
        }
        // skip squares that miss the closed unit disk
        let dx = (x.abs() - h).max(0.0);
        let dy = (y.abs() - h).max(0.0);
        if dx * dx + dy * dy > 1.0 {
            continue;
        }
        let center = Complex64::new(x, y);
        let value = eval(center).norm();
        if center.norm() <= 1.0 && value <= target {
            return false;
        }
        let diag = h * std::f64::consts::SQRT_2;
        let lower = value - deriv_bound(center.norm() + diag) * diag;
        if lower > target {
            continue;
        }
        if level >= 18 {
            return false;
        }
        let q = 0.5 * h;
        for (sx, sy) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
            stack.push((x + sx * q, y + sy * q, q, level + 1));
        }
    }
    true
}

/// Smallest positive integer `beta` at distance at least 1/2 from the
/// forward orbit of 0, with `v_p(beta - phi^k(0)) <= 0` along that orbit at
/// each bad-reduction prime `p`, skipping an exceptional point. Falls back to the archimedean condition
/// alone if no candidate up to 1000 passes both.
pub fn default_beta(phi: &Poly) -> Result<ExactRational> {
    phi.require_degree(2)?;
    const LIMIT: i64 = 1000;
    let bound = escape_radius(phi).max(LIMIT as f64 + 1.0);
    let mut orbit: Vec<ExactRational> = Vec::new();
    let mut y = ExactRational::zero();
    for _ in 0..=50 {
        if orbit.contains(&y) {
            break;
        }
        orbit.push(y.clone());
        if to_f64(&y.abs()) > bound || crate::rational::bit_size(&y) > 1 << 16 {
            break;
        }
        y = phi.eval(&y);
    }
    let orbit_f: Vec<f64> = orbit.iter().map(to_f64).collect();
    let bad: Vec<_> = support_primes(phi.coeffs())
        .into_iter()
        .filter(|&p| !crate::newton::has_good_reduction(phi, p))
        .collect();
    let arch_ok = |b: i64| {
        orbit_f.iter().all(|o| (b as f64 - o).abs() >= 0.5)
            && check_not_exceptional(phi, Complex64::new(b as f64, 0.0)).is_ok()
    };
    let padic_ok = |b: i64| {
        let bq = ExactRational::from_integer(b.into());
        bad.iter().all(|&p| {
            orbit.iter().all(|o| {
                let diff = &bq - o;
                diff.is_zero() || valuation(&diff, p).map(|v| v <= 0).unwrap_or(false)
            })
        })
    };
    let mut fallback = None;
    for b in 1..=LIMIT {
        if arch_ok(b) {
            if padic_ok(b) {
                return Ok(ExactRational::from_integer(b.into()));
            }
            fallback.get_or_insert(b);
        }
    }
    fallback
        .map(|b| ExactRational::from_integer(b.into()))
        .ok_or_else(|| Error::InvalidArgument("no default beta found up to 1000; pass one explicitly".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Poly {
        Poly::parse(s).unwrap()
    }

    #[test]
    fn squaring_samples_lie_on_circle() {
        let s = backward_sample(&p("x^2"), Complex64::new(2.0, 0.0), 30, 1000, 7).unwrap();
        assert_eq!(s.points.len(), 1000);
        assert!(s.points.iter().all(|z| (z.norm() - 1.0).abs() < 1e-6));
        let e = local_integral_arch(&s, 1e-9).unwrap();
        assert_eq!((e.value, e.clipped_mass), (0.0, 0.0));
    }

    #[test]
    fn chebyshev_samples_lie_on_interval() {
        let s = backward_sample(&p("x^2 - 2"), Complex64::new(3.0, 0.0), 30, 1000, 7).unwrap();
        assert!(s.points.iter().all(|z| z.re.abs() <= 2.0 + 1e-4 && z.im.abs() <= 1e-4));
    }

    #[test]
    fn x2_plus_5_samples_avoid_disk() {
        let s = backward_sample(&p("x^2 + 5"), Complex64::new(1.0, 0.0), 25, 500, 7).unwrap();
        assert!(s.points.iter().all(|z| z.norm() >= 1.0));
        assert_eq!(local_integral_arch(&s, 1e-9).unwrap().value, 0.0);
    }

    #[test]
    fn reproducible() {
        let phi = p("x^3 - x + 1/3");
        let a = backward_sample(&phi, Complex64::new(2.0, 0.0), 20, 200, 99).unwrap();
        let b = backward_sample(&phi, Complex64::new(2.0, 0.0), 20, 200, 99).unwrap();
        assert_eq!(a, b);
        let c = backward_sample(&phi, Complex64::new(2.0, 0.0), 20, 200, 100).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn exceptional_beta_rejected() {
        assert!(matches!(
            backward_sample(&p("x^2"), Complex64::zero(), 10, 10, 1),
            Err(Error::ExceptionalBeta)
        ));
        assert!(matches!(
            backward_sample(&p("x^3 - 3x^2 + 3x"), Complex64::new(1.0, 0.0), 10, 10, 1),
            Err(Error::ExceptionalBeta)
        ));
        assert!(check_not_exceptional(&p("x^2"), Complex64::new(1.0, 0.0)).is_ok());
        // (x - 1)^3 + 2 has center 1, which is not fixed
        assert!(check_not_exceptional(&p("x^3 - 3x^2 + 3x + 1"), Complex64::new(1.0, 0.0)).is_ok());
    }

    #[test]
    fn bad_arguments() {
        let phi = p("x^2 - 1");
        let one = Complex64::new(1.0, 0.0);
        assert!(backward_sample(&phi, one, 0, 10, 1).is_err());
        assert!(backward_sample(&phi, one, 5, 0, 1).is_err());
        assert!(backward_sample_expanded(&phi, one, 5, 10, 1, 6).is_err());
        let s = backward_sample(&phi, one, 5, 10, 1).unwrap();
        assert!(local_integral_arch(&s, 0.0).is_err());
        assert!(local_integral_arch(&s, 1.0).is_err());
    }

    #[test]
    fn expanded_groups() {
        let s = backward_sample_expanded(&p("x^2 - 1"), Complex64::new(2.0, 0.0), 20, 50, 3, 4).unwrap();
        assert_eq!((s.group_size, s.points.len(), s.chains()), (16, 800, 50));
    }

    #[test]
    fn escape_radius_quadratic_family() {
        for c in [-7.0, -2.0, 0.25, 5.0] {
            let phi = Poly::new(vec![ExactRational::from_float(c).unwrap(), ExactRational::zero(), ExactRational::one()]);
            let expect = (1.0 + (1.0 + 4.0 * f64::abs(c)).sqrt()) / 2.0;
            assert!((escape_radius(&phi) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn certification() {
        for s in ["x^2", "-x^3", "x^2 + 4", "x^2 + 5", "x^2 - 7", "x^3 + 10"] {
            assert!(certify_disjoint_from_unit_disk(&p(s)), "{s}");
        }
        for s in ["x^2 - 2", "x^2 - 1", "x^2 + 2x", "x^2 + 1", "x^3 - x"] {
            assert!(!certify_disjoint_from_unit_disk(&p(s)), "{s}");
        }
    }

    #[test]
    fn default_beta_examples() {
        // x^2 - 2: orbit 0, -2, 2, 2, ...; 1 is fine
        assert_eq!(default_beta(&p("x^2 - 2")).unwrap(), ExactRational::from_integer(1.into()));
        // x^2 + 1: orbit 0, 1, 2, 5, 26, ... ; first free integer is 3
        assert_eq!(default_beta(&p("x^2 + 1")).unwrap(), ExactRational::from_integer(3.into()));
        // x^2: orbit {0}
        assert_eq!(default_beta(&p("x^2")).unwrap(), ExactRational::from_integer(1.into()));
        // (x - 1)^2 + 1: orbit 0, 2, 2, ...; 1 is the exceptional point
        assert_eq!(default_beta(&p("x^2 - 2x + 2")).unwrap(), ExactRational::from_integer(3.into()));
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let b: Vec<f64> = (0..500).map(|i| i as f64 / 500.0 + 0.002).collect();
        assert!(ks_two_sample(&a, &b).1 > 0.5);
        let c: Vec<f64> = (0..500).map(|i| i as f64 / 500.0 + 0.3).collect();
        assert!(ks_two_sample(&a, &c).1 < 1e-6);
    }

    #[test]
    fn csv_export() {
        let s = backward_sample(&p("x^2"), Complex64::new(2.0, 0.0), 3, 2, 1).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("re,im\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
