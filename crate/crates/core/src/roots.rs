//! Simultaneous complex root finding (Aberth-Ehrlich) with a-posteriori
//! inclusion radii and multiplicity clustering.

use num_complex::Complex64;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::rational::{ln_biguint, ExactRational};

/// A group of numerically coincident roots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootCluster {
    pub center: Complex64,
    pub multiplicity: usize,
    /// Radius of a disk around `center` that contains `multiplicity` true roots.
    pub residual_radius: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RootOptions {
    pub max_iterations: usize,
    pub seed: u64,
    /// Merge factor: roots closer than `merge_factor * residual_radius` form one cluster.
    pub merge_factor: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            max_iterations: 500,
            seed: 0x5eed,
            merge_factor: 10.0,
        }
    }
}

const EPS: f64 = f64::EPSILON;

/// All complex roots of `f`, grouped into clusters whose multiplicities sum
/// to `deg f`.
///
/// `tol` is a relative step size below which an iterate is considered
/// settled, in addition to the backward-error stopping test.
pub fn complex_roots(f: &Poly, tol: f64) -> Result<Vec<RootCluster>> {
    complex_roots_with(f, tol, RootOptions::default())
}

pub fn complex_roots_with(f: &Poly, tol: f64, opts: RootOptions) -> Result<Vec<RootCluster>> {
    let d = f.require_degree(1)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    // Strip the zero roots exactly; they would otherwise break the scaling.
    let zeros = f.coeffs().iter().take_while(|c| c.is_zero()).count();
    let mut clusters = Vec::new();
    if zeros > 0 {
        clusters.push(RootCluster {
            center: Complex64::zero(),
            multiplicity: zeros,
            residual_radius: 0.0,
        });
    }
    if zeros == d {
        return Ok(clusters);
    }
    let (coeffs, scale) = scaled_coeffs(&f.coeffs()[zeros..])?;
    let roots = aberth(&coeffs, tol, &opts)?;
    let radii = inclusion_radii(&coeffs, &roots);
    let mut found = cluster(&roots, &radii, opts.merge_factor);
    for c in &mut found {
        if c.multiplicity > 1 {
            refine_multiple(&coeffs, c);
        }
        c.center *= scale;
        c.residual_radius *= scale;
    }
    clusters.extend(found);
    Ok(clusters)
}

/// Sharpens the center of an `m`-fold cluster by Newton on the `(m-1)`-th
/// derivative, where an exact `m`-fold root is simple. Aberth only
/// converges linearly there and stops around `eps^(1/m)`. The move is kept
/// only if it stays inside the cluster disk, which is widened to match.
fn refine_multiple(c: &[Complex64], cluster: &mut RootCluster) {
    let mut der = c.to_vec();
    for _ in 1..cluster.multiplicity {
        der = der
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, a)| a * i as f64)
            .collect();
    }
    if der.len() < 2 {
        return;
    }
    let mut z = cluster.center;
    for _ in 0..8 {
        let (p, dp, _) = horner(&der, z);
        if dp.is_zero() || !(p / dp).is_finite() {
            return;
        }
        let step = p / dp;
        z -= step;
        if step.norm() <= EPS * z.norm() {
            break;
        }
    }
    let moved = (z - cluster.center).norm();
    if z.is_finite() && moved <= cluster.residual_radius {
        cluster.center = z;
        cluster.residual_radius += moved;
    }
}

/// Roots of a polynomial with complex coefficients (low to high), each
/// listed once per multiplicity.
pub fn solve_complex(coeffs: &[Complex64], opts: &RootOptions) -> Result<Vec<Complex64>> {
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|z| z.is_zero()) {
        c.pop();
    }
    let n = c.len().saturating_sub(1);
    match n {
        0 => Err(Error::DegreeTooSmall { needed: 1, got: 0 }),
        1 => Ok(vec![-c[0] / c[1]]),
        2 => Ok(quadratic(c[0], c[1], c[2]).to_vec()),
        _ => aberth(&c, 1e-15, opts),
    }
}

/// Roots of `a x^2 + b x + c` without cancellation in the numerator.
pub fn quadratic(c: Complex64, b: Complex64, a: Complex64) -> [Complex64; 2] {
    let disc = (b * b - a * c * 4.0).sqrt();
    // choose the sign that avoids cancellation
    let s = if (b.conj() * disc).re >= 0.0 { disc } else { -disc };
    let q = -(b + s) * 0.5;
    if q.is_zero() {
        return [Complex64::zero(), Complex64::zero()];
    }
    [q / a, c / q]
}

/// Converts exact coefficients to doubles after substituting `x = s*y` with
/// `s` a power of two balancing the constant and leading terms, then
/// normalizes the largest coefficient to magnitude ~1. Returns the scaled
/// coefficients and `s`.
fn scaled_coeffs(coeffs: &[ExactRational]) -> Result<(Vec<Complex64>, f64)> {
    let n = coeffs.len() - 1;
    let logs: Vec<Option<(f64, f64)>> = coeffs
        .iter()
        .map(|c| {
            (!c.is_zero()).then(|| {
                let ln = ln_biguint(c.numer().magnitude()) - ln_biguint(c.denom().magnitude());
                (ln, if c.is_negative() { -1.0 } else { 1.0 })
            })
        })
        .collect();
    let ln0 = logs[0].expect("zero roots stripped").0;
    let lnn = logs[n].expect("nonzero leading").0;
    let ln_s = ((ln0 - lnn) / n as f64 / std::f64::consts::LN_2).round() * std::f64::consts::LN_2;
    let shifted: Vec<Option<(f64, f64)>> = logs
        .iter()
        .enumerate()
        .map(|(i, l)| l.map(|(ln, sg)| (ln + i as f64 * ln_s, sg)))
        .collect();
    let top = shifted
        .iter()
        .flatten()
        .map(|(ln, _)| *ln)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::with_capacity(n + 1);
    for l in &shifted {
        match l {
            None => out.push(Complex64::zero()),
            Some((ln, sg)) => {
                let v = (ln - top).exp();
                if v == 0.0 && (ln - top) > -1e4 {
                    // representable in principle but lost to underflow
                    return Err(Error::DynamicRange);
                }
                out.push(Complex64::new(sg * v, 0.0));
            }
        }
    }
    if out[n].is_zero() || out[0].is_zero() {
        return Err(Error::DynamicRange);
    }
    Ok((out, ln_s.exp()))
}

/// Evaluates `p(z)`, `p'(z)` and the running bound `sum |c_i| |z|^i`.
fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64, f64) {
    let mut p = Complex64::zero();
    let mut dp = Complex64::zero();
    let mut bound = 0.0;
    let az = z.norm();
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
        bound = bound * az + a.norm();
    }
    (p, dp, bound)
}

/// Newton correction `p/p'` and a flag telling whether `|p|` is below its
/// rounding-error level. For `|z| > 1` the reversed polynomial is used.
fn newton_step(c: &[Complex64], z: Complex64) -> (Complex64, bool) {
    let n = c.len() - 1;
    if z.norm() <= 1.0 {
        let (p, dp, bound) = horner(c, z);
        let small = p.norm() <= 4.0 * EPS * bound * (n as f64);
        (p / dp, small)
    } else {
        let w = z.inv();
        let rev: Vec<Complex64> = c.iter().rev().copied().collect();
        let (r, dr, bound) = horner(&rev, w);
        let small = r.norm() <= 4.0 * EPS * bound * (n as f64);
        // p'/p = n/z - w^2 r'(w)/r(w)
        let ratio = Complex64::new(n as f64, 0.0) / z - w * w * dr / r;
        (ratio.inv(), small)
    }
}

fn initial_guesses(c: &[Complex64], seed: u64) -> Vec<Complex64> {
    let n = c.len() - 1;
    let lead = c[n].norm();
    let radius = 1.0 + c[..n].iter().map(|a| a.norm() / lead).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (0..n)
        .map(|k| {
            let jitter: f64 = rng.gen_range(-0.25..0.25);
            let theta = phase + (k as f64 + jitter) * std::f64::consts::TAU / n as f64;
            Complex64::from_polar(radius, theta)
        })
        .collect()
}

fn aberth(c: &[Complex64], tol: f64, opts: &RootOptions) -> Result<Vec<Complex64>> {
    let n = c.len() - 1;
    let mut z = initial_guesses(c, opts.seed);
    let mut done = vec![false; n];
    for _ in 0..opts.max_iterations {
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (newton, small) = newton_step(c, z[i]);
            if small || !newton.is_finite() {
                done[i] = true;
                continue;
            }
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let step = newton / (Complex64::new(1.0, 0.0) - newton * repulsion);
            if !step.is_finite() {
                done[i] = true;
                continue;
            }
            z[i] -= step;
            if step.norm() <= tol * z[i].norm().max(1e-300) {
                done[i] = true;
            }
        }
        if done.iter().all(|&b| b) {
            if z.iter().all(|w| w.is_finite()) {
                return Ok(z);
            }
            break;
        }
    }
    let residuals: Vec<f64> = z.iter().map(|&w| horner(c, w).0.norm()).collect();
    Err(Error::RootFinding {
        iterations: opts.max_iterations,
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        best: z,
        residuals,
    })
}

/// Weierstrass inclusion radii `n |p(z_i)| / |a_n prod_{j != i} (z_i - z_j)|`,
/// with `|p(z_i)|` floored at its rounding-error level.
fn inclusion_radii(c: &[Complex64], z: &[Complex64]) -> Vec<f64> {
    let n = z.len();
    let lead = c[n].norm();
    (0..n)
        .map(|i| {
            let (p, _, bound) = horner(c, z[i]);
            let num = p.norm().max(2.0 * EPS * bound * n as f64);
            let den: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).norm())
                .product::<f64>()
                * lead;
            if den == 0.0 {
                f64::INFINITY
            } else {
                n as f64 * num / den
            }
        })
        .collect()
}

fn cluster(z: &[Complex64], r: &[f64], factor: f64) -> Vec<RootCluster> {
    let n = z.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (z[i] - z[j]).norm() <= factor * r[i].max(r[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
        .into_iter()
        .map(|g| {
            let center = g.iter().map(|&i| z[i]).sum::<Complex64>() / g.len() as f64;
            let radius = g
                .iter()
                .map(|&i| (z[i] - center).norm() + r[i])
                .fold(0.0, f64::max);
            RootCluster {
                center,
                multiplicity: g.len(),
                residual_radius: radius,
            }
        })
        .collect()
}

/// All `d^n` solutions of `phi^n(w) = beta` with multiplicity, obtained by
/// solving `phi(w) = z` one level at a time from `beta` backwards.
pub fn preimage_tree(phi: &Poly, beta: Complex64, n: u32) -> Result<Vec<Complex64>> {
    phi.require_degree(1)?;
    let base = phi.to_complex_coeffs();
    let opts = RootOptions::default();
    let mut level = vec![beta];
    for _ in 0..n {
        let mut next = Vec::with_capacity(level.len() * (base.len() - 1));
        let mut c = base.clone();
        for &z in &level {
            c[0] = base[0] - z;
            next.extend(solve_complex(&c, &opts)?);
        }
        level = next;
    }
    Ok(level)
}
