//! Closed-form archimedean integrals: the Chebyshev unit-disk integral,
//! `L(2, chi_3)` and `I(a, b)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Double-exponential quadrature, bisecting while the reported error
/// estimate exceeds `tol`. Integrable endpoint singularities are fine since
/// the rule never samples the endpoints.
pub fn integrate<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_rec(f, a, b, tol, 0)
}

fn integrate_rec<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = quadrature::integrate(f, a, b, tol);
    if out.error_estimate <= tol || depth >= 24 {
        return out.integral;
    }
    let m = 0.5 * (a + b);
    integrate_rec(f, a, m, 0.5 * tol, depth + 1) + integrate_rec(f, m, b, 0.5 * tol, depth + 1)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")))
    }
}

/// `-(1/2pi) int_{-1}^{1} ln|x| / sqrt(1 - x^2/4) dx`, the mass-weighted log
/// of the arcsine law on `[-2, 2]` restricted to `(-1, 1)`.
///
/// With `x = 2 sin(t/2)` this becomes `-(1/pi) int_0^{pi/3} ln(2 sin(t/2)) dt`.
pub fn chebyshev_integral(tol: f64) -> Result<f64> {
    check_tol(tol)?;
    let g = |t: f64| (2.0 * (0.5 * t).sin()).ln();
    Ok(-integrate(g, 0.0, PI / 3.0, 0.1 * tol * PI) / PI)
}

/// `L(2, chi_3) = sum_k 1/(3k+1)^2 - 1/(3k+2)^2`, truncated once the tail
/// bound `1/(2(3K-2)^2)` drops below `tol`.
pub fn dirichlet_l_chi3(tol: f64) -> Result<f64> {
    check_tol(tol)?;
    let mut k_terms: u64 = 1;
    while 1.0 / (2.0 * (3.0 * k_terms as f64 - 2.0).powi(2)) > 0.5 * tol {
        k_terms *= 2;
    }
    // smallest terms first
    let sum = (0..k_terms)
        .rev()
        .map(|k| {
            let a = 3.0 * k as f64 + 1.0;
            let b = a + 1.0;
            (b * b - a * a) / (a * a * b * b)
        })
        .sum();
    Ok(sum)
}

/// `I(a, b) = -int_0^1 ln min{a, |b + e^(2 pi i t)|} dt`.
pub fn i_integral(a: f64, b: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if !(a > 0.0) || !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!("need a > 0 and b >= 0, got a = {a}, b = {b}")));
    }
    if b == 0.0 {
        return Ok(-a.min(1.0).ln());
    }
    // |b + e^(2 pi i t)| decreases on [0, 1/2] from b + 1 to |b - 1|,
    // and the integrand is symmetric about t = 1/2.
    if a >= b + 1.0 {
        return Ok(-2.0 * half_log_modulus(b, 0.0, 0.5, tol));
    }
    if a <= (b - 1.0).abs() {
        return Ok(-a.ln());
    }
    let cos_kink = ((a * a - b * b - 1.0) / (2.0 * b)).clamp(-1.0, 1.0);
    let kink = cos_kink.acos() / (2.0 * PI);
    Ok(-2.0 * (kink * a.ln() + half_log_modulus(b, kink, 0.5, tol)))
}

/// `int_lo^hi ln |b + e^(2 pi i t)| dt`.
fn half_log_modulus(b: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let g = move |t: f64| 0.5 * (b * b + 1.0 + 2.0 * b * (2.0 * PI * t).cos()).ln();
    if b == 1.0 {
        // 2 + 2cos(2 pi t) = 4 cos^2(pi t) loses all precision near t = 1/2
        let g1 = |t: f64| (2.0 * (PI * t).cos()).abs().ln();
        return integrate(g1, lo, hi, 0.25 * tol);
    }
    integrate(g, lo, hi, 0.25 * tol)
}

/// `3 sqrt(3) / (4 pi)`, the factor relating the Chebyshev integral to `L(2, chi_3)`.
pub fn chebyshev_l_factor() -> f64 {
    3.0 * 3f64.sqrt() / (4.0 * PI)
}
