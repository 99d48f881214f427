//! The Arakelov-Zhang pairing of `x^2` with a polynomial over ℚ, assembled
//! place by place, plus the closed forms and bounds that follow from it.

use num_complex::Complex64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heights::{
    canonical_height, orbit_fate, rational_height, sum_root_heights_from_roots, HeightEstimate, OrbitFate,
    ProjPoint,
};
use crate::integrals::i_integral;
use crate::measure::{
    backward_sample_expanded, certify_disjoint_from_unit_disk, check_not_exceptional, default_beta,
    escape_radius, local_integral_arch, IntegralEstimate,
};
use crate::newton::{has_good_reduction, local_integral_nonarch_series, satisfies_disjointness_condition};
use crate::poly::{check_degree, Poly, DEFAULT_DEGREE_CAP};
use crate::rational::{support_primes, to_f64, ExactRational, Place};
use crate::roots::preimage_tree;

/// Numerical knobs shared by both estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingConfig {
    pub seed: u64,
    /// Number of independent backward chains.
    pub samples: usize,
    pub depth: u32,
    pub n_max: u32,
    pub clip_eps: f64,
    pub tol: f64,
    /// Largest acceptable change between the last two approximants of a series.
    pub stall_tol: f64,
    pub degree_cap: usize,
    /// Levels at the end of each chain that are expanded into all branches.
    /// `None` picks the largest `m` with `d^m <= 64`.
    pub leaf_levels: Option<u32>,
    /// Target point for backward sampling and the preimage estimator.
    #[serde(with = "opt_rational")]
    pub beta: Option<ExactRational>,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig {
            seed: 42,
            samples: 20_000,
            depth: 30,
            n_max: 10,
            clip_eps: 1e-9,
            tol: 1e-8,
            stall_tol: 1e-3,
            degree_cap: DEFAULT_DEGREE_CAP,
            leaf_levels: None,
            beta: None,
        }
    }
}

mod opt_rational {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::rational::{parse_rational, ExactRational};

    pub fn serialize<S: Serializer>(q: &Option<ExactRational>, s: S) -> Result<S::Ok, S::Error> {
        match q {
            Some(q) => s.serialize_some(&q.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ExactRational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    GoodReduction,
    LemmaDisjoint,
    /// Archimedean Julia set proven to miss the unit disk.
    CertifiedDisjoint,
    NewtonPolygonSeries,
    MonteCarlo,
}

impl Method {
    pub fn is_certified_zero(self) -> bool {
        matches!(self, Method::GoodReduction | Method::LemmaDisjoint | Method::CertifiedDisjoint)
    }
}

/// Integral of `ln |a|_v` over the open unit disk against the canonical
/// measure at one place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaceContribution {
    pub place: Place,
    pub contribution: f64,
    pub error_radius: f64,
    pub method: Method,
    /// Level-n approximants for `NewtonPolygonSeries`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approximants: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cauchy: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<IntegralEstimate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EqualityCase {
    ProvenEqual,
    LowerBoundOnly,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub value: f64,
    pub error_radius: f64,
    pub rigorous: bool,
    pub per_place: Vec<PlaceContribution>,
    pub h_phi_zero: HeightEstimate,
    pub equality_case: EqualityCase,
    #[serde(with = "opt_rational")]
    pub beta: Option<ExactRational>,
    pub warnings: Vec<String>,
}

fn leaf_levels(d: usize, config: &PairingConfig) -> u32 {
    let m = config.leaf_levels.unwrap_or_else(|| {
        let mut m = 0;
        while d.pow(m + 1) <= 64 {
            m += 1;
        }
        m
    });
    m.min(config.depth)
}

/// Rejects non-monic maps unless they have good reduction at every prime.
fn check_scope(phi: &Poly) -> Result<()> {
    if phi.is_monic() {
        return Ok(());
    }
    let bad: Vec<String> = support_primes(phi.coeffs())
        .into_iter()
        .filter(|&p| !has_good_reduction(phi, p))
        .map(|p| p.to_string())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "non-monic polynomial with bad reduction at p = {}; only maps that are monic or of good reduction at every prime are handled",
            bad.join(", ")
        )))
    }
}

fn resolve_beta(phi: &Poly, config: &PairingConfig) -> Result<ExactRational> {
    match &config.beta {
        Some(b) => Ok(b.clone()),
        None => default_beta(phi),
    }
}

fn finite_place(
    phi: &Poly,
    p: crate::rational::Prime,
    beta: &mut Option<ExactRational>,
    config: &PairingConfig,
    warnings: &mut Vec<String>,
) -> Result<PlaceContribution> {
    let zero = |method| PlaceContribution {
        place: Place::Finite(p),
        contribution: 0.0,
        error_radius: 0.0,
        method,
        approximants: None,
        cauchy: None,
        monte_carlo: None,
    };
    if has_good_reduction(phi, p) {
        return Ok(zero(Method::GoodReduction));
    }
    if phi.is_monic() && satisfies_disjointness_condition(phi, p)? {
        return Ok(zero(Method::LemmaDisjoint));
    }
    let d = phi.degree();
    let mut n = config.n_max.max(1);
    while n > 1 && check_degree(d, n, config.degree_cap).is_err() {
        n -= 1;
    }
    if n < config.n_max {
        warnings.push(format!("p = {p}: series truncated at n = {n} by the degree cap"));
    }
    let b = match beta {
        Some(b) => b.clone(),
        None => {
            let b = resolve_beta(phi, config)?;
            *beta = Some(b.clone());
            b
        }
    };
    let series = local_integral_nonarch_series(phi, &b, p, n, config.degree_cap)?;
    let last = *series.last().expect("n >= 1");
    let step = if series.len() >= 2 {
        (last - series[series.len() - 2]).abs()
    } else {
        f64::INFINITY
    };
    let cauchy = step <= config.stall_tol;
    if !cauchy {
        warnings.push(format!(
            "p = {p}: approximants not settled (last step {step:.3e} > {:.1e})",
            config.stall_tol
        ));
    }
    Ok(PlaceContribution {
        place: Place::Finite(p),
        contribution: last,
        error_radius: if step.is_finite() { step } else { last.abs() },
        method: Method::NewtonPolygonSeries,
        approximants: Some(series),
        cauchy: Some(cauchy),
        monte_carlo: None,
    })
}

fn archimedean_place(
    phi: &Poly,
    beta: &mut Option<ExactRational>,
    config: &PairingConfig,
    warnings: &mut Vec<String>,
) -> Result<PlaceContribution> {
    if certify_disjoint_from_unit_disk(phi) {
        return Ok(PlaceContribution {
            place: Place::Archimedean,
            contribution: 0.0,
            error_radius: 0.0,
            method: Method::CertifiedDisjoint,
            approximants: None,
            cauchy: None,
            monte_carlo: None,
        });
    }
    let b = match beta {
        Some(b) => b.clone(),
        None => {
            let b = resolve_beta(phi, config)?;
            *beta = Some(b.clone());
            b
        }
    };
    let bc = Complex64::new(to_f64(&b), 0.0);
    let m = leaf_levels(phi.degree(), config);
    let sample = backward_sample_expanded(phi, bc, config.depth, config.samples, config.seed, m)?;
    let est = local_integral_arch(&sample, config.clip_eps)?;
    let finer = local_integral_arch(&sample, config.clip_eps / 10.0)?;
    if (est.value - finer.value).abs() > 3.0 * (est.std_error.powi(2) + finer.std_error.powi(2)).sqrt() {
        warnings.push(format!(
            "archimedean estimate moves from {:.6} to {:.6} when clip_eps shrinks tenfold; 0 is likely on the Julia set",
            est.value, finer.value
        ));
    }
    if est.clipped_mass > 0.0 {
        warnings.push(format!("clipped mass {:.2e} at radius {:.1e}", est.clipped_mass, config.clip_eps));
    }
    Ok(PlaceContribution {
        place: Place::Archimedean,
        contribution: est.value,
        error_radius: 3.0 * est.std_error,
        method: Method::MonteCarlo,
        approximants: None,
        cauchy: None,
        monte_carlo: Some(est),
    })
}

/// Estimator A: `h_phi(0)` minus the sum over places of the unit-disk log
/// integrals against the canonical measures.
pub fn pairing_via_theorem1(phi: &Poly, config: &PairingConfig) -> Result<PairingReport> {
    phi.require_degree(2)?;
    check_scope(phi)?;
    let h = canonical_height(phi, &ProjPoint::Finite(ExactRational::zero()), config.tol)?;
    let mut warnings = Vec::new();
    let mut beta = config.beta.clone();
    let mut per_place = vec![archimedean_place(phi, &mut beta, config, &mut warnings)?];
    for p in support_primes(phi.coeffs()) {
        per_place.push(finite_place(phi, p, &mut beta, config, &mut warnings)?);
    }

    let total: f64 = per_place.iter().map(|c| c.contribution).sum();
    let error_radius = h.error_radius + per_place.iter().map(|c| c.error_radius).sum::<f64>();
    let rigorous = h.rigorous
        && per_place.iter().all(|c| match c.method {
            Method::MonteCarlo => false,
            Method::NewtonPolygonSeries => c.cauchy == Some(true),
            _ => true,
        });
    let equality_case = if per_place.iter().all(|c| c.method.is_certified_zero()) {
        EqualityCase::ProvenEqual
    } else if per_place.iter().any(|c| match c.method {
        Method::MonteCarlo => {
            let e = c.monte_carlo.expect("set for MonteCarlo");
            e.value < -3.0 * e.std_error
        }
        Method::NewtonPolygonSeries => c.contribution < 0.0,
        _ => false,
    }) {
        EqualityCase::LowerBoundOnly
    } else {
        EqualityCase::Unknown
    };
    Ok(PairingReport {
        value: h.value - total,
        error_radius,
        rigorous,
        per_place,
        h_phi_zero: h,
        equality_case,
        beta,
        warnings,
    })
}

/// Estimator B values `(1/d^n) sum over phi^n(a) = beta of h(a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreimageSeries {
    #[serde(with = "crate::rational::serde_rational")]
    pub beta: ExactRational,
    pub estimates: Vec<(u32, f64)>,
    /// Set when the last two estimates differ by more than the stall tolerance.
    pub stalled: bool,
}

/// Estimator B. Roots of `phi^n - beta` come from the backward preimage
/// tree; the leading coefficient of the primitive integer form is exact.
pub fn pairing_via_preimages(phi: &Poly, beta: &ExactRational, n_max: u32) -> Result<PreimageSeries> {
    let config = PairingConfig {
        n_max,
        ..PairingConfig::default()
    };
    pairing_via_preimages_with(phi, beta, &config)
}

pub fn pairing_via_preimages_with(phi: &Poly, beta: &ExactRational, config: &PairingConfig) -> Result<PreimageSeries> {
    let d = phi.require_degree(2)?;
    let n_max = config.n_max;
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    check_degree(d, n_max, config.degree_cap)?;
    let bc = Complex64::new(to_f64(beta), 0.0);
    check_not_exceptional(phi, bc)?;
    // orbit avoidance: beta must not be phi^k(0) for k <= n_max
    let mut y = ExactRational::zero();
    for k in 1..=n_max {
        y = phi.eval(&y);
        if &y == beta {
            return Err(Error::SingularIntegrand { n: k });
        }
    }
    let mut estimates = Vec::with_capacity(n_max as usize);
    let mut iter = phi.clone();
    let mut roots = vec![bc];
    let base = phi.clone();
    for n in 1..=n_max {
        if n > 1 {
            iter = phi.compose(&iter);
        }
        roots = {
            let mut next = Vec::with_capacity(roots.len() * d);
            for &z in &roots {
                next.extend(preimage_tree(&base, z, 1)?);
            }
            next
        };
        let f = iter.sub_constant(beta);
        let total = sum_root_heights_from_roots(&f, &roots)?;
        estimates.push((n, total / (d as f64).powi(n as i32)));
    }
    let stalled = estimates.len() >= 2 && {
        let k = estimates.len();
        (estimates[k - 1].1 - estimates[k - 2].1).abs() > config.stall_tol
    };
    Ok(PreimageSeries {
        beta: beta.clone(),
        estimates,
        stalled,
    })
}

/// `ProvenEqual` when every place is certified to contribute 0, so that the
/// pairing equals `h_phi(0)`; otherwise only the lower bound is known.
pub fn equality_certificate(phi: &Poly) -> Result<EqualityCase> {
    phi.require_degree(2)?;
    if !phi.is_monic() {
        return Err(Error::NotMonic);
    }
    for p in support_primes(phi.coeffs()) {
        if !(has_good_reduction(phi, p) || satisfies_disjointness_condition(phi, p)?) {
            return Ok(EqualityCase::LowerBoundOnly);
        }
    }
    Ok(if certify_disjoint_from_unit_disk(phi) {
        EqualityCase::ProvenEqual
    } else {
        EqualityCase::LowerBoundOnly
    })
}

/// Pairing of `x^2` with its conjugate `f^-1(f(x)^2)` by `f = a x + b`:
/// `h(b) + ln|a| + I(|a|, |b|)`.
pub fn conjugated_squaring_pairing(a: &ExactRational, b: &ExactRational, tol: f64) -> Result<f64> {
    if a.is_zero() {
        return Err(Error::InvalidArgument("a must be nonzero".into()));
    }
    let (aa, bb) = (to_f64(&a.abs()), to_f64(&b.abs()));
    Ok(rational_height(b) + aa.ln() + i_integral(aa, bb, tol)?)
}

/// The explicit map `f^-1(f(x)^2)` for `f = a x + b`, i.e. `a x^2 + 2 b x + (b^2 - b)/a`.
pub fn conjugated_squaring_map(a: &ExactRational, b: &ExactRational) -> Result<Poly> {
    if a.is_zero() {
        return Err(Error::InvalidArgument("a must be nonzero".into()));
    }
    let two = ExactRational::from_integer(2.into());
    Ok(Poly::new(vec![(b * b - b) / a, &two * b, a.clone()]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadBounds {
    pub lower: f64,
    pub upper: f64,
    pub exact: Option<HeightEstimate>,
}

/// Bracket `h(c)/2 - ln 3 <= <x^2, x^2 + c> <= h(c)/2 + ln 2`, and the exact
/// value `h_phi(0)` when `|c| >= 2 + sqrt 2`.
pub fn quad_family_bounds(c: &ExactRational, tol: f64) -> Result<QuadBounds> {
    let hc = rational_height(c);
    let phi = Poly::new(vec![c.clone(), ExactRational::zero(), ExactRational::from_integer(1.into())]);
    let exact = if c.is_zero() {
        Some(HeightEstimate::exact(0.0))
    } else if to_f64(&c.abs()) >= 2.0 + 2f64.sqrt() {
        Some(canonical_height(&phi, &ProjPoint::Finite(ExactRational::zero()), tol)?)
    } else {
        None
    };
    Ok(QuadBounds {
        lower: 0.5 * hc - 3f64.ln(),
        upper: 0.5 * hc + 2f64.ln(),
        exact,
    })
}

/// `pairing + h_phi(inf) + ln 2` with `h_phi(inf) = 0` for polynomials: an
/// upper bound on `h_phi(z) - h(z)`.
pub fn height_difference_bound(report: &PairingReport) -> f64 {
    report.value + 2f64.ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    True,
    False,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub zero_preperiodic: TriState,
    pub julia_disjoint_certified: bool,
    pub hypotheses_hold: TriState,
    pub conclusion_is_power_map: bool,
    /// Hypotheses hold but the map is not `x^d`.
    pub contradiction: bool,
}

/// Checks the hypotheses of the rigidity statement (0 preperiodic, Julia set
/// disjoint from the unit disk) and whether the map is `x^d`.
pub fn rigidity_check(phi: &Poly) -> Result<RigidityReport> {
    let d = phi.require_degree(2)?;
    if !phi.is_monic() || !phi.has_integer_coeffs() {
        return Err(Error::Unsupported("rigidity check needs a monic polynomial with integer coefficients".into()));
    }
    let zero_preperiodic = match orbit_fate(phi, &ExactRational::zero(), escape_radius(phi), 256) {
        OrbitFate::Preperiodic { .. } => TriState::True,
        OrbitFate::Escapes { .. } => TriState::False,
        OrbitFate::Undecided => TriState::Indeterminate,
    };
    let certified = certify_disjoint_from_unit_disk(phi);
    let hypotheses_hold = match (zero_preperiodic, certified) {
        (_, false) | (TriState::False, _) => TriState::False,
        (TriState::True, true) => TriState::True,
        (TriState::Indeterminate, true) => TriState::Indeterminate,
    };
    let conclusion_is_power_map = phi.coeffs()[..d].iter().all(Zero::is_zero);
    Ok(RigidityReport {
        zero_preperiodic,
        julia_disjoint_certified: certified,
        hypotheses_hold,
        conclusion_is_power_map,
        contradiction: hypotheses_hold == TriState::True && !conclusion_is_power_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn p(s: &str) -> Poly {
        Poly::parse(s).unwrap()
    }
    fn q(s: &str) -> ExactRational {
        parse_rational(s).unwrap()
    }
    fn quick() -> PairingConfig {
        PairingConfig {
            samples: 2000,
            ..PairingConfig::default()
        }
    }

    #[test]
    fn power_maps_pair_to_zero() {
        for s in ["x^2", "x^3"] {
            let r = pairing_via_theorem1(&p(s), &quick()).unwrap();
            assert_eq!(r.value, 0.0);
            assert_eq!(r.equality_case, EqualityCase::ProvenEqual);
            assert!(r.rigorous);
        }
    }

    #[test]
    fn x2_plus_5_equals_canonical_height() {
        let r = pairing_via_theorem1(&p("x^2 + 5"), &quick()).unwrap();
        assert_eq!(r.value, r.h_phi_zero.value);
        assert!(r.per_place.iter().all(|c| c.contribution == 0.0));
        assert_eq!(r.per_place.len(), 2);
        assert_eq!(r.per_place[1].method, Method::GoodReduction);
        assert_eq!(r.equality_case, EqualityCase::ProvenEqual);
    }

    #[test]
    fn bad_prime_series_is_reported() {
        let r = pairing_via_theorem1(
            &p("x^2 + x/2 + 1/2"),
            &PairingConfig {
                n_max: 6,
                ..quick()
            },
        )
        .unwrap();
        let two = r.per_place.iter().find(|c| c.place.to_string() == "2").unwrap();
        assert_eq!(two.method, Method::NewtonPolygonSeries);
        assert_eq!(two.approximants.as_ref().unwrap().len(), 6);
        let sum: f64 = r.per_place.iter().map(|c| c.contribution).sum();
        assert!((r.value - (r.h_phi_zero.value - sum)).abs() < 1e-12);
    }

    #[test]
    fn non_monic_scope() {
        assert!(matches!(
            pairing_via_theorem1(&p("2x^2 + 1"), &quick()),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(equality_certificate(&p("2x^2")), Err(Error::NotMonic)));
    }

    #[test]
    fn preimage_estimator_power_map() {
        let s = pairing_via_preimages(&p("x^2"), &q("3"), 8).unwrap();
        for (n, v) in &s.estimates {
            assert!((v - 3f64.ln() / 2f64.powi(*n as i32)).abs() < 1e-12, "n={n}: {v}");
        }
    }

    #[test]
    fn preimage_tree_matches_coefficient_roots_small_n() {
        let phi = p("x^2 - x + 3/2");
        let beta = q("2");
        let s = pairing_via_preimages(&phi, &beta, 4).unwrap();
        for (n, v) in s.estimates {
            let f = phi.iterate(n).unwrap().sub_constant(&beta);
            let direct = crate::heights::sum_root_heights(&f).unwrap().value / 2f64.powi(n as i32);
            assert!((v - direct).abs() < 1e-9, "n={n}: {v} vs {direct}");
        }
    }

    #[test]
    fn certificates() {
        assert_eq!(equality_certificate(&p("x^2 + 5")).unwrap(), EqualityCase::ProvenEqual);
        assert_eq!(equality_certificate(&p("x^2 - 2")).unwrap(), EqualityCase::LowerBoundOnly);
        assert_eq!(equality_certificate(&p("x^2")).unwrap(), EqualityCase::ProvenEqual);
    }

    #[test]
    fn conjugated_squaring_examples() {
        let tol = 1e-10;
        assert_eq!(conjugated_squaring_pairing(&q("1"), &q("0"), tol).unwrap(), 0.0);
        let v = conjugated_squaring_pairing(&q("1"), &q("1"), tol).unwrap();
        assert!((v - 0.3231).abs() < 1e-4);
        let v = conjugated_squaring_pairing(&q("2"), &q("1"), tol).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-8);
        assert_eq!(conjugated_squaring_map(&q("1"), &q("1")).unwrap(), p("x^2 + 2x"));
        assert_eq!(conjugated_squaring_map(&q("2"), &q("1")).unwrap(), p("2x^2 + 2x"));
    }

    #[test]
    fn quad_bounds_examples() {
        let b = quad_family_bounds(&q("5"), 1e-8).unwrap();
        assert!((b.lower - (0.5 * 5f64.ln() - 3f64.ln())).abs() < 1e-15);
        assert!((b.upper - (0.5 * 5f64.ln() + 2f64.ln())).abs() < 1e-15);
        assert!((b.exact.unwrap().value - 0.850_992_249_5).abs() < 1e-6);
        let b = quad_family_bounds(&q("0"), 1e-8).unwrap();
        assert_eq!(b.exact.unwrap().value, 0.0);
        assert!(quad_family_bounds(&q("-1"), 1e-8).unwrap().exact.is_none());
    }

    #[test]
    fn rigidity_examples() {
        let r = rigidity_check(&p("x^3")).unwrap();
        assert_eq!((r.hypotheses_hold, r.conclusion_is_power_map), (TriState::True, true));
        let r = rigidity_check(&p("x^2 - 1")).unwrap();
        assert_eq!(r.zero_preperiodic, TriState::True);
        assert_eq!((r.hypotheses_hold, r.conclusion_is_power_map), (TriState::False, false));
        let r = rigidity_check(&p("x^2 + 5")).unwrap();
        assert_eq!(r.zero_preperiodic, TriState::False);
        assert_eq!((r.hypotheses_hold, r.conclusion_is_power_map), (TriState::False, false));
    }

    #[test]
    fn config_round_trips() {
        let c = PairingConfig {
            beta: Some(q("7/3")),
            ..PairingConfig::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<PairingConfig>(&s).unwrap(), c);
    }
}
