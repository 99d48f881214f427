//! Newton polygons over ℚ_p and the non-archimedean local integrals.

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::poly::{check_degree, Poly, DEFAULT_DEGREE_CAP};
use crate::rational::{valuation, ExactRational, Prime};

/// Lower convex hull of `{(i, v_p(a_i)) : a_i != 0}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonPolygon {
    pub prime: Prime,
    /// `(index, valuation)`, strictly increasing in index.
    pub vertices: Vec<(usize, i64)>,
}

/// One edge of the polygon: `length` roots of valuation `-slope`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub slope: Rational64,
    pub length: usize,
}

impl NewtonPolygon {
    pub fn segments(&self) -> Vec<Segment> {
        self.vertices
            .windows(2)
            .map(|w| {
                let (i, vi) = w[0];
                let (j, vj) = w[1];
                Segment {
                    slope: Rational64::new(vj - vi, (j - i) as i64),
                    length: j - i,
                }
            })
            .collect()
    }
}

impl Serialize for NewtonPolygon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Slope {
            slope: String,
            length: usize,
        }
        let vertices: Vec<(usize, String)> =
            self.vertices.iter().map(|&(i, v)| (i, v.to_string())).collect();
        let slopes: Vec<Slope> = self
            .segments()
            .into_iter()
            .map(|seg| Slope {
                slope: seg.slope.to_string(),
                length: seg.length,
            })
            .collect();
        let mut st = s.serialize_struct("NewtonPolygon", 3)?;
        st.serialize_field("prime", &self.prime)?;
        st.serialize_field("vertices", &vertices)?;
        st.serialize_field("slopes", &slopes)?;
        st.end()
    }
}

/// Valuations of the roots of a polynomial in an algebraic closure of ℚ_p.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValuationMultiset {
    /// `(valuation, multiplicity)`, valuations distinct and ascending.
    pub entries: Vec<(Rational64, usize)>,
    /// Number of roots equal to 0 (valuation +inf), kept out of `entries`.
    pub zero_roots: usize,
}

impl ValuationMultiset {
    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum::<usize>() + self.zero_roots
    }
}

impl Serialize for ValuationMultiset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<(String, usize)> =
            self.entries.iter().map(|(v, m)| (v.to_string(), *m)).collect();
        let mut st = s.serialize_struct("ValuationMultiset", 2)?;
        st.serialize_field("entries", &entries)?;
        st.serialize_field("zero_roots", &self.zero_roots)?;
        st.end()
    }
}

fn coefficient_points(f: &Poly, p: Prime) -> Result<Vec<(usize, i64)>> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    f.coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| Ok((i, valuation(c, p)?)))
        .collect()
}

/// Lower hull by a monotone chain; collinear points are dropped.
fn lower_hull(points: &[(usize, i64)]) -> Vec<(usize, i64)> {
    let mut hull: Vec<(usize, i64)> = Vec::with_capacity(points.len());
    for &pt in points {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            // keep (x2,y2) only if it lies strictly below the chord to pt
            let cross = (x2 as i128 - x1 as i128) * (pt.1 as i128 - y1 as i128)
                - (y2 as i128 - y1 as i128) * (pt.0 as i128 - x1 as i128);
            if cross <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    hull
}

/// Newton polygon of `f` at `p`. Zero roots (vanishing low coefficients)
/// simply shift the polygon to start at the first nonzero coefficient.
pub fn newton_polygon(f: &Poly, p: Prime) -> Result<NewtonPolygon> {
    let pts = coefficient_points(f, p)?;
    Ok(NewtonPolygon {
        prime: p,
        vertices: lower_hull(&pts),
    })
}

pub fn root_valuations(f: &Poly, p: Prime) -> Result<ValuationMultiset> {
    let np = newton_polygon(f, p)?;
    let zero_roots = np.vertices[0].0;
    let mut entries: Vec<(Rational64, usize)> = np
        .segments()
        .into_iter()
        .map(|s| (-s.slope, s.length))
        .collect();
    // slopes increase left to right; reversing makes valuations ascending
    entries.reverse();
    Ok(ValuationMultiset { entries, zero_roots })
}

/// `v_p(a_d) = 0` and `v_p(a_i) >= 0` for every `i`.
pub fn has_good_reduction(phi: &Poly, p: Prime) -> bool {
    phi.coeffs()
        .iter()
        .filter(|c| !c.is_zero())
        .all(|c| valuation(c, p).map(|v| v >= 0).unwrap_or(true))
        && phi.leading().is_some_and(|a| matches!(valuation(a, p), Ok(0)))
}

/// The criterion `v(a_0) <= 0` and `v(a_0) < v(a_i)` for `0 < i <= d` under
/// which no preimage of a suitable `beta` meets the open unit disk. When
/// `v(a_0) = 0` this reduces to good reduction.
pub fn satisfies_disjointness_condition(phi: &Poly, p: Prime) -> Result<bool> {
    phi.require_degree(2)?;
    if !phi.is_monic() {
        return Err(Error::NotMonic);
    }
    let a0 = phi.coeff(0);
    if a0.is_zero() {
        return Ok(false);
    }
    let v0 = valuation(&a0, p)?;
    if v0 > 0 {
        return Ok(false);
    }
    if v0 == 0 {
        return Ok(has_good_reduction(phi, p));
    }
    Ok(phi.coeffs()[1..]
        .iter()
        .filter(|c| !c.is_zero())
        .all(|c| valuation(c, p).map(|v| v > v0).unwrap_or(true)))
}

/// `sum over entries with v > 0 of m * (-v ln p)`, the level term before
/// dividing by the degree.
fn positive_part(f: &Poly, p: Prime, level: u32) -> Result<f64> {
    let rv = root_valuations(f, p)?;
    if rv.zero_roots > 0 {
        return Err(Error::SingularIntegrand { n: level });
    }
    let mut acc = Rational64::zero();
    for (v, m) in &rv.entries {
        if v.is_positive() {
            acc += *v * *m as i64;
        }
    }
    Ok(-(*acc.numer() as f64 / *acc.denom() as f64) * p.ln())
}

/// Level-`n` approximant to the integral of `ln |a|_p` over the open unit
/// disk against the canonical measure, from the roots of `phi^n - beta`.
pub fn local_integral_nonarch(phi: &Poly, beta: &ExactRational, p: Prime, n: u32) -> Result<f64> {
    let d = phi.require_degree(2)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let f = phi.iterate_capped(n, DEFAULT_DEGREE_CAP)?.sub_constant(beta);
    Ok(positive_part(&f, p, n)? / (d as f64).powi(n as i32))
}

/// Approximants for levels `1..=n_max`, sharing the iterate computation.
pub fn local_integral_nonarch_series(
    phi: &Poly,
    beta: &ExactRational,
    p: Prime,
    n_max: u32,
    degree_cap: usize,
) -> Result<Vec<f64>> {
    let d = phi.require_degree(2)?;
    if n_max == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    check_degree(d, n_max, degree_cap)?;
    let mut out = Vec::with_capacity(n_max as usize);
    let mut iter = phi.clone();
    for level in 1..=n_max {
        if level > 1 {
            iter = phi.compose(&iter);
        }
        let f = iter.sub_constant(beta);
        let scale = (d as f64).powi(level as i32);
        out.push(positive_part(&f, p, level)? / scale);
    }
    Ok(out)
}
