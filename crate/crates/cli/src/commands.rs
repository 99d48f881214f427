use std::io::{self, Write};

use azpair::heights::{canonical_height, ProjPoint};
use azpair::integrals::{chebyshev_integral, chebyshev_l_factor, dirichlet_l_chi3};
use azpair::measure::{backward_sample, certify_disjoint_from_unit_disk, default_beta};
use azpair::newton::{has_good_reduction, newton_polygon, root_valuations, satisfies_disjointness_condition};
use azpair::pairing::{pairing_via_preimages_with, pairing_via_theorem1, Method, PairingConfig};
use azpair::poly::Poly;
use azpair::rational::{parse_rational, support_primes, to_f64, ExactRational, Prime};
use num_complex::Complex64;
use serde::Serialize;

use crate::{Failure, Format, RunConfig};

pub struct Report {
    json: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    text: String,
}

#[derive(Serialize)]
struct Envelope<'a, I: Serialize, R: Serialize> {
    schema: u32,
    command: &'a str,
    input: I,
    config: &'a RunConfig,
    result: R,
}

impl Report {
    fn new<I: Serialize, R: Serialize>(command: &str, input: I, config: &RunConfig, result: R) -> Result<Self, Failure> {
        let env = Envelope {
            schema: 1,
            command,
            input,
            config,
            result,
        };
        let json = serde_json::to_string_pretty(&env).map_err(|e| Failure::Computation(e.to_string()))?;
        Ok(Report {
            json,
            header: Vec::new(),
            rows: Vec::new(),
            text: String::new(),
        })
    }

    fn table(mut self, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        self.header = header.iter().map(|s| s.to_string()).collect();
        self.rows = rows;
        self
    }

    fn text(mut self, text: String) -> Self {
        self.text = text;
        self
    }

    pub fn write<W: Write>(&self, format: Format, out: &mut W) -> io::Result<()> {
        match format {
            Format::Json => writeln!(out, "{}", self.json),
            Format::Text => write!(out, "{}", self.text),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.header)?;
                for r in &self.rows {
                    w.write_record(r)?;
                }
                w.flush()
            }
        }
    }
}

fn parse_poly(s: &str) -> Result<Poly, Failure> {
    Ok(Poly::parse(s)?)
}

fn beta_arg(config: &RunConfig) -> Result<Option<ExactRational>, Failure> {
    Ok(config.beta.as_deref().map(parse_rational).transpose()?)
}

fn pairing_config(config: &RunConfig) -> Result<PairingConfig, Failure> {
    Ok(PairingConfig {
        seed: config.seed,
        samples: config.samples,
        depth: config.depth,
        n_max: config.n_max,
        clip_eps: config.clip_eps,
        tol: config.tol,
        beta: beta_arg(config)?,
        ..PairingConfig::default()
    })
}

#[derive(Serialize)]
struct PolyInput<'a> {
    poly: &'a Poly,
}

pub fn pairing(poly: &str, cross_check: bool, config: RunConfig) -> Result<Report, Failure> {
    let phi = parse_poly(poly)?;
    let pc = pairing_config(&config)?;
    let report = pairing_via_theorem1(&phi, &pc)?;
    let series = if cross_check {
        let beta = match &report.beta {
            Some(b) => b.clone(),
            None => default_beta(&phi)?,
        };
        // keep d^n within the degree cap
        let d = phi.degree();
        let mut n = 1;
        while n < pc.n_max && (d as u128).pow(n + 1) <= pc.degree_cap as u128 {
            n += 1;
        }
        let bc = PairingConfig {
            n_max: n,
            ..pc.clone()
        };
        Some(pairing_via_preimages_with(&phi, &beta, &bc)?)
    } else {
        None
    };

    let mut text = format!(
        "pairing {:.10} +/- {:.3e} ({})\nh_phi(0) {:.10} +/- {:.3e}\n",
        report.value,
        report.error_radius,
        if report.rigorous { "rigorous" } else { "statistical" },
        report.h_phi_zero.value,
        report.h_phi_zero.error_radius,
    );
    let mut rows = Vec::new();
    for c in &report.per_place {
        text.push_str(&format!(
            "  {:>4}: {:.10} +/- {:.3e} {:?}\n",
            c.place.to_string(),
            c.contribution,
            c.error_radius,
            c.method
        ));
        rows.push(vec![
            c.place.to_string(),
            c.contribution.to_string(),
            c.error_radius.to_string(),
            format!("{:?}", c.method),
        ]);
    }
    if let Some(s) = &series {
        if let Some(&(n, v)) = s.estimates.last() {
            text.push_str(&format!("preimages: B_{n} = {v:.10} (beta = {})\n", s.beta));
        }
    }
    for w in &report.warnings {
        text.push_str(&format!("warning: {w}\n"));
    }

    #[derive(Serialize)]
    struct Out<'a> {
        report: &'a azpair::pairing::PairingReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        cross_check: Option<&'a azpair::pairing::PreimageSeries>,
    }
    let out = Out {
        report: &report,
        cross_check: series.as_ref(),
    };
    Ok(Report::new("pairing", PolyInput { poly: &phi }, &config, out)?
        .table(&["place", "contribution", "error_radius", "method"], rows)
        .text(text))
}

pub fn height(poly: &str, point: &str, config: RunConfig) -> Result<Report, Failure> {
    let phi = parse_poly(poly)?;
    let x = ProjPoint::parse(point)?;
    let est = canonical_height(&phi, &x, config.tol)?;
    #[derive(Serialize)]
    struct Input<'a> {
        poly: &'a Poly,
        point: &'a ProjPoint,
    }
    let text = format!("{:.12} +/- {:.3e} after {} iterates\n", est.value, est.error_radius, est.iterations);
    let rows = vec![vec![est.value.to_string(), est.error_radius.to_string(), est.iterations.to_string()]];
    Ok(Report::new("height", Input { poly: &phi, point: &x }, &config, est)?
        .table(&["value", "error_radius", "iterations"], rows)
        .text(text))
}

pub fn newton(poly: &str, prime: u64, config: RunConfig) -> Result<Report, Failure> {
    let f = parse_poly(poly)?;
    let p = Prime::new(prime)?;
    let polygon = newton_polygon(&f, p)?;
    let valuations = root_valuations(&f, p)?;
    let mut text = String::new();
    let mut rows = Vec::new();
    for seg in polygon.segments() {
        text.push_str(&format!("slope {} x {}\n", seg.slope, seg.length));
        rows.push(vec![seg.slope.to_string(), seg.length.to_string()]);
    }
    #[derive(Serialize)]
    struct Input<'a> {
        poly: &'a Poly,
        prime: Prime,
    }
    #[derive(Serialize)]
    struct Out<'a> {
        polygon: &'a azpair::newton::NewtonPolygon,
        root_valuations: &'a azpair::newton::ValuationMultiset,
    }
    let out = Out {
        polygon: &polygon,
        root_valuations: &valuations,
    };
    Ok(Report::new("newton", Input { poly: &f, prime: p }, &config, out)?
        .table(&["slope", "length"], rows)
        .text(text))
}

pub fn reduction(poly: &str, config: RunConfig) -> Result<Report, Failure> {
    let phi = parse_poly(poly)?;
    phi.require_degree(2)?;
    #[derive(Serialize)]
    struct Row {
        prime: Prime,
        good_reduction: bool,
        /// `None` when the map is not monic
        lemma_condition: Option<bool>,
        /// `None` when no local method applies
        method: Option<Method>,
    }
    let mut out = Vec::new();
    for p in support_primes(phi.coeffs()) {
        let good = has_good_reduction(&phi, p);
        let lemma = match satisfies_disjointness_condition(&phi, p) {
            Ok(b) => Some(b),
            Err(azpair::Error::NotMonic) => None,
            Err(e) => return Err(e.into()),
        };
        let method = if good {
            Some(Method::GoodReduction)
        } else {
            match lemma {
                Some(true) => Some(Method::LemmaDisjoint),
                Some(false) => Some(Method::NewtonPolygonSeries),
                None => None,
            }
        };
        out.push(Row {
            prime: p,
            good_reduction: good,
            lemma_condition: lemma,
            method,
        });
    }
    let certified = certify_disjoint_from_unit_disk(&phi);
    let tag = |m: Option<Method>| m.map_or("unsupported".to_string(), |m| format!("{m:?}"));
    let mut text = format!(
        "inf: {}\n",
        if certified { "CertifiedDisjoint" } else { "MonteCarlo" }
    );
    let mut rows = Vec::new();
    for r in &out {
        text.push_str(&format!("{}: {}\n", r.prime, tag(r.method)));
        rows.push(vec![r.prime.to_string(), r.good_reduction.to_string(), tag(r.method)]);
    }
    #[derive(Serialize)]
    struct Out {
        archimedean_certified_disjoint: bool,
        primes: Vec<Row>,
    }
    let result = Out {
        archimedean_certified_disjoint: certified,
        primes: out,
    };
    Ok(Report::new("reduction", PolyInput { poly: &phi }, &config, result)?
        .table(&["prime", "good_reduction", "method"], rows)
        .text(text))
}

pub fn constants(config: RunConfig) -> Result<Report, Failure> {
    #[derive(Serialize)]
    struct Out {
        chebyshev_integral: f64,
        l2_chi3: f64,
        factor: f64,
        chebyshev_from_l: f64,
    }
    let l = dirichlet_l_chi3(config.tol)?;
    let out = Out {
        chebyshev_integral: chebyshev_integral(config.tol)?,
        l2_chi3: l,
        factor: chebyshev_l_factor(),
        chebyshev_from_l: chebyshev_l_factor() * l,
    };
    let text = format!(
        "chebyshev {:.10}\nL(2, chi_3) {:.10}\n3 sqrt(3) / (4 pi) L(2, chi_3) {:.10}\n",
        out.chebyshev_integral, out.l2_chi3, out.chebyshev_from_l
    );
    let rows = vec![
        vec!["chebyshev_integral".into(), out.chebyshev_integral.to_string()],
        vec!["l2_chi3".into(), out.l2_chi3.to_string()],
        vec!["factor".into(), out.factor.to_string()],
        vec!["chebyshev_from_l".into(), out.chebyshev_from_l.to_string()],
    ];
    Ok(Report::new("constants", serde_json::Value::Null, &config, out)?
        .table(&["name", "value"], rows)
        .text(text))
}

fn parse_real(s: &str) -> Result<f64, Failure> {
    if let Ok(q) = parse_rational(s) {
        return Ok(to_f64(&q));
    }
    s.trim()
        .parse::<f64>()
        .map_err(|_| Failure::Usage(format!("{s:?} is not a number")))
}

pub fn i_integral(a: &str, b: &str, config: RunConfig) -> Result<Report, Failure> {
    let (a, b) = (parse_real(a)?, parse_real(b)?);
    if !(a > 0.0) || !(b >= 0.0) {
        return Err(Failure::Usage(format!("need a > 0 and b >= 0, got a = {a}, b = {b}")));
    }
    let v = azpair::integrals::i_integral(a, b, config.tol)?;
    #[derive(Serialize)]
    struct Input {
        a: f64,
        b: f64,
    }
    Ok(Report::new("I", Input { a, b }, &config, v)?
        .table(&["a", "b", "value"], vec![vec![a.to_string(), b.to_string(), v.to_string()]])
        .text(format!("{v:.12}\n")))
}

pub fn sample(poly: &str, config: RunConfig) -> Result<Report, Failure> {
    let phi = parse_poly(poly)?;
    let beta = match beta_arg(&config)? {
        Some(b) => b,
        None => default_beta(&phi)?,
    };
    let s = backward_sample(
        &phi,
        Complex64::new(to_f64(&beta), 0.0),
        config.depth,
        config.samples,
        config.seed,
    )?;
    let rows: Vec<Vec<String>> = s
        .points
        .iter()
        .map(|z| vec![format!("{:e}", z.re), format!("{:e}", z.im)])
        .collect();
    let text = format!(
        "{} points at depth {} from beta = {beta} (seed {})\n",
        s.points.len(),
        s.depth,
        s.seed
    );
    Ok(Report::new("sample", PolyInput { poly: &phi }, &config, &s)?
        .table(&["re", "im"], rows)
        .text(text))
}
