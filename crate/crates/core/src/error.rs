use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("valuation of zero undefined")]
    ZeroValuation,

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("zero polynomial")]
    ZeroPolynomial,

    #[error("polynomial degree {got} too small (need at least {needed})")]
    DegreeTooSmall { needed: usize, got: usize },

    #[error("degree {degree} exceeds the configured degree cap {cap}")]
    DegreeCapExceeded { degree: u128, cap: usize },

    #[error("root finder did not converge after {iterations} iterations (max residual {max_residual:e})")]
    RootFinding {
        iterations: usize,
        max_residual: f64,
        best: Vec<Complex64>,
        residuals: Vec<f64>,
    },

    #[error("coefficient magnitudes span more than double precision can represent")]
    DynamicRange,

    #[error("integrand singular: 0 is an n-th preimage of beta (n = {n}); choose a different beta")]
    SingularIntegrand { n: u32 },

    #[error("beta appears exceptional for this map")]
    ExceptionalBeta,

    #[error("backward sampling failed in chain {chain}: {source}")]
    Chain {
        chain: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("polynomial is not monic")]
    NotMonic,

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("orbit of the point outgrew the {budget_bits}-bit budget before any iterate; try a larger eps")]
    HeightBudget { budget_bits: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
