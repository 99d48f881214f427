use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;

use commands::Report;

#[derive(Parser, Debug)]
#[command(name = "azpair", version, about = "Arakelov-Zhang pairings of x^2 with polynomial maps over Q")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Seed for all sampling
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Number of backward chains
    #[arg(long, global = true, default_value_t = 20_000)]
    samples: usize,
    /// Backward chain depth
    #[arg(long, global = true, default_value_t = 30)]
    depth: u32,
    /// Levels of the preimage estimator and the Newton polygon series
    #[arg(long = "n-max", global = true, default_value_t = 10)]
    n_max: u32,
    #[arg(long = "clip-eps", global = true, default_value_t = 1e-9)]
    clip_eps: f64,
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Target point for sampling and the preimage estimator (rational)
    #[arg(long, global = true)]
    beta: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pairing of x^2 with a polynomial map, per place
    Pairing {
        poly: String,
        /// Also run the preimage estimator and report both
        #[arg(long = "cross-check")]
        cross_check: bool,
    },
    /// Canonical height of a point (rational or "inf")
    Height { poly: String, point: String },
    /// Newton polygon and root valuations at a prime
    Newton { poly: String, prime: u64 },
    /// Reduction type and local method at every bad prime
    Reduction { poly: String },
    /// Chebyshev integral and L(2, chi_3)
    Constants,
    /// I(a, b) = -int_0^1 ln min(a, |b + e^(2 pi i t)|) dt
    #[command(name = "I")]
    I { a: String, b: String },
    /// Backward-orbit sample of the canonical measure
    Sample { poly: String },
}

/// Settings embedded verbatim in every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub samples: usize,
    pub depth: u32,
    pub n_max: u32,
    pub clip_eps: f64,
    pub tol: f64,
    pub output_format: Format,
    pub beta: Option<String>,
}

pub enum Failure {
    Usage(String),
    Computation(String),
}

impl From<azpair::Error> for Failure {
    fn from(e: azpair::Error) -> Self {
        match e {
            azpair::Error::Parse(_) | azpair::Error::NotPrime(_) => Failure::Usage(e.to_string()),
            _ => Failure::Computation(e.to_string()),
        }
    }
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, Failure> {
        if self.samples == 0 || self.depth == 0 || self.n_max == 0 {
            return Err(Failure::Usage("--samples, --depth and --n-max must be positive".into()));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Failure::Usage(format!("--clip-eps must lie in (0, 1), got {}", self.clip_eps)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Failure::Usage(format!("--tol must be positive, got {}", self.tol)));
        }
        Ok(RunConfig {
            seed: self.seed,
            samples: self.samples,
            depth: self.depth,
            n_max: self.n_max,
            clip_eps: self.clip_eps,
            tol: self.tol,
            output_format: self.format,
            beta: self.beta,
        })
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("AZPAIR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("AZPAIR_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Computation(e.to_string()))
}

fn run(cli: Cli) -> Result<Report, Failure> {
    configure_threads()?;
    let config = cli.run.into_config()?;
    match cli.command {
        Command::Pairing { poly, cross_check } => commands::pairing(&poly, cross_check, config),
        Command::Height { poly, point } => commands::height(&poly, &point, config),
        Command::Newton { poly, prime } => commands::newton(&poly, prime, config),
        Command::Reduction { poly } => commands::reduction(&poly, config),
        Command::Constants => commands::constants(config),
        Command::I { a, b } => commands::i_integral(&a, &b, config),
        Command::Sample { poly } => commands::sample(&poly, config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.run.format;
    match run(cli) {
        Ok(report) => {
            let mut out = std::io::stdout().lock();
            let written = report.write(format, &mut out).and_then(|_| out.flush());
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Computation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
