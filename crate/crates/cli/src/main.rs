//! `qdiff`: critical graphs, Σ, periods, spectra and measures from the
//! command line.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 incomplete computation,
//! 3 invalid or degenerate input.

mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Status;
use config::Settings;

#[derive(Parser)]
#[command(
    name = "qdiff",
    version,
    about = "Critical graphs and limit measures of -q(z)/z dz^2"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Region of an apex and its short-trajectory count.
    Classify,
    /// Critical graph as CSV, optionally SVG.
    Graph,
    /// The curve S = 0 with its conjugate branch.
    Sigma,
    /// Contour, residue and short-trajectory periods.
    Periods,
    /// Eigenvalues, rescaled roots and scaling tables.
    Spectrum,
    /// Support and density of the limit measure for (γ, δ).
    Measure,
    /// Runs the invariant suite.
    Verify,
}

#[derive(Args)]
struct Opts {
    /// Apex `a` of (z-1)(z-a)(z-conj a), e.g. `1.6+2i`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<String>,
    /// Three roots of q, comma separated.
    #[arg(long, global = true, allow_hyphen_values = true)]
    roots: Option<String>,
    #[arg(long, global = true)]
    m: Option<String>,
    /// `a:b`, `a:b:step` or `a,b,c`.
    #[arg(long = "m-range", global = true)]
    m_range: Option<String>,
    #[arg(long = "eps-hit", global = true, allow_hyphen_values = true)]
    eps_hit: Option<String>,
    /// Escape disk of the tracer; for `sigma`, the |z| at which tracing stops.
    #[arg(long = "escape-radius", global = true, allow_hyphen_values = true)]
    escape_radius: Option<String>,
    /// Main CSV output (stdout when absent).
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    svg: Option<String>,
    /// Root scatter CSV for `spectrum`.
    #[arg(long, global = true)]
    scatter: Option<String>,
    /// Tolerance override.
    #[arg(long, global = true, allow_hyphen_values = true)]
    tol: Option<String>,
    /// key=value file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl Opts {
    fn settings(&self) -> anyhow::Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        for (k, v) in [
            ("a", &self.a),
            ("gamma", &self.gamma),
            ("delta", &self.delta),
            ("roots", &self.roots),
            ("m", &self.m),
            ("m-range", &self.m_range),
            ("eps-hit", &self.eps_hit),
            ("escape-radius", &self.escape_radius),
            ("out", &self.out),
            ("svg", &self.svg),
            ("scatter", &self.scatter),
            ("tol", &self.tol),
        ] {
            if let Some(v) = v {
                flags.set(k, v)?;
            }
        }
        s.overlay(&flags);
        Ok(s)
    }
}

/// Computation failures are "incomplete"; everything else is bad input.
fn error_code(e: &anyhow::Error) -> u8 {
    use qdiff_core::Error;
    match e.downcast_ref::<Error>() {
        Some(Error::NoConvergence(_) | Error::BranchJump { .. } | Error::PathTooClose { .. } | Error::NoMeasure(_)) => {
            2
        }
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are invalid input; help and version are not errors
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let run = || -> anyhow::Result<Status> {
        let s = cli.opts.settings()?;
        match cli.command {
            Command::Classify => commands::classify(&s),
            Command::Graph => commands::graph(&s),
            Command::Sigma => commands::sigma(&s),
            Command::Periods => commands::periods(&s),
            Command::Spectrum => commands::spectrum_cmd(&s),
            Command::Measure => commands::measure(&s),
            Command::Verify => commands::verify(&s),
        }
    };
    match run() {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::InvariantFailure) => ExitCode::from(1),
        Ok(Status::Incomplete) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}
