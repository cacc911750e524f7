//! Thin command line driver over the verification suites.
//!
//! Exit codes: 0 every check passed, 1 a check missed its tolerance, 2 the
//! config failed to parse or validate, 3 precision was exhausted mid-run
//! (a partial report is still written).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use padic_harmonic::config::RunConfig;
use padic_harmonic::report::{self, Check, Report};
use padic_harmonic::Error;

#[derive(Parser)]
#[command(
    name = "padic-harmonic",
    version,
    about = "Exact p-adic Fourier, lattice-model trace, orbit, and Plancherel checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Odd prime restricting every suite to one residue characteristic.
    #[arg(long, global = true)]
    prime: Option<u64>,
    /// Working digits for suite inputs (0 = widest machine word).
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Twisting parameter for the quadratic form suite, e.g. "2", "p",
    /// "2*p^3", "nonsquare".
    #[arg(long, global = true)]
    a0: Option<String>,
    /// Acceptance threshold for inexact checks.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// TOML config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Report output path; omitted = stdout only.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed for every sampled test density.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Inversion, reflection, Parseval, convolution theorem.
    VerifyFourier,
    /// Normalized quadratic form indices: modulus, multiplicativity,
    /// twisted convolution.
    VerifyWeil,
    /// Lattice-model fixed-point trace identities.
    VerifyHeisenberg,
    /// Regularity loci, measure disintegration, fibered orbital integrals.
    VerifyOrbits,
    /// Characters of the solvable example group and the Plancherel identity.
    VerifyPlancherel,
    /// Every suite in order.
    All,
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = cli.prime {
        cfg.prime = Some(p);
    }
    if let Some(prec) = cli.precision {
        cfg.precision = prec;
    }
    if let Some(a0) = &cli.a0 {
        cfg.a0 = a0.clone();
    }
    if let Some(tol) = cli.tolerance {
        cfg.tolerance = tol;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.display().to_string());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(report: &Report) -> std::io::Result<()> {
    let bytes = report.to_json_bytes();
    if let Some(path) = &report.config.out {
        std::fs::write(path, &bytes)?;
        eprintln!("report written to {path}");
    } else {
        use std::io::Write;
        std::io::stdout().write_all(&bytes)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut checks: Vec<Check> = Vec::new();
    let run = match cli.cmd {
        Cmd::VerifyFourier => report::run_fourier(&cfg, &mut checks),
        Cmd::VerifyWeil => report::run_weil(&cfg, &mut checks),
        Cmd::VerifyHeisenberg => report::run_heisenberg(&cfg, &mut checks),
        Cmd::VerifyOrbits => report::run_orbits(&cfg, &mut checks),
        Cmd::VerifyPlancherel => report::run_plancherel(&cfg, &mut checks),
        Cmd::All => report::run_all(&cfg, &mut checks),
    };
    let internal_error = match run {
        Ok(()) => None,
        Err(e) => Some(e),
    };
    let rep = Report::new(cfg, checks);
    if let Err(e) = emit(&rep) {
        eprintln!("cannot write report: {e}");
        return ExitCode::from(3);
    }
    if let Some(e) = internal_error {
        eprintln!("suite aborted: {e}; the report above is partial");
        return ExitCode::from(3);
    }
    if rep.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
