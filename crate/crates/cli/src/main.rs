//! Command-line front end. Exit codes: 0 success, 1 a checked identity or
//! criterion failed, 2 usage or I/O problem, 3 numerical failure.

mod cmds;
mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::cmds::CmdOutput;
use crate::report::Format;

#[derive(Debug)]
pub enum CmdError {
    Usage(String),
    Num(kerndual::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Usage(m) => write!(f, "{m}"),
            CmdError::Num(e) => write!(f, "{e}"),
            CmdError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> CmdError {
        CmdError::Io(e)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "kerndual",
    version = kerndual::VERSION,
    about = "Gaussian process and kernel-space dualities: fits, samplers, \
             discrepancies, quadrature, and identity checks"
)]
struct Cli {
    /// Base seed; all randomness derives from it deterministically
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Noiseless posterior mean and credible band through data points
    Interpolate(cmds::FitArgs),
    /// Noisy-observation posterior mean and credible band
    Regress(cmds::FitArgs),
    /// Posterior-mean vs minimum-norm / ridge identity battery
    Equivalence(cmds::EquivalenceArgs),
    /// Draw prior sample paths on a grid
    Sample(cmds::SampleArgs),
    /// Eigenvalues and kernel reconstruction residuals
    Mercer(cmds::MercerArgs),
    /// Posterior variance shrinkage on nested uniform grids
    Contraction(cmds::ContractionArgs),
    /// Empirical convergence-rate ladders with fitted slopes
    Rates(cmds::RatesArgs),
    /// Kernel discrepancy between samples or between measures
    Mmd(cmds::MmdArgs),
    /// Kernel dependence measure from paired samples or a finite joint
    Hsic(cmds::HsicArgs),
    /// Kernel quadrature weights, error variance, and estimates
    Quadrature(cmds::QuadratureArgs),
    /// Mean-square identity for increment integrals of the Wiener path
    Ito(cmds::ItoArgs),
    /// Monte Carlo vs representer-norm check for linear functionals
    Master(cmds::MasterArgs),
    /// Full acceptance suite, one line per criterion
    Verify(cmds::VerifyArgs),
}

fn dispatch(cli: &Cli) -> Result<CmdOutput, CmdError> {
    let seed = cli.seed;
    match &cli.command {
        Command::Interpolate(a) => cmds::interpolate(a, seed),
        Command::Regress(a) => cmds::regress(a, seed),
        Command::Equivalence(a) => cmds::equivalence(a, seed),
        Command::Sample(a) => cmds::sample(a, seed),
        Command::Mercer(a) => cmds::mercer(a, seed),
        Command::Contraction(a) => cmds::contraction(a, seed),
        Command::Rates(a) => cmds::rates(a, seed),
        Command::Mmd(a) => cmds::mmd(a, seed),
        Command::Hsic(a) => cmds::hsic(a, seed),
        Command::Quadrature(a) => cmds::quadrature(a, seed),
        Command::Ito(a) => cmds::ito(a, seed),
        Command::Master(a) => cmds::master(a, seed),
        Command::Verify(a) => cmds::verify(a, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(out) => {
            if let Err(e) = out.report.write(cli.format, cli.out.as_deref()) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CmdError::Usage(_) | CmdError::Io(_) => ExitCode::from(2),
                CmdError::Num(kerndual::Error::Parse(_)) => ExitCode::from(2),
                CmdError::Num(_) => ExitCode::from(3),
            }
        }
    }
}
