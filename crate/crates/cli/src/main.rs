//! `whitham`: kernels, bifurcation points, branches, sheets and validation from the
//! command line. Every output is a file meant for offline plotting.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use config::Settings;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Self { code: 3, msg: msg.into() }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Self { code: 1, msg: msg.into() }
    }
}

impl From<whitham_core::Error> for CliError {
    fn from(e: whitham_core::Error) -> Self {
        use whitham_core::Error as E;
        let code = match e {
            E::Domain(_) | E::Precondition(_) | E::DegeneratePair(_) | E::Parse { .. } | E::Io(_) => 2,
            _ => 3,
        };
        Self { code, msg: e.to_string() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "whitham", version, about = "Bifurcation toolkit for capillary-gravity Whitham waves")]
struct Cli {
    /// Flat TOML file of default option values (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the commands that reproduce the acceptance runs and exit.
    #[arg(long)]
    seed_docs: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate m, l and l' or compute critical Bond numbers.
    Symbol(SymbolArgs),
    /// Tabulate the convolution kernel and probe its monotonicity.
    Kernel(KernelArgs),
    /// Continue a branch from a simple bifurcation point, or resume one.
    Continue(ContinueArgs),
    /// Sample the two-parameter sheet at a double point.
    Sheet2d(SheetArgs),
    /// Check the exact identities on every state of a branch or sheet file.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
pub struct SymbolArgs {
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub xi_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Print T*(k1; k2) instead of a table.
    #[arg(long = "critical-T", num_args = 2, value_names = ["K1", "K2"])]
    pub critical_t: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Use the 2π-periodic kernel instead of the whole-line one.
    #[arg(long)]
    pub periodic: bool,
    /// Sample grid `a:b:n`, with 0 < a < b.
    #[arg(long)]
    pub grid: Option<String>,
    /// Highest finite-difference order of the monotonicity probe (0..=3).
    #[arg(long)]
    pub probe_order: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ContinueArgs {
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Amplitude of cos(kx) at the first point.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Leave the bifurcation point towards positive (+1) or negative (-1) amplitude.
    #[arg(long, allow_hyphen_values = true)]
    pub side: Option<f64>,
    #[arg(long)]
    pub ds: Option<f64>,
    #[arg(long)]
    pub ds_min: Option<f64>,
    #[arg(long)]
    pub ds_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial truncation order.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub newton_tol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c_max: Option<f64>,
    #[arg(long)]
    pub amp_max: Option<f64>,
    /// Append to an existing branch file with its stored settings.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Also write the norm tracks of the branch as CSV.
    #[arg(long)]
    pub norms: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SheetArgs {
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub k1: Option<usize>,
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(long)]
    pub rho_max: Option<f64>,
    #[arg(long)]
    pub rho_steps: Option<usize>,
    #[arg(long)]
    pub theta_steps: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Branch or sheet file.
    pub file: PathBuf,
    /// Also check the nodal identity on every state.
    #[arg(long)]
    pub nodal: bool,
    #[arg(long)]
    pub quad_points: Option<usize>,
    /// Report path; defaults to `<file>.validation.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.seed_docs {
        print!("{}", commands::SEED_DOCS);
        return Ok(());
    }
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Some(Command::Symbol(a)) => commands::symbol(a, &settings),
        Some(Command::Kernel(a)) => commands::kernel(a, &settings),
        Some(Command::Continue(a)) => commands::continue_cmd(a, &settings),
        Some(Command::Sheet2d(a)) => commands::sheet2d(a, &settings),
        Some(Command::Validate(a)) => commands::validate(a, &settings),
        None => {
            let _ = Cli::command().print_help();
            Err(CliError::usage("no command given"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
