//! `qfe` — variational solver for the packaged differential-equation
//! benchmarks.
//!
//! Verbs: `run` (solve a problem and write its time series), `count`
//! (evaluate the per-step circuit-budget formulas), `convergence`
//! (resolution/register-width studies), `selftest` (numerical hygiene
//! suite).
//!
//! Exit codes: 0 on success, 2 for configuration errors (including CLI
//! usage errors), 3 for solver failures.

mod config;
mod convergence;
mod count;
mod document;
mod run;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigFile, Format, Mode, ProblemId, Strategy};
use convergence::{Study, StudyConfig};

/// A classified command failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    /// Configuration problem (exit code 2).
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 2,
        }
    }

    /// Solver failure (exit code 3).
    pub fn solver(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qfe",
    version,
    about = "Variational solver for functional-expansion benchmark problems",
    after_help = "Exit codes: 0 ok, 2 configuration error, 3 solver failure.\n\
                  QFE_THREADS caps the thread pool used for concurrent collocation instances."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one benchmark problem and write its time series
    Run(RunArgs),
    /// Evaluate the per-step circuit-budget formulas
    Count(CountArgs),
    /// Run a resolution or register-width convergence study
    Convergence(ConvergenceArgs),
    /// Run the numerical hygiene suite
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Problem to solve (may instead come from the config file)
    problem: Option<ProblemId>,
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Register width n (fixed by the discretization for all problems
    /// except stochastic-ode)
    #[arg(long)]
    qubits: Option<usize>,
    /// Ansatz layers L
    #[arg(long)]
    layers: Option<usize>,
    /// Rotation count M; must equal qubits * layers when given
    #[arg(long)]
    params: Option<usize>,
    /// Integration step size
    #[arg(long)]
    dt: Option<f64>,
    /// Integration horizon
    #[arg(long)]
    t_final: Option<f64>,
    /// Matrix-element evaluation backend
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Measurement grouping for the generator projections
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    /// Seed for the initial-fit restart draws
    #[arg(long)]
    seed: Option<u64>,
    /// Retained expansion modes of the random diffusivity field
    /// (stochastic-heat only)
    #[arg(long)]
    kl_modes: Option<usize>,
    /// Quadrature nodes per retained mode (stochastic-heat only)
    #[arg(long)]
    quad_nodes: Option<usize>,
    /// Output file (stdout when omitted)
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl RunArgs {
    fn as_overrides(&self) -> ConfigFile {
        ConfigFile {
            problem: self.problem,
            qubits: self.qubits,
            params: self.params,
            layers: self.layers,
            dt: self.dt,
            t_final: self.t_final,
            mode: self.mode,
            strategy: self.strategy,
            seed: self.seed,
            kl_modes: self.kl_modes,
            quad_nodes: self.quad_nodes,
            output: self.output.clone(),
            format: self.format,
        }
    }
}

#[derive(Args)]
struct CountArgs {
    /// Register width n (0 allowed: a bare magnitude parameter)
    #[arg(long, default_value_t = 2)]
    qubits: usize,
    /// Variational parameter count M
    #[arg(long, default_value_t = 4)]
    params: usize,
    /// Output format (csv renders as plain text lines)
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Which study to run
    #[arg(value_enum)]
    study: Study,
    /// First polynomial degree of a degree sweep
    #[arg(long, default_value_t = 6)]
    from: usize,
    /// Last polynomial degree of a degree sweep
    #[arg(long, default_value_t = 13)]
    to: usize,
    /// Seed for the initial-fit restart draws
    #[arg(long, default_value_t = 1234)]
    seed: u64,
    /// Output file (stdout when omitted)
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SelftestArgs {
    /// Seed for the randomized checks
    #[arg(long, default_value_t = 1234)]
    seed: u64,
}

/// Applies the QFE_THREADS cap to the global thread pool.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QFE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            CliError::config(format!(
                "QFE_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot configure {threads} threads: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run(args) => {
            let file = match &args.config {
                Some(path) => ConfigFile::load(path)?,
                None => ConfigFile::default(),
            };
            let config = config::resolve(&args.as_overrides(), &file)?;
            run::cmd_run(&config)
        }
        Command::Count(args) => count::cmd_count(args.qubits, args.params, args.format),
        Command::Convergence(args) => convergence::cmd_convergence(&StudyConfig {
            study: args.study,
            from: args.from,
            to: args.to,
            seed: args.seed,
            output: args.output,
            format: args.format,
        }),
        Command::Selftest(args) => selftest::cmd_selftest(args.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("qfe: {}", error.message);
            ExitCode::from(error.code)
        }
    }
}
