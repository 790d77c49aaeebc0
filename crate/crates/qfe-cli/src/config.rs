//! Run configuration: defaults, JSON config files, flag overrides, and the
//! schema validation that happens before any computation starts.
//!
//! Precedence is flag > config file > per-problem default. The resolved
//! [`RunConfig`] is echoed verbatim into every output file, so a result is
//! always reproducible from its own header.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qfe_core::{EvaluationMode, MeasurementStrategy};

use crate::CliError;

/// The four packaged benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum ProblemId {
    /// Fixed non-Hermitian 4x4 linear system.
    DenseOde,
    /// Galerkin chaos system for a scalar ODE with a Gaussian rate.
    StochasticOde,
    /// 1D heat equation on a Chebyshev collocation grid.
    Heat,
    /// Heat equation with a Gaussian random diffusivity field.
    StochasticHeat,
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ProblemId::DenseOde => "dense-ode",
            ProblemId::StochasticOde => "stochastic-ode",
            ProblemId::Heat => "heat",
            ProblemId::StochasticHeat => "stochastic-heat",
        };
        f.write_str(name)
    }
}

/// Matrix-element evaluation backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum Mode {
    /// Statevector arithmetic, no circuit counting.
    Exact,
    /// Simulated overlap-test circuits, every execution counted.
    Circuit,
}

impl From<Mode> for EvaluationMode {
    fn from(mode: Mode) -> Self {
        match mode {
            Mode::Exact => EvaluationMode::Exact,
            Mode::Circuit => EvaluationMode::Circuit,
        }
    }
}

/// Measurement grouping for the Hamiltonian projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum Strategy {
    /// One circuit per Pauli string.
    Original,
    /// One circuit per phase class via the coefficient register.
    Parallel,
}

impl From<Strategy> for MeasurementStrategy {
    fn from(strategy: Strategy) -> Self {
        match strategy {
            Strategy::Original => MeasurementStrategy::Original,
            Strategy::Parallel => MeasurementStrategy::Parallel,
        }
    }
}

/// Output serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum Format {
    /// Comment header plus one comma-separated row per recorded time.
    Csv,
    /// One object mirroring the CSV schema (columns + rows).
    Json,
}

/// The on-disk schema of `--config` files: every field optional, unknown
/// fields rejected. Field names match the resolved [`RunConfig`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: Option<ProblemId>,
    pub qubits: Option<usize>,
    pub params: Option<usize>,
    pub layers: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub mode: Option<Mode>,
    pub strategy: Option<Strategy>,
    pub seed: Option<u64>,
    pub kl_modes: Option<usize>,
    pub quad_nodes: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ConfigFile {
    /// Loads and parses a JSON config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::config(format!("config file {} is invalid: {e}", path.display()))
        })
    }
}

/// A fully resolved, validated run configuration. Serialized into every
/// output header.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub qubits: usize,
    pub params: usize,
    pub layers: usize,
    pub dt: f64,
    pub t_final: f64,
    pub mode: Mode,
    pub strategy: Strategy,
    pub seed: u64,
    pub kl_modes: usize,
    pub quad_nodes: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Per-problem defaults: register width (fixed for the grid-based problems),
/// ansatz depth, and horizon.
fn problem_defaults(problem: ProblemId) -> (usize, usize, f64) {
    match problem {
        ProblemId::DenseOde => (2, 2, 1.0),
        ProblemId::StochasticOde => (3, 4, 1.0),
        ProblemId::Heat => (3, 3, 1.0),
        ProblemId::StochasticHeat => (3, 3, 0.5),
    }
}

/// Merges flags over a config file over defaults and validates the result.
///
/// `flags` carries exactly the fields a flag can set (as `Option`s);
/// `file` is the parsed config file, if any.
pub fn resolve(flags: &ConfigFile, file: &ConfigFile) -> Result<RunConfig, CliError> {
    let problem = flags
        .problem
        .or(file.problem)
        .ok_or_else(|| CliError::config("no problem selected: pass one (e.g. `qfe run heat`) or set \"problem\" in the config file"))?;
    let (default_qubits, default_layers, default_t_final) = problem_defaults(problem);

    let qubits = flags.qubits.or(file.qubits).unwrap_or(default_qubits);
    let layers = flags.layers.or(file.layers).unwrap_or(default_layers);
    let params = flags.params.or(file.params).unwrap_or(qubits * layers);
    let dt = flags.dt.or(file.dt).unwrap_or(1e-3);
    let t_final = flags.t_final.or(file.t_final).unwrap_or(default_t_final);
    let mode = flags.mode.or(file.mode).unwrap_or(Mode::Exact);
    let strategy = flags.strategy.or(file.strategy).unwrap_or(Strategy::Parallel);
    let seed = flags.seed.or(file.seed).unwrap_or(1234);
    let kl_modes = flags.kl_modes.or(file.kl_modes).unwrap_or(2);
    let quad_nodes = flags.quad_nodes.or(file.quad_nodes).unwrap_or(3);
    let output = flags.output.clone().or_else(|| file.output.clone());
    let format = flags.format.or(file.format).unwrap_or(Format::Csv);

    let config = RunConfig {
        problem,
        qubits,
        params,
        layers,
        dt,
        t_final,
        mode,
        strategy,
        seed,
        kl_modes,
        quad_nodes,
        output,
        format,
    };
    validate(&config)?;
    Ok(config)
}

fn validate(config: &RunConfig) -> Result<(), CliError> {
    let fixed_qubits = match config.problem {
        ProblemId::DenseOde => Some(2),
        ProblemId::Heat | ProblemId::StochasticHeat => Some(3),
        ProblemId::StochasticOde => None,
    };
    if let Some(required) = fixed_qubits {
        if config.qubits != required {
            return Err(CliError::config(format!(
                "problem {} is discretized for exactly {required} qubits, got {}",
                config.problem, config.qubits
            )));
        }
    }
    if config.problem == ProblemId::StochasticOde && !(1..=6).contains(&config.qubits) {
        return Err(CliError::config(format!(
            "stochastic-ode supports 1..=6 qubits (chaos order 2^n), got {}",
            config.qubits
        )));
    }
    if config.layers == 0 {
        return Err(CliError::config("ansatz needs at least one layer"));
    }
    if config.params != config.qubits * config.layers {
        return Err(CliError::config(format!(
            "params must equal qubits * layers = {}, got {} (the rotation count is set by the circuit shape)",
            config.qubits * config.layers,
            config.params
        )));
    }
    if !(config.dt > 0.0) || !config.dt.is_finite() {
        return Err(CliError::config(format!(
            "dt must be positive and finite, got {}",
            config.dt
        )));
    }
    if !(config.t_final >= 0.0) || !config.t_final.is_finite() {
        return Err(CliError::config(format!(
            "t-final must be non-negative and finite, got {}",
            config.t_final
        )));
    }
    if config.problem == ProblemId::StochasticHeat {
        if !(1..=8).contains(&config.kl_modes) {
            return Err(CliError::config(format!(
                "kl-modes must be in 1..=8 (the expansion basis size), got {}",
                config.kl_modes
            )));
        }
        if !(1..=8).contains(&config.quad_nodes) {
            return Err(CliError::config(format!(
                "quad-nodes must be in 1..=8 per mode, got {}",
                config.quad_nodes
            )));
        }
        let instances = (config.quad_nodes as u64).pow(config.kl_modes as u32);
        if instances > 4096 {
            return Err(CliError::config(format!(
                "quad-nodes^kl-modes = {instances} collocation instances is beyond the 4096 cap"
            )));
        }
    }
    Ok(())
}
