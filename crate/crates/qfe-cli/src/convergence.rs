//! The `convergence` verb: resolution and register-width studies whose
//! tables make the refinement claims checkable at a glance.
//!
//! Three studies ship:
//!
//! * `interpolation` — max-norm Chebyshev interpolation error of the heat
//!   benchmark's initial profile `sin(pi x)` against polynomial degree. The
//!   profile is odd, so the error drops in parity pairs: refining an even
//!   degree to the next odd one is what buys accuracy.
//! * `constant` — the same sweep on a constant profile; the grid reproduces
//!   constants exactly, so the error column sits at rounding level.
//! * `stochastic-ode` — variational moment errors at `t = 1` for 2- versus
//!   3-qubit chaos registers; wider registers improve both moments.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::Serialize;

use qfe_core::{
    build_stochastic_ode, evolve, extract_moments, interpolate, AnsatzSpec, CollocationGrid,
    ExecutionCounter, QuantumState, ReferenceValue,
};

use crate::config::Format;
use crate::document::{Document, VERSION};
use crate::CliError;

/// Which convergence study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum Study {
    Interpolation,
    Constant,
    StochasticOde,
}

/// Resolved study configuration, echoed into the output.
#[derive(Debug, Clone, Serialize)]
pub struct StudyConfig {
    pub study: Study,
    pub from: usize,
    pub to: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

pub fn cmd_convergence(config: &StudyConfig) -> Result<(), CliError> {
    let (columns, rows) = match config.study {
        Study::Interpolation => degree_sweep(config, |x| (PI * x).sin())?,
        Study::Constant => degree_sweep(config, |_| 1.0)?,
        Study::StochasticOde => qubit_sweep(config)?,
    };
    let document = Document {
        version: VERSION,
        config: config.clone(),
        counts: None,
        columns,
        rows,
    };
    document.write(config.format, config.output.as_deref())
}

type Table = (Vec<String>, Vec<Vec<f64>>);

/// Max interpolation error over a dense uniform probe of `[-1, 1]`.
fn interpolation_error(degree: usize, f: impl Fn(f64) -> f64) -> Result<f64, CliError> {
    let grid = CollocationGrid::new(degree).map_err(|e| CliError::config(e.to_string()))?;
    let samples: Vec<f64> = grid.points().iter().map(|&x| f(x)).collect();
    let probes = 400;
    let mut worst = 0.0_f64;
    for k in 0..=probes {
        let x = -1.0 + 2.0 * k as f64 / probes as f64;
        let value =
            interpolate(&grid, &samples, x).map_err(|e| CliError::solver(e.to_string()))?;
        worst = worst.max((value - f(x)).abs());
    }
    Ok(worst)
}

fn degree_sweep(config: &StudyConfig, f: impl Fn(f64) -> f64) -> Result<Table, CliError> {
    if config.from < 1 || config.from > config.to || config.to > 64 {
        return Err(CliError::config(format!(
            "degree sweep needs 1 <= from <= to <= 64, got {}..{}",
            config.from, config.to
        )));
    }
    let columns = vec!["degree".to_string(), "points".to_string(), "max_error".to_string()];
    let mut rows = Vec::with_capacity(config.to - config.from + 1);
    for degree in config.from..=config.to {
        let error = interpolation_error(degree, &f)?;
        rows.push(vec![degree as f64, (degree + 1) as f64, error]);
    }
    Ok((columns, rows))
}

/// Moment errors at `t = 1` for the chaos registers compared in the
/// stochastic-ODE benchmark, deepest ansatz first fit at each width.
fn qubit_sweep(config: &StudyConfig) -> Result<Table, CliError> {
    let columns = vec![
        "qubits".to_string(),
        "layers".to_string(),
        "mean_error".to_string(),
        "variance_error".to_string(),
    ];
    let mut rows = Vec::new();
    for (qubits, layers) in [(2usize, 2usize), (3, 4)] {
        let problem = build_stochastic_ode(1 << qubits)
            .map_err(|e| CliError::config(format!("cannot build problem: {e}")))?;
        let vqs = problem
            .to_vqs()
            .map_err(|e| CliError::solver(e.to_string()))?
            .with_fit_seed(config.seed)
            .with_record_every(1000);
        let spec = AnsatzSpec::new(qubits, layers);
        let counter = ExecutionCounter::new();
        let trajectory =
            evolve(&vqs, &spec, &counter).map_err(|e| CliError::solver(e.to_string()))?;

        let k = trajectory.times.len() - 1;
        let t = trajectory.times[k];
        let alpha = trajectory.thetas[k][0];
        let normalized = QuantumState::from_amplitudes(
            trajectory.states[k].iter().map(|z| z / alpha).collect(),
        )
        .map_err(|e| CliError::solver(e.to_string()))?;
        let (mean, variance) = extract_moments(&normalized, alpha);
        let (ref_mean, ref_variance) = match problem.reference.at(t) {
            ReferenceValue::Moments { mean, variance } => (mean, variance),
            ReferenceValue::Coefficients(_) => {
                return Err(CliError::solver(
                    "stochastic-ode reference must provide moments",
                ))
            }
        };
        rows.push(vec![
            qubits as f64,
            layers as f64,
            (mean - ref_mean).abs(),
            (variance - ref_variance).abs(),
        ]);
    }
    Ok((columns, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profiles_interpolate_to_rounding() {
        for degree in [3usize, 8, 13] {
            assert!(interpolation_error(degree, |_| 1.0).unwrap() < 1e-13);
        }
    }

    #[test]
    fn refining_by_two_degrees_strictly_helps_the_odd_profile() {
        let errors: Vec<f64> = (6..=13)
            .map(|degree| interpolation_error(degree, |x| (PI * x).sin()).unwrap())
            .collect();
        for pair in errors.windows(3).step_by(1) {
            assert!(pair[2] < pair[0], "two-degree refinement failed: {pair:?}");
        }
        assert!(errors[0] / errors[7] >= 100.0);
    }

    #[test]
    fn bad_sweep_bounds_are_config_errors() {
        let config = StudyConfig {
            study: Study::Interpolation,
            from: 9,
            to: 6,
            seed: 1234,
            output: None,
            format: Format::Csv,
        };
        assert!(cmd_convergence(&config).is_err());
    }
}
