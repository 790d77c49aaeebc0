//! The `run` verb: solve one benchmark problem variationally and emit the
//! time series (parameters, decoded solution, reference, worst error) plus
//! the circuit-count block.

use nalgebra::{Complex, DVector};

use qfe_core::{
    build_dense_ode, build_heat, build_stochastic_heat, build_stochastic_ode,
    collocation_moments, evolve, extract_moments, solve_ensemble, AnsatzSpec, ExecutionCounter,
    ProblemInstance, QuantumState, Readout, ReferenceValue, Trajectory, VqsProblem,
};

use crate::config::{ProblemId, RunConfig};
use crate::document::{numbered, CountsBlock, Document, VERSION};
use crate::CliError;

/// Recording stride: every tenth step is kept (plus `t = 0` and the final
/// step), so the default `dt = 1e-3` yields rows every 0.01 time units.
const RECORD_STRIDE: usize = 10;

pub fn cmd_run(config: &RunConfig) -> Result<(), CliError> {
    let spec = AnsatzSpec::new(config.qubits, config.layers);
    let counter = ExecutionCounter::new();
    let configure = |vqs: VqsProblem| {
        vqs.with_dt(config.dt)
            .with_t_final(config.t_final)
            .with_mode(config.mode.into())
            .with_strategy(config.strategy.into())
            .with_fit_seed(config.seed)
            .with_record_every(RECORD_STRIDE)
    };

    let (columns, rows, steps) = match config.problem {
        ProblemId::DenseOde | ProblemId::StochasticOde | ProblemId::Heat => {
            let problem = match config.problem {
                ProblemId::DenseOde => build_dense_ode(),
                ProblemId::Heat => build_heat(),
                ProblemId::StochasticOde => build_stochastic_ode(1 << config.qubits)
                    .map_err(|e| CliError::config(format!("cannot build problem: {e}")))?,
                ProblemId::StochasticHeat => unreachable!(),
            };
            let vqs = configure(
                problem
                    .to_vqs()
                    .map_err(|e| CliError::solver(format!("cannot pose problem: {e}")))?,
            );
            let trajectory =
                evolve(&vqs, &spec, &counter).map_err(|e| CliError::solver(e.to_string()))?;
            single_table(&problem, &trajectory)?
        }
        ProblemId::StochasticHeat => {
            let (instances, weights) = build_stochastic_heat(config.kl_modes, config.quad_nodes)
                .map_err(|e| CliError::config(format!("cannot build problem: {e}")))?;
            let trajectories = solve_ensemble(&instances, &spec, &counter, configure)
                .map_err(|e| CliError::solver(e.to_string()))?;
            ensemble_table(&instances, &weights, &trajectories)?
        }
    };

    let document = Document {
        version: VERSION,
        config: config.clone(),
        counts: Some(CountsBlock::new(counter.snapshot(), steps)),
        columns,
        rows,
    };
    document.write(config.format, config.output.as_deref())
}

type Table = (Vec<String>, Vec<Vec<f64>>, u64);

/// Decodes one trajectory against the problem's reference solution.
fn single_table(problem: &ProblemInstance, trajectory: &Trajectory) -> Result<Table, CliError> {
    let mut rows = Vec::with_capacity(trajectory.times.len());
    let mut width = None;
    for (k, &t) in trajectory.times.iter().enumerate() {
        let solution = decode(problem.readout, &trajectory.thetas[k], &trajectory.states[k])?;
        let reference = problem.reference.at(t).to_columns();
        rows.push(table_row(
            t,
            &trajectory.thetas[k],
            &solution,
            &reference,
        )?);
        width = Some(solution.len());
    }
    let width = width.ok_or_else(|| CliError::solver("trajectory recorded no states"))?;
    Ok((
        table_columns(trajectory.thetas[0].len(), width),
        rows,
        trajectory.steps_taken as u64,
    ))
}

/// Decodes an instance ensemble: solution columns are the recombined mean
/// field followed by the variance field; parameters come from the first
/// instance's trajectory.
fn ensemble_table(
    instances: &[ProblemInstance],
    weights: &[f64],
    trajectories: &[Trajectory],
) -> Result<Table, CliError> {
    let first = trajectories
        .first()
        .ok_or_else(|| CliError::solver("no collocation instances were solved"))?;
    if trajectories.iter().any(|t| t.times != first.times) {
        return Err(CliError::solver(
            "collocation instances recorded different time grids",
        ));
    }

    let mut rows = Vec::with_capacity(first.times.len());
    let mut width = None;
    for (k, &t) in first.times.iter().enumerate() {
        let fields: Vec<DVector<f64>> = trajectories
            .iter()
            .map(|trajectory| {
                DVector::from_iterator(
                    trajectory.states[k].len(),
                    trajectory.states[k].iter().map(|z| z.re),
                )
            })
            .collect();
        let (mean, variance) =
            collocation_moments(&fields, weights).map_err(|e| CliError::solver(e.to_string()))?;

        let reference_fields: Vec<DVector<f64>> = instances
            .iter()
            .map(|instance| match instance.reference.at(t) {
                ReferenceValue::Coefficients(u) => Ok(u),
                ReferenceValue::Moments { .. } => Err(CliError::solver(
                    "collocation instances must reference coefficient fields",
                )),
            })
            .collect::<Result<_, _>>()?;
        let (ref_mean, ref_variance) = collocation_moments(&reference_fields, weights)
            .map_err(|e| CliError::solver(e.to_string()))?;

        let solution: Vec<f64> = mean.iter().chain(variance.iter()).copied().collect();
        let reference: Vec<f64> = ref_mean.iter().chain(ref_variance.iter()).copied().collect();
        rows.push(table_row(t, &first.thetas[k], &solution, &reference)?);
        width = Some(solution.len());
    }
    let width = width.ok_or_else(|| CliError::solver("trajectory recorded no states"))?;
    let steps: u64 = trajectories.iter().map(|t| t.steps_taken as u64).sum();
    Ok((table_columns(first.thetas[0].len(), width), rows, steps))
}

/// Turns recorded parameters and amplitudes into solution columns.
fn decode(readout: Readout, theta: &[f64], state: &[Complex<f64>]) -> Result<Vec<f64>, CliError> {
    match readout {
        Readout::Coefficients => Ok(state.iter().map(|z| z.re).collect()),
        Readout::PceMoments => {
            let alpha = theta[0];
            let normalized = QuantumState::from_amplitudes(
                state.iter().map(|z| z / alpha).collect(),
            )
            .map_err(|e| CliError::solver(e.to_string()))?;
            let (mean, variance) = extract_moments(&normalized, alpha);
            Ok(vec![mean, variance])
        }
        Readout::CollocationMoments => Err(CliError::solver(
            "collocation-moment problems decode through their ensemble",
        )),
    }
}

fn table_columns(theta_len: usize, width: usize) -> Vec<String> {
    let mut columns = Vec::with_capacity(1 + theta_len + 2 * width + 1);
    columns.push("t".to_string());
    columns.extend(numbered("theta", theta_len));
    columns.extend(numbered("sol", width));
    columns.extend(numbered("ref", width));
    columns.push("abs_err_max".to_string());
    columns
}

fn table_row(
    t: f64,
    theta: &[f64],
    solution: &[f64],
    reference: &[f64],
) -> Result<Vec<f64>, CliError> {
    if solution.len() != reference.len() {
        return Err(CliError::solver(format!(
            "solution has {} columns but the reference has {}",
            solution.len(),
            reference.len()
        )));
    }
    let worst = solution
        .iter()
        .zip(reference)
        .map(|(s, r)| (s - r).abs())
        .fold(0.0_f64, f64::max);
    let mut row = Vec::with_capacity(1 + theta.len() + 2 * solution.len() + 1);
    row.push(t);
    row.extend_from_slice(theta);
    row.extend_from_slice(solution);
    row.extend_from_slice(reference);
    row.push(worst);
    Ok(row)
}
