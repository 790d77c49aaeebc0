//! The four benchmark problems, their reference solutions, and the
//! classical integrator backing every accuracy check.
//!
//! Each builder packages a generator matrix, an initial coefficient vector,
//! a readout descriptor, and a [`ReferenceSolution`] into a
//! [`ProblemInstance`] ready to hand to the variational solver:
//!
//! * [`build_dense_ode`] — a fixed non-Hermitian 4x4 system, the stress
//!   test for measuring arbitrary dense generators.
//! * [`build_stochastic_ode`] — the Galerkin chaos system for
//!   `du/dt = a u` with `a ~ N(-1.8, 1)`, read out as PCE moments.
//! * [`build_heat`] — the 1D heat equation on a Chebyshev collocation grid
//!   with homogeneous Dirichlet boundaries.
//! * [`build_stochastic_heat`] — the heat equation with a lognormal-free
//!   Gaussian random diffusivity field, one instance per stochastic
//!   collocation point plus recombination weights.
//!
//! The classical oracle is [`classical_integrate`], a scaling-and-squaring
//! Padé matrix exponential; [`collocation_moments`] recombines per-node
//! fields into mean/variance fields.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use rayon::prelude::*;

use crate::ansatz::AnsatzSpec;
use crate::error::{QfeError, Result};
use crate::qsim::ExecutionCounter;
use crate::spectral::{build_d1, build_d2, interior_restrict, CollocationGrid};
use crate::stochastic::{galerkin_hamiltonian, gauss_hermite, kl_expand};
use crate::vqs::{evolve, Trajectory, VqsProblem};

/// Thermal diffusivity of both heat benchmarks.
pub const HEAT_DIFFUSIVITY: f64 = 0.3;

/// Chebyshev degree of the heat-equation grids: 10 collocation points,
/// 8 interior points after Dirichlet restriction (a 3-qubit register).
pub const HEAT_DEGREE: usize = 9;

/// Weighted-Hermite basis size used by the stochastic-heat KL expansion.
pub const KL_BASIS_SIZE: usize = 8;

/// How the amplitudes of a solved state should be decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// Amplitudes are the solution coefficients themselves (scaled by the
    /// magnitude parameter).
    Coefficients,
    /// Amplitudes are chaos coefficients; report mean and variance.
    PceMoments,
    /// One field per collocation instance; moments come from recombining
    /// the ensemble with quadrature weights.
    CollocationMoments,
}

/// Where a reference solution comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Closed-form solution evaluated directly.
    Analytic,
    /// The same discretization integrated classically to oracle precision.
    ClassicalIntegration,
}

/// A reference value at one time: either the full coefficient vector or
/// scalar moments.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceValue {
    /// Exact coefficient vector.
    Coefficients(DVector<f64>),
    /// Exact (mean, variance) pair.
    Moments { mean: f64, variance: f64 },
}

impl ReferenceValue {
    /// The reference flattened to the columns a result table uses: the
    /// coefficient entries, or `[mean, variance]`.
    pub fn to_columns(&self) -> Vec<f64> {
        match self {
            ReferenceValue::Coefficients(u) => u.iter().copied().collect(),
            ReferenceValue::Moments { mean, variance } => vec![*mean, *variance],
        }
    }
}

/// A callable reference solution `t -> exact value` with recorded
/// provenance.
#[derive(Clone)]
pub struct ReferenceSolution {
    /// Whether the values are analytic or classically integrated.
    pub provenance: Provenance,
    solver: Arc<dyn Fn(f64) -> ReferenceValue + Send + Sync>,
}

impl ReferenceSolution {
    /// Wraps a closed-form solution.
    pub fn analytic(solver: impl Fn(f64) -> ReferenceValue + Send + Sync + 'static) -> Self {
        Self { provenance: Provenance::Analytic, solver: Arc::new(solver) }
    }

    /// Wraps a classical-integration oracle.
    pub fn classical(solver: impl Fn(f64) -> ReferenceValue + Send + Sync + 'static) -> Self {
        Self { provenance: Provenance::ClassicalIntegration, solver: Arc::new(solver) }
    }

    /// The reference value at time `t`.
    pub fn at(&self, t: f64) -> ReferenceValue {
        (self.solver)(t)
    }
}

impl std::fmt::Debug for ReferenceSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceSolution").field("provenance", &self.provenance).finish()
    }
}

/// One benchmark problem: the generator, the initial coefficients, how to
/// decode results, and the matching reference solution.
///
/// Serializes to JSON (matrix, initial vector, metadata) for reproducible
/// runs; the reference closure is reconstructed by the builder rather than
/// serialized.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemInstance {
    /// Stable identifier (`dense-ode`, `heat`, ...).
    pub name: String,
    /// Generator of `du/dt = H u`.
    pub hamiltonian: DMatrix<f64>,
    /// Coefficients at `t = 0`.
    pub initial: DVector<f64>,
    /// How solved amplitudes decode into reported values.
    pub readout: Readout,
    /// Interior spatial points for PDE problems (`None` for pure ODEs).
    pub grid: Option<Vec<f64>>,
    /// Reference solution on the same discretization.
    #[serde(skip)]
    pub reference: ReferenceSolution,
}

impl ProblemInstance {
    /// Dimension of the coefficient vector.
    pub fn dimension(&self) -> usize {
        self.initial.len()
    }

    /// Converts to a variational problem with default solver settings.
    ///
    /// # Errors
    ///
    /// Returns [`QfeError::BadStateLength`] when the dimension is not a
    /// power of two (no register fills exactly).
    pub fn to_vqs(&self) -> Result<VqsProblem> {
        let dim = self.dimension();
        if !dim.is_power_of_two() {
            return Err(QfeError::BadStateLength { len: dim });
        }
        let hamiltonian = self.hamiltonian.map(|x| Complex::new(x, 0.0));
        Ok(VqsProblem::new(hamiltonian, self.initial.clone()))
    }
}

/// The fixed 4x4 non-Hermitian benchmark system with initial condition
/// `u(0) = (1, 0, 0, 0)`.
///
/// The generator has no sparse Pauli structure (all 16 string coefficients
/// are non-zero), which is exactly what makes it a worst case for
/// per-string measurement and the showcase for the parallel strategy.
pub fn build_dense_ode() -> ProblemInstance {
    #[rustfmt::skip]
    let entries = [
        -0.1, 0.4, 0.2, -0.7,
        0.9, 0.1, -0.1, -1.1,
        0.5, 0.2, -0.4, -0.5,
        0.6, 0.5, 0.3, -1.6,
    ];
    let hamiltonian = DMatrix::from_row_slice(4, 4, &entries);
    let initial = DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]);
    let reference = {
        let h = hamiltonian.clone();
        let u0 = initial.clone();
        ReferenceSolution::classical(move |t| {
            ReferenceValue::Coefficients(classical_integrate(&h, &u0, t))
        })
    };
    ProblemInstance {
        name: "dense-ode".into(),
        hamiltonian,
        initial,
        readout: Readout::Coefficients,
        grid: None,
        reference,
    }
}

/// The stochastic-Galerkin system for `du/dt = a u`, `a ~ N(-1.8, 1)`,
/// `u(0) = 1`, truncated to `size` chaos terms.
///
/// The chaos coefficients start at `mu = (1, 0, ...)` (a deterministic
/// initial condition) and the readout is the PCE mean/variance. The
/// reference moments are the closed forms `E[u] = e^{-1.8 t + t^2/2}` and
/// `Var[u] = e^{-3.6 t + t^2} (e^{t^2} - 1)`.
///
/// Register-filling sizes (4, 8, ...) convert directly to variational
/// problems; any `size >= 2` works classically.
///
/// # Errors
///
/// Returns [`QfeError::TooSmall`] when `size < 2` (the random coefficient
/// needs at least the linear chaos term).
pub fn build_stochastic_ode(size: usize) -> Result<ProblemInstance> {
    if size < 2 {
        return Err(QfeError::TooSmall { what: "chaos expansion size", min: 2, got: size });
    }
    let hamiltonian = galerkin_hamiltonian(&[-1.8, 1.0], size)?;
    let mut initial = DVector::zeros(size);
    initial[0] = 1.0;
    let reference = ReferenceSolution::analytic(|t: f64| ReferenceValue::Moments {
        mean: (-1.8 * t + 0.5 * t * t).exp(),
        variance: (-3.6 * t + t * t).exp() * ((t * t).exp() - 1.0),
    });
    Ok(ProblemInstance {
        name: format!("stochastic-ode-{size}"),
        hamiltonian,
        initial,
        readout: Readout::PceMoments,
        grid: None,
        reference,
    })
}

/// The 1D heat equation `u_t = 0.3 u_xx` on `[-1, 1]` with `u(+-1, t) = 0`
/// and `u(x, 0) = sin(pi x)`, discretized on a 10-point Chebyshev grid
/// (8 interior points).
///
/// The reference is the separated solution
/// `u(x, t) = e^{-0.3 pi^2 t} sin(pi x)` sampled at the interior points.
pub fn build_heat() -> ProblemInstance {
    let grid = CollocationGrid::new(HEAT_DEGREE).expect("fixed degree is valid");
    let d2 = interior_restrict(&build_d2(&grid)).expect("grid has interior points");
    let hamiltonian = d2 * HEAT_DIFFUSIVITY;
    let interior: Vec<f64> = grid.interior().to_vec();
    let initial = DVector::from_iterator(interior.len(), interior.iter().map(|&x| (PI * x).sin()));
    let reference = {
        let interior = interior.clone();
        ReferenceSolution::analytic(move |t: f64| {
            let decay = (-HEAT_DIFFUSIVITY * PI * PI * t).exp();
            ReferenceValue::Coefficients(DVector::from_iterator(
                interior.len(),
                interior.iter().map(|&x| decay * (PI * x).sin()),
            ))
        })
    };
    ProblemInstance {
        name: "heat".into(),
        hamiltonian,
        initial,
        readout: Readout::Coefficients,
        grid: Some(interior),
        reference,
    }
}

/// Assembles the variable-coefficient heat generator
/// `H = diag(D1 gamma) D1 + diag(gamma) D2` from diffusivity samples on the
/// full grid, then restricts to the interior (homogeneous Dirichlet).
///
/// This is the spatial discretization of `(gamma(x) u_x)_x =
/// gamma'(x) u_x + gamma(x) u_xx`.
///
/// # Errors
///
/// Returns [`QfeError::BadCoefficientLength`] when `gamma` does not sample
/// every grid point, or the restriction error for degenerate grids.
pub fn variable_coefficient_heat_matrix(
    grid: &CollocationGrid,
    gamma: &[f64],
) -> Result<DMatrix<f64>> {
    if gamma.len() != grid.len() {
        return Err(QfeError::BadCoefficientLength { len: gamma.len() });
    }
    let d1 = build_d1(grid);
    let d2 = build_d2(grid);
    let gamma = DVector::from_column_slice(gamma);
    let gamma_prime = &d1 * &gamma;
    let mut full = d2;
    // Row-scale D2 by gamma and D1 by gamma', then sum.
    for row in 0..grid.len() {
        for col in 0..grid.len() {
            full[(row, col)] = gamma[row] * full[(row, col)] + gamma_prime[row] * d1[(row, col)];
        }
    }
    interior_restrict(&full)
}

/// The heat equation with a Gaussian random diffusivity field
/// `gamma(x; omega) = mu(x) + sum sqrt(lambda_i) phi_i(x) xi_i`,
/// `mu(x) = 2.7 - 0.1 sin(pi x)`, squared-exponential covariance.
///
/// Returns one deterministic [`ProblemInstance`] per stochastic collocation
/// point (a full tensor Gauss-Hermite rule with `quad_nodes` per KL
/// dimension) together with the matching quadrature weights; recombine
/// solved fields with [`collocation_moments`]. `truncation = 0` is the
/// deterministic limit: a single instance with `gamma = mu`.
///
/// Each instance carries its own classical-integration reference, so the
/// ensemble reference moments come from the identical discretization.
///
/// # Errors
///
/// Propagates KL-expansion errors and quadrature-size errors
/// ([`QfeError::TooSmall`] when `quad_nodes` is zero and modes are kept).
pub fn build_stochastic_heat(
    truncation: usize,
    quad_nodes: usize,
) -> Result<(Vec<ProblemInstance>, Vec<f64>)> {
    let grid = CollocationGrid::new(HEAT_DEGREE).expect("fixed degree is valid");
    let mean = |x: f64| 2.7 - 0.1 * (PI * x).sin();
    let covariance = |x: f64, xp: f64| (-0.5 * (x - xp) * (x - xp)).exp();
    let expansion =
        kl_expand(mean, covariance, KL_BASIS_SIZE, Some(truncation), grid.points())?;

    let (points, weights) = if truncation == 0 {
        (vec![Vec::new()], vec![1.0])
    } else {
        let rule = gauss_hermite(quad_nodes, truncation)?;
        (rule.nodes, rule.weights)
    };

    let interior: Vec<f64> = grid.interior().to_vec();
    let initial = DVector::from_iterator(interior.len(), interior.iter().map(|&x| (PI * x).sin()));

    let mut instances = Vec::with_capacity(points.len());
    for (j, xi) in points.iter().enumerate() {
        let gamma = expansion.realize(xi)?;
        let hamiltonian = variable_coefficient_heat_matrix(&grid, &gamma)?;
        let reference = {
            let h = hamiltonian.clone();
            let u0 = initial.clone();
            ReferenceSolution::classical(move |t| {
                ReferenceValue::Coefficients(classical_integrate(&h, &u0, t))
            })
        };
        instances.push(ProblemInstance {
            name: format!("stochastic-heat-{j}"),
            hamiltonian,
            initial: initial.clone(),
            readout: Readout::CollocationMoments,
            grid: Some(interior.clone()),
            reference,
        });
    }
    Ok((instances, weights))
}

/// Recombines per-collocation-point fields into mean and variance fields:
/// `mean = sum w_j u_j` and `var = sum w_j u_j^2 - mean^2`, element-wise.
///
/// # Errors
///
/// Returns [`QfeError::BadConfiguration`] when the field and weight counts
/// differ, no fields are given, or field lengths are inconsistent.
pub fn collocation_moments(
    fields: &[DVector<f64>],
    weights: &[f64],
) -> Result<(DVector<f64>, DVector<f64>)> {
    if fields.is_empty() || fields.len() != weights.len() {
        return Err(QfeError::BadConfiguration {
            reason: format!(
                "{} fields cannot recombine with {} weights",
                fields.len(),
                weights.len()
            ),
        });
    }
    let dim = fields[0].len();
    if fields.iter().any(|f| f.len() != dim) {
        return Err(QfeError::BadConfiguration {
            reason: "collocation fields have inconsistent lengths".into(),
        });
    }
    let mut mean = DVector::<f64>::zeros(dim);
    let mut second = DVector::<f64>::zeros(dim);
    for (field, &w) in fields.iter().zip(weights) {
        for k in 0..dim {
            mean[k] += w * field[k];
            second[k] += w * field[k] * field[k];
        }
    }
    let variance = DVector::from_iterator(dim, (0..dim).map(|k| second[k] - mean[k] * mean[k]));
    Ok((mean, variance))
}

/// Evolves a family of collocation instances, concurrently where possible.
///
/// The instances are independent, so after the first one is solved the rest
/// run in parallel on the global thread pool. When an instance shares the
/// first instance's initial field (the usual case — stochastic collocation
/// varies the operator, not the initial condition), the first fit's
/// parameters are reused instead of refitting, unless `configure` already
/// supplied explicit parameters.
///
/// Results come back in instance order regardless of scheduling, so output
/// is deterministic for a fixed configuration.
///
/// # Errors
///
/// Returns the first instance conversion or solver error encountered.
pub fn solve_ensemble<F>(
    instances: &[ProblemInstance],
    spec: &AnsatzSpec,
    counter: &ExecutionCounter,
    configure: F,
) -> Result<Vec<Trajectory>>
where
    F: Fn(VqsProblem) -> VqsProblem + Sync,
{
    let Some((first, rest)) = instances.split_first() else {
        return Ok(Vec::new());
    };
    let first_trajectory = evolve(&configure(first.to_vqs()?), spec, counter)?;
    let shared_theta = first_trajectory.thetas[0].clone();

    let mut trajectories = Vec::with_capacity(instances.len());
    trajectories.push(first_trajectory);
    let remaining = rest
        .par_iter()
        .map(|instance| {
            let mut vqs = configure(instance.to_vqs()?);
            if vqs.initial_theta.is_none() && instance.initial == first.initial {
                vqs = vqs.with_initial_theta(shared_theta.clone());
            }
            evolve(&vqs, spec, counter)
        })
        .collect::<Result<Vec<_>>>()?;
    trajectories.extend(remaining);
    Ok(trajectories)
}

/// Evaluates `u(t) = e^{H t} u0` with a scaling-and-squaring Padé matrix
/// exponential, the classical oracle every benchmark is judged against.
pub fn classical_integrate(h: &DMatrix<f64>, u0: &DVector<f64>, t: f64) -> DVector<f64> {
    expm(&(h * t)) * u0
}

/// Matrix exponential by diagonal (13, 13) Padé approximation with scaling
/// and squaring.
///
/// The argument is scaled down to 1-norm at most 1/2 before the Padé solve,
/// where the approximation error sits far below f64 resolution, then the
/// result is repeatedly squared.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix exponential needs a square matrix");
    let norm = (0..n)
        .map(|col| a.column(col).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a / 2.0_f64.powi(squarings as i32);

    #[rustfmt::skip]
    const B: [f64; 14] = [
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ];
    let identity = DMatrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u = &scaled
        * (&a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9])
            + &a6 * B[7]
            + &a4 * B[5]
            + &a2 * B[3]
            + &identity * B[1]);
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8])
        + &a6 * B[6]
        + &a4 * B[4]
        + &a2 * B[2]
        + &identity * B[0];

    let numerator = &v + &u;
    let denominator = &v - &u;
    let mut result = denominator
        .lu()
        .solve(&numerator)
        .expect("Pade denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::sample_on_grid;
    use approx::assert_abs_diff_eq;

    /// Fixed-step RK4 oracle for `du/dt = H u`, independent of `expm`.
    fn rk4(h: &DMatrix<f64>, u0: &DVector<f64>, t_final: f64, dt: f64) -> DVector<f64> {
        let steps = (t_final / dt).round() as usize;
        let mut u = u0.clone();
        for _ in 0..steps {
            let k1 = h * &u;
            let k2 = h * (&u + &k1 * (dt / 2.0));
            let k3 = h * (&u + &k2 * (dt / 2.0));
            let k4 = h * (&u + &k3 * dt);
            u += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        u
    }

    fn coefficients(value: ReferenceValue) -> DVector<f64> {
        match value {
            ReferenceValue::Coefficients(u) => u,
            other => panic!("expected coefficients, got {other:?}"),
        }
    }

    fn moments(value: ReferenceValue) -> (f64, f64) {
        match value {
            ReferenceValue::Moments { mean, variance } => (mean, variance),
            other => panic!("expected moments, got {other:?}"),
        }
    }

    #[test]
    fn dense_ode_matches_the_printed_system() {
        let problem = build_dense_ode();
        assert_eq!(problem.hamiltonian[(0, 0)], -0.1);
        assert_eq!(problem.hamiltonian[(3, 3)], -1.6);
        assert_eq!(problem.hamiltonian[(1, 3)], -1.1);
        assert_abs_diff_eq!(problem.hamiltonian.trace(), -2.0, epsilon = 1e-12);
        assert_eq!(problem.initial.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(problem.readout, Readout::Coefficients);

        let at_zero = coefficients(problem.reference.at(0.0));
        assert!((at_zero - &problem.initial).norm() < 1e-12);
    }

    #[test]
    fn matrix_exponential_matches_closed_forms() {
        // Rotation generator: e^{At} is a plane rotation.
        let rotation = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let u0 = DVector::from_column_slice(&[1.0, 0.0]);
        let at_quarter = classical_integrate(&rotation, &u0, std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(at_quarter[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(at_quarter[1], -1.0, epsilon = 1e-9);

        let shrink = DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, -0.5]);
        let decayed = classical_integrate(&shrink, &u0, 1.0);
        assert_abs_diff_eq!(decayed[0], (-0.5_f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(decayed[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn matrix_exponential_agrees_with_runge_kutta() {
        let problem = build_dense_ode();
        let via_expm = classical_integrate(&problem.hamiltonian, &problem.initial, 1.0);
        let coarse = rk4(&problem.hamiltonian, &problem.initial, 1.0, 2e-4);
        let fine = rk4(&problem.hamiltonian, &problem.initial, 1.0, 1e-4);
        // The two RK runs bracket the truncation error; expm must sit on
        // top of the fine one.
        assert!((&coarse - &fine).norm() < 1e-9);
        assert!((via_expm - fine).norm() < 1e-9);
    }

    #[test]
    fn exponential_of_zero_and_large_arguments() {
        let zero = DMatrix::zeros(3, 3);
        assert!((expm(&zero) - DMatrix::<f64>::identity(3, 3)).norm() < 1e-15);
        // A norm far above the scaling threshold exercises the squaring
        // chain: e^{-10} on the diagonal.
        let stiff = DMatrix::from_diagonal(&DVector::from_column_slice(&[-10.0, 5.0]));
        let result = expm(&stiff);
        assert_abs_diff_eq!(result[(0, 0)], (-10.0_f64).exp(), epsilon = 1e-13);
        assert_abs_diff_eq!(result[(1, 1)], (5.0_f64).exp(), epsilon = 5e-10);
        assert_abs_diff_eq!(result[(0, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn stochastic_ode_reference_moments_match_hand_values() {
        let problem = build_stochastic_ode(4).unwrap();
        assert_eq!(problem.readout, Readout::PceMoments);
        assert_eq!(problem.initial[0], 1.0);
        assert_eq!(problem.initial.iter().skip(1).filter(|&&x| x != 0.0).count(), 0);

        let (mean0, var0) = moments(problem.reference.at(0.0));
        assert_abs_diff_eq!(mean0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var0, 0.0, epsilon = 1e-12);

        // Hand values: e^{-0.775} and e^{-1.55} (e^{0.25} - 1).
        let (mean, variance) = moments(problem.reference.at(0.5));
        assert_abs_diff_eq!(mean, 0.460704, epsilon = 1e-6);
        assert_abs_diff_eq!(variance, 0.060284, epsilon = 1e-6);

        assert!(matches!(build_stochastic_ode(1), Err(QfeError::TooSmall { .. })));
    }

    #[test]
    fn galerkin_truncation_error_is_small_by_eight_terms() {
        // Classical integration of the 8-term chaos system against the
        // analytic moments: truncation alone costs under 1e-3 (mean) and
        // 1e-2 (variance) over a unit horizon.
        let problem = build_stochastic_ode(8).unwrap();
        let mut t = 0.0;
        while t <= 1.0 + 1e-9 {
            let u = classical_integrate(&problem.hamiltonian, &problem.initial, t);
            let mean = u[0];
            let variance: f64 = u.iter().skip(1).map(|x| x * x).sum();
            let (ref_mean, ref_var) = moments(problem.reference.at(t));
            assert!(
                (mean - ref_mean).abs() <= 1e-3,
                "mean truncation error {} at t = {t}",
                (mean - ref_mean).abs()
            );
            assert!(
                (variance - ref_var).abs() <= 1e-2,
                "variance truncation error {} at t = {t}",
                (variance - ref_var).abs()
            );
            t += 0.05;
        }
    }

    #[test]
    fn heat_problem_discretization_is_accurate_to_1e_minus_4() {
        let problem = build_heat();
        assert_eq!(problem.dimension(), 8);
        let grid = problem.grid.as_ref().unwrap();
        for (k, &x) in grid.iter().enumerate() {
            assert_abs_diff_eq!(problem.initial[k], (PI * x).sin(), epsilon = 1e-15);
        }

        let mut t = 0.0;
        while t <= 1.0 + 1e-9 {
            let u = classical_integrate(&problem.hamiltonian, &problem.initial, t);
            let reference = coefficients(problem.reference.at(t));
            let err = (u - reference).amax();
            assert!(err <= 1e-4, "spatial truncation error {err} at t = {t}");
            t += 0.05;
        }
    }

    #[test]
    fn heat_generator_has_the_analytic_decay_rate() {
        // sin(pi x) is the second Dirichlet eigenmode on [-1, 1] (rate
        // -alpha pi^2); the discrete generator must reproduce that
        // eigenvalue, which governs the whole benchmark solution.
        let problem = build_heat();
        let eigenvalues = problem.hamiltonian.complex_eigenvalues();
        let expected = -HEAT_DIFFUSIVITY * PI * PI;
        let closest = eigenvalues
            .iter()
            .map(|z| (z.re - expected).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(
            closest <= 0.02 * expected.abs(),
            "no eigenvalue within 2% of the analytic rate {expected} (closest off by {closest})"
        );
        // The slowest mode of the interval itself sits at a quarter of
        // that, confirming the spectrum is the Dirichlet one.
        let slowest = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (slowest - expected / 4.0).abs() <= 0.02 * (expected / 4.0).abs(),
            "slowest rate {slowest} vs analytic {}",
            expected / 4.0
        );
    }

    #[test]
    fn constant_diffusivity_reduces_to_the_plain_heat_generator() {
        let grid = CollocationGrid::new(HEAT_DEGREE).unwrap();
        let gamma = vec![HEAT_DIFFUSIVITY; grid.len()];
        let reduced = variable_coefficient_heat_matrix(&grid, &gamma).unwrap();
        let plain = build_heat().hamiltonian;
        assert!(
            (reduced - plain).amax() < 1e-10,
            "constant-coefficient generator must be 0.3 D2 on the interior"
        );
    }

    #[test]
    fn variable_coefficient_matrix_validates_sample_counts() {
        let grid = CollocationGrid::new(HEAT_DEGREE).unwrap();
        assert!(matches!(
            variable_coefficient_heat_matrix(&grid, &[1.0; 3]),
            Err(QfeError::BadCoefficientLength { .. })
        ));
    }

    #[test]
    fn variable_coefficient_matrix_matches_analytic_derivative_action() {
        // Polynomial data keeps collocation derivatives exact: with
        // gamma(x) = 2 + x and u = 1 - x^2 (Dirichlet-compatible),
        // (gamma u')' = gamma' u' + gamma u'' = -4x - 4.
        let grid = CollocationGrid::new(12).unwrap();
        let gamma: Vec<f64> = grid.points().iter().map(|&x| 2.0 + x).collect();
        let h = variable_coefficient_heat_matrix(&grid, &gamma).unwrap();
        let u = DVector::from_iterator(
            grid.interior().len(),
            grid.interior().iter().map(|&x| 1.0 - x * x),
        );
        let action = h * u;
        for (k, &x) in grid.interior().iter().enumerate() {
            assert_abs_diff_eq!(action[k], -4.0 * x - 4.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn stochastic_heat_deterministic_limit_is_single_instance() {
        let (instances, weights) = build_stochastic_heat(0, 3).unwrap();
        assert_eq!(instances.len(), 1);
        assert_eq!(weights, vec![1.0]);
        let instance = &instances[0];

        // gamma = mu(x): rebuild the generator directly from mean samples.
        let grid = CollocationGrid::new(HEAT_DEGREE).unwrap();
        let mu = sample_on_grid(&grid, |x| 2.7 - 0.1 * (PI * x).sin());
        let expected =
            variable_coefficient_heat_matrix(&grid, mu.as_slice()).unwrap();
        assert!((instance.hamiltonian.clone() - expected).amax() < 1e-12);

        // A single instance has zero ensemble variance at every time.
        let field = classical_integrate(&instance.hamiltonian, &instance.initial, 0.4);
        let (mean, variance) = collocation_moments(&[field.clone()], &weights).unwrap();
        assert!((mean - field).amax() < 1e-12);
        assert!(variance.amax() < 1e-12);
    }

    #[test]
    fn stochastic_heat_builds_a_tensor_collocation_ensemble() {
        let (instances, weights) = build_stochastic_heat(2, 3).unwrap();
        assert_eq!(instances.len(), 9);
        assert_abs_diff_eq!(weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        for instance in &instances {
            assert_eq!(instance.dimension(), 8);
            assert_eq!(instance.readout, Readout::CollocationMoments);
            let at_zero = coefficients(instance.reference.at(0.0));
            assert!((at_zero - &instance.initial).norm() < 1e-12);
        }
        // Distinct collocation points produce distinct generators.
        assert!((instances[0].hamiltonian.clone() - &instances[8].hamiltonian).amax() > 1e-3);
    }

    #[test]
    fn collocation_moments_recombine_correctly() {
        let a = DVector::from_column_slice(&[1.0, 2.0]);
        let b = DVector::from_column_slice(&[3.0, 0.0]);
        let (mean, variance) =
            collocation_moments(&[a.clone(), b], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(mean[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mean[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(variance[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(variance[1], 1.0, epsilon = 1e-15);

        // Identical fields: variance vanishes to rounding.
        let (_, zero_var) = collocation_moments(&[a.clone(), a.clone()], &[0.3, 0.7]).unwrap();
        assert!(zero_var.amax() < 1e-12);

        assert!(collocation_moments(&[], &[]).is_err());
        assert!(collocation_moments(&[a], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn problems_convert_to_variational_form_when_register_filling() {
        let problem = build_stochastic_ode(4).unwrap();
        let vqs = problem.to_vqs().unwrap();
        assert_eq!(vqs.hamiltonian.nrows(), 4);
        assert_eq!(vqs.initial_coefficients, problem.initial);

        let odd = build_stochastic_ode(3).unwrap();
        assert!(matches!(odd.to_vqs(), Err(QfeError::BadStateLength { .. })));
    }

    #[test]
    fn problem_serializes_without_the_reference_closure() {
        let problem = build_dense_ode();
        let json = serde_json::to_value(&problem).unwrap();
        assert_eq!(json["name"], "dense-ode");
        assert_eq!(json["readout"], "coefficients");
        assert!(json.get("reference").is_none());
        assert!(json["initial"].is_array() || json["initial"].is_object());
    }

    #[test]
    fn ensemble_solve_matches_the_serial_loop_bitwise() {
        use crate::ansatz::AnsatzSpec;
        use crate::qsim::ExecutionCounter;
        use crate::vqs::evolve;

        let (instances, _) = build_stochastic_heat(1, 2).unwrap();
        assert_eq!(instances.len(), 2);
        let spec = AnsatzSpec::new(3, 3);
        let configure =
            |vqs: VqsProblem| vqs.with_t_final(0.05).with_record_every(25);

        let counter = ExecutionCounter::new();
        let ensemble = solve_ensemble(&instances, &spec, &counter, configure).unwrap();

        let mut theta0: Option<Vec<f64>> = None;
        for (instance, trajectory) in instances.iter().zip(&ensemble) {
            let mut vqs = configure(instance.to_vqs().unwrap());
            if let Some(theta) = &theta0 {
                vqs = vqs.with_initial_theta(theta.clone());
            }
            let serial = evolve(&vqs, &spec, &ExecutionCounter::new()).unwrap();
            if theta0.is_none() {
                theta0 = Some(serial.thetas[0].clone());
            }
            assert_eq!(serial.times, trajectory.times);
            assert_eq!(serial.thetas, trajectory.thetas);
            assert_eq!(serial.states, trajectory.states);
        }
    }

    #[test]
    fn ensemble_solve_accepts_an_empty_family() {
        let counter = crate::qsim::ExecutionCounter::new();
        let spec = crate::ansatz::AnsatzSpec::new(2, 1);
        let out = solve_ensemble(&[], &spec, &counter, |vqs| vqs).unwrap();
        assert!(out.is_empty());
    }
}
