//! Numerical hygiene suite: deterministic cross-checks of the numeric
//! foundations, cheap enough to run before trusting any longer computation.
//!
//! Each check returns a [`CheckReport`] with its observed worst deviation
//! and the bound it was held to, so a regression shows up as a number, not
//! just a flag. The CLI exposes the suite as the `selftest` verb.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::{AnsatzSpec, AnsatzState};
use crate::pauli::decompose;
use crate::spectral::{build_d1, build_d2, CollocationGrid};
use crate::stochastic::{gauss_hermite, physicists_rule, weighted_hermite_values, HermiteBasis};

type Complex64 = Complex<f64>;

/// Outcome of one hygiene check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// Stable check identifier.
    pub name: &'static str,
    /// Worst deviation observed.
    pub observed: f64,
    /// Bound the deviation must stay under.
    pub bound: f64,
}

impl CheckReport {
    /// Whether the check held its bound (and produced a finite number).
    pub fn passed(&self) -> bool {
        self.observed.is_finite() && self.observed < self.bound
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} (observed {:.3e}, bound {:.0e})",
            self.name,
            if self.passed() { "ok" } else { "FAILED" },
            self.observed,
            self.bound
        )
    }
}

/// Runs the whole suite with a fixed seed. All checks always run; inspect
/// [`CheckReport::passed`] per entry.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    vec![
        pauli_roundtrip(seed),
        d2_matches_d1_squared(),
        ansatz_derivatives_match_finite_differences(seed),
        hermite_orthonormality(),
        weighted_hermite_orthonormality(),
        quadrature_weight_normalization(),
    ]
}

/// True when every check in `reports` passed.
pub fn all_passed(reports: &[CheckReport]) -> bool {
    reports.iter().all(CheckReport::passed)
}

/// Decomposing a random dense operator into Pauli strings and resumming
/// them must reproduce the operator.
fn pauli_roundtrip(seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for n in 1..=3 {
        let dim = 1usize << n;
        let matrix = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let rebuilt = match decompose(&matrix) {
            Ok(decomposition) => decomposition.to_matrix(),
            Err(_) => return CheckReport { name: "pauli-roundtrip", observed: f64::NAN, bound: 1e-11 },
        };
        worst = worst.max((rebuilt - matrix).camax());
    }
    CheckReport { name: "pauli-roundtrip", observed: worst, bound: 1e-11 }
}

/// The closed-form second-derivative matrix must equal the squared
/// first-derivative matrix (relative to the largest D2 entry).
fn d2_matches_d1_squared() -> CheckReport {
    let mut worst = 0.0_f64;
    for degree in [8usize, 12] {
        let grid = match CollocationGrid::new(degree) {
            Ok(grid) => grid,
            Err(_) => return CheckReport { name: "d2-equals-d1-squared", observed: f64::NAN, bound: 1e-8 },
        };
        let d1 = build_d1(&grid);
        let d2 = build_d2(&grid);
        let scale = d2.amax();
        worst = worst.max(((&d1 * &d1) - &d2).amax() / scale);
    }
    CheckReport { name: "d2-equals-d1-squared", observed: worst, bound: 1e-8 }
}

/// Analytic tangent states of the ansatz against central finite
/// differences of the trial state.
fn ansatz_derivatives_match_finite_differences(seed: u64) -> CheckReport {
    let name = "ansatz-derivative-vs-finite-difference";
    let fail = CheckReport { name, observed: f64::NAN, bound: 1e-8 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let spec = AnsatzSpec::new(2, 2);
    let m = spec.num_parameters();
    let mut theta: Vec<f64> = (0..=m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    theta[0] = rng.gen_range(0.5..1.5);

    let trial = |theta: &[f64]| -> Option<Vec<Complex64>> {
        let state = AnsatzState::new(spec.clone(), theta.to_vec()).ok()?;
        Some(state.evaluate().amplitudes().to_vec())
    };
    let Some(state) = AnsatzState::new(spec.clone(), theta.clone()).ok() else {
        return fail;
    };

    let eps = 1e-6;
    let mut worst = 0.0_f64;
    for k in 0..=m {
        let analytic = match state.derivative_state(k) {
            Ok(s) => s,
            Err(_) => return fail,
        };
        let mut plus = theta.clone();
        plus[k] += eps;
        let mut minus = theta.clone();
        minus[k] -= eps;
        let (Some(fp), Some(fm)) = (trial(&plus), trial(&minus)) else {
            return fail;
        };
        for (idx, value) in analytic.amplitudes().iter().enumerate() {
            let fd = (fp[idx] - fm[idx]) / (2.0 * eps);
            worst = worst.max((value - fd).norm());
        }
    }
    CheckReport { name, observed: worst, bound: 1e-8 }
}

/// `E[h_i h_j] = delta_ij` for the probabilists' basis under quadrature.
fn hermite_orthonormality() -> CheckReport {
    let name = "hermite-orthonormality";
    let basis = HermiteBasis::new(8);
    let rule = match gauss_hermite(20, 1) {
        Ok(rule) => rule,
        Err(_) => return CheckReport { name, observed: f64::NAN, bound: 1e-10 },
    };
    let mut worst = 0.0_f64;
    for i in 0..=8 {
        for j in 0..=8 {
            let inner = rule.expectation(|x| {
                let h = basis.values(x[0]);
                h[i] * h[j]
            });
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner - expected).abs());
        }
    }
    CheckReport { name, observed: worst, bound: 1e-10 }
}

/// `integral eta_i eta_j dx = delta_ij` for the weighted Hermite functions.
fn weighted_hermite_orthonormality() -> CheckReport {
    let (points, weights) = physicists_rule(24);
    let mut worst = 0.0_f64;
    for i in 0..=8 {
        for j in 0..=8 {
            let mut inner = 0.0;
            for (&x, &w) in points.iter().zip(&weights) {
                let eta = weighted_hermite_values(8, x);
                inner += w * (x * x).exp() * eta[i] * eta[j];
            }
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner - expected).abs());
        }
    }
    CheckReport { name: "weighted-hermite-orthonormality", observed: worst, bound: 1e-10 }
}

/// Tensorized quadrature weights are a probability distribution and
/// low-order normal moments come out exactly.
fn quadrature_weight_normalization() -> CheckReport {
    let name = "quadrature-normalization";
    let fail = CheckReport { name, observed: f64::NAN, bound: 1e-10 };
    let mut worst = 0.0_f64;
    for (nodes, dims) in [(2usize, 1usize), (3, 1), (5, 1), (3, 2), (3, 3)] {
        let rule = match gauss_hermite(nodes, dims) {
            Ok(rule) => rule,
            Err(_) => return fail,
        };
        worst = worst.max((rule.weights.iter().sum::<f64>() - 1.0).abs());
        worst = worst.max((rule.expectation(|x| x[0] * x[0]) - 1.0).abs());
        if nodes >= 3 {
            worst = worst.max((rule.expectation(|x| x[0].powi(4)) - 3.0).abs());
        }
    }
    CheckReport { name, observed: worst, bound: 1e-10 }
}
