//! Probability-space machinery for differential equations with random
//! coefficients.
//!
//! Everything here is classical pre/post-processing around the variational
//! solver:
//!
//! * [`HermiteBasis`] — orthonormal probabilists' Hermite polynomials, the
//!   functional basis for polynomial chaos expansions (PCE) of Gaussian
//!   random variables.
//! * [`triple_products`] / [`galerkin_hamiltonian`] — the Galerkin projection
//!   that turns a scalar ODE with a Gaussian random coefficient into a
//!   coupled deterministic system for the chaos coefficients.
//! * [`extract_moments`] / [`sample_zero_amplitude`] — reading the solution
//!   mean and variance off a normalized amplitude vector and its tracked
//!   magnitude, exactly or from simulated measurement shots.
//! * [`gauss_hermite`] — probabilist-normalized Gauss-Hermite quadrature,
//!   tensorized over independent Gaussian dimensions, used for stochastic
//!   collocation.
//! * [`kl_expand`] — a Karhunen-Loève expansion of a Gaussian random field,
//!   computed by projecting the covariance kernel onto weighted Hermite
//!   functions and solving the resulting dense eigenproblem.
//!
//! # Conventions
//!
//! One Hermite convention is used everywhere in the public surface: the
//! *orthonormal probabilists'* polynomials `h_k`, satisfying
//! `E[h_i(xi) h_j(xi)] = delta_ij` for standard-normal `xi`, with `h_0 = 1`
//! and the recurrence `h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k+1)`.
//! The variance formula in [`extract_moments`] silently assumes this
//! normalization, so it is applied uniformly.
//!
//! The single exception is internal to [`kl_expand`]: covariance kernels
//! live on the real line with Lebesgue measure, so the eigenfunctions are
//! expanded in *weighted Hermite functions*
//! `eta_k(x) = H_k(x) e^{-x^2/2} / sqrt(sqrt(pi) 2^k k!)` built from
//! physicists' polynomials `H_k`. These are orthonormal in `L^2(R)` and the
//! conversion never leaks out of that routine.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{QfeError, Result};
use crate::qsim::QuantumState;

/// Number of 1D Gauss-Hermite nodes used for each axis of the covariance
/// projection integrals inside [`kl_expand`].
///
/// Forty nodes resolve smooth kernels (such as the squared-exponential) to
/// well below the eigenvalue clamp threshold; under-resolution of a rougher
/// kernel surfaces as a spurious negative eigenvalue and is reported as an
/// error rather than silently degrading the expansion.
const KL_QUADRATURE_NODES: usize = 40;

/// Eigenvalues of the projected covariance operator below this value are
/// treated as evidence that the kernel is not positive semidefinite (or that
/// the projection quadrature is under-resolved).
const EIGENVALUE_TOLERANCE: f64 = 1e-10;

/// Orthonormal probabilists' Hermite polynomials up to a fixed order.
///
/// `h_0 = 1`, `h_1 = x`, and `E[h_i h_j] = delta_ij` under the standard
/// normal weight. The struct only records the order; evaluation runs the
/// numerically stable normalized three-term recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermiteBasis {
    /// Highest polynomial degree provided by [`HermiteBasis::values`].
    pub order: usize,
}

impl HermiteBasis {
    /// A basis containing `h_0 .. h_order` (inclusive).
    pub fn new(order: usize) -> Self {
        Self { order }
    }

    /// Evaluates `[h_0(x), h_1(x), .., h_order(x)]`.
    pub fn values(&self, x: f64) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.order + 1);
        values.push(1.0);
        if self.order == 0 {
            return values;
        }
        values.push(x);
        for k in 1..self.order {
            let next =
                (x * values[k] - (k as f64).sqrt() * values[k - 1]) / ((k + 1) as f64).sqrt();
            values.push(next);
        }
        values
    }

    /// Evaluates the single polynomial `h_k(x)`.
    pub fn value(&self, k: usize, x: f64) -> f64 {
        assert!(k <= self.order, "degree {k} exceeds basis order {}", self.order);
        HermiteBasis::new(k).values(x)[k]
    }
}

/// The Galerkin projection tensor `e[l][i][j] = <h_l, h_i h_j>` of an
/// orthonormal Hermite basis, for all indices below a common size.
///
/// Symmetry in `(i, j)` holds exactly by construction. Produced by
/// [`triple_products`].
#[derive(Debug, Clone, PartialEq)]
pub struct TripleTensor {
    size: usize,
    data: Vec<f64>,
}

impl TripleTensor {
    /// Number of basis functions covered by each index.
    pub fn size(&self) -> usize {
        self.size
    }

    /// The projection coefficient `<h_l, h_i h_j>`.
    pub fn get(&self, l: usize, i: usize, j: usize) -> f64 {
        assert!(
            l < self.size && i < self.size && j < self.size,
            "triple-product index ({l}, {i}, {j}) out of range for size {}",
            self.size
        );
        self.data[(l * self.size + i) * self.size + j]
    }
}

/// Computes the triple-product tensor `<h_l, h_i h_j>` for all indices below
/// `size` by Gauss-Hermite quadrature.
///
/// The integrand has degree at most `3 (size - 1)`, so the rule uses
/// `ceil((3 size + 1) / 2)` nodes and the entries are exact to rounding.
///
/// # Errors
///
/// Returns [`QfeError::TooSmall`] when `size` is zero.
pub fn triple_products(size: usize) -> Result<TripleTensor> {
    if size == 0 {
        return Err(QfeError::TooSmall { what: "triple-product tensor size", min: 1, got: 0 });
    }
    let nodes = (3 * size + 1).div_ceil(2);
    let (points, weights) = probabilists_rule(nodes);
    let basis = HermiteBasis::new(size - 1);
    // Tabulate h_k at every node once; each tensor entry is then a weighted
    // dot product over nodes.
    let table: Vec<Vec<f64>> = points.iter().map(|&x| basis.values(x)).collect();

    let mut data = vec![0.0; size * size * size];
    for l in 0..size {
        for i in 0..size {
            for j in 0..=i {
                let mut sum = 0.0;
                for (q, w) in weights.iter().enumerate() {
                    sum += w * table[q][l] * table[q][i] * table[q][j];
                }
                data[(l * size + i) * size + j] = sum;
                data[(l * size + j) * size + i] = sum;
            }
        }
    }
    Ok(TripleTensor { size, data })
}

/// Builds the stochastic-Galerkin system matrix for `du/dt = a(xi) u` where
/// the random coefficient has the chaos expansion `a = sum_i a_i h_i(xi)`.
///
/// Projecting onto the orthonormal basis gives coupled deterministic ODEs
/// `d mu_l / dt = sum_j H[l][j] mu_j` with `H[l][j] = sum_i a_i e[l][i][j]`.
///
/// # Errors
///
/// Returns [`QfeError::BadConfiguration`] when `a_coeffs` is empty or longer
/// than `size`, or [`QfeError::TooSmall`] when `size` is zero.
pub fn galerkin_hamiltonian(a_coeffs: &[f64], size: usize) -> Result<DMatrix<f64>> {
    if a_coeffs.is_empty() {
        return Err(QfeError::BadConfiguration {
            reason: "coefficient expansion must have at least the mean term".into(),
        });
    }
    if a_coeffs.len() > size {
        return Err(QfeError::BadConfiguration {
            reason: format!(
                "coefficient expansion has {} terms but the Galerkin basis only {size}",
                a_coeffs.len()
            ),
        });
    }
    let tensor = triple_products(size)?;
    let mut h = DMatrix::zeros(size, size);
    for l in 0..size {
        for j in 0..size {
            let mut entry = 0.0;
            for (i, &a) in a_coeffs.iter().enumerate() {
                entry += a * tensor.get(l, i, j);
            }
            h[(l, j)] = entry;
        }
    }
    Ok(h)
}

/// Reads the solution mean and variance off an encoded chaos-coefficient
/// state.
///
/// With coefficients `mu_i = alpha * amp_i` encoded in a normalized state,
/// orthonormality of the basis gives `mean = mu_0 = alpha * amp_0` and
/// `variance = sum_{i >= 1} mu_i^2 = alpha^2 (1 - amp_0^2)`. The magnitude
/// `alpha` is the classically tracked normalization of the trial state.
pub fn extract_moments(state: &QuantumState, alpha: f64) -> (f64, f64) {
    let amp0 = state.amplitude(0);
    let mean = alpha * amp0.re;
    let variance = alpha * alpha * (1.0 - amp0.norm_sqr());
    (mean, variance)
}

/// Estimates the zero-basis-state population `amp_0^2` from simulated
/// measurement shots, returning `(estimate, standard_error)`.
///
/// Each shot is a Bernoulli trial with success probability
/// `p = |<0|state>|^2`; the estimate is the observed frequency and the
/// standard error is the binomial `sqrt(p_hat (1 - p_hat) / shots)`. The
/// estimation error therefore shrinks like `1/sqrt(shots)`.
pub fn sample_zero_amplitude<R: Rng + ?Sized>(
    state: &QuantumState,
    shots: u64,
    rng: &mut R,
) -> (f64, f64) {
    assert!(shots > 0, "at least one measurement shot is required");
    let p = state.probability(0).clamp(0.0, 1.0);
    let hits = Binomial::new(shots, p).expect("probability is clamped to [0, 1]").sample(rng);
    let estimate = hits as f64 / shots as f64;
    let standard_error = (estimate * (1.0 - estimate) / shots as f64).sqrt();
    (estimate, standard_error)
}

/// A quadrature rule over one or more independent standard-normal
/// dimensions.
///
/// Weights follow the probabilist convention and sum to one, so weighted
/// sums are expectations. Multi-dimensional rules are full tensor products
/// of the 1D rule; `nodes[j]` is the `j`-th collocation point with one
/// coordinate per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Collocation points, each of length `dims`.
    pub nodes: Vec<Vec<f64>>,
    /// Matching weights, summing to one.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Number of collocation points.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the rule has no points (never produced by
    /// [`gauss_hermite`]).
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The expectation `E[f(xi)]` of a function of the Gaussian vector.
    pub fn expectation(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Builds the `nodes_per_dim`-point Gauss-Hermite rule for the standard
/// normal weight, tensorized over `dims` independent dimensions.
///
/// The 1D rule integrates polynomials of degree `2 nodes_per_dim - 1`
/// exactly; the tensor rule inherits that exactness per coordinate. Nodes
/// and weights come from the symmetric-tridiagonal (Golub-Welsch)
/// eigenproblem of the probabilists' recurrence.
///
/// # Errors
///
/// Returns [`QfeError::TooSmall`] when either argument is zero.
pub fn gauss_hermite(nodes_per_dim: usize, dims: usize) -> Result<QuadratureRule> {
    if nodes_per_dim == 0 {
        return Err(QfeError::TooSmall { what: "quadrature nodes per dimension", min: 1, got: 0 });
    }
    if dims == 0 {
        return Err(QfeError::TooSmall { what: "quadrature dimensions", min: 1, got: 0 });
    }
    let (points, weights) = probabilists_rule(nodes_per_dim);

    let total = nodes_per_dim.checked_pow(dims as u32).expect("tensor rule size overflows usize");
    let mut nodes = Vec::with_capacity(total);
    let mut tensor_weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut point = Vec::with_capacity(dims);
        let mut weight = 1.0;
        let mut rest = flat;
        for _ in 0..dims {
            let idx = rest % nodes_per_dim;
            rest /= nodes_per_dim;
            point.push(points[idx]);
            weight *= weights[idx];
        }
        // `rest` enumerated the last dimension fastest; reverse so the first
        // coordinate varies slowest, matching row-major intuition.
        point.reverse();
        nodes.push(point);
        tensor_weights.push(weight);
    }
    Ok(QuadratureRule { nodes, weights: tensor_weights })
}

/// 1D probabilists' Gauss-Hermite rule: nodes ascending, weights summing to
/// one.
fn probabilists_rule(nodes: usize) -> (Vec<f64>, Vec<f64>) {
    // Jacobi matrix of the orthonormal probabilists' recurrence: zero
    // diagonal, off-diagonal sqrt(k). Its eigenvalues are the nodes and the
    // squared first components of the orthonormal eigenvectors are the
    // weights (already normalized to sum to one).
    let mut jacobi = DMatrix::zeros(nodes, nodes);
    for k in 1..nodes {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eigen = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..nodes)
        .map(|i| {
            let first = eigen.eigenvectors[(0, i)];
            (eigen.eigenvalues[i], first * first)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// A truncated Karhunen-Loève expansion of a Gaussian random field
/// `gamma(x; omega) = mu(x) + sum_{i < truncation} sqrt(lambda_i) phi_i(x) xi_i`.
///
/// Eigenfunctions are stored as coefficient vectors over the orthonormal
/// weighted Hermite functions `eta_k`, so they can be evaluated anywhere on
/// the real line; the construction grid and the mean samples on it are kept
/// for convenience. Produced by [`kl_expand`].
#[derive(Debug, Clone, PartialEq)]
pub struct KlExpansion {
    /// Spatial points the expansion was sampled on.
    pub grid: Vec<f64>,
    /// Mean field `mu(x)` at the grid points.
    pub mean_samples: Vec<f64>,
    /// Covariance-operator eigenvalues, descending and clamped to `>= 0`.
    pub lambdas: Vec<f64>,
    /// Row `i` holds the coefficients `d_ik` of eigenfunction `phi_i` over
    /// the weighted Hermite functions `eta_k`.
    pub coefficients: Vec<Vec<f64>>,
    /// Number of leading modes a realization keeps.
    pub truncation: usize,
}

impl KlExpansion {
    /// Evaluates eigenfunction `phi_i` at an arbitrary point.
    pub fn eigenfunction(&self, i: usize, x: f64) -> f64 {
        let eta = weighted_hermite_values(self.coefficients[i].len() - 1, x);
        self.coefficients[i].iter().zip(&eta).map(|(d, e)| d * e).sum()
    }

    /// Samples eigenfunction `phi_i` on the construction grid.
    pub fn eigenfunction_samples(&self, i: usize) -> Vec<f64> {
        self.grid.iter().map(|&x| self.eigenfunction(i, x)).collect()
    }

    /// The field realization at the construction grid for a draw `xi` of the
    /// expansion's standard-normal variables.
    ///
    /// # Errors
    ///
    /// Returns [`QfeError::BadParameterCount`] unless `xi` has exactly
    /// `truncation` entries.
    pub fn realize(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.truncation {
            return Err(QfeError::BadParameterCount {
                expected: self.truncation,
                got: xi.len(),
            });
        }
        let mut field = self.mean_samples.clone();
        for (i, &z) in xi.iter().enumerate() {
            let scale = self.lambdas[i].sqrt() * z;
            for (f, phi) in field.iter_mut().zip(self.eigenfunction_samples(i)) {
                *f += scale * phi;
            }
        }
        Ok(field)
    }

    /// Sum of all retained-plus-discarded eigenvalues (total field energy
    /// captured by the basis).
    pub fn total_energy(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// Sum of the first `truncation` eigenvalues.
    pub fn retained_energy(&self) -> f64 {
        self.lambdas[..self.truncation].iter().sum()
    }
}

/// Evaluates the orthonormal weighted Hermite functions
/// `[eta_0(x), .., eta_order(x)]` with
/// `eta_k(x) = H_k(x) e^{-x^2/2} / sqrt(sqrt(pi) 2^k k!)`.
///
/// The recurrence runs on the normalized functions directly
/// (`eta_{k+1} = sqrt(2/(k+1)) x eta_k - sqrt(k/(k+1)) eta_{k-1}`), which
/// stays bounded where the raw physicists' polynomials would overflow.
pub(crate) fn weighted_hermite_values(order: usize, x: f64) -> Vec<f64> {
    let mut values = Vec::with_capacity(order + 1);
    values.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if order == 0 {
        return values;
    }
    values.push(std::f64::consts::SQRT_2 * x * values[0]);
    for k in 1..order {
        let next = (2.0 / (k + 1) as f64).sqrt() * x * values[k]
            - (k as f64 / (k + 1) as f64).sqrt() * values[k - 1];
        values.push(next);
    }
    values
}

/// Normalized physicists' Hermite polynomials `H_k(x) / sqrt(sqrt(pi) 2^k k!)`
/// (the weighted Hermite functions with the Gaussian factor removed are
/// exactly these).
fn normalized_physicists_values(order: usize, x: f64) -> Vec<f64> {
    let mut values = Vec::with_capacity(order + 1);
    values.push(std::f64::consts::PI.powf(-0.25));
    if order == 0 {
        return values;
    }
    values.push(std::f64::consts::SQRT_2 * x * values[0]);
    for k in 1..order {
        let next = (2.0 / (k + 1) as f64).sqrt() * x * values[k]
            - (k as f64 / (k + 1) as f64).sqrt() * values[k - 1];
        values.push(next);
    }
    values
}

/// 1D physicists' Gauss-Hermite rule (`integral f(x) e^{-x^2} dx ~= sum w_j
/// f(x_j)`), obtained from the probabilists' rule by rescaling.
pub(crate) fn physicists_rule(nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let (points, weights) = probabilists_rule(nodes);
    let scale = 1.0 / std::f64::consts::SQRT_2;
    let total = std::f64::consts::PI.sqrt();
    (
        points.into_iter().map(|x| x * scale).collect(),
        weights.into_iter().map(|w| w * total).collect(),
    )
}

/// Karhunen-Loève expansion of a Gaussian random field with the given mean
/// and covariance over the real line.
///
/// The covariance operator is projected onto `basis_size` orthonormal
/// weighted Hermite functions: `K[k][m] = integral integral eta_k(x)
/// C(x, x') eta_m(x') dx dx'`, computed with a nested
/// [`KL_QUADRATURE_NODES`]-point Gauss-Hermite rule (the Gaussian factors of
/// `eta` are folded into the quadrature weights so nothing overflows). The
/// symmetric eigenproblem of `K` yields the eigenvalues and eigenfunction
/// coefficients, sorted descending.
///
/// `truncation` picks how many leading modes a realization keeps; `None`
/// selects the smallest count capturing at least 95% of the total
/// eigenvalue mass.
///
/// # Errors
///
/// * [`QfeError::TooSmall`] — `basis_size` of zero or an empty `grid`.
/// * [`QfeError::BadConfiguration`] — explicit `truncation` exceeding
///   `basis_size`.
/// * [`QfeError::NotPositiveSemidefinite`] — an eigenvalue below `-1e-10`,
///   evidence of a non-PSD kernel or under-resolved projection quadrature.
pub fn kl_expand(
    mean_fn: impl Fn(f64) -> f64,
    covariance_fn: impl Fn(f64, f64) -> f64,
    basis_size: usize,
    truncation: Option<usize>,
    grid: &[f64],
) -> Result<KlExpansion> {
    if basis_size == 0 {
        return Err(QfeError::TooSmall { what: "weighted Hermite basis size", min: 1, got: 0 });
    }
    if grid.is_empty() {
        return Err(QfeError::TooSmall { what: "spatial grid points", min: 1, got: 0 });
    }
    if let Some(l) = truncation {
        if l > basis_size {
            return Err(QfeError::BadConfiguration {
                reason: format!("truncation {l} exceeds the basis size {basis_size}"),
            });
        }
    }

    let (points, weights) = physicists_rule(KL_QUADRATURE_NODES);
    // eta_k(x) = P_k(x) e^{-x^2/2} with P_k the normalized physicists'
    // polynomial. Folding one e^{-x^2/2} into each quadrature weight keeps
    // every tabulated factor within f64 range: w_j e^{x_j^2} e^{-x_j^2/2}
    // shrinks like e^{-x_j^2/2}.
    let folded: Vec<f64> =
        points.iter().zip(&weights).map(|(&x, &w)| w * (0.5 * x * x).exp()).collect();
    let table: Vec<Vec<f64>> =
        points.iter().map(|&x| normalized_physicists_values(basis_size - 1, x)).collect();

    let m = KL_QUADRATURE_NODES;
    let mut kernel_at_nodes = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            kernel_at_nodes[(a, b)] = covariance_fn(points[a], points[b]);
        }
    }

    let mut k_matrix = DMatrix::zeros(basis_size, basis_size);
    for k in 0..basis_size {
        for l in 0..=k {
            let mut sum = 0.0;
            for a in 0..m {
                let mut inner = 0.0;
                for b in 0..m {
                    inner += folded[b] * table[b][l] * kernel_at_nodes[(a, b)];
                }
                sum += folded[a] * table[a][k] * inner;
            }
            k_matrix[(k, l)] = sum;
            k_matrix[(l, k)] = sum;
        }
    }

    let eigen = k_matrix.symmetric_eigen();
    let mut order: Vec<usize> = (0..basis_size).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

    let mut lambdas = Vec::with_capacity(basis_size);
    let mut coefficients = Vec::with_capacity(basis_size);
    for &idx in &order {
        let lambda = eigen.eigenvalues[idx];
        if lambda < -EIGENVALUE_TOLERANCE {
            return Err(QfeError::NotPositiveSemidefinite { value: lambda });
        }
        lambdas.push(lambda.max(0.0));
        coefficients.push(eigen.eigenvectors.column(idx).iter().copied().collect());
    }

    let truncation = match truncation {
        Some(l) => l,
        None => {
            let total: f64 = lambdas.iter().sum();
            if total <= 0.0 {
                0
            } else {
                let mut kept = 0.0;
                let mut count = basis_size;
                for (i, &lambda) in lambdas.iter().enumerate() {
                    kept += lambda;
                    if kept >= 0.95 * total {
                        count = i + 1;
                        break;
                    }
                }
                count
            }
        }
    };

    let mean_samples = grid.iter().map(|&x| mean_fn(x)).collect();
    Ok(KlExpansion {
        grid: grid.to_vec(),
        mean_samples,
        lambdas,
        coefficients,
        truncation,
    })
}

/// Integrates `eta_i`-weighted functionals of a kernel slice:
/// `integral C(x, x') phi(x') dx'` evaluated by the same folded quadrature
/// that builds the projection matrix. Used by tests to check the eigen
/// relation independently of the matrix route.
#[cfg(test)]
fn apply_covariance(
    covariance_fn: impl Fn(f64, f64) -> f64,
    expansion: &KlExpansion,
    mode: usize,
    x: f64,
) -> f64 {
    let (points, weights) = physicists_rule(KL_QUADRATURE_NODES);
    points
        .iter()
        .zip(&weights)
        .map(|(&xp, &w)| {
            w * (xp * xp).exp() * covariance_fn(x, xp) * expansion.eigenfunction(mode, xp)
        })
        .sum()
}
