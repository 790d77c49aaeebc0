//! Shared fixtures for the benchmark targets.
//!
//! Everything here is seeded so repeated benchmark runs measure the same
//! workload.

use nalgebra::DMatrix;
use num_complex::Complex64;
use qfe_core::{AnsatzSpec, AnsatzState, QuantumState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible normalized random state on `num_qubits` qubits.
pub fn random_state(num_qubits: usize, seed: u64) -> QuantumState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitudes: Vec<Complex64> = (0..1usize << num_qubits)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    QuantumState::from_amplitudes(amplitudes.into_iter().map(|z| z / norm).collect())
        .expect("a normalized amplitude vector is a valid state")
}

/// A reproducible dense random complex matrix of side `dim`.
pub fn random_matrix(dim: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// A reproducible variational state with a full set of rotation angles.
pub fn random_ansatz(num_qubits: usize, layers: usize, seed: u64) -> AnsatzState {
    let spec = AnsatzSpec::new(num_qubits, layers);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; spec.num_parameters() + 1];
    theta[0] = rng.gen_range(0.5..2.0);
    for angle in theta.iter_mut().skip(1) {
        *angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    }
    AnsatzState::new(spec, theta).expect("the drawn parameter vector has the right length")
}
