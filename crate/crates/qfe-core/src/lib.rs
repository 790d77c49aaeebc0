//! Variational simulation of linear differential equations `du/dt = A u`
//! with the solution encoded in the amplitudes of a simulated quantum
//! register.
//!
//! The crate is organized bottom-up:
//!
//! * [`qsim`] — dense statevector simulator (states, gates, circuits) and an
//!   execution counter for comparing measurement strategies by circuit count.
//! * [`pauli`] — Pauli strings, operator decomposition, and the four-part
//!   split of a decomposition by coefficient phase.

pub mod ansatz;
pub mod error;
pub mod pauli;
pub mod ppo;
pub mod problems;
pub mod qsim;
pub mod selftest;
pub mod spectral;
pub mod stochastic;
pub mod vqs;

pub use ansatz::{fit_initial, AnsatzSpec, AnsatzState, Entangler, FitOptions, RotationAxis};
pub use error::{QfeError, Result};
pub use pauli::{
    decompose, split, PauliDecomposition, PauliLetter, PauliString, PhaseClass, SplitHamiltonian,
    SplitPart,
};
pub use ppo::{
    amplitude_encode, amplitude_encode_real, parallel_c_term, prepare_coefficient_state,
    v_block_circuit, VBlockLayout,
};
pub use problems::{
    build_dense_ode, build_heat, build_stochastic_heat, build_stochastic_ode,
    classical_integrate, collocation_moments, expm, solve_ensemble,
    variable_coefficient_heat_matrix, ProblemInstance, Provenance, Readout, ReferenceSolution,
    ReferenceValue,
};
pub use qsim::{
    fidelity, inner_product, Circuit, ExecutionCounter, Gate, GateKind, QuantumState,
};
pub use selftest::{all_passed, run_all, CheckReport};
pub use spectral::{
    build_d1, build_d2, interior_restrict, interpolate, sample_on_grid, CollocationGrid,
};
pub use stochastic::{
    extract_moments, gauss_hermite, galerkin_hamiltonian, kl_expand, sample_zero_amplitude,
    triple_products, HermiteBasis, KlExpansion, QuadratureRule, TripleTensor,
};
pub use vqs::{
    assemble_a, assemble_c, evolve, solve_velocities, EvaluationMode, HamiltonianOps, Integrator,
    MeasurementStrategy, OverlapTest, Trajectory, VqsProblem,
};
