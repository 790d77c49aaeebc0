//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by state construction, circuit execution, decomposition,
/// fitting, and time evolution.
#[derive(Debug, Error)]
pub enum QfeError {
    /// A qubit index referenced a wire outside the register.
    #[error("qubit {index} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    /// A gate listed the same wire as both target and control (or twice as a control).
    #[error("gate wires must be distinct: qubit {index} appears more than once")]
    DuplicateWire { index: usize },

    /// Two registers that must agree in size do not.
    #[error("qubit count mismatch: {left} vs {right}")]
    QubitCountMismatch { left: usize, right: usize },

    /// An amplitude vector whose length is not a power of two.
    #[error("amplitude vector length {len} is not a power of two")]
    BadStateLength { len: usize },

    /// A square matrix whose dimension is not a power of two.
    #[error("matrix dimension {dim} is not a power of two")]
    BadMatrixDimension { dim: usize },

    /// A matrix that must be square is not.
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    /// A Pauli-string label with a character outside {I, X, Y, Z}.
    #[error("invalid Pauli letter '{letter}' in \"{label}\"")]
    BadPauliLetter { letter: char, label: String },

    /// A Pauli-string index outside [0, 4^n).
    #[error("Pauli index {index} out of range for {num_qubits} qubits")]
    PauliIndexOutOfRange { index: usize, num_qubits: usize },

    /// A vector expected to be normalized was not.
    #[error("vector norm {norm} deviates from 1 beyond tolerance {tol}")]
    NotNormalized { norm: f64, tol: f64 },

    /// A probability-style input with a negative entry.
    #[error("coefficient {index} is negative ({value}); mixture weights must be non-negative")]
    NegativeCoefficient { index: usize, value: f64 },

    /// State-preparation target of invalid length for the register layout.
    #[error("coefficient vector length {len} must be 4^n for some n >= 1")]
    BadCoefficientLength { len: usize },

    /// Ansatz parameter vector of the wrong length.
    #[error("expected {expected} parameters (including the magnitude), got {got}")]
    BadParameterCount { expected: usize, got: usize },

    /// The magnitude parameter must stay positive.
    #[error("magnitude parameter must be positive, got {value}")]
    NonPositiveMagnitude { value: f64 },

    /// Initial-state fitting exhausted its restart budget above tolerance.
    #[error("initial-state fit stalled at infidelity {best:.3e} (tolerance {tol:.3e})")]
    FitFailed { best: f64, tol: f64 },

    /// A derivative index outside the parameter range.
    #[error("derivative index {index} out of range for {num_parameters} rotation parameters")]
    DerivativeIndexOutOfRange { index: usize, num_parameters: usize },

    /// Covariance kernel with a significantly negative eigenvalue.
    #[error("covariance operator has negative eigenvalue {value:.3e}; kernel is not positive semidefinite")]
    NotPositiveSemidefinite { value: f64 },

    /// A grid or basis size below the minimum the operation supports.
    #[error("{what} must be at least {min}, got {got}")]
    TooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },

    /// A non-finite number surfaced where a finite one is required.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    /// Time integration aborted (non-finite parameters, singular system, ...).
    #[error("evolution aborted at step {step} (t = {time:.6}): {reason}")]
    EvolutionAborted {
        step: usize,
        time: f64,
        reason: String,
    },

    /// Invalid solver configuration (step size, horizon, ...).
    #[error("invalid solver configuration: {reason}")]
    BadConfiguration { reason: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, QfeError>;
