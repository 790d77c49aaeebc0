//! Dense statevector simulator: states, gates, circuits, and an execution
//! counter for comparing measurement strategies by circuit count.
//!
//! Qubit 0 is the least significant bit of the amplitude index, so basis
//! state `|b_{n-1} ... b_1 b_0>` lives at index `sum_k b_k 2^k`. Gates are
//! applied in place with stride arithmetic; any gate may carry an arbitrary
//! set of control wires (all controls must read 1 for the kernel to fire).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{QfeError, Result};
use crate::pauli::PauliString;

/// A pure state of `num_qubits` qubits as a dense amplitude vector.
///
/// The amplitude vector always has length `2^num_qubits`. States produced by
/// circuit execution stay normalized up to floating-point roundoff; states
/// scaled by a magnitude parameter (see [`crate::ansatz::AnsatzState`]) do
/// not, and callers that require normalization should check
/// [`QuantumState::assert_normalized`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// The all-zeros computational basis state `|0...0>`.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amplitudes = vec![Complex64::ZERO; 1 << num_qubits];
        amplitudes[0] = Complex64::ONE;
        Self {
            num_qubits,
            amplitudes,
        }
    }

    /// A computational basis state `|index>`.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(QfeError::QubitOutOfRange {
                index,
                num_qubits,
            });
        }
        let mut amplitudes = vec![Complex64::ZERO; dim];
        amplitudes[index] = Complex64::ONE;
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Wraps an amplitude vector whose length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QfeError::BadStateLength { len });
        }
        Ok(Self {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    /// Wraps a real amplitude vector (imaginary parts zero).
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Number of qubits in the register.
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Dimension of the amplitude vector, `2^num_qubits`.
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Read-only view of the amplitudes.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Amplitude of basis state `index`.
    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    /// Euclidean norm of the amplitude vector.
    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Errors unless the norm is within `tol` of 1.
    pub fn assert_normalized(&self, tol: f64) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > tol {
            return Err(QfeError::NotNormalized { norm, tol });
        }
        Ok(())
    }

    /// Multiplies every amplitude by a scalar.
    pub fn scale(&mut self, factor: Complex64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    /// Probability of observing basis state `index`.
    pub fn probability(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }

    /// Expectation value of Pauli-Z on one qubit: `P(bit = 0) - P(bit = 1)`.
    pub fn z_expectation(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(QfeError::QubitOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        let mask = 1usize << qubit;
        let mut value = 0.0;
        for (idx, amp) in self.amplitudes.iter().enumerate() {
            let sign = if idx & mask == 0 { 1.0 } else { -1.0 };
            value += sign * amp.norm_sqr();
        }
        Ok(value)
    }

    /// Applies a gate in place.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        let matrix = gate.matrix();
        let target_mask = 1usize << gate.target;
        let control_mask = gate
            .controls
            .iter()
            .fold(0usize, |mask, &c| mask | (1usize << c));
        let [m00, m01, m10, m11] = matrix;
        let dim = self.amplitudes.len();
        let block = target_mask << 1;
        let mut base = 0usize;
        while base < dim {
            for i0 in base..base + target_mask {
                if i0 & control_mask == control_mask {
                    let i1 = i0 | target_mask;
                    let a0 = self.amplitudes[i0];
                    let a1 = self.amplitudes[i1];
                    self.amplitudes[i0] = m00 * a0 + m01 * a1;
                    self.amplitudes[i1] = m10 * a0 + m11 * a1;
                }
            }
            base += block;
        }
        Ok(())
    }

    /// Applies a tensor product of Pauli letters in place.
    ///
    /// Cheaper than gate-by-gate application: each basis amplitude moves to
    /// `index XOR flip_mask` and picks up a phase `i^{#Y} * (-1)^{bits}`.
    pub fn apply_pauli_string(&mut self, pauli: &PauliString) -> Result<()> {
        if pauli.len() != self.num_qubits {
            return Err(QfeError::QubitCountMismatch {
                left: pauli.len(),
                right: self.num_qubits,
            });
        }
        let action = pauli.basis_action();
        if action.flip_mask == 0 {
            // Diagonal string: phases only.
            for (idx, amp) in self.amplitudes.iter_mut().enumerate() {
                *amp *= action.phase(idx);
            }
            return Ok(());
        }
        let dim = self.amplitudes.len();
        let mut out = vec![Complex64::ZERO; dim];
        for (idx, amp) in self.amplitudes.iter().enumerate() {
            out[idx ^ action.flip_mask] = action.phase(idx) * amp;
        }
        self.amplitudes = out;
        Ok(())
    }
}

/// Inner product `<a|b>` (conjugate-linear in `a`).
pub fn inner_product(a: &QuantumState, b: &QuantumState) -> Result<Complex64> {
    if a.num_qubits != b.num_qubits {
        return Err(QfeError::QubitCountMismatch {
            left: a.num_qubits,
            right: b.num_qubits,
        });
    }
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Squared overlap `|<a|b>|^2` of two normalized states.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr())
}

/// The single-qubit operation a [`Gate`] performs on its target wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    /// Pauli-X (bit flip).
    X,
    /// Pauli-Y.
    Y,
    /// Pauli-Z (phase flip).
    Z,
    /// Hadamard.
    H,
    /// Rotation about X: `exp(-i angle X / 2)`.
    Rx(f64),
    /// Rotation about Y: `exp(-i angle Y / 2)`.
    Ry(f64),
    /// Rotation about Z: `exp(-i angle Z / 2)`.
    Rz(f64),
    /// Phase gate `diag(1, exp(i angle))`.
    Phase(f64),
}

impl GateKind {
    /// Row-major 2x2 unitary `[m00, m01, m10, m11]`.
    pub fn matrix(&self) -> [Complex64; 4] {
        let zero = Complex64::ZERO;
        let one = Complex64::ONE;
        match *self {
            GateKind::X => [zero, one, one, zero],
            GateKind::Y => [
                zero,
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                zero,
            ],
            GateKind::Z => [one, zero, zero, -one],
            GateKind::H => {
                let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [h, h, h, -h]
            }
            GateKind::Rx(angle) => {
                let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
                [
                    Complex64::new(c, 0.0),
                    Complex64::new(0.0, -s),
                    Complex64::new(0.0, -s),
                    Complex64::new(c, 0.0),
                ]
            }
            GateKind::Ry(angle) => {
                let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
                [
                    Complex64::new(c, 0.0),
                    Complex64::new(-s, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(c, 0.0),
                ]
            }
            GateKind::Rz(angle) => [
                Complex64::from_polar(1.0, -angle / 2.0),
                zero,
                zero,
                Complex64::from_polar(1.0, angle / 2.0),
            ],
            GateKind::Phase(angle) => [one, zero, zero, Complex64::from_polar(1.0, angle)],
        }
    }

    fn name(&self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::H => "H",
            GateKind::Rx(_) => "RX",
            GateKind::Ry(_) => "RY",
            GateKind::Rz(_) => "RZ",
            GateKind::Phase(_) => "PHASE",
        }
    }
}

/// A single- or multi-controlled one-qubit gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    /// Operation applied to the target wire.
    pub kind: GateKind,
    /// Target wire.
    pub target: usize,
    /// Control wires; the operation fires only when all controls read 1.
    pub controls: Vec<usize>,
}

impl Gate {
    /// Uncontrolled gate of the given kind.
    pub fn new(kind: GateKind, target: usize) -> Self {
        Self {
            kind,
            target,
            controls: Vec::new(),
        }
    }

    /// Pauli-X on `target`.
    pub fn x(target: usize) -> Self {
        Self::new(GateKind::X, target)
    }

    /// Pauli-Y on `target`.
    pub fn y(target: usize) -> Self {
        Self::new(GateKind::Y, target)
    }

    /// Pauli-Z on `target`.
    pub fn z(target: usize) -> Self {
        Self::new(GateKind::Z, target)
    }

    /// Hadamard on `target`.
    pub fn h(target: usize) -> Self {
        Self::new(GateKind::H, target)
    }

    /// X-rotation by `angle` on `target`.
    pub fn rx(target: usize, angle: f64) -> Self {
        Self::new(GateKind::Rx(angle), target)
    }

    /// Y-rotation by `angle` on `target`.
    pub fn ry(target: usize, angle: f64) -> Self {
        Self::new(GateKind::Ry(angle), target)
    }

    /// Z-rotation by `angle` on `target`.
    pub fn rz(target: usize, angle: f64) -> Self {
        Self::new(GateKind::Rz(angle), target)
    }

    /// Phase gate `diag(1, e^{i angle})` on `target`.
    pub fn phase(target: usize, angle: f64) -> Self {
        Self::new(GateKind::Phase(angle), target)
    }

    /// Controlled-X with one control.
    pub fn cx(control: usize, target: usize) -> Self {
        Self::x(target).controlled_by(&[control])
    }

    /// Controlled-Z with one control.
    pub fn cz(control: usize, target: usize) -> Self {
        Self::z(target).controlled_by(&[control])
    }

    /// Controlled phase gate with one control.
    pub fn cphase(control: usize, target: usize, angle: f64) -> Self {
        Self::phase(target, angle).controlled_by(&[control])
    }

    /// Adds control wires to this gate.
    pub fn controlled_by(mut self, controls: &[usize]) -> Self {
        self.controls.extend_from_slice(controls);
        self
    }

    /// The 2x2 unitary applied to the target wire.
    pub fn matrix(&self) -> [Complex64; 4] {
        self.kind.matrix()
    }

    /// Checks wire indices against a register size and rejects duplicates.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        if self.target >= num_qubits {
            return Err(QfeError::QubitOutOfRange {
                index: self.target,
                num_qubits,
            });
        }
        let mut seen = 1usize << self.target;
        for &c in &self.controls {
            if c >= num_qubits {
                return Err(QfeError::QubitOutOfRange {
                    index: c,
                    num_qubits,
                });
            }
            let bit = 1usize << c;
            if seen & bit != 0 {
                return Err(QfeError::DuplicateWire { index: c });
            }
            seen |= bit;
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.controls.is_empty() {
            write!(f, "C{:?}-", self.controls)?;
        }
        match self.kind {
            GateKind::Rx(a) | GateKind::Ry(a) | GateKind::Rz(a) | GateKind::Phase(a) => {
                write!(f, "{}({:.4}) q{}", self.kind.name(), a, self.target)
            }
            _ => write!(f, "{} q{}", self.kind.name(), self.target),
        }
    }
}

/// An ordered gate list on a fixed-width register, tagged with a label used
/// by [`ExecutionCounter`] reports.
#[derive(Debug, Clone)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    label: String,
}

impl Circuit {
    /// Empty circuit on `num_qubits` wires with an empty label.
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            gates: Vec::new(),
            label: String::new(),
        }
    }

    /// Sets the label reported by execution counters.
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Register width.
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Counter label.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Gates in application order.
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Number of gates.
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    /// True when the circuit holds no gates.
    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Appends a gate.
    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    /// Appends every gate of `other`, leaving wire indices unchanged.
    pub fn extend(&mut self, other: &Circuit) -> &mut Self {
        self.gates.extend_from_slice(&other.gates);
        self
    }

    /// Appends every gate of `other` with all wire indices shifted by
    /// `offset`, embedding a narrow circuit into a wider register.
    pub fn extend_shifted(&mut self, other: &Circuit, offset: usize) -> &mut Self {
        for gate in &other.gates {
            let mut shifted = gate.clone();
            shifted.target += offset;
            for c in &mut shifted.controls {
                *c += offset;
            }
            self.gates.push(shifted);
        }
        self
    }

    /// Runs the circuit on `state` in place.
    pub fn run(&self, state: &mut QuantumState) -> Result<()> {
        if state.num_qubits() != self.num_qubits {
            return Err(QfeError::QubitCountMismatch {
                left: self.num_qubits,
                right: state.num_qubits(),
            });
        }
        for gate in &self.gates {
            state.apply_gate(gate)?;
        }
        Ok(())
    }

    /// Runs the circuit starting from `|0...0>` and returns the final state.
    pub fn run_from_zero(&self) -> Result<QuantumState> {
        let mut state = QuantumState::zero(self.num_qubits);
        self.run(&mut state)?;
        Ok(state)
    }

    /// Runs the circuit in place and records one execution against the
    /// circuit's label. The counter ticks only after a successful run.
    pub fn run_counted(&self, state: &mut QuantumState, counter: &ExecutionCounter) -> Result<()> {
        self.run(state)?;
        counter.record(&self.label);
        Ok(())
    }
}

/// Thread-safe tally of circuit executions keyed by circuit label.
///
/// Counts are monotone during a run; the total equals the sum over labels.
/// The per-label map serializes to JSON for machine-readable reports.
#[derive(Debug, Default)]
pub struct ExecutionCounter {
    total: AtomicU64,
    by_label: Mutex<BTreeMap<String, u64>>,
}

impl ExecutionCounter {
    /// A counter with all tallies at zero.
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one execution under `label` (empty labels count as `"(unlabeled)"`).
    pub fn record(&self, label: &str) {
        let label = if label.is_empty() { "(unlabeled)" } else { label };
        self.total.fetch_add(1, Ordering::Relaxed);
        let mut map = self.by_label.lock().expect("counter mutex poisoned");
        *map.entry(label.to_string()).or_insert(0) += 1;
    }

    /// Total executions across all labels.
    pub fn total(&self) -> u64 {
        self.total.load(Ordering::Relaxed)
    }

    /// Executions recorded under one label.
    pub fn tally(&self, label: &str) -> u64 {
        self.by_label
            .lock()
            .expect("counter mutex poisoned")
            .get(label)
            .copied()
            .unwrap_or(0)
    }

    /// Snapshot of every label's tally.
    pub fn snapshot(&self) -> BTreeMap<String, u64> {
        self.by_label.lock().expect("counter mutex poisoned").clone()
    }

    /// JSON object mapping each label to its tally, with keys sorted.
    pub fn report_json(&self) -> String {
        serde_json::to_string(&self.snapshot()).expect("a string-keyed map serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn assert_state_close(state: &QuantumState, expected: &[Complex64], tol: f64) {
        assert_eq!(state.dim(), expected.len());
        for (k, (got, want)) in state.amplitudes().iter().zip(expected).enumerate() {
            assert!(
                (got - want).norm() <= tol,
                "amplitude {k}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn zero_state_has_unit_amplitude_at_origin() {
        let state = QuantumState::zero(3);
        assert_eq!(state.dim(), 8);
        assert_eq!(state.amplitude(0), Complex64::ONE);
        assert_abs_diff_eq!(state.norm(), 1.0);
        state.assert_normalized(1e-12).unwrap();
    }

    #[test]
    fn from_amplitudes_rejects_non_power_of_two() {
        let amps = vec![Complex64::ONE; 3];
        assert!(matches!(
            QuantumState::from_amplitudes(amps),
            Err(QfeError::BadStateLength { len: 3 })
        ));
    }

    #[test]
    fn hadamard_makes_uniform_superposition() {
        let mut state = QuantumState::zero(1);
        state.apply_gate(&Gate::h(0)).unwrap();
        assert_state_close(
            &state,
            &[
                Complex64::new(SQRT_HALF, 0.0),
                Complex64::new(SQRT_HALF, 0.0),
            ],
            1e-15,
        );
    }

    #[test]
    fn x_on_second_qubit_targets_bit_one() {
        let mut state = QuantumState::zero(2);
        state.apply_gate(&Gate::x(1)).unwrap();
        // Qubit 1 carries weight 2 in the index.
        assert_eq!(state.amplitude(2), Complex64::ONE);
    }

    #[test]
    fn cx_flips_target_only_when_control_is_one() {
        let mut state = QuantumState::zero(2);
        state.apply_gate(&Gate::cx(0, 1)).unwrap();
        assert_eq!(state.amplitude(0), Complex64::ONE);

        let mut state = QuantumState::basis(2, 1).unwrap();
        state.apply_gate(&Gate::cx(0, 1)).unwrap();
        assert_eq!(state.amplitude(3), Complex64::ONE);
    }

    #[test]
    fn toffoli_style_double_control_fires_only_on_11() {
        for input in 0..8usize {
            let mut state = QuantumState::basis(3, input).unwrap();
            state
                .apply_gate(&Gate::x(2).controlled_by(&[0, 1]))
                .unwrap();
            let expected = if input & 0b11 == 0b11 { input ^ 0b100 } else { input };
            assert_eq!(state.amplitude(expected), Complex64::ONE, "input {input}");
        }
    }

    #[test]
    fn ry_rotates_within_real_plane() {
        let mut state = QuantumState::zero(1);
        let angle = 0.7357;
        state.apply_gate(&Gate::ry(0, angle)).unwrap();
        assert_state_close(
            &state,
            &[
                Complex64::new((angle / 2.0).cos(), 0.0),
                Complex64::new((angle / 2.0).sin(), 0.0),
            ],
            1e-15,
        );
    }

    #[test]
    fn rz_phases_match_half_angle_convention() {
        let mut state = QuantumState::zero(1);
        state.apply_gate(&Gate::h(0)).unwrap();
        state.apply_gate(&Gate::rz(0, 1.0)).unwrap();
        assert_state_close(
            &state,
            &[
                Complex64::from_polar(SQRT_HALF, -0.5),
                Complex64::from_polar(SQRT_HALF, 0.5),
            ],
            1e-15,
        );
    }

    #[test]
    fn gate_unitarity_preserves_norm() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut state = QuantumState::zero(4);
        for _ in 0..200 {
            let target = rng.gen_range(0..4);
            let angle = rng.gen_range(-3.0..3.0);
            let gate = match rng.gen_range(0..8) {
                0 => Gate::x(target),
                1 => Gate::y(target),
                2 => Gate::z(target),
                3 => Gate::h(target),
                4 => Gate::rx(target, angle),
                5 => Gate::ry(target, angle),
                6 => Gate::rz(target, angle),
                _ => Gate::phase(target, angle),
            };
            let control = rng.gen_range(0..4);
            let gate = if control != target && rng.gen_bool(0.4) {
                gate.controlled_by(&[control])
            } else {
                gate
            };
            state.apply_gate(&gate).unwrap();
        }
        assert_abs_diff_eq!(state.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn out_of_range_wires_are_rejected() {
        let mut state = QuantumState::zero(2);
        assert!(matches!(
            state.apply_gate(&Gate::x(2)),
            Err(QfeError::QubitOutOfRange {
                index: 2,
                num_qubits: 2
            })
        ));
        assert!(matches!(
            state.apply_gate(&Gate::cx(5, 0)),
            Err(QfeError::QubitOutOfRange {
                index: 5,
                num_qubits: 2
            })
        ));
        assert!(matches!(
            state.apply_gate(&Gate::cx(1, 1)),
            Err(QfeError::DuplicateWire { index: 1 })
        ));
    }

    #[test]
    fn inner_product_conjugates_left_argument() {
        let a = QuantumState::from_amplitudes(vec![
            Complex64::new(0.0, 1.0),
            Complex64::ZERO,
        ])
        .unwrap();
        let b = QuantumState::from_amplitudes(vec![Complex64::ONE, Complex64::ZERO]).unwrap();
        let ip = inner_product(&a, &b).unwrap();
        assert_abs_diff_eq!(ip.re, 0.0);
        assert_abs_diff_eq!(ip.im, -1.0);
    }

    #[test]
    fn circuit_run_counted_ticks_label_once() {
        let mut circuit = Circuit::new(2).with_label("bell");
        circuit.push(Gate::h(0)).push(Gate::cx(0, 1));
        let counter = ExecutionCounter::new();
        let mut state = QuantumState::zero(2);
        circuit.run_counted(&mut state, &counter).unwrap();
        assert_eq!(counter.total(), 1);
        assert_eq!(counter.tally("bell"), 1);
        assert_state_close(
            &state,
            &[
                Complex64::new(SQRT_HALF, 0.0),
                Complex64::ZERO,
                Complex64::ZERO,
                Complex64::new(SQRT_HALF, 0.0),
            ],
            1e-15,
        );
    }

    #[test]
    fn counter_report_is_sorted_json() {
        let counter = ExecutionCounter::new();
        counter.record("b");
        counter.record("a");
        counter.record("b");
        assert_eq!(counter.report_json(), r#"{"a":1,"b":2}"#);
        assert_eq!(counter.total(), 3);
    }

    #[test]
    fn extend_shifted_moves_all_wires() {
        let mut inner = Circuit::new(2);
        inner.push(Gate::cx(0, 1));
        let mut outer = Circuit::new(4);
        outer.extend_shifted(&inner, 2);
        assert_eq!(outer.gates()[0].target, 3);
        assert_eq!(outer.gates()[0].controls, vec![2]);
    }

    #[test]
    fn z_expectation_splits_by_bit() {
        let mut state = QuantumState::zero(2);
        state.apply_gate(&Gate::h(0)).unwrap();
        assert_abs_diff_eq!(state.z_expectation(0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(state.z_expectation(1).unwrap(), 1.0, epsilon = 1e-15);
        state.apply_gate(&Gate::x(1)).unwrap();
        assert_abs_diff_eq!(state.z_expectation(1).unwrap(), -1.0, epsilon = 1e-15);
    }
}
