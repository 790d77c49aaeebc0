//! Parallel Pauli operations: a coefficient register that selects Pauli
//! strings coherently, so one overlap-test circuit measures a whole convex
//! combination `sum_i c_i <phi | sigma_i | psi>` at once.
//!
//! The register layout appends `2n` coefficient ancillas to an `n`-qubit
//! system. Ancilla pair `j` holds the base-4 digit of the string index for
//! system qubit `j`: wire `n + 2j` is the Z-control (low bit) and wire
//! `n + 2j + 1` the X-control (high bit), so reading the ancillas as an
//! integer yields exactly [`crate::pauli::PauliString::index`]. Per system
//! qubit the selector block applies controlled-X, then controlled-Z, then a
//! `-pi/2` controlled phase across the ancilla pair; the `(1,1)` branch
//! composes `Z X = iY` and the phase cancels the `i`, leaving Y.
//!
//! Loading the ancillas with `sum_i sqrt(c_i) |i>` and overlapping against
//! the same (unselected) register on the bra side contracts the register
//! index automatically — no post-selection or ancilla measurement is needed,
//! and the `C_k` projections cost one circuit per non-empty phase class
//! instead of one per Pauli string.

use num_complex::Complex64;

use crate::ansatz::AnsatzState;
use crate::error::{QfeError, Result};
use crate::pauli::{PhaseClass, SplitHamiltonian};
use crate::qsim::{Circuit, ExecutionCounter, Gate, QuantumState};
use crate::vqs::{weighted_overlap, EvaluationMode, LABEL_C};

/// Wire assignment of the Pauli-selector block: which ancilla pair controls
/// which system qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VBlockLayout {
    num_targets: usize,
    /// `(z_control, x_control)` for each system qubit.
    pairs: Vec<(usize, usize)>,
}

impl VBlockLayout {
    /// The standard layout: system on wires `0..n`, ancilla pair for system
    /// qubit `j` on wires `(n + 2j, n + 2j + 1)`.
    pub fn standard(num_targets: usize) -> Self {
        Self {
            num_targets,
            pairs: (0..num_targets)
                .map(|j| (num_targets + 2 * j, num_targets + 2 * j + 1))
                .collect(),
        }
    }

    /// A custom wire assignment; every control must be distinct and outside
    /// the target range.
    pub fn new(num_targets: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.len() != num_targets {
            return Err(QfeError::QubitCountMismatch {
                left: pairs.len(),
                right: num_targets,
            });
        }
        let mut seen = vec![false; 3 * num_targets + pairs
            .iter()
            .flat_map(|&(z, x)| [z, x])
            .max()
            .map_or(0, |m| m + 1)];
        for &(z, x) in &pairs {
            for wire in [z, x] {
                if wire < num_targets {
                    return Err(QfeError::DuplicateWire { index: wire });
                }
                if seen[wire] {
                    return Err(QfeError::DuplicateWire { index: wire });
                }
                seen[wire] = true;
            }
        }
        Ok(Self { num_targets, pairs })
    }

    /// Number of system qubits.
    pub fn num_targets(&self) -> usize {
        self.num_targets
    }

    /// Control pair `(z, x)` for system qubit `j`.
    pub fn pair(&self, j: usize) -> (usize, usize) {
        self.pairs[j]
    }

    /// Total register width used by the standard layout.
    pub fn total_qubits(&self) -> usize {
        self.pairs
            .iter()
            .flat_map(|&(z, x)| [z, x])
            .max()
            .map_or(self.num_targets, |m| m.max(self.num_targets - 1) + 1)
    }
}

/// Builds the Pauli-selector circuit: with the ancilla register in basis
/// state `|i>`, the system receives exactly the Pauli string of index `i`.
pub fn v_block_circuit(layout: &VBlockLayout) -> Result<Circuit> {
    let width = layout.total_qubits();
    let mut circuit = Circuit::new(width);
    for j in 0..layout.num_targets() {
        let (z_ctrl, x_ctrl) = layout.pair(j);
        circuit.push(Gate::cx(x_ctrl, j));
        circuit.push(Gate::cz(z_ctrl, j));
        circuit.push(Gate::cphase(z_ctrl, x_ctrl, -std::f64::consts::FRAC_PI_2));
    }
    for gate in circuit.gates() {
        gate.validate(width)?;
    }
    Ok(circuit)
}

/// Builds a circuit preparing an arbitrary normalized amplitude vector from
/// `|0...0>` by a binary tree of controlled rotations plus a relative-phase
/// layer (the prepared state matches the target up to one global phase).
pub fn amplitude_encode(target: &[Complex64]) -> Result<Circuit> {
    let len = target.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(QfeError::BadStateLength { len });
    }
    let norm_sq: f64 = target.iter().map(|a| a.norm_sqr()).sum();
    if (norm_sq.sqrt() - 1.0).abs() > 1e-10 {
        return Err(QfeError::NotNormalized {
            norm: norm_sq.sqrt(),
            tol: 1e-10,
        });
    }
    let n = len.trailing_zeros() as usize;
    let probs: Vec<f64> = target.iter().map(|a| a.norm_sqr()).collect();
    let mut circuit = Circuit::new(n);

    // Magnitude tree: level k fixes qubit q = n-1-k conditioned on the
    // already-prepared higher qubits.
    for k in 0..n {
        let q = n - 1 - k;
        for prefix in 0..(1usize << k) {
            let mut p_left = 0.0;
            let mut p_right = 0.0;
            for (idx, p) in probs.iter().enumerate() {
                if idx >> (q + 1) == prefix {
                    if (idx >> q) & 1 == 0 {
                        p_left += p;
                    } else {
                        p_right += p;
                    }
                }
            }
            if p_left + p_right < 1e-28 {
                continue; // unreachable branch of the tree
            }
            let angle = 2.0 * p_right.sqrt().atan2(p_left.sqrt());
            if angle.abs() < 1e-15 {
                continue;
            }
            let controls: Vec<usize> = (q + 1..n).collect();
            push_pattern_controlled(
                &mut circuit,
                Gate::ry(q, angle),
                &controls,
                |wire| (prefix >> (wire - q - 1)) & 1 == 1,
            );
        }
    }

    // Relative-phase layer, referenced to the first nonzero amplitude so
    // non-negative real targets compile to rotations only.
    let reference = target
        .iter()
        .find(|a| a.norm() > 1e-14)
        .map_or(0.0, |a| a.arg());
    for (idx, amp) in target.iter().enumerate() {
        if amp.norm() <= 1e-14 {
            continue;
        }
        let mut phi = amp.arg() - reference;
        phi = phi.rem_euclid(2.0 * std::f64::consts::PI);
        if phi > std::f64::consts::PI {
            phi -= 2.0 * std::f64::consts::PI;
        }
        if phi.abs() < 1e-14 {
            continue;
        }
        // The reference amplitude itself always lands here with phi = 0,
        // so any index reaching this point has at least one set bit.
        let target_wire = idx.trailing_zeros() as usize;
        let controls: Vec<usize> = (0..n).filter(|&w| w != target_wire).collect();
        push_pattern_controlled(
            &mut circuit,
            Gate::phase(target_wire, phi),
            &controls,
            |wire| (idx >> wire) & 1 == 1,
        );
    }
    Ok(circuit)
}

/// [`amplitude_encode`] for real targets (which need no phase layer beyond
/// sign handling).
pub fn amplitude_encode_real(target: &[f64]) -> Result<Circuit> {
    let complex: Vec<Complex64> = target.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    amplitude_encode(&complex)
}

/// Appends `gate` controlled on `controls` matching the given bit pattern,
/// sandwiching zero-pattern controls in X gates.
fn push_pattern_controlled(
    circuit: &mut Circuit,
    gate: Gate,
    controls: &[usize],
    wants_one: impl Fn(usize) -> bool,
) {
    let flips: Vec<usize> = controls
        .iter()
        .copied()
        .filter(|&w| !wants_one(w))
        .collect();
    for &w in &flips {
        circuit.push(Gate::x(w));
    }
    circuit.push(gate.controlled_by(controls));
    for &w in &flips {
        circuit.push(Gate::x(w));
    }
}

fn check_coefficients(weights: &[f64]) -> Result<usize> {
    let len = weights.len();
    // The register holds one base-4 digit per system qubit, so the vector
    // length must be 4^n: a power of two with an even exponent.
    if len < 4 || !len.is_power_of_two() || len.trailing_zeros() % 2 != 0 {
        return Err(QfeError::BadCoefficientLength { len });
    }
    let mut total = 0.0;
    for (index, &w) in weights.iter().enumerate() {
        if w < 0.0 {
            return Err(QfeError::NegativeCoefficient { index, value: w });
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-10 {
        return Err(QfeError::NotNormalized {
            norm: total,
            tol: 1e-10,
        });
    }
    Ok(len.trailing_zeros() as usize / 2)
}

/// Builds the circuit loading mixture weights onto the coefficient register
/// as `sum_i sqrt(c_i) |i>`. `weights` must have length `4^n`, be
/// non-negative, and sum to 1.
pub fn coefficient_prep_circuit(weights: &[f64]) -> Result<Circuit> {
    check_coefficients(weights)?;
    let amplitudes: Vec<f64> = weights.iter().map(|&w| w.sqrt()).collect();
    amplitude_encode_real(&amplitudes)
}

/// Prepares the coefficient state `sum_i sqrt(c_i) |i>` by running the
/// preparation circuit on `|0...0>`.
pub fn prepare_coefficient_state(weights: &[f64]) -> Result<QuantumState> {
    coefficient_prep_circuit(weights)?.run_from_zero()
}

/// One phase class's contribution to `C_k = Re <d_k psi| H |psi>`.
///
/// An empty class contributes zero at zero cost. Otherwise, in circuit mode
/// this runs exactly one overlap test: the coefficient register is loaded
/// with the class weights on both branches, the ket branch applies the trial
/// circuit followed by the Pauli-selector block, and the register contracts
/// the weighted string sum by itself.
pub fn parallel_c_term(
    state: &AnsatzState,
    split: &SplitHamiltonian,
    class: PhaseClass,
    k: usize,
    mode: EvaluationMode,
    counter: Option<&ExecutionCounter>,
) -> Result<f64> {
    let n = state.spec().num_qubits();
    if split.num_qubits() != n {
        return Err(QfeError::QubitCountMismatch {
            left: split.num_qubits(),
            right: n,
        });
    }
    let part = split.part(class);
    if part.is_empty() {
        return Ok(0.0);
    }
    let weight = state.derivative_prefactor(k).conj()
        * Complex64::new(state.alpha(), 0.0)
        * class.unit()
        * Complex64::new(part.strength(), 0.0);

    match mode {
        EvaluationMode::Exact => {
            let base = state.base_state();
            let mut combined = vec![Complex64::ZERO; base.dim()];
            for (string, c) in part.terms() {
                let mut moved = base.clone();
                moved.apply_pauli_string(string)?;
                for (acc, amp) in combined.iter_mut().zip(moved.amplitudes()) {
                    *acc += Complex64::new(*c, 0.0) * amp;
                }
            }
            let raw_k = state.derivative_raw(k)?;
            let overlap: Complex64 = raw_k
                .amplitudes()
                .iter()
                .zip(&combined)
                .map(|(a, b)| a.conj() * b)
                .sum();
            Ok((weight * overlap).re)
        }
        EvaluationMode::Circuit => {
            // Scatter the class weights over the full 4^n-length register.
            let mut weights = vec![0.0; 1 << (2 * n)];
            for (string, c) in part.terms() {
                weights[string.index()] = *c;
            }
            // Renormalize defensively: convex weights already sum to 1.
            let prep = coefficient_prep_circuit(&weights)?;
            let mut shared = Circuit::new(3 * n);
            shared.extend_shifted(&prep, n);

            let layout = VBlockLayout::standard(n);
            let mut ket = state.spec().base_circuit(state.beta())?.gates().to_vec();
            ket.extend_from_slice(v_block_circuit(&layout)?.gates());

            let bra = if k == 0 {
                state.spec().base_circuit(state.beta())?.gates().to_vec()
            } else {
                state
                    .spec()
                    .derivative_circuit(state.beta(), k)?
                    .gates()
                    .to_vec()
            };
            weighted_overlap(3 * n, shared.gates(), &bra, &ket, weight, LABEL_C, counter)
        }
    }
}
