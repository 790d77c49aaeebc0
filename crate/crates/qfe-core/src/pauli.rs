//! Pauli strings, decomposition of dense operators into Pauli strings, and
//! the four-part split of a decomposition by coefficient phase.
//!
//! A string over `n` qubits is indexed in base 4 with per-qubit digits
//! `I = 0, Z = 1, X = 2, Y = 3` and qubit 0 contributing the least
//! significant digit. The digit order matches the two control bits of the
//! coefficient register used by the parallel measurement strategy: the low
//! bit of a digit drives the Z-control and the high bit the X-control, and
//! `(1, 1)` composes to Y.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QfeError, Result};

/// Coefficients with magnitude below this are dropped during decomposition
/// and phase splitting.
pub const DROP_THRESHOLD: f64 = 1e-14;

/// One single-qubit Pauli operator.
///
/// Discriminants follow the base-4 digit encoding of string indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PauliLetter {
    /// Identity.
    I = 0,
    /// Pauli-Z.
    Z = 1,
    /// Pauli-X.
    X = 2,
    /// Pauli-Y.
    Y = 3,
}

impl PauliLetter {
    /// All four letters in digit order.
    pub const ALL: [PauliLetter; 4] = [
        PauliLetter::I,
        PauliLetter::Z,
        PauliLetter::X,
        PauliLetter::Y,
    ];

    /// Letter for a base-4 digit in `0..4`.
    pub fn from_digit(digit: u8) -> Self {
        Self::ALL[(digit & 0b11) as usize]
    }

    /// Base-4 digit of this letter.
    pub fn digit(self) -> u8 {
        self as u8
    }

    /// Parses one of `I`, `X`, `Y`, `Z` (case-insensitive).
    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(PauliLetter::I),
            'Z' => Some(PauliLetter::Z),
            'X' => Some(PauliLetter::X),
            'Y' => Some(PauliLetter::Y),
            _ => None,
        }
    }

    /// Canonical character for this letter.
    pub fn to_char(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::Z => 'Z',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
        }
    }

    /// Dense 2x2 matrix, row-major.
    pub fn matrix(self) -> [Complex64; 4] {
        let zero = Complex64::ZERO;
        let one = Complex64::ONE;
        match self {
            PauliLetter::I => [one, zero, zero, one],
            PauliLetter::Z => [one, zero, zero, -one],
            PauliLetter::X => [zero, one, one, zero],
            PauliLetter::Y => [
                zero,
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                zero,
            ],
        }
    }
}

/// How a Pauli string permutes and phases computational basis states:
/// `sigma |c> = phase(c) |c XOR flip_mask>`.
#[derive(Debug, Clone, Copy)]
pub struct BasisAction {
    /// Bits flipped by X and Y letters.
    pub flip_mask: usize,
    /// Bits contributing a sign `(-1)^bit` (Z and Y letters).
    pub phase_mask: usize,
    /// Global factor `i^{#Y}`.
    pub y_phase: Complex64,
}

impl BasisAction {
    /// Phase acquired by basis state `index`.
    #[inline]
    pub fn phase(&self, index: usize) -> Complex64 {
        if (index & self.phase_mask).count_ones() & 1 == 0 {
            self.y_phase
        } else {
            -self.y_phase
        }
    }
}

/// A tensor product of Pauli letters over a fixed register.
///
/// `letters[q]` acts on qubit `q`; the display form lists the most
/// significant qubit first, so `"ZI"` applies Z to qubit 1 and identity to
/// qubit 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<PauliLetter>,
}

impl PauliString {
    /// Builds a string from per-qubit letters (`letters[q]` acts on qubit `q`).
    pub fn new(letters: Vec<PauliLetter>) -> Self {
        Self { letters }
    }

    /// The identity string on `num_qubits` qubits.
    pub fn identity(num_qubits: usize) -> Self {
        Self {
            letters: vec![PauliLetter::I; num_qubits],
        }
    }

    /// Parses a label such as `"XZI"`; the leftmost character acts on the
    /// highest qubit.
    pub fn parse(label: &str) -> Result<Self> {
        let mut letters = Vec::with_capacity(label.len());
        for c in label.chars().rev() {
            letters.push(PauliLetter::from_char(c).ok_or_else(|| QfeError::BadPauliLetter {
                letter: c,
                label: label.to_string(),
            })?);
        }
        Ok(Self { letters })
    }

    /// Decodes a base-4 index in `[0, 4^num_qubits)`; qubit `q` reads digit `q`.
    pub fn from_index(index: usize, num_qubits: usize) -> Result<Self> {
        if num_qubits < 32 && index >= 1usize << (2 * num_qubits) {
            return Err(QfeError::PauliIndexOutOfRange { index, num_qubits });
        }
        let letters = (0..num_qubits)
            .map(|q| PauliLetter::from_digit(((index >> (2 * q)) & 0b11) as u8))
            .collect();
        Ok(Self { letters })
    }

    /// Base-4 index of this string; inverse of [`PauliString::from_index`].
    pub fn index(&self) -> usize {
        self.letters
            .iter()
            .enumerate()
            .fold(0usize, |acc, (q, letter)| {
                acc | (usize::from(letter.digit()) << (2 * q))
            })
    }

    /// Number of qubits the string covers.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    /// True for a zero-qubit string.
    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Letter acting on qubit `q`.
    pub fn letter(&self, q: usize) -> PauliLetter {
        self.letters[q]
    }

    /// Per-qubit letters, indexed by qubit.
    pub fn letters(&self) -> &[PauliLetter] {
        &self.letters
    }

    /// True when every letter is the identity.
    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&l| l == PauliLetter::I)
    }

    /// Precomputes the permutation-and-phase form of this string.
    pub fn basis_action(&self) -> BasisAction {
        let mut flip_mask = 0usize;
        let mut phase_mask = 0usize;
        let mut y_count = 0u32;
        for (q, letter) in self.letters.iter().enumerate() {
            match letter {
                PauliLetter::I => {}
                PauliLetter::Z => phase_mask |= 1 << q,
                PauliLetter::X => flip_mask |= 1 << q,
                PauliLetter::Y => {
                    flip_mask |= 1 << q;
                    phase_mask |= 1 << q;
                    y_count += 1;
                }
            }
        }
        let y_phase = match y_count % 4 {
            0 => Complex64::ONE,
            1 => Complex64::I,
            2 => -Complex64::ONE,
            _ => -Complex64::I,
        };
        BasisAction {
            flip_mask,
            phase_mask,
            y_phase,
        }
    }

    /// Dense `2^n x 2^n` matrix of the string (for cross-checks; the solver
    /// itself never materializes these).
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.letters.len();
        let action = self.basis_action();
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            m[(col ^ action.flip_mask, col)] = action.phase(col);
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for letter in self.letters.iter().rev() {
            write!(f, "{}", letter.to_char())?;
        }
        Ok(())
    }
}

/// A dense operator expressed as a weighted sum of Pauli strings.
#[derive(Debug, Clone)]
pub struct PauliDecomposition {
    num_qubits: usize,
    terms: Vec<(PauliString, Complex64)>,
}

impl PauliDecomposition {
    /// Register width.
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Retained terms in ascending index order.
    pub fn terms(&self) -> &[(PauliString, Complex64)] {
        &self.terms
    }

    /// Number of retained terms.
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Reassembles the dense operator from the retained terms.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.num_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (string, coeff) in &self.terms {
            let action = string.basis_action();
            for col in 0..dim {
                m[(col ^ action.flip_mask, col)] += coeff * action.phase(col);
            }
        }
        m
    }
}

/// Expands a square matrix of power-of-two dimension over the Pauli-string
/// basis, dropping coefficients with `|gamma| < DROP_THRESHOLD`.
///
/// The coefficient of string `sigma` is `Tr(sigma M) / 2^n`; the trace is
/// evaluated by walking `sigma`'s basis action rather than materializing it.
pub fn decompose(matrix: &DMatrix<Complex64>) -> Result<PauliDecomposition> {
    decompose_with_threshold(matrix, DROP_THRESHOLD)
}

/// [`decompose`] with an explicit drop threshold.
pub fn decompose_with_threshold(
    matrix: &DMatrix<Complex64>,
    threshold: f64,
) -> Result<PauliDecomposition> {
    let dim = matrix.nrows();
    if matrix.ncols() != dim {
        return Err(QfeError::NotSquare {
            rows: dim,
            cols: matrix.ncols(),
        });
    }
    if dim < 2 || !dim.is_power_of_two() {
        return Err(QfeError::BadMatrixDimension { dim });
    }
    let num_qubits = dim.trailing_zeros() as usize;
    let scale = 1.0 / dim as f64;
    let mut terms = Vec::new();
    for index in 0..(1usize << (2 * num_qubits)) {
        let string = PauliString::from_index(index, num_qubits)?;
        let action = string.basis_action();
        let mut trace = Complex64::ZERO;
        for row in 0..dim {
            // sigma_{r,c} is nonzero only at c = row XOR flip_mask, so the
            // trace of sigma * M touches one element per row.
            trace += action.phase(row) * matrix[(row, row ^ action.flip_mask)];
        }
        let coeff = trace * scale;
        if coeff.norm() >= threshold {
            terms.push((string, coeff));
        }
    }
    Ok(PauliDecomposition { num_qubits, terms })
}

/// Which of the four phase classes a split part collects.
///
/// A decomposition coefficient `gamma` contributes `Re(gamma)` to
/// `RealPositive` or `RealNegative` by sign, and `Im(gamma)` to
/// `ImagPositive` or `ImagNegative`; a coefficient with both components
/// feeds two parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseClass {
    /// Positive real coefficient components.
    RealPositive,
    /// Negative real coefficient components.
    RealNegative,
    /// Positive imaginary coefficient components.
    ImagPositive,
    /// Negative imaginary coefficient components.
    ImagNegative,
}

impl PhaseClass {
    /// All four classes in reconstruction order.
    pub const ALL: [PhaseClass; 4] = [
        PhaseClass::RealPositive,
        PhaseClass::RealNegative,
        PhaseClass::ImagPositive,
        PhaseClass::ImagNegative,
    ];

    /// Unit phase `zeta` with which this part enters the reconstruction
    /// `M = sum_l zeta_l g_l sum_i c_i sigma_i`.
    pub fn unit(self) -> Complex64 {
        match self {
            PhaseClass::RealPositive => Complex64::ONE,
            PhaseClass::RealNegative => -Complex64::ONE,
            PhaseClass::ImagPositive => Complex64::I,
            PhaseClass::ImagNegative => -Complex64::I,
        }
    }

    /// Position of this class in [`PhaseClass::ALL`].
    pub fn order(self) -> usize {
        match self {
            PhaseClass::RealPositive => 0,
            PhaseClass::RealNegative => 1,
            PhaseClass::ImagPositive => 2,
            PhaseClass::ImagNegative => 3,
        }
    }

    /// Short label used in counter reports and logs.
    pub fn label(self) -> &'static str {
        match self {
            PhaseClass::RealPositive => "re+",
            PhaseClass::RealNegative => "re-",
            PhaseClass::ImagPositive => "im+",
            PhaseClass::ImagNegative => "im-",
        }
    }
}

/// One phase class of a split decomposition: a convex combination
/// `sum_i c_i sigma_i` (weights positive, summing to 1) and its overall
/// strength `g`.
#[derive(Debug, Clone)]
pub struct SplitPart {
    terms: Vec<(PauliString, f64)>,
    strength: f64,
}

impl SplitPart {
    /// Strings and their normalized weights `c_i`.
    pub fn terms(&self) -> &[(PauliString, f64)] {
        &self.terms
    }

    /// Overall strength `g` of this part.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// Number of strings in the part.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// True when nothing fell into this phase class.
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// A Pauli decomposition regrouped into the four phase classes:
/// `M = g1 P1 - g2 P2 + i g3 P3 - i g4 P4` with every `P_l` a convex
/// combination of Pauli strings.
#[derive(Debug, Clone)]
pub struct SplitHamiltonian {
    num_qubits: usize,
    parts: [SplitPart; 4],
}

impl SplitHamiltonian {
    /// Register width.
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// The part collecting one phase class.
    pub fn part(&self, class: PhaseClass) -> &SplitPart {
        &self.parts[class.order()]
    }

    /// All four parts in reconstruction order.
    pub fn parts(&self) -> &[SplitPart; 4] {
        &self.parts
    }

    /// Number of parts holding at least one string.
    pub fn num_non_empty(&self) -> usize {
        self.parts.iter().filter(|p| !p.is_empty()).count()
    }

    /// Reassembles the dense operator `sum_l zeta_l g_l sum_i c_i sigma_i`.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.num_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (class, part) in PhaseClass::ALL.iter().zip(&self.parts) {
            let front = class.unit() * Complex64::new(part.strength, 0.0);
            for (string, weight) in &part.terms {
                let action = string.basis_action();
                for col in 0..dim {
                    m[(col ^ action.flip_mask, col)] += front * weight * action.phase(col);
                }
            }
        }
        m
    }
}

/// Regroups a decomposition by coefficient phase.
///
/// Real and imaginary components below [`DROP_THRESHOLD`] are discarded so
/// that numerically empty classes stay empty (an empty class costs no
/// measurement circuit downstream).
pub fn split(decomposition: &PauliDecomposition) -> SplitHamiltonian {
    let mut raw: [Vec<(PauliString, f64)>; 4] = Default::default();
    for (string, coeff) in decomposition.terms() {
        if coeff.re > DROP_THRESHOLD {
            raw[0].push((string.clone(), coeff.re));
        } else if coeff.re < -DROP_THRESHOLD {
            raw[1].push((string.clone(), -coeff.re));
        }
        if coeff.im > DROP_THRESHOLD {
            raw[2].push((string.clone(), coeff.im));
        } else if coeff.im < -DROP_THRESHOLD {
            raw[3].push((string.clone(), -coeff.im));
        }
    }
    let parts = raw.map(|terms| {
        let strength: f64 = terms.iter().map(|(_, w)| w).sum();
        let terms = terms
            .into_iter()
            .map(|(s, w)| (s, w / strength))
            .collect::<Vec<_>>();
        if terms.is_empty() {
            SplitPart {
                terms,
                strength: 0.0,
            }
        } else {
            SplitPart { terms, strength }
        }
    });
    SplitHamiltonian {
        num_qubits: decomposition.num_qubits(),
        parts,
    }
}
