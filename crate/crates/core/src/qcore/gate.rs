use std::f64::consts::FRAC_1_SQRT_2;
use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use super::linalg::{self, c, CMatrix, C64, I, ONE, ZERO};
use super::state::{qubit_mask, DensityMatrix, PureState};
use super::QcoreError;

/// Named gates understood by the key-update algebra. `Custom` carries an
/// arbitrary unitary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    I,
    X,
    Y,
    Z,
    H,
    /// Phase gate `diag(1, i)`.
    P,
    /// Inverse phase gate `diag(1, -i)`.
    Pdg,
    T,
    Cnot,
    Cz,
    Custom,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Cz => 2,
            _ => 1,
        }
    }

    pub fn is_clifford(self) -> bool {
        !matches!(self, GateKind::T | GateKind::Custom)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::I => "i",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::H => "h",
            GateKind::P => "p",
            GateKind::Pdg => "pdg",
            GateKind::T => "t",
            GateKind::Cnot => "cnot",
            GateKind::Cz => "cz",
            GateKind::Custom => "custom",
        }
    }

    /// The unitary on `arity()` qubits. `None` for `Custom`.
    pub fn matrix(self) -> Option<CMatrix> {
        let h = FRAC_1_SQRT_2;
        Some(match self {
            GateKind::I => linalg::identity(2),
            GateKind::X => linalg::mat2(ZERO, ONE, ONE, ZERO),
            GateKind::Y => linalg::mat2(ZERO, -I, I, ZERO),
            GateKind::Z => linalg::mat2(ONE, ZERO, ZERO, -ONE),
            GateKind::H => linalg::mat2(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)),
            GateKind::P => linalg::mat2(ONE, ZERO, ZERO, I),
            GateKind::Pdg => linalg::mat2(ONE, ZERO, ZERO, -I),
            GateKind::T => linalg::mat2(ONE, ZERO, ZERO, linalg::cis(FRAC_PI_4)),
            GateKind::Cnot => {
                let mut m = CMatrix::zeros(4, 4);
                m[(0, 0)] = ONE;
                m[(1, 1)] = ONE;
                m[(2, 3)] = ONE;
                m[(3, 2)] = ONE;
                m
            }
            GateKind::Cz => {
                let mut m = linalg::identity(4);
                m[(3, 3)] = -ONE;
                m
            }
            GateKind::Custom => return None,
        })
    }
}

/// A unitary acting on an ordered list of target qubits. For `Cnot` the first
/// target is the control.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    kind: GateKind,
    matrix: CMatrix,
    targets: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: &[usize]) -> Result<Self, QcoreError> {
        let matrix = kind.matrix().ok_or(QcoreError::CustomNeedsMatrix)?;
        Self::build(kind, matrix, targets)
    }

    pub fn custom(matrix: CMatrix, targets: &[usize]) -> Result<Self, QcoreError> {
        Self::build(GateKind::Custom, matrix, targets)
    }

    fn build(kind: GateKind, matrix: CMatrix, targets: &[usize]) -> Result<Self, QcoreError> {
        let expected = 1usize << targets.len();
        if targets.is_empty() || matrix.nrows() != expected || matrix.ncols() != expected {
            return Err(QcoreError::GateShape {
                rows: matrix.nrows(),
                targets: targets.len(),
            });
        }
        let mut seen = targets.to_vec();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != targets.len() {
            return Err(QcoreError::RepeatedTarget);
        }
        if !linalg::is_unitary(&matrix, 1e-12) {
            return Err(QcoreError::NotUnitary);
        }
        Ok(Self {
            kind,
            matrix,
            targets: targets.to_vec(),
        })
    }

    pub fn i(q: usize) -> Self {
        Self::new(GateKind::I, &[q]).unwrap()
    }
    pub fn x(q: usize) -> Self {
        Self::new(GateKind::X, &[q]).unwrap()
    }
    pub fn y(q: usize) -> Self {
        Self::new(GateKind::Y, &[q]).unwrap()
    }
    pub fn z(q: usize) -> Self {
        Self::new(GateKind::Z, &[q]).unwrap()
    }
    pub fn h(q: usize) -> Self {
        Self::new(GateKind::H, &[q]).unwrap()
    }
    pub fn p(q: usize) -> Self {
        Self::new(GateKind::P, &[q]).unwrap()
    }
    pub fn pdg(q: usize) -> Self {
        Self::new(GateKind::Pdg, &[q]).unwrap()
    }
    pub fn t(q: usize) -> Self {
        Self::new(GateKind::T, &[q]).unwrap()
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::new(GateKind::Cnot, &[control, target]).unwrap()
    }
    pub fn cz(a: usize, b: usize) -> Self {
        Self::new(GateKind::Cz, &[a, b]).unwrap()
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Same gate moved onto different qubits.
    pub fn retarget(&self, targets: &[usize]) -> Result<Self, QcoreError> {
        Self::build(self.kind, self.matrix.clone(), targets)
    }

    pub fn inverse(&self) -> Self {
        let kind = match self.kind {
            GateKind::P => GateKind::Pdg,
            GateKind::Pdg => GateKind::P,
            GateKind::T => GateKind::Custom,
            k => k,
        };
        Self {
            kind,
            matrix: self.matrix.adjoint(),
            targets: self.targets.clone(),
        }
    }

    fn check_register(&self, num_qubits: usize) -> Result<(), QcoreError> {
        match self.targets.iter().find(|&&t| t >= num_qubits) {
            Some(&qubit) => Err(QcoreError::QubitOutOfRange { qubit, num_qubits }),
            None => Ok(()),
        }
    }

    /// The gate as a dense operator on the whole `num_qubits` register.
    pub fn full_matrix(&self, num_qubits: usize) -> Result<CMatrix, QcoreError> {
        self.check_register(num_qubits)?;
        let dim = 1usize << num_qubits;
        let mut full = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut basis = vec![ZERO; dim];
            basis[col] = ONE;
            let out = self.apply_amplitudes(&basis, num_qubits);
            for (row, a) in out.into_iter().enumerate() {
                full[(row, col)] = a;
            }
        }
        Ok(full)
    }

    fn apply_amplitudes(&self, amps: &[C64], num_qubits: usize) -> Vec<C64> {
        apply_local(&self.matrix, &self.targets, amps, num_qubits)
    }
}

/// Applies a square `2^k x 2^k` operator on `targets` (in order) of an
/// `num_qubits` register. The operator need not be unitary.
pub(crate) fn apply_local(matrix: &CMatrix, targets: &[usize], amps: &[C64], num_qubits: usize) -> Vec<C64> {
    let k = targets.len();
    let masks: Vec<usize> = targets.iter().map(|&t| qubit_mask(num_qubits, t)).collect();
    let all_mask: usize = masks.iter().sum();
    let mut out = vec![ZERO; amps.len()];
    // Iterate over the basis states of the untouched qubits.
    for base in (0..amps.len()).filter(|i| i & all_mask == 0) {
        let index_of = |local: usize| -> usize {
            let mut idx = base;
            for (j, m) in masks.iter().enumerate() {
                if local & (1 << (k - 1 - j)) != 0 {
                    idx |= m;
                }
            }
            idx
        };
        for row in 0..(1 << k) {
            let mut acc = ZERO;
            for col in 0..(1 << k) {
                let m = matrix[(row, col)];
                if m != ZERO {
                    acc += m * amps[index_of(col)];
                }
            }
            out[index_of(row)] = acc;
        }
    }
    out
}

impl PureState {
    /// Applies a (possibly contractive) operator on `targets` and renormalizes.
    /// Returns the new state and the squared norm before renormalization,
    /// which is the probability of that branch.
    pub fn apply_branch(&self, op: &CMatrix, targets: &[usize]) -> Result<(PureState, f64), QcoreError> {
        let n = self.num_qubits();
        if op.nrows() != 1 << targets.len() || op.ncols() != op.nrows() {
            return Err(QcoreError::GateShape {
                rows: op.nrows(),
                targets: targets.len(),
            });
        }
        if let Some(&qubit) = targets.iter().find(|&&t| t >= n) {
            return Err(QcoreError::QubitOutOfRange { qubit, num_qubits: n });
        }
        let amps = apply_local(op, targets, self.amplitudes(), n);
        let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if p < 1e-300 {
            return Err(QcoreError::ZeroNorm);
        }
        Ok((PureState::normalized(amps)?, p))
    }
}

/// Types a [`Gate`] can act on.
pub trait ApplyGate: Sized {
    fn apply_gate(&self, gate: &Gate) -> Result<Self, QcoreError>;
}

impl ApplyGate for PureState {
    fn apply_gate(&self, gate: &Gate) -> Result<Self, QcoreError> {
        gate.check_register(self.num_qubits())?;
        let amps = gate.apply_amplitudes(self.amplitudes(), self.num_qubits());
        PureState::normalized(amps)
    }
}

impl ApplyGate for DensityMatrix {
    fn apply_gate(&self, gate: &Gate) -> Result<Self, QcoreError> {
        let u = gate.full_matrix(self.num_qubits())?;
        Ok(DensityMatrix::from_unnormalized(&u * self.matrix() * u.adjoint()))
    }
}

/// Applies `gate` to `state`, returning a new value of the same type.
pub fn apply_gate<S: ApplyGate>(state: &S, gate: &Gate) -> Result<S, QcoreError> {
    state.apply_gate(gate)
}

/// Applies gates in order.
pub fn apply_all<S: ApplyGate + Clone>(state: &S, gates: &[Gate]) -> Result<S, QcoreError> {
    gates.iter().try_fold(state.clone(), |s, g| s.apply_gate(g))
}
