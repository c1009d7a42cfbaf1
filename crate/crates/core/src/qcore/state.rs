use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{self, c, CMatrix, CVector, C64, ONE, ZERO};
use super::QcoreError;

/// Largest register the engine accepts.
pub const MAX_QUBITS: usize = 4;

const NORM_TOL: f64 = 1e-12;
/// Tolerance used when comparing pure states up to global phase.
pub const STATE_EQ_TOL: f64 = 1e-10;

/// Bit mask selecting `qubit` inside a basis index. Qubit 0 is the leftmost
/// tensor factor, i.e. the most significant bit.
#[inline]
pub(crate) fn qubit_mask(num_qubits: usize, qubit: usize) -> usize {
    1 << (num_qubits - 1 - qubit)
}

/// A normalized state vector on up to [`MAX_QUBITS`] qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    /// Builds a state from raw amplitudes. The length must be a power of two
    /// no larger than `2^MAX_QUBITS` and the vector must already be normalized.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self, QcoreError> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(QcoreError::BadDimension { len });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QcoreError::NotNormalized { norm });
        }
        Ok(Self { amplitudes })
    }

    /// Like [`from_amplitudes`](Self::from_amplitudes) but rescales the input.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self, QcoreError> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(QcoreError::ZeroNorm);
        }
        Self::from_amplitudes(amplitudes.into_iter().map(|a| a / norm).collect())
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self, QcoreError> {
        let dim = 1usize << num_qubits;
        if num_qubits == 0 || num_qubits > MAX_QUBITS || index >= dim {
            return Err(QcoreError::BadDimension { len: dim });
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self { amplitudes })
    }

    /// `c0|0> + c1|1>`, normalized.
    pub fn qubit(c0: C64, c1: C64) -> Self {
        Self::normalized(vec![c0, c1]).expect("non-zero single-qubit amplitudes")
    }

    pub fn zero() -> Self {
        Self::qubit(ONE, ZERO)
    }

    pub fn one() -> Self {
        Self::qubit(ZERO, ONE)
    }

    pub fn plus() -> Self {
        Self::qubit(ONE, ONE)
    }

    pub fn minus() -> Self {
        Self::qubit(ONE, -ONE)
    }

    /// `(|0> + e^{i phi}|1>)/sqrt 2`.
    pub fn equatorial(phi: f64) -> Self {
        Self::qubit(ONE, linalg::cis(phi))
    }

    /// Pure state with the given Bloch angles.
    pub fn from_bloch_angles(theta: f64, phi: f64) -> Self {
        Self::qubit(c((theta / 2.0).cos(), 0.0), linalg::cis(phi) * (theta / 2.0).sin())
    }

    /// Haar-random pure state on `num_qubits` qubits.
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        let dim = 1usize << num_qubits;
        let amps = (0..dim)
            .map(|_| c(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)))
            .collect();
        Self::normalized(amps).expect("gaussian vector is non-zero")
    }

    pub fn num_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn to_vector(&self) -> CVector {
        CVector::from_column_slice(&self.amplitudes)
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Equality up to a global phase: `|<u|v>| = 1` within [`STATE_EQ_TOL`].
    pub fn approx_eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && (1.0 - self.inner(other).norm()).abs() <= STATE_EQ_TOL
    }

    pub fn tensor(&self, other: &Self) -> Result<Self, QcoreError> {
        let n = self.num_qubits() + other.num_qubits();
        if n > MAX_QUBITS {
            return Err(QcoreError::TooManyQubits { requested: n });
        }
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ok(Self { amplitudes })
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = self.to_vector();
        DensityMatrix {
            matrix: &v * v.adjoint(),
        }
    }

    /// Bloch vector of a single-qubit state.
    pub fn bloch(&self) -> [f64; 3] {
        self.to_density().bloch()
    }

    /// Exact Born probability of reading `outcome` on `qubit`.
    pub fn probability(&self, qubit: usize, outcome: bool) -> Result<f64, QcoreError> {
        let n = self.num_qubits();
        if qubit >= n {
            return Err(QcoreError::QubitOutOfRange { qubit, num_qubits: n });
        }
        let mask = qubit_mask(n, qubit);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| (i & mask != 0) == outcome)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Deterministically projects `qubit` onto `outcome` and renormalizes.
    /// Returns the collapsed state and the pre-measurement probability.
    pub fn project(&self, qubit: usize, outcome: bool) -> Result<(Self, f64), QcoreError> {
        let p = self.probability(qubit, outcome)?;
        if p < 1e-300 {
            return Err(QcoreError::ZeroProbabilityBranch { qubit, outcome });
        }
        let mask = qubit_mask(self.num_qubits(), qubit);
        let scale = 1.0 / p.sqrt();
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| if (i & mask != 0) == outcome { a * scale } else { ZERO })
            .collect();
        Ok((Self { amplitudes }, p))
    }

    /// Removes a qubit that is in a definite computational basis state.
    pub fn discard_qubit(&self, qubit: usize, value: bool) -> Result<Self, QcoreError> {
        let n = self.num_qubits();
        if qubit >= n || n < 2 {
            return Err(QcoreError::QubitOutOfRange { qubit, num_qubits: n });
        }
        let mask = qubit_mask(n, qubit);
        let amplitudes: Vec<C64> = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| (i & mask != 0) == value)
            .map(|(_, a)| *a)
            .collect();
        Self::from_amplitudes(amplitudes)
    }

    /// Appends `other` as the rightmost tensor factors.
    pub fn append(&self, other: &Self) -> Result<Self, QcoreError> {
        self.tensor(other)
    }
}

/// A density matrix on up to [`MAX_QUBITS`] qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity before wrapping.
    pub fn new(matrix: CMatrix) -> Result<Self, QcoreError> {
        let dim = matrix.nrows();
        if !matrix.is_square() || dim < 2 || !dim.is_power_of_two() || dim > 1 << MAX_QUBITS {
            return Err(QcoreError::BadDimension { len: dim });
        }
        if !linalg::is_hermitian(&matrix, 1e-12) {
            return Err(QcoreError::NotHermitian);
        }
        let tr = linalg::trace(&matrix).re;
        if (tr - 1.0).abs() > 1e-12 {
            return Err(QcoreError::BadTrace { trace: tr });
        }
        let (values, _) = linalg::hermitian_eigen(&matrix);
        if let Some(&min) = values.iter().min_by(|a, b| a.total_cmp(b)) {
            if min < -1e-10 {
                return Err(QcoreError::NotPositive { min_eigenvalue: min });
            }
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix already known to be a state, rescaling its trace to one.
    pub(crate) fn from_unnormalized(matrix: CMatrix) -> Self {
        let tr = linalg::trace(&matrix).re;
        let hermitian = (&matrix + matrix.adjoint()).scale(0.5 / tr);
        Self { matrix: hermitian }
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        Self {
            matrix: linalg::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// Single-qubit state `(I + r.sigma)/2`; `|r| <= 1` is required.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self, QcoreError> {
        let [x, y, z] = r;
        let m = linalg::mat2(c(1.0 + z, 0.0), c(x, -y), c(x, y), c(1.0 - z, 0.0)).scale(0.5);
        Self::new(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn purity(&self) -> f64 {
        linalg::trace(&(&self.matrix * &self.matrix)).re
    }

    /// `<psi|rho|psi>`.
    pub fn fidelity_pure(&self, state: &PureState) -> f64 {
        let v = state.to_vector();
        (v.adjoint() * &self.matrix * &v)[(0, 0)].re
    }

    /// Bloch vector of a single-qubit state.
    pub fn bloch(&self) -> [f64; 3] {
        let m = &self.matrix;
        [2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, (m[(0, 0)] - m[(1, 1)]).re]
    }

    /// Spectral decomposition as an ensemble of `(probability, pure state)`.
    /// Components with weight below `1e-14` are dropped.
    pub fn ensemble(&self) -> Vec<(f64, PureState)> {
        let (values, vectors) = linalg::hermitian_eigen(&self.matrix);
        values
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 1e-14)
            .map(|(k, &p)| {
                let col: Vec<C64> = vectors.column(k).iter().copied().collect();
                (p, PureState::normalized(col).expect("eigenvector is normalized"))
            })
            .collect()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim() && linalg::max_abs_diff(&self.matrix, &other.matrix) <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        let err = PureState::from_amplitudes(vec![ONE, ZERO, ZERO]).unwrap_err();
        assert!(matches!(err, QcoreError::BadDimension { len: 3 }));
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(PureState::from_amplitudes(vec![ONE, ONE]).is_err());
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let s = PureState::one().tensor(&PureState::zero()).unwrap();
        assert_eq!(s.amplitude(0b10), ONE);
        assert_eq!(s.probability(0, true).unwrap(), 1.0);
        assert_eq!(s.probability(1, true).unwrap(), 0.0);
    }

    #[test]
    fn zero_branch_projection_is_an_error() {
        let err = PureState::zero().project(0, true).unwrap_err();
        assert!(matches!(err, QcoreError::ZeroProbabilityBranch { .. }));
    }

    #[test]
    fn discard_keeps_remaining_amplitudes() {
        let s = PureState::plus().tensor(&PureState::one()).unwrap();
        let r = s.discard_qubit(1, true).unwrap();
        assert!(r.approx_eq(&PureState::plus()));
    }

    #[test]
    fn density_checks_positivity() {
        let m = linalg::mat2(c(1.5, 0.0), ZERO, ZERO, c(-0.5, 0.0));
        assert!(matches!(DensityMatrix::new(m), Err(QcoreError::NotPositive { .. })));
    }

    #[test]
    fn bloch_round_trip() {
        let s = PureState::from_bloch_angles(0.4, 1.1);
        let r = s.bloch();
        let rho = DensityMatrix::from_bloch(r).unwrap();
        assert!((rho.fidelity_pure(&s) - 1.0).abs() < 1e-12);
    }
}
