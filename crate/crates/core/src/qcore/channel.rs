use serde::{Deserialize, Serialize};

use super::gate::GateKind;
use super::linalg::{self, CMatrix, C64, ZERO};
use super::state::DensityMatrix;
use super::QcoreError;

/// The Pauli basis `sigma_0..sigma_3 = I, X, Y, Z`.
pub fn pauli_basis() -> [CMatrix; 4] {
    [
        linalg::identity(2),
        GateKind::X.matrix().unwrap(),
        GateKind::Y.matrix().unwrap(),
        GateKind::Z.matrix().unwrap(),
    ]
}

/// A quantum operation in Kraus form. Post-selected maps (`sum K^dag K < I`)
/// are allowed and flagged as not trace preserving.
#[derive(Debug, Clone)]
pub struct Channel {
    kraus: Vec<CMatrix>,
    trace_preserving: bool,
}

impl Channel {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self, QcoreError> {
        let dim = kraus.first().map(|k| k.nrows()).ok_or(QcoreError::EmptyChannel)?;
        if kraus.iter().any(|k| k.nrows() != dim || k.ncols() != dim) {
            return Err(QcoreError::BadDimension { len: dim });
        }
        let total = kraus
            .iter()
            .fold(CMatrix::zeros(dim, dim), |acc, k| acc + k.adjoint() * k);
        let (values, _) = linalg::hermitian_eigen(&total);
        let max = values.iter().copied().fold(f64::MIN, f64::max);
        if max > 1.0 + 1e-10 {
            return Err(QcoreError::NotContractive { max_eigenvalue: max });
        }
        let trace_preserving = linalg::max_abs_diff(&total, &linalg::identity(dim)) <= 1e-10;
        Ok(Self {
            kraus,
            trace_preserving,
        })
    }

    pub fn unitary(u: CMatrix) -> Result<Self, QcoreError> {
        if !linalg::is_unitary(&u, 1e-12) {
            return Err(QcoreError::NotUnitary);
        }
        Self::new(vec![u])
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(vec![linalg::identity(dim)]).unwrap()
    }

    /// `rho -> (1-p) rho + p I/2` on one qubit.
    pub fn depolarizing(p: f64) -> Self {
        let s = pauli_basis();
        let mut kraus = vec![s[0].map(|x| x * (1.0 - 0.75 * p).sqrt())];
        for sigma in &s[1..] {
            kraus.push(sigma.map(|x| x * (p / 4.0).sqrt()));
        }
        Self::new(kraus).unwrap()
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// `sum_j K_j rho K_j^dag`, without renormalization.
    pub fn apply_unnormalized(&self, rho: &CMatrix) -> CMatrix {
        self.kraus
            .iter()
            .fold(CMatrix::zeros(rho.nrows(), rho.ncols()), |acc, k| {
                acc + k * rho * k.adjoint()
            })
    }

    /// Applies the map and renormalizes; returns the state and the success
    /// probability (1 for trace-preserving maps).
    pub fn apply(&self, rho: &DensityMatrix) -> Result<(DensityMatrix, f64), QcoreError> {
        if rho.dim() != self.dim() {
            return Err(QcoreError::BadDimension { len: rho.dim() });
        }
        let out = self.apply_unnormalized(rho.matrix());
        let p = linalg::trace(&out).re;
        if p < 1e-300 {
            return Err(QcoreError::ZeroNorm);
        }
        Ok((DensityMatrix::from_unnormalized(out), p))
    }
}

/// Process (chi) matrix of a single-qubit map in the Pauli basis:
/// `E(rho) = sum_mn chi_mn sigma_m rho sigma_n^dag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessMatrix {
    #[serde(with = "complex_matrix_serde")]
    chi: CMatrix,
}

impl ProcessMatrix {
    pub fn new(chi: CMatrix) -> Result<Self, QcoreError> {
        if chi.nrows() != 4 || chi.ncols() != 4 {
            return Err(QcoreError::BadDimension { len: chi.nrows() });
        }
        if !linalg::is_hermitian(&chi, 1e-8) {
            return Err(QcoreError::NotHermitian);
        }
        Ok(Self {
            chi: (&chi + chi.adjoint()).scale(0.5),
        })
    }

    /// chi of `rho -> U rho U^dag`; rank one with coefficients `Tr(sigma_m U)/2`.
    pub fn from_unitary(u: &CMatrix) -> Result<Self, QcoreError> {
        if u.nrows() != 2 || !linalg::is_unitary(u, 1e-10) {
            return Err(QcoreError::NotUnitary);
        }
        let coeffs: Vec<C64> = pauli_basis()
            .iter()
            .map(|s| linalg::trace(&(s.adjoint() * u)) / 2.0)
            .collect();
        let v = nalgebra::DVector::from_vec(coeffs);
        Self::new(&v * v.adjoint())
    }

    pub fn identity() -> Self {
        Self::from_unitary(&linalg::identity(2)).unwrap()
    }

    /// The fully depolarizing channel, `chi = I/4`.
    pub fn depolarizing() -> Self {
        Self {
            chi: linalg::identity(4).scale(0.25),
        }
    }

    pub fn chi(&self) -> &CMatrix {
        &self.chi
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.chi).re
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let s = pauli_basis();
        let mut out = CMatrix::zeros(2, 2);
        for m in 0..4 {
            for n in 0..4 {
                let w = self.chi[(m, n)];
                if w != ZERO {
                    out += (&s[m] * rho * s[n].adjoint()).map(|x| x * w);
                }
            }
        }
        out
    }

    /// Kraus operators from the eigen-decomposition of chi. Eigenvalues below
    /// `1e-14` are dropped.
    pub fn to_kraus(&self) -> Vec<CMatrix> {
        let s = pauli_basis();
        let (values, vectors) = linalg::hermitian_eigen(&self.chi);
        values
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 1e-14)
            .map(|(k, &l)| {
                (0..4).fold(CMatrix::zeros(2, 2), |acc, m| {
                    acc + s[m].map(|x| x * vectors[(m, k)] * l.sqrt())
                })
            })
            .collect()
    }

    /// Rows `j` of the returned matrix give `K_j = sum_k M_jk sigma_k`.
    pub fn kraus_coefficients(&self) -> CMatrix {
        let s = pauli_basis();
        let kraus = self.to_kraus();
        let mut m = CMatrix::zeros(kraus.len(), 4);
        for (j, k) in kraus.iter().enumerate() {
            for (idx, sigma) in s.iter().enumerate() {
                m[(j, idx)] = linalg::trace(&(sigma.adjoint() * k)) / 2.0;
            }
        }
        m
    }

    /// Pauli transfer matrix `R_ij = Tr(sigma_i E(sigma_j))/2`.
    pub fn ptm(&self) -> [[f64; 4]; 4] {
        let s = pauli_basis();
        let mut r = [[0.0; 4]; 4];
        for j in 0..4 {
            let out = self.apply(&s[j]);
            for i in 0..4 {
                r[i][j] = linalg::trace(&(&s[i] * &out)).re / 2.0;
            }
        }
        r
    }

    /// Inverse of [`ptm`](Self::ptm).
    pub fn from_ptm(r: &[[f64; 4]; 4]) -> Result<Self, QcoreError> {
        // Solve the 16x16 linear system R = B chi by building B column by column.
        let mut b = CMatrix::zeros(16, 16);
        for m in 0..4 {
            for n in 0..4 {
                let mut unit = CMatrix::zeros(4, 4);
                unit[(m, n)] = C64::new(1.0, 0.0);
                let col = Self { chi: unit }.ptm_complex();
                for (row, v) in col.iter().enumerate() {
                    b[(row, m * 4 + n)] = *v;
                }
            }
        }
        let rhs = nalgebra::DVector::from_iterator(16, (0..16).map(|k| C64::new(r[k / 4][k % 4], 0.0)));
        let sol = b.lu().solve(&rhs).ok_or(QcoreError::Singular)?;
        let chi = CMatrix::from_fn(4, 4, |m, n| sol[m * 4 + n]);
        Self::new(chi)
    }

    fn ptm_complex(&self) -> Vec<C64> {
        let s = pauli_basis();
        let mut out = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                out.push(linalg::trace(&(&s[i] * self.apply(&s[j]))) / 2.0);
            }
        }
        out
    }

    /// Affine Bloch representation `r -> t + M r`.
    pub fn bloch_affine(&self) -> ([f64; 3], [[f64; 3]; 3]) {
        let r = self.ptm();
        let t = [r[1][0], r[2][0], r[3][0]];
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = r[i + 1][j + 1];
            }
        }
        (t, m)
    }
}

/// chi matrix of a single-qubit channel given in Kraus form.
pub fn channel_chi(channel: &Channel) -> Result<ProcessMatrix, QcoreError> {
    if channel.dim() != 2 {
        return Err(QcoreError::NotSingleQubit { dim: channel.dim() });
    }
    let s = pauli_basis();
    let mut chi = CMatrix::zeros(4, 4);
    for k in channel.kraus() {
        let c: Vec<C64> = s
            .iter()
            .map(|sigma| linalg::trace(&(sigma.adjoint() * k)) / 2.0)
            .collect();
        for m in 0..4 {
            for n in 0..4 {
                chi[(m, n)] += c[m] * c[n].conj();
            }
        }
    }
    ProcessMatrix::new(chi)
}

pub(crate) mod complex_matrix_serde {
    //! Matrices as `{"re": [[..]], "im": [[..]]}` row-major.
    use super::{CMatrix, C64};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Parts {
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Parts {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let p = Parts::deserialize(d)?;
        let n = p.re.len();
        let m = p.re.first().map_or(0, |r| r.len());
        if p.im.len() != n || p.re.iter().chain(&p.im).any(|r| r.len() != m) {
            return Err(serde::de::Error::custom("ragged complex matrix"));
        }
        Ok(CMatrix::from_fn(n, m, |i, j| C64::new(p.re[i][j], p.im[i][j])))
    }
}
