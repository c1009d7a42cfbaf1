//! Small dense complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{i phi}`.
#[inline]
pub fn cis(phi: f64) -> C64 {
    C64::from_polar(1.0, phi)
}

pub fn mat2(a: C64, b: C64, c: C64, d: C64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[a, b, c, d])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_diff(&(m.adjoint() * m), &identity(m.nrows())) <= tol
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are real.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let values = eig.eigenvalues.iter().copied().collect();
    (values, eig.eigenvectors)
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Tiny negative eigenvalues (numerical noise) are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let roots = DVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)));
    &vectors * CMatrix::from_diagonal(&roots) * vectors.adjoint()
}

/// Euclidean projection of a real vector onto the probability simplex scaled
/// to `total`.
pub fn project_simplex(values: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - total) / (k as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Nearest (Frobenius) positive semidefinite matrix with the given trace.
pub fn project_psd_trace(m: &CMatrix, total: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let projected = project_simplex(&values, total);
    let diag = DVector::from_iterator(projected.len(), projected.iter().map(|&v| C64::new(v, 0.0)));
    &vectors * CMatrix::from_diagonal(&diag) * vectors.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_keeps_feasible_points() {
        let p = project_simplex(&[0.2, 0.3, 0.5], 1.0);
        for (a, b) in p.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_projection_clips_negative_mass() {
        let p = project_simplex(&[1.2, -0.2, 0.0], 1.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = mat2(c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0));
        let r = psd_sqrt(&m);
        assert!(max_abs_diff(&(&r * &r), &m) < 1e-12);
    }
}
