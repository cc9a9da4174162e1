//! Small dense helpers: Hermitian eigendecomposition, the reference
//! exponential `e^{-iHt}`, and the spectral norm.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Eigenvalues (ascending) and orthonormal eigenvectors (as columns) of a
/// Hermitian matrix.
pub fn hermitian_eigen(h: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<DVector<Complex64>>>(),
    );
    (values, vectors)
}

/// `e^{-iHt}` through the eigendecomposition of `H`.
pub fn expm_hermitian(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let (values, vectors) = hermitian_eigen(h);
    let phases = DVector::from_iterator(
        values.len(),
        values.iter().map(|l| Complex64::from_polar(1.0, -l * t)),
    );
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, j)] * phases[j]);
    scaled * vectors.adjoint()
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<Complex64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// `||A^dag A - I||_2`.
pub fn isometry_defect(a: &DMatrix<Complex64>) -> f64 {
    let n = a.ncols();
    spectral_norm(&(a.ad_mul(a) - DMatrix::identity(n, n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pauli_x_exponential() {
        let x = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let t = 0.7;
        let u = expm_hermitian(&x, t);
        let expect = DMatrix::from_row_slice(
            2,
            2,
            &[c(t.cos(), 0.0), c(0.0, -t.sin()), c(0.0, -t.sin()), c(t.cos(), 0.0)],
        );
        assert!((u - expect).norm() < 1e-14);
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]);
        let (vals, vecs) = hermitian_eigen(&h);
        let s2 = 2f64.sqrt();
        assert!((vals[0] + s2).abs() < 1e-14 && (vals[1] - s2).abs() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_iterator(2, vals.iter().map(|v| c(*v, 0.0))));
        assert!((&vecs * d * vecs.adjoint() - h).norm() < 1e-13);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, -3.0), c(2.0, 0.0)]));
        assert!((spectral_norm(&a) - 3.0).abs() < 1e-14);
    }
}
