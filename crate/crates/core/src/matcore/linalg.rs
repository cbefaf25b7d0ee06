//! Thin wrappers over `nalgebra` decompositions.

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::Matrix;
use crate::error::{Error, Result};

/// Ordered singular values `σ₁ ≥ … ≥ σ_min(rows, cols) ≥ 0`.
pub fn svd_values(a: &Matrix) -> Result<Vec<f64>> {
    if a.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    // Vectors have a single singular value: their Euclidean length.
    if a.rows() == 1 || a.cols() == 1 {
        return Ok(vec![a.frobenius_norm()]);
    }
    let svd = a
        .to_nalgebra()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidMatrix("SVD did not converge".into()))?;
    let mut values: Vec<f64> = svd.singular_values.iter().map(|v| v.abs()).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values)
}

/// Singular values (descending) with the matching right singular vectors as rows of `v_t`.
pub(crate) struct ThinSvd {
    pub values: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

pub(crate) fn svd_full(a: &Matrix) -> Result<ThinSvd> {
    let svd = a
        .to_nalgebra()
        .try_svd(false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidMatrix("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let v_t = svd.v_t.expect("requested Vᵀ");
    Ok(ThinSvd {
        values: order.iter().map(|&i| svd.singular_values[i]).collect(),
        v_t: v_t.select_rows(order.iter()),
    })
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    let mut values: Vec<f64> = a.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values)
}

pub(crate) fn cholesky(a: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    if !a.is_symmetric(1e-10) {
        return Err(Error::SingularMatrix("matrix is not symmetric".into()));
    }
    Cholesky::new(a.to_nalgebra()).ok_or_else(|| Error::SingularMatrix("Cholesky factorization failed".into()))
}

pub(crate) fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Symmetric square root factor `L` with `L Lᵀ = Σ` for a PSD `Σ`; negative
/// eigenvalues (rounding) are clipped to zero.
pub(crate) fn psd_factor(sigma: &Matrix) -> Result<DMatrix<f64>> {
    if !sigma.is_symmetric(1e-10) {
        return Err(Error::InvalidSpec("covariance is not symmetric".into()));
    }
    let eig = sigma.to_nalgebra().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * top.max(1.0)) {
        return Err(Error::InvalidSpec("covariance is not positive semidefinite".into()));
    }
    let mut q = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        q.column_mut(j).scale_mut(s);
    }
    Ok(q)
}

/// Number of singular values above `rel_tol · σ₁`.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> Result<usize> {
    let sv = svd_values(a)?;
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&v| v > rel_tol * top).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_identity() {
        let d = Matrix::from_diag(3, 3, &[3.0, 4.0, 0.0]);
        let sv = svd_values(&d).unwrap();
        assert!((sv[0] - 4.0).abs() < 1e-12 && (sv[1] - 3.0).abs() < 1e-12 && sv[2].abs() < 1e-12);
        let sv = svd_values(&Matrix::identity(5)).unwrap();
        assert!(sv.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(sv.len(), 5);
    }

    #[test]
    fn vectors_and_wide_matrices() {
        let v = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(svd_values(&v).unwrap(), vec![5.0]);
        let w = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]).unwrap();
        let sv = svd_values(&w).unwrap();
        assert_eq!(sv.len(), 2);
        assert!((sv[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn right_singular_vectors() {
        // ‖A vᵢ‖ = σᵢ and the vᵢ are orthonormal.
        let a = Matrix::from_rows(&[[1.0, 2.0, 0.5], [0.0, -1.0, 3.0]]).unwrap();
        let s = svd_full(&a).unwrap();
        assert!(s.values[0] >= s.values[1]);
        let an = a.to_nalgebra();
        for i in 0..2 {
            let v = s.v_t.row(i).transpose();
            assert!(((&an * &v).norm() - s.values[i]).abs() < 1e-12);
        }
        let gram = &s.v_t * s.v_t.transpose();
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn rank_and_eigen() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(numerical_rank(&a, 1e-8).unwrap(), 1);
        let e = symmetric_eigenvalues(&a).unwrap();
        assert!((e[0] - 5.0).abs() < 1e-12 && e[1].abs() < 1e-12);
        assert_eq!(numerical_rank(&Matrix::zeros(2, 2), 1e-8).unwrap(), 0);
    }
}
