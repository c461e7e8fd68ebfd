//! Symmetric-matrix helpers built on a symmetric eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry accepted before a matrix is rejected.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues down to `-PSD_TOL * λ_max` are treated as round-off and
/// clamped to zero.
pub const PSD_TOL: f64 = 1e-8;

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Checks squareness, finiteness and symmetry to `SYMMETRY_TOL · max|a_ij|`.
pub fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(a.nrows(), a.ncols()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let asymmetry = max_abs(&(a - a.transpose()));
    if asymmetry > SYMMETRY_TOL * max_abs(a) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix whose spectrum passes the PSD
/// clamping policy. Returned eigenvalues are clamped at zero.
pub fn psd_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    check_symmetric(a)?;
    let mut eig = SymmetricEigen::new(symmetrize(a));
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL * max.max(0.0) {
        return Err(Error::NotPsd { min, max });
    }
    eig.eigenvalues.apply(|l| *l = l.max(0.0));
    Ok(eig)
}

/// Principal square root of a symmetric positive semidefinite matrix,
/// `V · diag(√λ) · Vᵀ`.
pub fn sqrt_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = psd_eigen(a)?;
    Ok(reassemble(&eig, f64::sqrt))
}

/// `V · diag(f(λ)) · Vᵀ`, symmetrized.
pub fn reassemble(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= f(eig.eigenvalues[j]);
    }
    symmetrize(&(scaled * v.transpose()))
}

/// Trace of the principal square root, `Σ √λ_i`.
pub fn trace_sqrt_psd(a: &DMatrix<f64>) -> Result<f64> {
    let eig = psd_eigen(a)?;
    Ok(eig.eigenvalues.iter().map(|l| l.sqrt()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frob_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn identity_root_is_identity() {
        for d in [1, 3, 10] {
            let i = DMatrix::<f64>::identity(d, d);
            assert!(frob_rel(&sqrt_psd(&i).unwrap(), &i) < 1e-15);
        }
    }

    #[test]
    fn diagonal_root() {
        let a = DMatrix::from_diagonal(&nalgebra::dvector![4.0, 9.0]);
        let r = sqrt_psd(&a).unwrap();
        let expect = DMatrix::from_diagonal(&nalgebra::dvector![2.0, 3.0]);
        assert!((r - expect).norm() < 1e-15);
    }

    #[test]
    fn two_by_two_squares_back() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = sqrt_psd(&a).unwrap();
        assert!((&r * &r - &a).norm() < 1e-10);
        assert_eq!(r, r.transpose());
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(sqrt_psd(&a), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(sqrt_psd(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn clamps_roundoff_negative_eigenvalue() {
        // rank-one matrix perturbed by a tiny negative eigenvalue
        let v = nalgebra::dvector![1.0, 2.0, 3.0];
        let mut a = &v * v.transpose();
        a[(0, 0)] -= 1e-14;
        let r = sqrt_psd(&a).unwrap();
        assert!(frob_rel(&(&r * &r), &a) < 1e-8);
    }

    #[test]
    fn zero_matrix_root_is_zero() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(sqrt_psd(&z).unwrap(), z);
    }
}
