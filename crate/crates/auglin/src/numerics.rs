//! Dense symmetric linear-algebra kernels shared by every other module.
//!
//! Everything here operates on `nalgebra` dense matrices at desk scale
//! (p up to a few hundred), so no sparse or iterative paths exist.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not symmetric (max asymmetry {max_asym:.3e} exceeds {tol:.3e})")]
    NotSymmetric { max_asym: f64, tol: f64 },
    #[error("matrix is not positive-definite (smallest eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Relative symmetry tolerance used by [`spd_solve`] and [`sym_eig`].
pub const SYMMETRY_RTOL: f64 = 1e-10;

/// Dense row-major matrix of reals; the storage type every module builds on.
pub type DenseMatrix = DMatrix<f64>;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// non-increasing; ties keep their input order.
#[derive(Debug, Clone)]
pub struct SymmetricSpectrum {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors, one column per eigenvalue.
    pub eigenvectors: DMatrix<f64>,
}

impl SymmetricSpectrum {
    /// Reconstruct `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lam = DMatrix::from_diagonal(&self.eigenvalues);
        &self.eigenvectors * lam * self.eigenvectors.transpose()
    }

    /// `V f(λ) Vᵀ` for an elementwise spectral map.
    pub fn apply_spectral<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let mapped = self.eigenvalues.map(f);
        let lam = DMatrix::from_diagonal(&mapped);
        &self.eigenvectors * lam * self.eigenvectors.transpose()
    }
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<(), NumericsError> {
    if a.nrows() != a.ncols() {
        return Err(NumericsError::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut max_asym = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            max_asym = max_asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if max_asym > SYMMETRY_RTOL * scale {
        return Err(NumericsError::NotSymmetric { max_asym: max_asym / scale, tol: SYMMETRY_RTOL });
    }
    Ok(())
}

/// Solve `A X = B` for symmetric positive-definite `A` via Cholesky.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
    check_symmetric(a)?;
    if a.nrows() != b.nrows() {
        return Err(NumericsError::DimensionMismatch(format!(
            "A is {}x{} but B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    // Symmetrize first: Cholesky reads only one triangle, but callers may
    // pass products with rounding-level asymmetry.
    let sym = 0.5 * (a + a.transpose());
    match sym.clone().cholesky() {
        Some(chol) => Ok(chol.solve(b)),
        None => {
            let eig = sym_eig(&sym)?;
            let min_eigenvalue = eig.eigenvalues[eig.eigenvalues.len() - 1];
            Err(NumericsError::NotPositiveDefinite { min_eigenvalue })
        }
    }
}

/// Convenience wrapper of [`spd_solve`] for a single right-hand side.
pub fn spd_solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, NumericsError> {
    let b_mat = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = spd_solve(a, &b_mat)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymmetricSpectrum, NumericsError> {
    check_symmetric(a)?;
    let sym = 0.5 * (a + a.transpose());
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort preserves input order among ties.
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymmetricSpectrum { eigenvalues, eigenvectors })
}

/// Largest singular value of a rectangular matrix; 0 for an empty or zero matrix.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sv = a.clone().singular_values();
    sv.iter().fold(0.0f64, |m, &v| m.max(v))
}

/// Rank cutoff for pseudo-inverses: `max(n, p) · ε · σ_max`.
fn sv_cutoff(nrows: usize, ncols: usize, sigma_max: f64) -> f64 {
    nrows.max(ncols) as f64 * f64::EPSILON * sigma_max
}

/// Minimum-Euclidean-norm solution of `min ||Xθ - y||²` via SVD.
pub fn min_norm_lsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, NumericsError> {
    if x.nrows() != y.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "X is {}x{} but y has length {}",
            x.nrows(),
            x.ncols(),
            y.len()
        )));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let vt = svd.v_t.as_ref().expect("svd computed with v_t");
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |m, &v| m.max(v));
    let cutoff = sv_cutoff(x.nrows(), x.ncols(), sigma_max);
    let uty = u.transpose() * y;
    let mut scaled = DVector::zeros(svd.singular_values.len());
    for i in 0..svd.singular_values.len() {
        let s = svd.singular_values[i];
        if s > cutoff {
            scaled[i] = uty[i] / s;
        }
    }
    Ok(vt.transpose() * scaled)
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix.
pub fn sym_pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
    let eig = sym_eig(a)?;
    let sigma_max = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let cutoff = sv_cutoff(a.nrows(), a.ncols(), sigma_max);
    Ok(eig.apply_spectral(|l| if l.abs() > cutoff { 1.0 / l } else { 0.0 }))
}
