use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Smallest-to-largest eigenvalue ratio below which X'X is treated as singular.
const RANK_TOL: f64 = 1e-12;

/// Inverse of a symmetric positive definite cross-product matrix, refusing
/// numerically rank-deficient input.
pub fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = a.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= RANK_TOL * max {
        return Err(Error::Singular(format!("{what} is rank deficient (eigenvalue ratio {:.3e})", min / max)));
    }
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}
