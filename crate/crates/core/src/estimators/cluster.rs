use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::linalg::spd_inverse;

/// CR1 small-sample factor `G/(G-1) · (N-1)/(N-K)`.
pub fn cr1_factor(n_clusters: usize, n_obs: usize, k: usize) -> Result<f64> {
    if n_clusters < 2 {
        return Err(Error::InvalidInput(format!(
            "cluster-robust inference needs at least 2 clusters, got {n_clusters}"
        )));
    }
    if n_obs <= k {
        return Err(Error::InvalidInput(format!("{n_obs} observations cannot support {k} parameters")));
    }
    let g = n_clusters as f64;
    let n = n_obs as f64;
    Ok(g / (g - 1.0) * (n - 1.0) / (n - k as f64))
}

/// Number of distinct cluster labels.
pub fn count_clusters(clusters: &[usize]) -> usize {
    let mut c = clusters.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

/// Sandwich `c · B (Σ_g s_g s_g') B` where `scores` holds one row per
/// observation and `s_g` sums the rows of cluster g.
pub fn cluster_sandwich(bread: &DMatrix<f64>, scores: &DMatrix<f64>, clusters: &[usize], dof_k: usize) -> Result<DMatrix<f64>> {
    let k = scores.ncols();
    if clusters.len() != scores.nrows() {
        return Err(Error::InvalidInput("one cluster id per observation required".into()));
    }
    let mut sums: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
    for (i, &g) in clusters.iter().enumerate() {
        let s = sums.entry(g).or_insert_with(|| DVector::zeros(k));
        for j in 0..k {
            s[j] += scores[(i, j)];
        }
    }
    let factor = cr1_factor(sums.len(), scores.nrows(), dof_k)?;
    let mut meat = DMatrix::zeros(k, k);
    for s in sums.values() {
        meat.ger(1.0, s, s, 1.0);
    }
    Ok(bread * meat * bread * factor)
}

/// Cluster-robust (CR1) standard errors for least squares with design `x`
/// and residuals `residuals`. `dof_k` is the parameter count used in the
/// small-sample factor (slopes plus any non-nested absorbed effects).
pub fn cluster_robust_se(x: &DMatrix<f64>, residuals: &[f64], clusters: &[usize], dof_k: usize) -> Result<Vec<f64>> {
    let cov = cluster_robust_cov(x, residuals, clusters, dof_k)?;
    Ok(cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect())
}

pub fn cluster_robust_cov(x: &DMatrix<f64>, residuals: &[f64], clusters: &[usize], dof_k: usize) -> Result<DMatrix<f64>> {
    if residuals.len() != x.nrows() {
        return Err(Error::InvalidInput("residual count does not match design rows".into()));
    }
    let bread = spd_inverse(&x.tr_mul(x), "X'X")?;
    let mut scores = x.clone();
    for (i, u) in residuals.iter().enumerate() {
        scores.row_mut(i).scale_mut(*u);
    }
    cluster_sandwich(&bread, &scores, clusters, dof_k)
}
