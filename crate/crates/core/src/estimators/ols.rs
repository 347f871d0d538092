use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::cluster::cluster_sandwich;
use super::linalg::spd_inverse;
use super::reporting::normal_p_value;

/// Named coefficients with cluster-robust inference.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub se: Vec<f64>,
    pub p: Vec<f64>,
    pub vcov: DMatrix<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
}

impl LinearFit {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| (self.coefficients[i], self.se[i]))
    }
}

/// Least squares with CR1 cluster-robust standard errors.
pub fn ols_clustered(x: &DMatrix<f64>, y: &[f64], clusters: &[usize], names: Vec<String>) -> Result<LinearFit> {
    let (n, k) = x.shape();
    if y.len() != n || clusters.len() != n || names.len() != k {
        return Err(Error::InvalidInput("design, outcome, cluster and name lengths disagree".into()));
    }
    let yv = DVector::from_row_slice(y);
    let bread = spd_inverse(&x.tr_mul(x), "OLS design")?;
    let beta = &bread * x.tr_mul(&yv);
    let resid = &yv - x * &beta;
    let mut scores = x.clone();
    for i in 0..n {
        scores.row_mut(i).scale_mut(resid[i]);
    }
    let vcov = cluster_sandwich(&bread, &scores, clusters, k)?;
    let se: Vec<f64> = vcov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(LinearFit {
        p: beta.iter().zip(&se).map(|(b, s)| normal_p_value(b / s)).collect(),
        coefficients: beta.iter().copied().collect(),
        se,
        vcov,
        names,
        n_obs: n,
        n_clusters: super::cluster::count_clusters(clusters),
    })
}
