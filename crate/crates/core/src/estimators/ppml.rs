//! Poisson pseudo-maximum-likelihood by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

use super::cluster::{cluster_sandwich, count_clusters};
use super::linalg::spd_inverse;
use super::reporting::normal_p_value;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpmlOptions {
    /// Stop when |ΔLL| / max(|LL|, 1) falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PpmlOptions {
    fn default() -> Self {
        PpmlOptions {
            tolerance: 1e-10,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PpmlFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub se: Vec<f64>,
    pub p: Vec<f64>,
    pub vcov: DMatrix<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub fitted: Vec<f64>,
}

impl PpmlFit {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| (self.coefficients[i], self.se[i]))
    }

    /// Σ_i x_i (y_i − μ_i), the Poisson score at the estimate.
    pub fn score(&self, x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
        (0..x.ncols())
            .map(|j| (0..x.nrows()).map(|i| x[(i, j)] * (y[i] - self.fitted[i])).sum())
            .collect()
    }
}

fn log_likelihood(y: &[f64], mu: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yi, &mi)| {
            let ylog = if yi > 0.0 { yi * mi.ln() } else { 0.0 };
            ylog - mi - ln_gamma(yi + 1.0)
        })
        .sum()
}

fn is_intercept(x: &DMatrix<f64>, j: usize) -> bool {
    x.column(j).iter().all(|v| *v == 1.0)
}

/// Flags nonnegative non-constant regressors whose support has only zero
/// outcomes: the likelihood pushes their coefficient to −∞.
fn check_separation(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<()> {
    for j in 0..x.ncols() {
        let col = x.column(j);
        if is_intercept(x, j) || col.iter().any(|v| *v < 0.0) {
            continue;
        }
        let support: Vec<usize> = (0..x.nrows()).filter(|&i| col[i] > 0.0).collect();
        if !support.is_empty() && support.len() < x.nrows() && support.iter().all(|&i| y[i] == 0.0) {
            return Err(Error::Separation(format!(
                "all outcomes are zero where `{}` is positive; its coefficient diverges",
                names[j]
            )));
        }
    }
    Ok(())
}

/// PPML fit of `E[y | x] = exp(x'β)` with CR1 standard errors clustered on
/// `clusters`. Starts from β = 0 with the intercept (if any) at
/// log(mean y + 0.1).
pub fn ppml(x: &DMatrix<f64>, y: &[f64], clusters: &[usize], names: Vec<String>, opts: PpmlOptions) -> Result<PpmlFit> {
    let (n, k) = x.shape();
    if y.len() != n || clusters.len() != n || names.len() != k {
        return Err(Error::InvalidInput("design, outcome, cluster and name lengths disagree".into()));
    }
    if let Some(bad) = y.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!("PPML outcome must be finite and nonnegative, got {bad}")));
    }
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::Separation("all outcomes are zero".into()));
    }
    check_separation(x, y, &names)?;

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut beta = DVector::zeros(k);
    if let Some(j) = (0..k).find(|&j| is_intercept(x, j)) {
        beta[j] = (mean_y + 0.1).ln();
    }
    let yv = DVector::from_row_slice(y);
    let mean_of = |b: &DVector<f64>| -> Vec<f64> { (x * b).iter().map(|e| e.exp()).collect() };

    let mut mu = mean_of(&beta);
    let mut ll = log_likelihood(y, &mu);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let eta = x * &beta;
        let mut xw = x.clone();
        let mut z = DVector::zeros(n);
        for i in 0..n {
            xw.row_mut(i).scale_mut(mu[i]);
            z[i] = eta[i] + (yv[i] - mu[i]) / mu[i];
        }
        let h = x.tr_mul(&xw);
        let target = xw.tr_mul(&z);
        let inv = spd_inverse(&h, "PPML weighted design")?;
        let mut step = &inv * target - &beta;

        // step halving guards against overshooting from poor starts
        let mut accepted = None;
        for _ in 0..30 {
            let cand = &beta + &step;
            let cmu = mean_of(&cand);
            if cmu.iter().all(|m| m.is_finite() && *m > 0.0) {
                let cll = log_likelihood(y, &cmu);
                if cll.is_finite() && cll >= ll - 1e-12 * ll.abs().max(1.0) {
                    accepted = Some((cand, cmu, cll));
                    break;
                }
            }
            step *= 0.5;
        }
        let (nb, nmu, nll) = accepted.ok_or_else(|| Error::Numerical("PPML step halving failed".into()))?;
        if nb.iter().any(|b| b.abs() > 1e3) {
            return Err(Error::Separation("a coefficient diverged during PPML iterations".into()));
        }
        let rel = (nll - ll).abs() / ll.abs().max(1.0);
        beta = nb;
        mu = nmu;
        ll = nll;
        if rel < opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { iterations });
    }

    let mut xw = x.clone();
    let mut scores = x.clone();
    for i in 0..n {
        xw.row_mut(i).scale_mut(mu[i]);
        scores.row_mut(i).scale_mut(y[i] - mu[i]);
    }
    let bread = spd_inverse(&x.tr_mul(&xw), "PPML information matrix")?;
    let vcov = cluster_sandwich(&bread, &scores, clusters, k)?;
    let se: Vec<f64> = vcov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(PpmlFit {
        p: beta.iter().zip(&se).map(|(b, s)| normal_p_value(b / s)).collect(),
        coefficients: beta.iter().copied().collect(),
        se,
        vcov,
        names,
        log_likelihood: ll,
        iterations,
        converged,
        n_obs: n,
        n_clusters: count_clusters(clusters),
        fitted: mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_matches_log_mean() {
        let x = DMatrix::from_element(3, 1, 1.0);
        let fit = ppml(&x, &[1.0, 2.0, 3.0], &[0, 1, 2], vec!["const".into()], PpmlOptions::default()).unwrap();
        assert!((fit.coefficients[0] - 2f64.ln()).abs() < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn mean_matching_with_intercept() {
        let x = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 0.5, 1.0, 1.5, 1.0, 3.0]);
        let y = [0.0, 2.0, 3.0, 1.0, 0.0, 9.0];
        let fit = ppml(&x, &y, &[0, 1, 2, 3, 4, 5], vec!["c".into(), "x".into()], PpmlOptions::default()).unwrap();
        let fitted: f64 = fit.fitted.iter().sum();
        assert!((fitted - y.iter().sum::<f64>()).abs() < 1e-8);
        for s in fit.score(&x, &y) {
            assert!(s.abs() < 1e-8);
        }
    }

    #[test]
    fn detects_separation() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let err = ppml(&x, &[0.0, 0.0, 3.0, 1.0], &[0, 1, 2, 3], vec!["c".into(), "d".into()], PpmlOptions::default());
        assert!(matches!(err, Err(Error::Separation(_))));
    }

    #[test]
    fn rejects_negative_outcomes() {
        let x = DMatrix::from_element(2, 1, 1.0);
        assert!(ppml(&x, &[1.0, -1.0], &[0, 1], vec!["c".into()], PpmlOptions::default()).is_err());
    }
}
