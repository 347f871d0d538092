//! `coefficients.csv` rows and small summary tables.

use std::path::Path;

use firstnature::archaeology::BootstrapResult;
use firstnature::estimators::{bonferroni_adjust, normal_p_value, EventStudyFit, LinearFit, PpmlFit};
use firstnature::io::fmt_num;
use firstnature::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CoefRow {
    pub spec_id: String,
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub p: f64,
    pub p_bonferroni: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
}

pub fn event_rows(spec_id: &str, fit: &EventStudyFit) -> Vec<CoefRow> {
    fit.coefficients
        .iter()
        .map(|c| CoefRow {
            spec_id: spec_id.to_string(),
            term: c.term(),
            estimate: c.estimate,
            se: c.se,
            p: c.p,
            p_bonferroni: c.p_bonferroni,
            n_obs: fit.n_obs,
            n_clusters: fit.n_clusters,
        })
        .collect()
}

/// Event-study rows with bootstrap standard errors in place of the analytic
/// ones; p-values use the normal approximation on the bootstrap SE.
pub fn bootstrap_rows(spec_id: &str, fit: &EventStudyFit, boot: &BootstrapResult) -> Vec<CoefRow> {
    let m = boot.terms.len().max(1);
    fit.coefficients
        .iter()
        .map(|c| {
            let (se, p) = match boot.index(&c.term()) {
                Some(j) if !c.is_reference => {
                    let p = normal_p_value(c.estimate / boot.se[j]);
                    (boot.se[j], p)
                }
                _ => (0.0, 1.0),
            };
            CoefRow {
                spec_id: spec_id.to_string(),
                term: c.term(),
                estimate: c.estimate,
                se,
                p,
                p_bonferroni: bonferroni_adjust(p, m),
                n_obs: fit.n_obs,
                n_clusters: fit.n_clusters,
            }
        })
        .collect()
}

pub fn ppml_rows(spec_id: &str, fit: &PpmlFit) -> Vec<CoefRow> {
    linear_like(spec_id, &fit.names, &fit.coefficients, &fit.se, &fit.p, fit.n_obs, fit.n_clusters)
}

pub fn linear_rows(spec_id: &str, fit: &LinearFit) -> Vec<CoefRow> {
    linear_like(spec_id, &fit.names, &fit.coefficients, &fit.se, &fit.p, fit.n_obs, fit.n_clusters)
}

fn linear_like(spec_id: &str, names: &[String], b: &[f64], se: &[f64], p: &[f64], n_obs: usize, n_clusters: usize) -> Vec<CoefRow> {
    (0..names.len())
        .map(|j| CoefRow {
            spec_id: spec_id.to_string(),
            term: names[j].clone(),
            estimate: b[j],
            se: se[j],
            p: p[j],
            p_bonferroni: p[j],
            n_obs,
            n_clusters,
        })
        .collect()
}

pub fn write_table(path: &Path, header: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut s = format!("# {header}\n{}\n", columns.join(","));
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn write_coefficients(path: &Path, header: &str, rows: &[CoefRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.spec_id.clone(),
                r.term.clone(),
                fmt_num(r.estimate),
                fmt_num(r.se),
                fmt_num(r.p),
                fmt_num(r.p_bonferroni),
                r.n_obs.to_string(),
                r.n_clusters.to_string(),
            ]
        })
        .collect();
    write_table(
        path,
        header,
        &["spec_id", "term", "estimate", "se", "p", "p_bonferroni", "n_obs", "n_clusters"],
        &body,
    )
}
