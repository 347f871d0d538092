use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::cluster::cluster_sandwich;
use super::linalg::spd_inverse;
use super::reporting::{bonferroni_adjust, normal_p_value};
use super::transform::{transform_value, Transform};

/// Census years used by the population event studies.
pub const CENSUS_YEARS: [i32; 9] = [1787, 1801, 1834, 1840, 1845, 1850, 1860, 1880, 1901];
pub const DEFAULT_REFERENCE_YEAR: i32 = 1801;

const DEMEAN_TOL: f64 = 1e-14;
const DEMEAN_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelRow {
    pub unit: usize,
    pub year: i32,
    pub value: f64,
}

/// Unit × year outcomes with a time-invariant treatment vector per unit
/// (one entry per treatment group, e.g. `["affected"]` or west/middle/east).
#[derive(Debug, Clone, Default)]
pub struct EventPanel {
    unit_ids: Vec<String>,
    unit_index: HashMap<String, usize>,
    groups: Vec<String>,
    treatment: Vec<Vec<f64>>,
    rows: Vec<PanelRow>,
}

impl EventPanel {
    pub fn new(groups: Vec<String>) -> Self {
        EventPanel {
            groups,
            ..Default::default()
        }
    }

    /// Panel with a single treatment group called `affected`.
    pub fn single() -> Self {
        Self::new(vec!["affected".to_string()])
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub fn treatment(&self, unit: usize) -> &[f64] {
        &self.treatment[unit]
    }

    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }

    /// Registers a unit; re-registering must repeat the same treatment.
    pub fn add_unit(&mut self, id: &str, treatment: Vec<f64>) -> Result<usize> {
        if treatment.len() != self.groups.len() {
            return Err(Error::InvalidInput(format!(
                "unit {id}: {} treatment values for {} groups",
                treatment.len(),
                self.groups.len()
            )));
        }
        if treatment.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(format!("unit {id}: non-finite treatment")));
        }
        if let Some(&u) = self.unit_index.get(id) {
            if self.treatment[u] != treatment {
                return Err(Error::InvalidInput(format!("unit {id}: treatment varies within unit")));
            }
            return Ok(u);
        }
        let u = self.unit_ids.len();
        self.unit_ids.push(id.to_string());
        self.unit_index.insert(id.to_string(), u);
        self.treatment.push(treatment);
        Ok(u)
    }

    pub fn push(&mut self, unit_id: &str, year: i32, value: f64) -> Result<()> {
        let unit = *self
            .unit_index
            .get(unit_id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown unit {unit_id}")))?;
        self.push_index(unit, year, value);
        Ok(())
    }

    pub fn push_index(&mut self, unit: usize, year: i32, value: f64) {
        self.rows.push(PanelRow { unit, year, value });
    }

    /// Same panel with every treatment value passed through `f`.
    pub fn map_treatment(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.treatment {
            for v in t.iter_mut() {
                *v = f(*v);
            }
        }
        out
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.rows {
            r.value = f(r.value);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStudySpec {
    pub transform: Transform,
    pub reference_year: i32,
    pub event_years: Vec<i32>,
    /// Number of tests for the Bonferroni adjustment; `None` uses the number
    /// of estimated coefficients in the fit.
    pub bonferroni_m: Option<usize>,
}

impl EventStudySpec {
    pub fn census(transform: Transform) -> Self {
        EventStudySpec {
            transform,
            reference_year: DEFAULT_REFERENCE_YEAR,
            event_years: CENSUS_YEARS.to_vec(),
            bonferroni_m: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.event_years.contains(&self.reference_year) {
            return Err(Error::Config(format!(
                "reference year {} is not an event year",
                self.reference_year
            )));
        }
        if self.bonferroni_m == Some(0) {
            return Err(Error::Config("Bonferroni m must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventCoefficient {
    pub group: String,
    pub year: i32,
    pub estimate: f64,
    pub se: f64,
    pub p: f64,
    pub p_bonferroni: f64,
    /// Omitted category: estimate and SE are structurally zero.
    pub is_reference: bool,
}

impl EventCoefficient {
    pub fn t_stat(&self) -> f64 {
        if self.is_reference {
            0.0
        } else {
            self.estimate / self.se
        }
    }

    pub fn term(&self) -> String {
        format!("{}x{}", self.year, self.group)
    }
}

#[derive(Debug, Clone)]
pub struct EventStudyFit {
    /// Group-major, years ascending, reference year included.
    pub coefficients: Vec<EventCoefficient>,
    /// Covariance of the estimated (non-reference) coefficients, same order.
    pub vcov: DMatrix<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub n_parishes_included: usize,
    pub residual_ss: f64,
}

impl EventStudyFit {
    pub fn coefficient(&self, group: &str, year: i32) -> Option<&EventCoefficient> {
        self.coefficients
            .iter()
            .find(|c| c.group == group && c.year == year)
    }

    pub fn beta(&self, group: &str, year: i32) -> Option<f64> {
        self.coefficient(group, year).map(|c| c.estimate)
    }

    pub fn estimated(&self) -> impl Iterator<Item = &EventCoefficient> {
        self.coefficients.iter().filter(|c| !c.is_reference)
    }

    /// Coefficients of one group as a fit of their own (shared vcov block).
    pub fn subset(&self, group: &str) -> EventStudyFit {
        let idx: Vec<usize> = self
            .estimated()
            .enumerate()
            .filter(|(_, c)| c.group == group)
            .map(|(i, _)| i)
            .collect();
        let vcov = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.vcov[(idx[a], idx[b])]);
        EventStudyFit {
            coefficients: self
                .coefficients
                .iter()
                .filter(|c| c.group == group)
                .cloned()
                .collect(),
            vcov,
            ..self.clone()
        }
    }
}

/// Removes unit and year means by alternating projections until the sweep
/// changes nothing (exact in one sweep for balanced panels).
pub(crate) fn demean_two_way(
    columns: &mut [Vec<f64>],
    unit: &[usize],
    n_units: usize,
    time: &[usize],
    n_times: usize,
) -> Result<()> {
    let n = unit.len();
    let mut unit_count = vec![0.0; n_units];
    let mut time_count = vec![0.0; n_times];
    for i in 0..n {
        unit_count[unit[i]] += 1.0;
        time_count[time[i]] += 1.0;
    }
    for col in columns.iter_mut() {
        let scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        let mut converged = false;
        for _ in 0..DEMEAN_MAX_SWEEPS {
            let mut change = 0.0_f64;
            for (index, count, levels) in [(unit, &unit_count, n_units), (time, &time_count, n_times)] {
                let mut sums = vec![0.0; levels];
                for i in 0..n {
                    sums[index[i]] += col[i];
                }
                for i in 0..n {
                    let m = sums[index[i]] / count[index[i]];
                    col[i] -= m;
                    change = change.max(m.abs());
                }
            }
            if change <= DEMEAN_TOL * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NotConverged {
                iterations: DEMEAN_MAX_SWEEPS,
            });
        }
    }
    Ok(())
}

/// Two-way fixed-effects event study `y_it = a_t + a_i + Σ_j 1[t=j] T_i β_j + e`
/// with the reference-year interaction omitted and parish-clustered CR1 SEs.
///
/// Rows whose year is not an event year are ignored. Intensive-margin zeros
/// are dropped, and units left with a single observation are dropped since
/// their fixed effect absorbs them completely.
pub fn twfe_event_study(panel: &EventPanel, spec: &EventStudySpec) -> Result<EventStudyFit> {
    spec.validate()?;
    let years: BTreeSet<i32> = spec.event_years.iter().copied().collect();

    // transform and filter
    let mut kept: Vec<(usize, i32, f64)> = Vec::with_capacity(panel.rows.len());
    for r in &panel.rows {
        if !years.contains(&r.year) {
            continue;
        }
        if let Some(v) = transform_value(r.value, spec.transform)? {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite outcome for unit {} in {}",
                    panel.unit_ids[r.unit], r.year
                )));
            }
            kept.push((r.unit, r.year, v));
        }
    }
    let mut per_unit = vec![0usize; panel.n_units()];
    for (u, _, _) in &kept {
        per_unit[*u] += 1;
    }
    kept.retain(|(u, _, _)| per_unit[*u] >= 2);

    // dense re-indexing of units and years actually present
    let mut unit_map: BTreeMap<usize, usize> = BTreeMap::new();
    let mut year_map: BTreeMap<i32, usize> = BTreeMap::new();
    for (u, y, _) in &kept {
        let nu = unit_map.len();
        unit_map.entry(*u).or_insert(nu);
        year_map.entry(*y).or_insert(0);
    }
    for (i, v) in year_map.values_mut().enumerate() {
        *v = i;
    }
    let n_units = unit_map.len();
    if n_units < 2 {
        return Err(Error::InvalidInput(format!("{n_units} units with repeated observations; need at least 2")));
    }

    let groups = panel.groups();
    let event_cols: Vec<i32> = years.iter().copied().filter(|y| *y != spec.reference_year).collect();
    let k = groups.len() * event_cols.len();
    let n = kept.len();

    let unit_idx: Vec<usize> = kept.iter().map(|(u, _, _)| unit_map[u]).collect();
    let time_idx: Vec<usize> = kept.iter().map(|(_, y, _)| year_map[y]).collect();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    for g in 0..groups.len() {
        for &j in &event_cols {
            columns.push(
                kept.iter()
                    .map(|(u, y, _)| if *y == j { panel.treatment[*u][g] } else { 0.0 })
                    .collect(),
            );
        }
    }
    columns.push(kept.iter().map(|(_, _, v)| *v).collect());
    demean_two_way(&mut columns, &unit_idx, n_units, &time_idx, year_map.len())?;

    let y = DVector::from_vec(columns.pop().unwrap_or_default());
    let x = DMatrix::from_fn(n, k, |i, j| columns[j][i]);
    let bread = spd_inverse(&x.tr_mul(&x), "event-study design (collinear treatment?)")?;
    let beta = &bread * x.tr_mul(&y);
    let resid = &y - &x * &beta;

    let mut scores = x.clone();
    for i in 0..n {
        scores.row_mut(i).scale_mut(resid[i]);
    }
    // unit effects are nested in the clusters; year effects (incl. constant) are not
    let dof_k = k + year_map.len();
    let vcov = cluster_sandwich(&bread, &scores, &unit_idx, dof_k)?;

    let m = spec.bonferroni_m.unwrap_or(k.max(1));
    let mut coefficients = Vec::with_capacity(groups.len() * years.len());
    let mut col = 0;
    for g in groups {
        for &year in &years {
            if year == spec.reference_year {
                coefficients.push(EventCoefficient {
                    group: g.clone(),
                    year,
                    estimate: 0.0,
                    se: 0.0,
                    p: 1.0,
                    p_bonferroni: 1.0,
                    is_reference: true,
                });
                continue;
            }
            let se = vcov[(col, col)].max(0.0).sqrt();
            let p = normal_p_value(beta[col] / se);
            coefficients.push(EventCoefficient {
                group: g.clone(),
                year,
                estimate: beta[col],
                se,
                p,
                p_bonferroni: bonferroni_adjust(p, m),
                is_reference: false,
            });
            col += 1;
        }
    }

    Ok(EventStudyFit {
        coefficients,
        vcov,
        n_obs: n,
        n_clusters: n_units,
        n_parishes_included: n_units,
        residual_ss: resid.norm_squared(),
    })
}

/// West, middle and east interactions estimated jointly; returns one fit
/// per region sharing the joint covariance.
pub fn three_region_event_study(panel: &EventPanel, spec: &EventStudySpec) -> Result<BTreeMap<String, EventStudyFit>> {
    if panel.groups().len() != 3 {
        return Err(Error::InvalidInput(format!(
            "three-region study needs 3 treatment groups, panel has {}",
            panel.groups().len()
        )));
    }
    let joint = twfe_event_study(panel, spec)?;
    Ok(panel
        .groups()
        .iter()
        .map(|g| (g.clone(), joint.subset(g)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> EventPanel {
        let mut p = EventPanel::single();
        p.add_unit("t", vec![1.0]).unwrap();
        p.add_unit("c", vec![0.0]).unwrap();
        p.push("t", 0, 10.0).unwrap();
        p.push("t", 1, 10.3).unwrap();
        p.push("c", 0, 10.0).unwrap();
        p.push("c", 1, 10.1).unwrap();
        p
    }

    fn spec2() -> EventStudySpec {
        EventStudySpec {
            transform: Transform::Identity,
            reference_year: 0,
            event_years: vec![0, 1],
            bonferroni_m: None,
        }
    }

    #[test]
    fn closed_form_two_by_two() {
        let fit = twfe_event_study(&two_by_two(), &spec2()).unwrap();
        let b = fit.beta("affected", 1).unwrap();
        assert!((b - ((10.3 - 10.0) - (10.1 - 10.0))).abs() < 1e-12);
        let r = fit.coefficient("affected", 0).unwrap();
        assert!(r.is_reference && r.estimate == 0.0 && r.se == 0.0);
    }

    #[test]
    fn collinear_treatment_is_singular() {
        let mut p = EventPanel::single();
        for (id, v) in [("a", 1.0), ("b", 1.0)] {
            p.add_unit(id, vec![v]).unwrap();
            p.push(id, 0, 1.0).unwrap();
            p.push(id, 1, 2.0 + v).unwrap();
        }
        assert!(matches!(twfe_event_study(&p, &spec2()), Err(Error::Singular(_))));
    }

    #[test]
    fn reference_year_must_be_event_year() {
        let mut s = spec2();
        s.reference_year = 5;
        assert!(twfe_event_study(&two_by_two(), &s).is_err());
    }

    #[test]
    fn treatment_must_be_constant_within_unit() {
        let mut p = EventPanel::single();
        p.add_unit("a", vec![1.0]).unwrap();
        assert!(p.add_unit("a", vec![0.0]).is_err());
        assert!(p.add_unit("b", vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn unbalanced_demeaning_converges_to_projection() {
        // unit/year dummies by hand vs alternating projections
        let unit = [0, 0, 0, 1, 1, 2, 2, 2];
        let time = [0, 1, 2, 0, 2, 0, 1, 2];
        let vals = [1.0, 4.0, 2.0, -3.0, 0.5, 2.5, 7.0, 1.0];
        let mut cols = vec![vals.to_vec()];
        demean_two_way(&mut cols, &unit, 3, &time, 3).unwrap();
        let d = DMatrix::from_fn(8, 5, |i, j| {
            if j < 3 {
                (unit[i] == j) as u8 as f64
            } else {
                (time[i] == j - 2) as u8 as f64
            }
        });
        let y = DVector::from_row_slice(&vals);
        let coef = (d.tr_mul(&d)).try_inverse().unwrap() * d.tr_mul(&y);
        let resid = &y - &d * coef;
        for i in 0..8 {
            assert!((cols[0][i] - resid[i]).abs() < 1e-10);
        }
    }
}
