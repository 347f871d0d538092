use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::dating::{DatingDistribution, FindingRecord};
use crate::error::{Error, Result};
use crate::estimators::{twfe_event_study, EventPanel, EventStudyFit, EventStudySpec, Transform};
use crate::io::fmt_num;

pub const DEFAULT_REPLICATES: usize = 1000;
pub const DEFAULT_WINDOW_HALFWIDTH: i32 = 25;
pub const DEFAULT_PRIOR_C: f64 = 1.0;
pub const ARCH_REFERENCE_YEAR: i32 = 1000;

/// 750, 800, …, 1500.
pub fn default_year_grid() -> Vec<i32> {
    (750..=1500).step_by(50).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityConfig {
    pub year_grid: Vec<i32>,
    pub window_halfwidth: i32,
    pub replicates: usize,
    pub prior_c: f64,
    pub seed: u64,
}

impl Default for ActivityConfig {
    fn default() -> Self {
        ActivityConfig {
            year_grid: default_year_grid(),
            window_halfwidth: DEFAULT_WINDOW_HALFWIDTH,
            replicates: DEFAULT_REPLICATES,
            prior_c: DEFAULT_PRIOR_C,
            seed: 0,
        }
    }
}

impl ActivityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::Config("at least one Monte-Carlo replicate is required".into()));
        }
        if !(self.prior_c > 0.0 && self.prior_c <= 1.0) {
            return Err(Error::Config(format!("prior_c must lie in (0, 1], got {}", self.prior_c)));
        }
        if self.window_halfwidth < 0 {
            return Err(Error::Config("window half-width must be non-negative".into()));
        }
        if self.year_grid.is_empty() || self.year_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("year grid must be non-empty and strictly increasing".into()));
        }
        Ok(())
    }
}

/// `true` when year `t` falls in the window [g − h, g + h) around grid year
/// `g`. The half-open window gives each calendar year to exactly one cell of
/// a grid spaced 2h apart.
pub fn in_window(t: i32, g: i32, halfwidth: i32) -> bool {
    t >= g - halfwidth && t < g + halfwidth
}

/// Exact probability that a single finding falls in the window around `g`.
pub fn window_probability(finding: &FindingRecord, g: i32, halfwidth: i32) -> f64 {
    finding.distribution().mass_between(g - halfwidth, g + halfwidth)
}

/// B × parishes × years Boolean tensor, bit-packed in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicateTensor {
    n_replicates: usize,
    n_parishes: usize,
    n_years: usize,
    words: Vec<u64>,
}

impl ReplicateTensor {
    pub fn zeros(n_replicates: usize, n_parishes: usize, n_years: usize) -> Self {
        let bits = n_replicates * n_parishes * n_years;
        ReplicateTensor {
            n_replicates,
            n_parishes,
            n_years,
            words: vec![0; bits.div_ceil(64)],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_replicates, self.n_parishes, self.n_years)
    }

    pub fn n_replicates(&self) -> usize {
        self.n_replicates
    }

    fn offset(&self, b: usize, p: usize, y: usize) -> usize {
        debug_assert!(b < self.n_replicates && p < self.n_parishes && y < self.n_years);
        (b * self.n_parishes + p) * self.n_years + y
    }

    pub fn get(&self, b: usize, p: usize, y: usize) -> bool {
        let i = self.offset(b, p, y);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, b: usize, p: usize, y: usize, value: bool) {
        let i = self.offset(b, p, y);
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Number of replicates with a success in cell (p, y).
    pub fn count(&self, p: usize, y: usize) -> usize {
        (0..self.n_replicates).filter(|&b| self.get(b, p, y)).count()
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn from_words(dims: (usize, usize, usize), words: Vec<u64>) -> Self {
        ReplicateTensor {
            n_replicates: dims.0,
            n_parishes: dims.1,
            n_years: dims.2,
            words,
        }
    }

    /// Cell-major copy: for each (p, y) the B replicate bits packed into
    /// consecutive words. Used to count weighted successes quickly.
    pub(crate) fn cell_major(&self) -> Vec<Vec<u64>> {
        let wpc = self.n_replicates.div_ceil(64);
        let mut out = vec![vec![0u64; wpc]; self.n_parishes * self.n_years];
        for b in 0..self.n_replicates {
            for p in 0..self.n_parishes {
                for y in 0..self.n_years {
                    if self.get(b, p, y) {
                        out[p * self.n_years + y][b / 64] |= 1 << (b % 64);
                    }
                }
            }
        }
        out
    }
}

/// Parish × year activity probabilities with the Monte-Carlo replicates
/// retained for bootstrap inference.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityPanel {
    pub parish_ids: Vec<String>,
    pub year_grid: Vec<i32>,
    pub window_halfwidth: i32,
    pub prior_c: f64,
    pub replicates: ReplicateTensor,
    /// Parish-major, `prior_c × successes / B`.
    pub probability: Vec<f64>,
}

impl ActivityPanel {
    /// Builds the panel from an existing replicate tensor.
    pub fn from_replicates(
        parish_ids: Vec<String>,
        year_grid: Vec<i32>,
        window_halfwidth: i32,
        prior_c: f64,
        replicates: ReplicateTensor,
    ) -> Result<Self> {
        let (b, p, y) = replicates.dims();
        if p != parish_ids.len() || y != year_grid.len() {
            return Err(Error::InvalidInput(format!(
                "replicate tensor is {p}×{y}, expected {}×{}",
                parish_ids.len(),
                year_grid.len()
            )));
        }
        if b < 1 {
            return Err(Error::InvalidInput("replicate tensor has no replicates".into()));
        }
        let mut probability = Vec::with_capacity(p * y);
        for pi in 0..p {
            for yi in 0..y {
                probability.push(prior_c * replicates.count(pi, yi) as f64 / b as f64);
            }
        }
        Ok(ActivityPanel {
            parish_ids,
            year_grid,
            window_halfwidth,
            prior_c,
            replicates,
            probability,
        })
    }

    pub fn n_parishes(&self) -> usize {
        self.parish_ids.len()
    }

    pub fn n_years(&self) -> usize {
        self.year_grid.len()
    }

    pub fn get(&self, parish: usize, year_index: usize) -> f64 {
        self.probability[parish * self.year_grid.len() + year_index]
    }

    pub fn probabilities(&self) -> ProbabilityPanel {
        ProbabilityPanel {
            parish_ids: self.parish_ids.clone(),
            unit_ids: self.parish_ids.clone(),
            year_grid: self.year_grid.clone(),
            probability: self.probability.clone(),
        }
    }

    /// Same replicates with a different prior constant.
    pub fn with_prior(&self, prior_c: f64) -> Self {
        let scale = prior_c / self.prior_c;
        ActivityPanel {
            prior_c,
            probability: self.probability.iter().map(|v| v * scale).collect(),
            ..self.clone()
        }
    }

    /// Wide CSV: one row per parish, one column per grid year.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            for line in c.lines() {
                let _ = writeln!(s, "# {line}");
            }
        }
        s.push_str("parish_id");
        for y in &self.year_grid {
            let _ = write!(s, ",p_{y}");
        }
        s.push('\n');
        for (pi, id) in self.parish_ids.iter().enumerate() {
            s.push_str(id);
            for yi in 0..self.n_years() {
                let _ = write!(s, ",{}", fmt_num(self.get(pi, yi)));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv(comment)).map_err(|e| Error::io(path, e))
    }
}

/// Draws the replicate tensor: in replicate `b` every finding gets one year
/// from its dating distribution, and a parish-year cell succeeds when any
/// of the parish's draws lands in the window. Replicate `b` uses ChaCha20
/// stream `b` under `seed`, so results do not depend on thread scheduling.
///
/// Findings whose parish is not in `parish_ids` are ignored with a warning.
pub fn monte_carlo_panel(findings: &[FindingRecord], parish_ids: &[String], cfg: &ActivityConfig) -> Result<ActivityPanel> {
    cfg.validate()?;
    let index: HashMap<&str, usize> = parish_ids.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let mut by_parish: BTreeMap<usize, Vec<DatingDistribution>> = BTreeMap::new();
    let mut unknown = 0usize;
    for f in findings {
        match index.get(f.parish_id.as_str()) {
            Some(&p) => by_parish.entry(p).or_default().push(f.distribution()),
            None => unknown += 1,
        }
    }
    if unknown > 0 {
        warn!("{unknown} findings reference parishes outside the panel and were ignored");
    }

    let n_p = parish_ids.len();
    let n_y = cfg.year_grid.len();
    let grid = &cfg.year_grid;
    let h = cfg.window_halfwidth;
    let rows: Vec<Vec<(usize, usize)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let mut hits = Vec::new();
            for (&p, dists) in &by_parish {
                let mut seen = vec![false; n_y];
                for d in dists {
                    let t = d.sample(&mut rng);
                    for (yi, &g) in grid.iter().enumerate() {
                        if in_window(t, g, h) {
                            seen[yi] = true;
                        }
                    }
                }
                hits.extend(seen.iter().enumerate().filter(|(_, s)| **s).map(|(yi, _)| (p, yi)));
            }
            hits
        })
        .collect();

    let mut tensor = ReplicateTensor::zeros(cfg.replicates, n_p, n_y);
    for (b, hits) in rows.iter().enumerate() {
        for &(p, yi) in hits {
            tensor.set(b, p, yi, true);
        }
    }
    ActivityPanel::from_replicates(parish_ids.to_vec(), cfg.year_grid.clone(), h, cfg.prior_c, tensor)
}

/// A probability panel ready for estimation. After a cluster bootstrap the
/// same parish may appear several times; `unit_ids` are then distinct while
/// `parish_ids` repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityPanel {
    pub parish_ids: Vec<String>,
    pub unit_ids: Vec<String>,
    pub year_grid: Vec<i32>,
    pub probability: Vec<f64>,
}

impl ProbabilityPanel {
    pub fn get(&self, unit: usize, year_index: usize) -> f64 {
        self.probability[unit * self.year_grid.len() + year_index]
    }

    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }
}

/// Treatment for the archaeological event study.
#[derive(Debug, Clone, PartialEq)]
pub enum ArchTreatment {
    /// Binary treated indicator per parish.
    Dummy(HashMap<String, f64>),
    /// ΔlogMA per parish; entered negated so coefficients read as the
    /// response to a loss of market access.
    MarketAccessLoss(HashMap<String, f64>),
}

impl ArchTreatment {
    fn value(&self, parish: &str) -> Option<f64> {
        match self {
            ArchTreatment::Dummy(m) => m.get(parish).copied(),
            ArchTreatment::MarketAccessLoss(m) => m.get(parish).map(|v| -v),
        }
    }
}

pub fn arch_event_panel(panel: &ProbabilityPanel, treatment: &ArchTreatment) -> Result<EventPanel> {
    let mut ep = EventPanel::single();
    let mut missing = 0usize;
    for u in 0..panel.n_units() {
        let Some(d) = treatment.value(&panel.parish_ids[u]) else {
            missing += 1;
            continue;
        };
        let idx = ep.add_unit(&panel.unit_ids[u], vec![d])?;
        for (yi, &year) in panel.year_grid.iter().enumerate() {
            ep.push_index(idx, year, panel.get(u, yi));
        }
    }
    if missing > 0 {
        warn!("{missing} parishes without treatment value left out of the event study");
    }
    Ok(ep)
}

/// TWFE event study of activity probabilities on the archaeological grid.
pub fn arch_event_study(panel: &ProbabilityPanel, treatment: &ArchTreatment, reference_year: i32) -> Result<EventStudyFit> {
    let spec = EventStudySpec {
        transform: Transform::Identity,
        reference_year,
        event_years: panel.year_grid.clone(),
        bonferroni_m: None,
    };
    twfe_event_study(&arch_event_panel(panel, treatment)?, &spec)
}
