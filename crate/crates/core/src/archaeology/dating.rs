use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geo::{Feature, Point};
use crate::io;

/// z for a two-sided 95% interval: the dating interval is read as μ ± 1.96σ.
pub const NORMAL_INTERVAL_Z: f64 = 1.96;
/// Normal datings are discretised over integer years within this many σ.
const NORMAL_SUPPORT_SD: f64 = 8.0;

pub const PERIOD_START: i32 = 750;
pub const PERIOD_END: i32 = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FindingKind {
    Coin,
    Building,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FindingKind::Coin => "coin",
            FindingKind::Building => "building",
        })
    }
}

impl FromStr for FindingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coin" | "coins" => Ok(FindingKind::Coin),
            "building" | "buildings" => Ok(FindingKind::Building),
            other => Err(Error::InvalidInput(format!("unknown finding kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatingModel {
    Uniform,
    Normal,
}

impl FromStr for DatingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(DatingModel::Uniform),
            "normal" => Ok(DatingModel::Normal),
            other => Err(Error::Config(format!("unknown dating model `{other}`"))),
        }
    }
}

/// An interval-dated finding resolved to a parish.
#[derive(Debug, Clone, PartialEq)]
pub struct FindingRecord {
    pub finding_id: String,
    pub parish_id: String,
    pub kind: FindingKind,
    pub y_min: i32,
    pub y_max: i32,
    pub dating_model: DatingModel,
}

impl FindingRecord {
    pub fn new(
        finding_id: impl Into<String>,
        parish_id: impl Into<String>,
        kind: FindingKind,
        y_min: i32,
        y_max: i32,
        dating_model: DatingModel,
    ) -> Result<Self> {
        let finding_id = finding_id.into();
        if y_min > y_max {
            return Err(Error::InvalidInput(format!("finding {finding_id}: year_min {y_min} > year_max {y_max}")));
        }
        Ok(FindingRecord {
            finding_id,
            parish_id: parish_id.into(),
            kind,
            y_min,
            y_max,
            dating_model,
        })
    }

    pub fn distribution(&self) -> DatingDistribution {
        DatingDistribution::of(self)
    }
}

/// Probability that `finding` was generated in calendar year `t`.
///
/// Uniform datings spread mass 1/(y_max − y_min + 1) over the inclusive
/// integer interval. Normal datings use μ at the interval midpoint and
/// σ = (y_max − y_min)/(2·1.96), with each integer year receiving the normal
/// mass of [t − ½, t + ½), renormalised over ±8σ.
pub fn dating_probability(finding: &FindingRecord, t: i32) -> f64 {
    finding.distribution().probability(t)
}

/// Discrete distribution over consecutive integer years.
#[derive(Debug, Clone, PartialEq)]
pub struct DatingDistribution {
    first_year: i32,
    /// Cumulative mass; last entry is 1.
    cumulative: Vec<f64>,
    uniform: bool,
}

impl DatingDistribution {
    pub fn of(f: &FindingRecord) -> Self {
        let span = (f.y_max - f.y_min + 1) as usize;
        if f.dating_model == DatingModel::Uniform || f.y_min == f.y_max {
            return DatingDistribution {
                first_year: f.y_min,
                cumulative: (1..=span).map(|i| i as f64 / span as f64).collect(),
                uniform: true,
            };
        }
        let mu = (f.y_min as f64 + f.y_max as f64) / 2.0;
        let sigma = (f.y_max - f.y_min) as f64 / (2.0 * NORMAL_INTERVAL_Z);
        let normal = Normal::new(mu, sigma).expect("sigma is positive for non-point datings");
        let lo = (mu - NORMAL_SUPPORT_SD * sigma).floor() as i32;
        let hi = (mu + NORMAL_SUPPORT_SD * sigma).ceil() as i32;
        let masses: Vec<f64> = (lo..=hi)
            .map(|t| normal.cdf(t as f64 + 0.5) - normal.cdf(t as f64 - 0.5))
            .collect();
        let total: f64 = masses.iter().sum();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = masses
            .iter()
            .map(|m| {
                acc += m / total;
                acc
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        DatingDistribution {
            first_year: lo,
            cumulative,
            uniform: false,
        }
    }

    pub fn probability(&self, t: i32) -> f64 {
        let i = t - self.first_year;
        if i < 0 || i as usize >= self.cumulative.len() {
            return 0.0;
        }
        let i = i as usize;
        if self.uniform {
            return 1.0 / self.cumulative.len() as f64;
        }
        self.cumulative[i] - if i == 0 { 0.0 } else { self.cumulative[i - 1] }
    }

    /// Mass on the half-open year range [from, to).
    pub fn mass_between(&self, from: i32, to: i32) -> f64 {
        let n = self.cumulative.len() as i64;
        let clamp = |t: i32| (i64::from(t) - i64::from(self.first_year)).clamp(0, n) as usize;
        let (lo, hi) = (clamp(from), clamp(to));
        if hi <= lo {
            return 0.0;
        }
        let below = |k: usize| if k == 0 { 0.0 } else { self.cumulative[k - 1] };
        below(hi) - below(lo)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i32 {
        let n = self.cumulative.len();
        if n == 1 {
            return self.first_year;
        }
        if self.uniform {
            return self.first_year + rng.gen_range(0..n) as i32;
        }
        let u: f64 = rng.gen();
        let i = self.cumulative.partition_point(|c| *c <= u).min(n - 1);
        self.first_year + i as i32
    }
}

/// Keeps findings of `kind` dated entirely within [start, end].
pub fn filter_findings(findings: &[FindingRecord], kind: FindingKind, start: i32, end: i32) -> Vec<FindingRecord> {
    findings
        .iter()
        .filter(|f| f.kind == kind && f.y_min >= start && f.y_max <= end)
        .cloned()
        .collect()
}

/// A located, not yet parish-resolved, finding as read from `findings.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFinding {
    pub finding_id: String,
    pub lon: f64,
    pub lat: f64,
    pub kind: FindingKind,
    pub year_min: i32,
    pub year_max: i32,
}

pub fn read_findings(path: impl AsRef<Path>) -> Result<Vec<RawFinding>> {
    io::read_rows(path)
}

pub fn write_findings(path: impl AsRef<Path>, comment: Option<&str>, rows: &[RawFinding]) -> Result<()> {
    io::write_rows(path, comment, rows)
}

/// Point-in-polygon resolution against parish geometries (feature ids are
/// parish ids). Findings outside every parish are dropped with a warning.
pub fn resolve_parishes(raw: &[RawFinding], parishes: &[Feature], model: DatingModel) -> Result<Vec<FindingRecord>> {
    let ids: Vec<String> = parishes
        .iter()
        .enumerate()
        .map(|(i, f)| f.identifier().unwrap_or_else(|| format!("parish_{i}")))
        .collect();
    let mut cache: HashMap<(u64, u64), Option<usize>> = HashMap::new();
    let mut out = Vec::with_capacity(raw.len());
    let mut dropped = 0usize;
    for r in raw {
        let p = Point::new(r.lon, r.lat);
        let hit = *cache
            .entry((r.lon.to_bits(), r.lat.to_bits()))
            .or_insert_with(|| parishes.iter().position(|f| f.geometry.contains(p)));
        match hit {
            Some(i) => out.push(FindingRecord::new(
                r.finding_id.clone(),
                ids[i].clone(),
                r.kind,
                r.year_min,
                r.year_max,
                model,
            )?),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        warn!("{dropped} findings outside every parish polygon dropped");
    }
    Ok(out)
}
