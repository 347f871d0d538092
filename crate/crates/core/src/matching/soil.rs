use std::fmt::Write as _;
use std::path::Path;

use log::info;

use crate::error::{Error, Result};
use crate::io::{self, fmt_num, parse_flag};

/// Soil types must cover some area in at least this share of parishes.
pub const MIN_SOIL_PREVALENCE: f64 = 0.10;
const SHARE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SoilFeatureRow {
    pub parish_id: String,
    pub soil_shares: Vec<f64>,
    pub treated: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SoilTable {
    pub soil_types: Vec<String>,
    pub rows: Vec<SoilFeatureRow>,
}

impl SoilTable {
    pub fn new(soil_types: Vec<String>, rows: Vec<SoilFeatureRow>) -> Result<Self> {
        for r in &rows {
            if r.soil_shares.len() != soil_types.len() {
                return Err(Error::InvalidInput(format!(
                    "parish {}: {} soil shares for {} soil types",
                    r.parish_id,
                    r.soil_shares.len(),
                    soil_types.len()
                )));
            }
            if r.soil_shares.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(Error::InvalidInput(format!("parish {}: negative or missing soil share", r.parish_id)));
            }
            let total: f64 = r.soil_shares.iter().sum();
            if total > 1.0 + SHARE_SUM_TOLERANCE {
                return Err(Error::InvalidInput(format!("parish {}: soil shares sum to {total}", r.parish_id)));
            }
        }
        Ok(SoilTable { soil_types, rows })
    }

    /// Drops soil types present (share > 0) in fewer than `min_prevalence`
    /// of parishes.
    pub fn filter_prevalent(&self, min_prevalence: f64) -> SoilTable {
        let n = self.rows.len() as f64;
        let keep: Vec<usize> = (0..self.soil_types.len())
            .filter(|&j| {
                let present = self.rows.iter().filter(|r| r.soil_shares[j] > 0.0).count() as f64;
                n > 0.0 && present / n >= min_prevalence
            })
            .collect();
        if keep.len() < self.soil_types.len() {
            info!("kept {} of {} soil types", keep.len(), self.soil_types.len());
        }
        SoilTable {
            soil_types: keep.iter().map(|&j| self.soil_types[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| SoilFeatureRow {
                    parish_id: r.parish_id.clone(),
                    soil_shares: keep.iter().map(|&j| r.soil_shares[j]).collect(),
                    treated: r.treated,
                })
                .collect(),
        }
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.soil_shares.clone()).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.treated).collect()
    }
}

/// Reads `soil.csv`: `parish_id`, a `treated` flag, and one share column per
/// soil type (any other column name).
pub fn read_soil(path: impl AsRef<Path>) -> Result<SoilTable> {
    let path = path.as_ref();
    let mut rdr = io::reader(path)?;
    let headers = rdr.headers()?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "parish_id")
        .ok_or_else(|| Error::InvalidInput(format!("{}: no parish_id column", path.display())))?;
    let treated_col = headers
        .iter()
        .position(|h| h == "treated")
        .ok_or_else(|| Error::InvalidInput(format!("{}: no treated column", path.display())))?;
    let soil_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != id_col && i != treated_col).collect();
    let soil_types = soil_cols.iter().map(|&i| headers[i].to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parish_id = rec[id_col].to_string();
        let treated = parse_flag(&rec[treated_col])
            .ok_or_else(|| Error::InvalidInput(format!("parish {parish_id}: bad treated flag `{}`", &rec[treated_col])))?;
        let soil_shares = soil_cols
            .iter()
            .map(|&i| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("parish {parish_id}: bad share `{}`", &rec[i])))
            })
            .collect::<Result<_>>()?;
        rows.push(SoilFeatureRow {
            parish_id,
            soil_shares,
            treated,
        });
    }
    SoilTable::new(soil_types, rows)
}

pub fn write_soil(path: impl AsRef<Path>, comment: Option<&str>, table: &SoilTable) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    if let Some(c) = comment {
        let _ = writeln!(s, "# {c}");
    }
    s.push_str("parish_id");
    for t in &table.soil_types {
        let _ = write!(s, ",{t}");
    }
    s.push_str(",treated\n");
    for r in &table.rows {
        s.push_str(&r.parish_id);
        for v in &r.soil_shares {
            let _ = write!(s, ",{}", fmt_num(*v));
        }
        let _ = writeln!(s, ",{}", u8::from(r.treated));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
