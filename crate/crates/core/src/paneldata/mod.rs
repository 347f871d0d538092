//! Census, trade and registry ingestion into tidy parish × year panels.

mod attributes;
mod census;
mod trade;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

pub use attributes::{read_attributes, write_attributes, ControlSubgroup, ParishAttributes};
pub use census::{
    aggregate_census, attach_treatment, read_census, read_counties, write_census, write_counties, CensusConfig,
    CensusPanel, CensusRecord, OccupationGroup, PanelObservation, Sex,
};
pub use trade::{
    build_trade_panel, port_observation_counts, read_sound_toll, read_trade_locations,
    write_sound_toll, write_trade_locations, SoundTollRecord, TradeLocation, TradeObservation,
    TradePanelConfig, DEFAULT_EXCLUSION_WINDOWS,
};

use crate::error::{Error, Result};
use crate::estimators::EventPanel;
use crate::io::{fmt_opt, reader};
use crate::market_access::Region;

/// Which panel column feeds an event study.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Population,
    Occupation(OccupationGroup),
    /// Leading two or three HISCO digits.
    Detailed(String),
    ChildWomenRatio,
    MigrantShare,
    AgeShare(usize),
}

impl Outcome {
    pub fn value(&self, o: &PanelObservation) -> Option<f64> {
        match self {
            Outcome::Population => Some(o.population as f64),
            Outcome::Occupation(g) => Some(o.occ(*g) as f64),
            Outcome::Detailed(code) => Some(o.detailed_counts.get(code).copied().unwrap_or(0) as f64),
            Outcome::ChildWomenRatio => o.child_women_ratio,
            Outcome::MigrantShare => o.migrant_share,
            Outcome::AgeShare(b) => o.age_group_shares.get(*b).copied(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Outcome::Population => "population".into(),
            Outcome::Occupation(g) => g.column(),
            Outcome::Detailed(c) => format!("hisco_{c}"),
            Outcome::ChildWomenRatio => "child_women_ratio".into(),
            Outcome::MigrantShare => "migrant_share".into(),
            Outcome::AgeShare(b) => format!("age_bin_{b}"),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "population" => Outcome::Population,
            "child_women_ratio" => Outcome::ChildWomenRatio,
            "migrant_share" => Outcome::MigrantShare,
            _ if s.starts_with("occ_") => Outcome::Occupation(s.parse()?),
            _ if s.starts_with("hisco_") => Outcome::Detailed(s["hisco_".len()..].to_string()),
            _ if s.starts_with("age_bin_") => Outcome::AgeShare(
                s["age_bin_".len()..]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad age bin outcome `{s}`")))?,
            ),
            _ => return Err(Error::Config(format!("unknown outcome `{s}`"))),
        })
    }
}

/// How a parish's exposure to the channel is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreatmentKind {
    /// 1 for the west region, 0 otherwise.
    Dummy,
    /// ΔlogMA.
    MarketAccess,
    /// Separate west, middle and east dummies.
    ThreeRegion,
}

impl FromStr for TreatmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "dummy" => TreatmentKind::Dummy,
            "ma" | "market_access" | "delta_log_ma" => TreatmentKind::MarketAccess,
            "three_region" | "regions" => TreatmentKind::ThreeRegion,
            other => return Err(Error::Config(format!("unknown treatment `{other}`"))),
        })
    }
}

/// Builds an estimation panel. Rows with a missing outcome are skipped;
/// parishes without a treatment value (e.g. no ΔlogMA) are skipped.
pub fn event_panel(rows: &[PanelObservation], outcome: &Outcome, treatment: TreatmentKind) -> Result<EventPanel> {
    let mut panel = match treatment {
        TreatmentKind::ThreeRegion => EventPanel::new(vec!["west".into(), "middle".into(), "east".into()]),
        _ => EventPanel::single(),
    };
    for r in rows {
        let t = match treatment {
            TreatmentKind::Dummy => Some(vec![r.treatment_dummy as f64]),
            TreatmentKind::MarketAccess => r.delta_log_ma.map(|d| vec![d]),
            TreatmentKind::ThreeRegion => Some(
                [Region::West, Region::Middle, Region::East]
                    .iter()
                    .map(|g| (r.region == Some(*g)) as u8 as f64)
                    .collect(),
            ),
        };
        let (Some(t), Some(v)) = (t, outcome.value(r)) else {
            continue;
        };
        let u = panel.add_unit(&r.parish_id, t)?;
        panel.push_index(u, r.year, v);
    }
    Ok(panel)
}

/// Per-year means of `outcome` and population over parishes with the dummy set.
pub fn treated_means(rows: &[PanelObservation], outcome: &Outcome, year: i32) -> Option<(f64, f64)> {
    let sel: Vec<&PanelObservation> = rows
        .iter()
        .filter(|r| r.year == year && r.treatment_dummy == 1)
        .collect();
    if sel.is_empty() {
        return None;
    }
    let n = sel.len() as f64;
    let occ = sel.iter().filter_map(|r| outcome.value(r)).sum::<f64>() / n;
    let pop = sel.iter().map(|r| r.population as f64).sum::<f64>() / n;
    Some((occ, pop))
}

/// Writes `panel.csv`: one row per parish-year with every outcome column.
pub fn write_panel_csv(path: impl AsRef<Path>, comment: Option<&str>, rows: &[PanelObservation], cfg: &CensusConfig) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(io)?;
    }
    let mut header = vec!["parish_id".to_string(), "year".into(), "population".into()];
    header.extend(OccupationGroup::ALL.iter().map(|g| g.column()));
    header.extend(["child_women_ratio".into(), "migrant_share".into()]);
    header.extend(cfg.age_bin_labels());
    header.extend(["region".into(), "treatment_dummy".into(), "delta_log_ma".into()]);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for r in rows {
        let mut f = vec![r.parish_id.clone(), r.year.to_string(), r.population.to_string()];
        f.extend(r.occ_counts.iter().map(|c| c.to_string()));
        f.push(fmt_opt(r.child_women_ratio));
        f.push(fmt_opt(r.migrant_share));
        f.extend(r.age_group_shares.iter().map(|s| s.to_string()));
        f.push(r.region.map_or(String::new(), |g| g.to_string()));
        f.push(r.treatment_dummy.to_string());
        f.push(fmt_opt(r.delta_log_ma));
        writeln!(out, "{}", f.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Long-format detailed HISCO counts: parish_id,year,code,count.
pub fn write_detailed_csv(path: impl AsRef<Path>, comment: Option<&str>, rows: &[PanelObservation]) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Out<'a> {
        parish_id: &'a str,
        year: i32,
        code: &'a str,
        count: u64,
    }
    let out: Vec<Out> = rows
        .iter()
        .flat_map(|r| {
            r.detailed_counts.iter().map(move |(code, count)| Out {
                parish_id: &r.parish_id,
                year: r.year,
                code,
                count: *count,
            })
        })
        .collect();
    crate::io::write_rows(path, comment, &out)
}

fn opt_num(s: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") {
        Ok(None)
    } else {
        s.parse()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("`{s}` is not a number")))
    }
}

/// Reads a panel written by [`write_panel_csv`]. Detailed counts are not
/// part of this file.
pub fn read_panel_csv(path: impl AsRef<Path>) -> Result<Vec<PanelObservation>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| Error::InvalidInput(format!("panel file lacks column `{name}`")));
    let (pid, year, pop) = (need("parish_id")?, need("year")?, need("population")?);
    let occ: Vec<Option<usize>> = OccupationGroup::ALL.iter().map(|g| col(&g.column())).collect();
    let age: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("age_"))
        .map(|(i, _)| i)
        .collect();
    let (cwr, mig, reg, dummy, dma) = (
        col("child_women_ratio"),
        col("migrant_share"),
        col("region"),
        col("treatment_dummy"),
        col("delta_log_ma"),
    );
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: Option<usize>| i.and_then(|i| rec.get(i)).unwrap_or("");
        let int = |s: &str| -> Result<u64> {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("`{s}` is not a count")))
        };
        let mut occ_counts = [0u64; 7];
        for (k, c) in occ.iter().enumerate() {
            if c.is_some() {
                occ_counts[k] = int(get(*c))?;
            }
        }
        rows.push(PanelObservation {
            parish_id: get(Some(pid)).to_string(),
            year: get(Some(year))
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput("bad year".into()))?,
            population: int(get(Some(pop)))?,
            occ_counts,
            detailed_counts: BTreeMap::new(),
            child_women_ratio: opt_num(get(cwr))?,
            migrant_share: opt_num(get(mig))?,
            age_group_shares: age
                .iter()
                .map(|i| opt_num(get(Some(*i))).map(|v| v.unwrap_or(0.0)))
                .collect::<Result<_>>()?,
            region: match get(reg).trim() {
                "" => None,
                s => Some(s.parse()?),
            },
            treatment_dummy: match get(dummy).trim() {
                "" | "0" => 0,
                "1" => 1,
                s => return Err(Error::InvalidInput(format!("treatment_dummy `{s}` is not 0/1"))),
            },
            delta_log_ma: opt_num(get(dma))?,
        });
    }
    Ok(rows)
}

/// Region per parish as recorded on the panel.
pub fn regions_of(rows: &[PanelObservation]) -> HashMap<String, Region> {
    rows.iter()
        .filter_map(|r| r.region.map(|g| (r.parish_id.clone(), g)))
        .collect()
}
