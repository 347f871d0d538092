use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::market_access::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sex {
    Female,
    Male,
    Unknown,
}

impl FromStr for Sex {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" | "k" | "kvinde" | "w" | "woman" => Sex::Female,
            "m" | "male" | "mand" | "man" => Sex::Male,
            _ => Sex::Unknown,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusRecord {
    pub person_id: String,
    pub parish_id: String,
    pub year: i32,
    pub age: u32,
    pub sex: Sex,
    pub birth_county: Option<String>,
    /// HISCO code as digits; `None` for missing or non-occupational codes.
    pub hisco: Option<String>,
}

/// HISCO major groups with 0/1 and 7/8/9 merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OccupationGroup {
    ProfessionalTechnical,
    Administrative,
    Clerical,
    Sales,
    Service,
    Agriculture,
    Production,
}

impl OccupationGroup {
    pub const ALL: [OccupationGroup; 7] = [
        OccupationGroup::ProfessionalTechnical,
        OccupationGroup::Administrative,
        OccupationGroup::Clerical,
        OccupationGroup::Sales,
        OccupationGroup::Service,
        OccupationGroup::Agriculture,
        OccupationGroup::Production,
    ];

    pub fn from_first_digit(d: u32) -> Option<Self> {
        Some(match d {
            0 | 1 => OccupationGroup::ProfessionalTechnical,
            2 => OccupationGroup::Administrative,
            3 => OccupationGroup::Clerical,
            4 => OccupationGroup::Sales,
            5 => OccupationGroup::Service,
            6 => OccupationGroup::Agriculture,
            7..=9 => OccupationGroup::Production,
            _ => return None,
        })
    }

    pub fn from_hisco(code: &str) -> Option<Self> {
        code.chars().next()?.to_digit(10).and_then(Self::from_first_digit)
    }

    pub fn label(self) -> &'static str {
        match self {
            OccupationGroup::ProfessionalTechnical => "0/1",
            OccupationGroup::Administrative => "2",
            OccupationGroup::Clerical => "3",
            OccupationGroup::Sales => "4",
            OccupationGroup::Service => "5",
            OccupationGroup::Agriculture => "6",
            OccupationGroup::Production => "7/8/9",
        }
    }

    /// Column-safe name, e.g. `occ_7_8_9`.
    pub fn column(self) -> String {
        format!("occ_{}", self.label().replace('/', "_"))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OccupationGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OccupationGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().trim_start_matches("occ_").replace('_', "/");
        OccupationGroup::ALL
            .into_iter()
            .find(|g| g.label() == norm)
            .ok_or_else(|| Error::Config(format!("unknown occupation group `{s}`")))
    }
}

/// One parish in one census year.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelObservation {
    pub parish_id: String,
    pub year: i32,
    pub population: u64,
    pub occ_counts: [u64; 7],
    /// Counts by leading two and three HISCO digits.
    pub detailed_counts: BTreeMap<String, u64>,
    pub child_women_ratio: Option<f64>,
    pub migrant_share: Option<f64>,
    pub age_group_shares: Vec<f64>,
    pub region: Option<Region>,
    pub treatment_dummy: u8,
    pub delta_log_ma: Option<f64>,
}

impl PanelObservation {
    pub fn occ(&self, g: OccupationGroup) -> u64 {
        self.occ_counts[g.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusConfig {
    pub years: Vec<i32>,
    pub age_bin_width: u32,
    /// Ages at or above this fall into the last, open bin.
    pub age_open_bin_start: u32,
    pub migrant_from_year: i32,
    pub child_ages: (u32, u32),
    pub women_ages: (u32, u32),
}

impl Default for CensusConfig {
    fn default() -> Self {
        CensusConfig {
            years: crate::estimators::CENSUS_YEARS.to_vec(),
            age_bin_width: 10,
            age_open_bin_start: 80,
            migrant_from_year: 1845,
            child_ages: (1, 5),
            women_ages: (15, 45),
        }
    }
}

impl CensusConfig {
    pub fn n_age_bins(&self) -> usize {
        (self.age_open_bin_start / self.age_bin_width) as usize + 1
    }

    pub fn age_bin(&self, age: u32) -> usize {
        (age.min(self.age_open_bin_start) / self.age_bin_width) as usize
    }

    pub fn age_bin_labels(&self) -> Vec<String> {
        (0..self.n_age_bins())
            .map(|b| {
                let lo = b as u32 * self.age_bin_width;
                if lo >= self.age_open_bin_start {
                    format!("age_{lo}_plus")
                } else {
                    format!("age_{lo}_{}", lo + self.age_bin_width - 1)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    population: u64,
    occ: [u64; 7],
    detailed: BTreeMap<String, u64>,
    children: u64,
    women: u64,
    migrants: u64,
    age_bins: Vec<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct CensusPanel {
    pub rows: Vec<PanelObservation>,
    /// Parishes dropped for not appearing in every census year.
    pub dropped_parishes: Vec<String>,
    /// Cells whose child-women ratio is missing (no women of child-bearing age).
    pub missing_ratio_cells: usize,
}

fn validate_hisco(code: &str) -> Result<Option<String>> {
    let c = code.trim();
    if c.is_empty() || c.starts_with('-') || c.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    if !c.chars().all(|ch| ch.is_ascii_digit()) {
        return Err(Error::InvalidInput(format!("HISCO code `{c}` is not numeric")));
    }
    Ok(Some(c.to_string()))
}

/// Aggregates individual census records into a balanced parish × year panel.
///
/// `registry` lists the parishes to keep; `counties` maps parish → county
/// for the born-in-a-different-county share. Aggregation is independent of
/// record order.
pub fn aggregate_census(
    records: impl IntoIterator<Item = CensusRecord>,
    registry: &[String],
    counties: &HashMap<String, String>,
    cfg: &CensusConfig,
) -> Result<CensusPanel> {
    let years: BTreeSet<i32> = cfg.years.iter().copied().collect();
    let known: BTreeSet<&str> = registry.iter().map(String::as_str).collect();
    let mut acc: BTreeMap<(String, i32), Accumulator> = BTreeMap::new();
    let mut unknown_parish = 0usize;
    let mut unknown_birthplace = 0usize;

    for r in records {
        if !years.contains(&r.year) {
            return Err(Error::InvalidInput(format!(
                "record {} has year {} outside the census years",
                r.person_id, r.year
            )));
        }
        if !known.contains(r.parish_id.as_str()) {
            unknown_parish += 1;
            continue;
        }
        let a = acc.entry((r.parish_id.clone(), r.year)).or_insert_with(|| Accumulator {
            age_bins: vec![0; cfg.n_age_bins()],
            ..Default::default()
        });
        a.population += 1;
        a.age_bins[cfg.age_bin(r.age)] += 1;
        if let Some(code) = r.hisco.as_deref() {
            if let Some(code) = validate_hisco(code)? {
                if let Some(g) = OccupationGroup::from_hisco(&code) {
                    a.occ[g.index()] += 1;
                }
                for len in [2, 3] {
                    if code.len() >= len {
                        *a.detailed.entry(code[..len].to_string()).or_default() += 1;
                    }
                }
            }
        }
        if (cfg.child_ages.0..=cfg.child_ages.1).contains(&r.age) {
            a.children += 1;
        }
        if r.sex == Sex::Female && (cfg.women_ages.0..=cfg.women_ages.1).contains(&r.age) {
            a.women += 1;
        }
        match (&r.birth_county, counties.get(&r.parish_id)) {
            (Some(born), Some(home)) => {
                if born != home {
                    a.migrants += 1;
                }
            }
            (None, _) => unknown_birthplace += 1,
            _ => {}
        }
    }
    if unknown_parish > 0 {
        warn!("{unknown_parish} records from parishes outside the registry ignored");
    }
    if unknown_birthplace > 0 {
        info!("{unknown_birthplace} records with unknown birthplace counted as non-migrants");
    }

    let mut panel = CensusPanel::default();
    for parish in registry.iter().collect::<BTreeSet<_>>() {
        if !years.iter().all(|y| acc.contains_key(&(parish.clone(), *y))) {
            panel.dropped_parishes.push(parish.clone());
            continue;
        }
        let has_county = counties.contains_key(parish);
        for &year in &years {
            let a = &acc[&(parish.clone(), year)];
            let pop = a.population as f64;
            let ratio = (a.women > 0).then(|| a.children as f64 / a.women as f64);
            if ratio.is_none() {
                panel.missing_ratio_cells += 1;
            }
            panel.rows.push(PanelObservation {
                parish_id: parish.clone(),
                year,
                population: a.population,
                occ_counts: a.occ,
                detailed_counts: a.detailed.clone(),
                child_women_ratio: ratio,
                migrant_share: (year >= cfg.migrant_from_year && has_county && a.population > 0)
                    .then(|| a.migrants as f64 / pop),
                age_group_shares: a
                    .age_bins
                    .iter()
                    .map(|c| if a.population > 0 { *c as f64 / pop } else { 0.0 })
                    .collect(),
                region: None,
                treatment_dummy: 0,
                delta_log_ma: None,
            });
        }
    }
    if !panel.dropped_parishes.is_empty() {
        warn!(
            "{} parishes not observed in every census year dropped",
            panel.dropped_parishes.len()
        );
    }
    Ok(panel)
}

/// Sets region, the west-region dummy and ΔlogMA on every row.
pub fn attach_treatment(rows: &mut [PanelObservation], regions: &HashMap<String, Region>, delta_log_ma: &HashMap<String, f64>) {
    for r in rows {
        r.region = regions.get(&r.parish_id).copied();
        r.treatment_dummy = (r.region == Some(Region::West)) as u8;
        r.delta_log_ma = delta_log_ma.get(&r.parish_id).copied();
    }
}

#[derive(Debug, Deserialize)]
struct CensusRow {
    person_id: String,
    parish_id: String,
    year: i32,
    age: i64,
    #[serde(default)]
    sex: String,
    #[serde(default, deserialize_with = "io::de_opt_string")]
    birth_county: Option<String>,
    #[serde(default, deserialize_with = "io::de_opt_string")]
    hisco: Option<String>,
}

pub fn read_census(path: impl AsRef<Path>) -> Result<Vec<CensusRecord>> {
    io::read_rows::<CensusRow>(path)?
        .into_iter()
        .map(|r| {
            if r.age < 0 {
                return Err(Error::InvalidInput(format!("person {} has negative age", r.person_id)));
            }
            Ok(CensusRecord {
                person_id: r.person_id,
                parish_id: r.parish_id,
                year: r.year,
                age: r.age as u32,
                sex: r.sex.parse().unwrap_or(Sex::Unknown),
                birth_county: r.birth_county,
                hisco: r.hisco,
            })
        })
        .collect()
}

pub fn write_census(path: impl AsRef<Path>, comment: Option<&str>, records: &[CensusRecord]) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Out<'a> {
        person_id: &'a str,
        parish_id: &'a str,
        year: i32,
        age: u32,
        sex: &'a str,
        birth_county: &'a str,
        hisco: &'a str,
    }
    let rows: Vec<Out> = records
        .iter()
        .map(|r| Out {
            person_id: &r.person_id,
            parish_id: &r.parish_id,
            year: r.year,
            age: r.age,
            sex: match r.sex {
                Sex::Female => "f",
                Sex::Male => "m",
                Sex::Unknown => "",
            },
            birth_county: r.birth_county.as_deref().unwrap_or(""),
            hisco: r.hisco.as_deref().unwrap_or(""),
        })
        .collect();
    io::write_rows(path, comment, &rows)
}

#[derive(Debug, Serialize, Deserialize)]
struct CountyRow {
    parish_id: String,
    county: String,
}

pub fn read_counties(path: impl AsRef<Path>) -> Result<HashMap<String, String>> {
    Ok(io::read_rows::<CountyRow>(path)?
        .into_iter()
        .map(|r| (r.parish_id, r.county))
        .collect())
}

/// Writes the parish → county lookup sorted by parish id.
pub fn write_counties(path: impl AsRef<Path>, comment: Option<&str>, counties: &HashMap<String, String>) -> Result<()> {
    let mut rows: Vec<CountyRow> = counties
        .iter()
        .map(|(p, c)| CountyRow {
            parish_id: p.clone(),
            county: c.clone(),
        })
        .collect();
    rows.sort_by(|a, b| a.parish_id.cmp(&b.parish_id));
    io::write_rows(path, comment, &rows)
}
