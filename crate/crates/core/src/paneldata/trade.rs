use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TradeLocation {
    West,
    Middle,
    East,
    Other,
}

impl TradeLocation {
    pub fn as_str(self) -> &'static str {
        match self {
            TradeLocation::West => "west",
            TradeLocation::Middle => "middle",
            TradeLocation::East => "east",
            TradeLocation::Other => "other",
        }
    }
}

impl fmt::Display for TradeLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TradeLocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "west" => TradeLocation::West,
            "middle" => TradeLocation::Middle,
            "east" => TradeLocation::East,
            "other" | "reference" | "" => TradeLocation::Other,
            other => return Err(Error::InvalidInput(format!("unknown trade location `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundTollRecord {
    pub port_id: String,
    pub year: i32,
    pub passages: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeObservation {
    pub port_id: String,
    pub year: i32,
    pub traffic: f64,
    pub location: TradeLocation,
    pub post: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradePanelConfig {
    pub first_year: i32,
    pub last_year: i32,
    pub post_from: i32,
    /// Inclusive year ranges to drop.
    pub exclusion_windows: Vec<(i32, i32)>,
}

/// Napoleonic wars and the years before the channel was fully navigable.
pub const DEFAULT_EXCLUSION_WINDOWS: [(i32, i32); 2] = [(1807, 1814), (1825, 1833)];

impl Default for TradePanelConfig {
    fn default() -> Self {
        TradePanelConfig {
            first_year: 1750,
            last_year: 1855,
            post_from: 1834,
            exclusion_windows: Vec::new(),
        }
    }
}

impl TradePanelConfig {
    pub fn with_default_exclusions(mut self) -> Self {
        self.exclusion_windows = DEFAULT_EXCLUSION_WINDOWS.to_vec();
        self
    }

    fn excluded(&self, year: i32) -> bool {
        self.exclusion_windows.iter().any(|(a, b)| (*a..=*b).contains(&year))
    }
}

/// Yearly traffic per port, balanced over every registered or observed port
/// and every year in range (missing port-years are zero traffic).
pub fn build_trade_panel(
    records: &[SoundTollRecord],
    locations: &HashMap<String, TradeLocation>,
    cfg: &TradePanelConfig,
) -> Result<Vec<TradeObservation>> {
    if cfg.first_year > cfg.last_year {
        return Err(Error::Config("trade panel first year after last year".into()));
    }
    let mut sums: BTreeMap<(String, i32), f64> = BTreeMap::new();
    let mut ports: BTreeSet<String> = locations.keys().cloned().collect();
    for r in records {
        if !(r.passages >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "port {} in {}: negative passages {}",
                r.port_id, r.year, r.passages
            )));
        }
        ports.insert(r.port_id.clone());
        if (cfg.first_year..=cfg.last_year).contains(&r.year) {
            *sums.entry((r.port_id.clone(), r.year)).or_default() += r.passages;
        }
    }
    let unmapped: Vec<&String> = ports.iter().filter(|p| !locations.contains_key(*p)).collect();
    if !unmapped.is_empty() {
        warn!("{} ports without a location class assigned to `other`", unmapped.len());
    }

    let mut out = Vec::new();
    for port in &ports {
        let location = locations.get(port).copied().unwrap_or(TradeLocation::Other);
        for year in cfg.first_year..=cfg.last_year {
            if cfg.excluded(year) {
                continue;
            }
            out.push(TradeObservation {
                port_id: port.clone(),
                year,
                traffic: sums.get(&(port.clone(), year)).copied().unwrap_or(0.0),
                location,
                post: year >= cfg.post_from,
            });
        }
    }
    Ok(out)
}

pub fn read_sound_toll(path: impl AsRef<Path>) -> Result<Vec<SoundTollRecord>> {
    io::read_rows(path)
}

pub fn write_sound_toll(path: impl AsRef<Path>, comment: Option<&str>, rows: &[SoundTollRecord]) -> Result<()> {
    io::write_rows(path, comment, rows)
}

/// Observation count per port (number of register rows with traffic).
pub fn port_observation_counts(records: &[SoundTollRecord]) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for r in records.iter().filter(|r| r.passages > 0.0) {
        *counts.entry(r.port_id.clone()).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Deserialize, Serialize)]
struct LocationRow {
    port_id: String,
    location: String,
}

pub fn read_trade_locations(path: impl AsRef<Path>) -> Result<HashMap<String, TradeLocation>> {
    io::read_rows::<LocationRow>(path)?
        .into_iter()
        .map(|r| Ok((r.port_id, r.location.parse()?)))
        .collect()
}

pub fn write_trade_locations(path: impl AsRef<Path>, comment: Option<&str>, map: &HashMap<String, TradeLocation>) -> Result<()> {
    let mut rows: Vec<LocationRow> = map
        .iter()
        .map(|(k, v)| LocationRow {
            port_id: k.clone(),
            location: v.as_str().to_string(),
        })
        .collect();
    rows.sort_by(|a, b| a.port_id.cmp(&b.port_id));
    io::write_rows(path, comment, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(port: &str, year: i32, n: f64) -> SoundTollRecord {
        SoundTollRecord {
            port_id: port.into(),
            year,
            passages: n,
        }
    }

    #[test]
    fn sums_passages_and_balances() {
        let locs: HashMap<String, TradeLocation> = [("a".to_string(), TradeLocation::West)].into();
        let recs = [rec("a", 1800, 2.0), rec("a", 1800, 3.0), rec("b", 1801, 1.0)];
        let panel = build_trade_panel(&recs, &locs, &TradePanelConfig::default()).unwrap();
        assert_eq!(panel.len(), 2 * 106);
        let a1800 = panel.iter().find(|o| o.port_id == "a" && o.year == 1800).unwrap();
        assert_eq!(a1800.traffic, 5.0);
        assert_eq!(a1800.location, TradeLocation::West);
        assert!(!a1800.post);
        let b = panel.iter().find(|o| o.port_id == "b" && o.year == 1850).unwrap();
        assert_eq!((b.traffic, b.location, b.post), (0.0, TradeLocation::Other, true));
    }

    #[test]
    fn exclusion_windows() {
        let locs: HashMap<String, TradeLocation> = [("a".to_string(), TradeLocation::East)].into();
        let panel = build_trade_panel(&[], &locs, &TradePanelConfig::default().with_default_exclusions()).unwrap();
        assert!(panel.iter().all(|o| !(1807..=1814).contains(&o.year) && !(1825..=1833).contains(&o.year)));
        assert_eq!(panel.len(), 106 - 8 - 9);
    }

    #[test]
    fn negative_passages_rejected() {
        assert!(build_trade_panel(&[rec("a", 1800, -1.0)], &HashMap::new(), &TradePanelConfig::default()).is_err());
    }
}
