use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Geographic covariates used to restrict the control group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParishAttributes {
    pub parish_id: String,
    pub coast_km: f64,
    pub fjord_km: f64,
    pub market_town_km: f64,
    #[serde(deserialize_with = "io::de_flag", serialize_with = "ser_flag")]
    pub capital: bool,
}

fn ser_flag<S: serde::Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

pub fn read_attributes(path: impl AsRef<Path>) -> Result<HashMap<String, ParishAttributes>> {
    Ok(io::read_rows::<ParishAttributes>(path)?
        .into_iter()
        .map(|a| (a.parish_id.clone(), a))
        .collect())
}

pub fn write_attributes(path: impl AsRef<Path>, comment: Option<&str>, rows: &[ParishAttributes]) -> Result<()> {
    io::write_rows(path, comment, rows)
}

/// Restriction of the control group (treated parishes are always kept).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlSubgroup {
    All,
    /// Controls within this distance of the open coast.
    Coastal(f64),
    ExcludeCapital,
    /// Drops controls closer than this to the fjord.
    ExcludeNearFjord(f64),
    /// Controls within this distance of a market town (port).
    MarketTown(f64),
}

impl ControlSubgroup {
    pub fn defaults() -> Vec<ControlSubgroup> {
        vec![
            ControlSubgroup::All,
            ControlSubgroup::Coastal(5.0),
            ControlSubgroup::ExcludeCapital,
            ControlSubgroup::ExcludeNearFjord(100.0),
            ControlSubgroup::MarketTown(5.0),
        ]
    }

    /// Whether a control parish with these attributes stays in the sample.
    /// Parishes without attributes are kept only by `All`.
    pub fn keeps(&self, attrs: Option<&ParishAttributes>) -> bool {
        match (self, attrs) {
            (ControlSubgroup::All, _) => true,
            (_, None) => false,
            (ControlSubgroup::Coastal(km), Some(a)) => a.coast_km <= *km,
            (ControlSubgroup::ExcludeCapital, Some(a)) => !a.capital,
            (ControlSubgroup::ExcludeNearFjord(km), Some(a)) => a.fjord_km >= *km,
            (ControlSubgroup::MarketTown(km), Some(a)) => a.market_town_km <= *km,
        }
    }
}

impl fmt::Display for ControlSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlSubgroup::All => f.write_str("all"),
            ControlSubgroup::Coastal(km) => write!(f, "coastal:{km}"),
            ControlSubgroup::ExcludeCapital => f.write_str("excl_capital"),
            ControlSubgroup::ExcludeNearFjord(km) => write!(f, "excl_fjord:{km}"),
            ControlSubgroup::MarketTown(km) => write!(f, "market_town:{km}"),
        }
    }
}

impl FromStr for ControlSubgroup {
    type Err = Error;

    /// `all`, `excl_capital`, or `coastal:KM`, `excl_fjord:KM`,
    /// `market_town:KM` (distances optional, defaulting to 5/100/5 km).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let km = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => a
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| *v >= 0.0)
                    .ok_or_else(|| Error::Config(format!("bad distance in control subgroup `{s}`"))),
            }
        };
        match name {
            "all" => Ok(ControlSubgroup::All),
            "coastal" => Ok(ControlSubgroup::Coastal(km(5.0)?)),
            "excl_capital" => Ok(ControlSubgroup::ExcludeCapital),
            "excl_fjord" => Ok(ControlSubgroup::ExcludeNearFjord(km(100.0)?)),
            "market_town" => Ok(ControlSubgroup::MarketTown(km(5.0)?)),
            _ => Err(Error::Config(format!("unknown control subgroup `{s}`"))),
        }
    }
}
