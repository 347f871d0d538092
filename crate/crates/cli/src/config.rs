//! Sectioned `key = value` configuration with command-line overrides.
//!
//! ```text
//! [run]
//! seed = 42
//! [paths]
//! raster = raster.asc
//! [market_access]
//! theta = -1
//! ```
//!
//! Relative paths resolve against the config file's directory. Overrides
//! (`--set section.key=value`, `--seed`) replace file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use firstnature::archaeology::{DatingModel, FindingKind, ARCH_REFERENCE_YEAR};
use firstnature::estimators::{Transform, CENSUS_YEARS, DEFAULT_REFERENCE_YEAR};
use firstnature::geo::Point;
use firstnature::market_access::{
    Projection, DEFAULT_ALPHA, DEFAULT_BUFFER_KM, DEFAULT_DIVIDER, DEFAULT_MIN_PORT_OBSERVATIONS, DEFAULT_THETA,
};
use firstnature::matching::{BoostingParams, ScoreModel};
use firstnature::paneldata::{ControlSubgroup, Outcome, TradePanelConfig, TreatmentKind};
use firstnature::{Error, Result};
use sha2::{Digest, Sha256};

const PATH_KEYS: [&str; 16] = [
    "raster",
    "raster_closed",
    "forced_land",
    "parishes",
    "parish_polygons",
    "ports",
    "census",
    "counties",
    "sound_toll",
    "trade_locations",
    "findings",
    "soil",
    "attributes",
    "fjord",
    "coast",
    "matches",
];

const KNOWN_KEYS: [&str; 40] = [
    "run.seed",
    "geo.alpha",
    "geo.km_per_map_unit",
    "geo.projection",
    "geo.divider",
    "geo.buffer_km",
    "market_access.theta",
    "market_access.theta_grid",
    "market_access.alpha_grid",
    "market_access.min_port_observations",
    "eventstudy.outcome",
    "eventstudy.transform",
    "eventstudy.treatment",
    "eventstudy.reference_year",
    "eventstudy.years",
    "eventstudy.bonferroni_m",
    "trade.first_year",
    "trade.last_year",
    "trade.post_from",
    "trade.exclusion_windows",
    "archaeology.kind",
    "archaeology.replicates",
    "archaeology.n_boot",
    "archaeology.prior_c",
    "archaeology.window",
    "archaeology.reference_year",
    "archaeology.dating_model",
    "archaeology.treatment",
    "archaeology.matched_sample",
    "matching.model",
    "matching.rounds",
    "matching.max_depth",
    "matching.learning_rate",
    "matching.subsample",
    "matching.lambda",
    "matching.include_limfjord_controls",
    "matching.min_prevalence",
    "multiverse.control_subgroups",
    "multiverse.outcome",
    "multiverse.transform",
];

/// Raw key/value pairs keyed `section.key`.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
            if section.is_empty() {
                return Err(Error::Config(format!("config line {}: key outside a [section]", i + 1)));
            }
            values.insert(format!("{section}.{}", k.trim()), v.trim().to_string());
        }
        Ok(RawConfig {
            values,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn empty(base_dir: &Path) -> Self {
        RawConfig {
            values: BTreeMap::new(),
            base_dir: base_dir.to_path_buf(),
        }
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not section.key=value")))?;
        if !k.contains('.') {
            return Err(Error::Config(format!("override key `{k}` needs a section")));
        }
        self.values.insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn check_keys(&self) -> Result<()> {
        for k in self.values.keys() {
            let known = KNOWN_KEYS.contains(&k.as_str())
                || k.strip_prefix("paths.").is_some_and(|p| PATH_KEYS.contains(&p));
            if !known {
                return Err(Error::Config(format!("unknown config key `{k}`")));
            }
        }
        Ok(())
    }

    /// SHA-256 over the sorted effective key/value pairs, first 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.values {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{s}`"))))
                .collect(),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => firstnature::io::parse_flag(v).ok_or_else(|| Error::Config(format!("{key}: not a boolean `{v}`"))),
        }
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.get(&format!("paths.{name}")).map(|v| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                self.base_dir.join(p)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchTreatmentKind {
    Dummy,
    MarketAccess,
}

#[derive(Debug, Clone)]
pub struct ArchSettings {
    pub kind: FindingKind,
    pub replicates: usize,
    pub n_boot: usize,
    pub prior_c: f64,
    pub window: i32,
    pub reference_year: i32,
    pub dating_model: DatingModel,
    pub treatment: ArchTreatmentKind,
    pub matched_sample: bool,
}

#[derive(Debug, Clone)]
pub struct MatchSettings {
    pub model: ScoreModel,
    pub boosting: BoostingParams,
    pub include_limfjord_controls: bool,
    pub min_prevalence: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub hash: String,
    pub seed: u64,
    paths: BTreeMap<String, PathBuf>,
    pub alpha: f64,
    pub km_per_map_unit: f64,
    pub projection: Projection,
    pub divider: [Point; 2],
    pub buffer_km: f64,
    pub theta: f64,
    pub theta_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub min_port_observations: usize,
    pub outcome: Outcome,
    pub transform: Transform,
    pub treatment: TreatmentKind,
    pub reference_year: i32,
    pub census_years: Vec<i32>,
    pub bonferroni_m: Option<usize>,
    pub trade: TradePanelConfig,
    pub arch: ArchSettings,
    pub matching: MatchSettings,
    pub control_subgroups: Vec<ControlSubgroup>,
    pub multiverse_outcome: Outcome,
    pub multiverse_transform: Transform,
}

impl RunConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        raw.check_keys()?;
        let seed: u64 = match raw.get("run.seed") {
            Some(v) => v.parse().map_err(|_| Error::Config(format!("run.seed: cannot parse `{v}`")))?,
            None => return Err(Error::Config("a seed is required (run.seed or --seed)".into())),
        };
        let mut paths = BTreeMap::new();
        for name in PATH_KEYS {
            if let Some(p) = raw.path(name) {
                if !p.exists() {
                    return Err(Error::Config(format!("paths.{name}: {} does not exist", p.display())));
                }
                paths.insert(name.to_string(), p);
            }
        }
        let projection = match raw.get("geo.projection").unwrap_or("geographic") {
            "planar" => Projection::Planar,
            "geographic" => Projection::Geographic,
            other => return Err(Error::Config(format!("geo.projection: unknown `{other}`"))),
        };
        let divider = match raw.get("geo.divider") {
            None => DEFAULT_DIVIDER,
            Some(_) => {
                let v: Vec<f64> = raw.list("geo.divider", vec![])?;
                if v.len() != 4 {
                    return Err(Error::Config("geo.divider needs x1,y1,x2,y2".into()));
                }
                [Point::new(v[0], v[1]), Point::new(v[2], v[3])]
            }
        };
        let transform: Transform = raw.parsed("eventstudy.transform", Transform::Log)?;
        let exclusions = raw.flag("trade.exclusion_windows", false)?;
        let mut trade = TradePanelConfig {
            first_year: raw.parsed("trade.first_year", 1750)?,
            last_year: raw.parsed("trade.last_year", 1855)?,
            post_from: raw.parsed("trade.post_from", 1834)?,
            ..Default::default()
        };
        if exclusions {
            trade = trade.with_default_exclusions();
        }
        let boosting = BoostingParams {
            rounds: raw.parsed("matching.rounds", 200)?,
            max_depth: raw.parsed("matching.max_depth", 3)?,
            learning_rate: raw.parsed("matching.learning_rate", 0.1)?,
            subsample: raw.parsed("matching.subsample", 1.0)?,
            lambda: raw.parsed("matching.lambda", 1.0)?,
            seed,
            ..Default::default()
        };
        let model = match raw.get("matching.model").unwrap_or("boosted") {
            "boosted" | "gbdt" => ScoreModel::Boosted,
            "logistic" => ScoreModel::Logistic,
            other => return Err(Error::Config(format!("matching.model: unknown `{other}`"))),
        };
        let arch_treatment = match raw.get("archaeology.treatment").unwrap_or("dummy") {
            "dummy" => ArchTreatmentKind::Dummy,
            "ma" | "market_access" => ArchTreatmentKind::MarketAccess,
            other => return Err(Error::Config(format!("archaeology.treatment: unknown `{other}`"))),
        };
        let cfg = RunConfig {
            hash: raw.hash(),
            seed,
            paths,
            alpha: raw.parsed("geo.alpha", DEFAULT_ALPHA)?,
            km_per_map_unit: raw.parsed("geo.km_per_map_unit", 1.0)?,
            projection,
            divider,
            buffer_km: raw.parsed("geo.buffer_km", DEFAULT_BUFFER_KM)?,
            theta: raw.parsed("market_access.theta", DEFAULT_THETA)?,
            theta_grid: raw.list("market_access.theta_grid", vec![-1.0, -2.0, -4.0, -8.0, -16.0])?,
            alpha_grid: raw.list("market_access.alpha_grid", vec![5.0, 10.0, 20.0, 50.0])?,
            min_port_observations: raw.parsed("market_access.min_port_observations", DEFAULT_MIN_PORT_OBSERVATIONS)?,
            outcome: raw.parsed("eventstudy.outcome", Outcome::Population)?,
            transform,
            treatment: raw.parsed("eventstudy.treatment", TreatmentKind::Dummy)?,
            reference_year: raw.parsed("eventstudy.reference_year", DEFAULT_REFERENCE_YEAR)?,
            census_years: raw.list("eventstudy.years", CENSUS_YEARS.to_vec())?,
            bonferroni_m: match raw.get("eventstudy.bonferroni_m") {
                None => None,
                Some(_) => Some(raw.parsed("eventstudy.bonferroni_m", 1usize)?),
            },
            trade,
            arch: ArchSettings {
                kind: raw.parsed("archaeology.kind", FindingKind::Coin)?,
                replicates: raw.parsed("archaeology.replicates", 1000)?,
                n_boot: raw.parsed("archaeology.n_boot", 200)?,
                prior_c: raw.parsed("archaeology.prior_c", 1.0)?,
                window: raw.parsed("archaeology.window", 25)?,
                reference_year: raw.parsed("archaeology.reference_year", ARCH_REFERENCE_YEAR)?,
                dating_model: raw.parsed("archaeology.dating_model", DatingModel::Uniform)?,
                treatment: arch_treatment,
                matched_sample: raw.flag("archaeology.matched_sample", true)?,
            },
            matching: MatchSettings {
                model,
                boosting,
                include_limfjord_controls: raw.flag("matching.include_limfjord_controls", false)?,
                min_prevalence: raw.parsed("matching.min_prevalence", firstnature::matching::MIN_SOIL_PREVALENCE)?,
            },
            control_subgroups: raw.list("multiverse.control_subgroups", ControlSubgroup::defaults())?,
            multiverse_outcome: raw.parsed("multiverse.outcome", Outcome::Population)?,
            multiverse_transform: raw.parsed("multiverse.transform", Transform::Log)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.theta_grid.is_empty() || self.alpha_grid.is_empty() || self.control_subgroups.is_empty() {
            return Err(Error::Config("multiverse grids must be nonempty".into()));
        }
        if !(self.alpha > 1.0) || self.alpha_grid.iter().any(|a| !(*a > 1.0)) {
            return Err(Error::Config("alpha must exceed 1".into()));
        }
        if !(self.theta < 0.0) || self.theta_grid.iter().any(|t| !(*t < 0.0)) {
            return Err(Error::Config("theta must be negative".into()));
        }
        if !self.census_years.contains(&self.reference_year) {
            return Err(Error::Config(format!("reference year {} is not a census year", self.reference_year)));
        }
        Ok(())
    }

    pub fn path(&self, name: &str) -> Option<&Path> {
        self.paths.get(name).map(PathBuf::as_path)
    }

    pub fn require(&self, name: &str) -> Result<&Path> {
        self.path(name)
            .ok_or_else(|| Error::Config(format!("paths.{name} is required for this command")))
    }

    /// Header written as the first line of every output file.
    pub fn header(&self) -> String {
        format!("config_hash={} seed={}", self.hash, self.seed)
    }
}
