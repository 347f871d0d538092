//! A small synthetic coastline with a closable western channel, used to
//! exercise the full pipeline against known parameters.
//!
//! Coordinates are planar kilometres. The land mass spans x ∈ [10, 150),
//! with open sea to the west and east. A fjord runs west from the eastern
//! sea along y ≈ 60 and is separated from the western sea by a short strip
//! of cells (the channel) that is land in the closed raster and water in the
//! open one. Parishes are square tiles; the baseline port set holds the
//! fjord and eastern ports, and the counterfactual set adds ports on the
//! western sea that are reached through the channel.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::Serialize;

use crate::archaeology::{write_findings, FindingKind, RawFinding};
use crate::error::{Error, Result};
use crate::estimators::CENSUS_YEARS;
use crate::geo::{distance_to_polylines, write_geojson, AsciiGrid, Feature, Geometry, Point, Polygon};
use crate::market_access::{
    write_parishes, write_ports, ParishSite, Port, Projection, Region, RegionClassifier,
};
use crate::matching::{write_soil, SoilFeatureRow, SoilTable};
use crate::paneldata::{
    write_attributes, write_census, write_counties, write_sound_toll, write_trade_locations, CensusRecord,
    ParishAttributes, Sex, SoundTollRecord, TradeLocation,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthParams {
    pub seed: u64,
    pub cell_km: f64,
    pub width_km: f64,
    pub height_km: f64,
    /// x where the western sea ends and land begins.
    pub west_sea_km: f64,
    /// x where the eastern sea begins.
    pub east_sea_km: f64,
    /// Fjord water band [fjord_y_min, fjord_y_max).
    pub fjord_y_min: f64,
    pub fjord_y_max: f64,
    /// Channel strip x ∈ [west_sea_km, channel_end_km) inside the fjord band.
    pub channel_end_km: f64,
    pub divider_x_km: f64,
    pub buffer_km: f64,
    pub tile_km: f64,
    pub base_population: f64,
    pub population_noise: f64,
    /// True event-study coefficients on log population for west parishes.
    pub population_effects: BTreeMap<i32, f64>,
    pub trade_first_year: i32,
    pub trade_last_year: i32,
    pub trade_post_from: i32,
    pub trade_base: f64,
    pub trade_post_common: f64,
    pub trade_post_west: f64,
    pub trade_post_middle: f64,
    pub trade_post_east: f64,
    /// Drop in the per-bin finding probability of west parishes.
    pub arch_decline: f64,
    pub arch_decline_after: i32,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 42,
            cell_km: 2.0,
            width_km: 160.0,
            height_km: 100.0,
            west_sea_km: 10.0,
            east_sea_km: 150.0,
            fjord_y_min: 56.0,
            fjord_y_max: 64.0,
            channel_end_km: 14.0,
            divider_x_km: 80.0,
            buffer_km: 20.0,
            tile_km: 10.0,
            base_population: 120.0,
            population_noise: 0.05,
            population_effects: default_population_effects(),
            trade_first_year: 1750,
            trade_last_year: 1855,
            trade_post_from: 1834,
            trade_base: 1.5,
            trade_post_common: 0.2,
            trade_post_west: 1.5,
            trade_post_middle: 1.0,
            trade_post_east: 0.3,
            arch_decline: 0.01,
            arch_decline_after: 1200,
        }
    }
}

/// Zero before the opening, rising to 0.25 in 1901.
pub fn default_population_effects() -> BTreeMap<i32, f64> {
    CENSUS_YEARS
        .iter()
        .zip([0.0, 0.0, 0.0, 0.05, 0.1, 0.12, 0.15, 0.2, 0.25])
        .map(|(y, b)| (*y, b))
        .collect()
}

impl SynthParams {
    pub fn with_seed(seed: u64) -> Self {
        SynthParams {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic world: {m}")));
        if !(self.cell_km > 0.0 && self.tile_km > 0.0 && self.base_population >= 1.0) {
            return bad("cell size, tile size and base population must be positive");
        }
        if !(0.0 < self.west_sea_km
            && self.west_sea_km < self.channel_end_km
            && self.channel_end_km < self.east_sea_km
            && self.east_sea_km < self.width_km)
        {
            return bad("channel strip must lie inside the raster between the two seas");
        }
        if !(0.0 < self.fjord_y_min && self.fjord_y_min < self.fjord_y_max && self.fjord_y_max < self.height_km) {
            return bad("fjord band must lie inside the raster");
        }
        if (self.channel_end_km - self.west_sea_km) < self.cell_km || (self.fjord_y_max - self.fjord_y_min) < self.cell_km {
            return bad("channel and fjord must be at least one cell wide");
        }
        if !(self.west_sea_km < self.divider_x_km && self.divider_x_km < self.east_sea_km) {
            return bad("divider must cross the land mass");
        }
        if !(0.0..=1.0).contains(&self.arch_decline) || self.trade_first_year > self.trade_last_year {
            return bad("arch decline must be a probability and the trade years ordered");
        }
        Ok(())
    }

    fn ncols(&self) -> usize {
        (self.width_km / self.cell_km).round() as usize
    }

    fn nrows(&self) -> usize {
        (self.height_km / self.cell_km).round() as usize
    }

    fn fjord_y(&self) -> f64 {
        (self.fjord_y_min + self.fjord_y_max) / 2.0
    }

    fn in_fjord_band(&self, y: f64) -> bool {
        y >= self.fjord_y_min && y < self.fjord_y_max
    }

    /// 0 = water, 1 = land at a cell centre.
    fn cell_value(&self, x: f64, y: f64, channel_open: bool) -> f64 {
        let water = x < self.west_sea_km
            || x >= self.east_sea_km
            || (self.in_fjord_band(y) && x >= self.channel_end_km)
            || (channel_open && self.in_fjord_band(y) && x >= self.west_sea_km);
        if water {
            0.0
        } else {
            1.0
        }
    }

    pub fn raster(&self, channel_open: bool) -> AsciiGrid {
        let (nc, nr) = (self.ncols(), self.nrows());
        let mut values = Vec::with_capacity(nc * nr);
        for row in 0..nr {
            let y = self.height_km - (row as f64 + 0.5) * self.cell_km;
            for col in 0..nc {
                let x = (col as f64 + 0.5) * self.cell_km;
                values.push(self.cell_value(x, y, channel_open));
            }
        }
        AsciiGrid {
            ncols: nc,
            nrows: nr,
            xllcorner: 0.0,
            yllcorner: 0.0,
            cellsize: self.cell_km,
            nodata: None,
            values,
        }
    }

    pub fn fjord_lines(&self) -> Vec<Vec<Point>> {
        let y = self.fjord_y();
        vec![vec![Point::new(self.channel_end_km, y), Point::new(self.east_sea_km, y)]]
    }

    /// Western and eastern shores plus the southern and northern edges.
    pub fn coast_lines(&self) -> Vec<Vec<Point>> {
        let (w, e, h) = (self.west_sea_km, self.east_sea_km, self.height_km);
        vec![
            vec![Point::new(w, 0.0), Point::new(w, h)],
            vec![Point::new(e, 0.0), Point::new(e, h)],
            vec![Point::new(w, 0.0), Point::new(e, 0.0)],
            vec![Point::new(w, h), Point::new(e, h)],
        ]
    }

    pub fn divider(&self) -> [Point; 2] {
        [Point::new(self.divider_x_km, 0.0), Point::new(self.divider_x_km, self.height_km)]
    }

    pub fn classifier(&self) -> Result<RegionClassifier> {
        RegionClassifier::new(self.fjord_lines(), self.coast_lines(), self.divider(), self.buffer_km, Projection::Planar)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub population_effects: BTreeMap<i32, f64>,
    pub trade_post_common: f64,
    pub trade_post_west: f64,
    pub trade_post_middle: f64,
    pub trade_post_east: f64,
    pub arch_decline: f64,
    pub arch_decline_after: i32,
    pub n_parishes: usize,
    pub n_west: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub params: SynthParams,
    pub raster_open: AsciiGrid,
    pub raster_closed: AsciiGrid,
    pub parishes: Vec<ParishSite>,
    pub parish_polygons: Vec<(String, Polygon)>,
    pub ports: Vec<Port>,
    pub trade_locations: HashMap<String, TradeLocation>,
    pub census: Vec<CensusRecord>,
    pub counties: HashMap<String, String>,
    pub sound_toll: Vec<SoundTollRecord>,
    pub findings: Vec<RawFinding>,
    pub soil: SoilTable,
    pub attributes: Vec<ParishAttributes>,
    pub truth: GroundTruth,
}

/// File locations written by [`SyntheticWorld::write`].
#[derive(Debug, Clone)]
pub struct WorldPaths {
    pub raster: PathBuf,
    pub raster_closed: PathBuf,
    pub parishes: PathBuf,
    pub parish_polygons: PathBuf,
    pub ports: PathBuf,
    pub census: PathBuf,
    pub counties: PathBuf,
    pub sound_toll: PathBuf,
    pub trade_locations: PathBuf,
    pub findings: PathBuf,
    pub soil: PathBuf,
    pub attributes: PathBuf,
    pub fjord: PathBuf,
    pub coast: PathBuf,
    pub truth: PathBuf,
}

impl WorldPaths {
    pub fn in_dir(dir: &Path) -> Self {
        WorldPaths {
            raster: dir.join("raster.asc"),
            raster_closed: dir.join("raster_closed.asc"),
            parishes: dir.join("parishes.csv"),
            parish_polygons: dir.join("parishes.geojson"),
            ports: dir.join("ports.csv"),
            census: dir.join("census.csv"),
            counties: dir.join("counties.csv"),
            sound_toll: dir.join("sound_toll.csv"),
            trade_locations: dir.join("trade_locations.csv"),
            findings: dir.join("findings.csv"),
            soil: dir.join("soil.csv"),
            attributes: dir.join("parish_attributes.csv"),
            fjord: dir.join("fjord.geojson"),
            coast: dir.join("coast.geojson"),
            truth: dir.join("truth.json"),
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const SOIL_TYPES: [&str; 6] = ["clay", "sand", "moraine", "peat", "marsh", "heath_rare"];

pub fn generate_synthetic_world(params: &SynthParams) -> Result<SyntheticWorld> {
    params.validate()?;
    let p = params;
    let classifier = p.classifier()?;

    // parishes as square tiles over the land mass
    let mut parishes = Vec::new();
    let mut parish_polygons = Vec::new();
    let mut counties = HashMap::new();
    let n_tx = ((p.east_sea_km - p.west_sea_km) / p.tile_km).floor() as usize;
    let n_ty = (p.height_km / p.tile_km).floor() as usize;
    for ty in 0..n_ty {
        for tx in 0..n_tx {
            let x0 = p.west_sea_km + tx as f64 * p.tile_km;
            let y0 = ty as f64 * p.tile_km;
            let c = Point::new(x0 + p.tile_km / 2.0, y0 + p.tile_km / 2.0);
            if p.cell_value(c.x, c.y, false) == 0.0 {
                continue;
            }
            let id = format!("P{tx:02}{ty:02}");
            parish_polygons.push((id.clone(), Polygon::rect(Point::new(x0, y0), Point::new(x0 + p.tile_km, y0 + p.tile_km))));
            counties.insert(id.clone(), format!("C{}", (c.x / 40.0).floor() as i32));
            parishes.push(ParishSite {
                id,
                centroid: c,
                region: Some(classifier.classify(c)),
            });
        }
    }
    let west: Vec<bool> = parishes.iter().map(|s| s.region == Some(Region::West)).collect();
    let n_west = west.iter().filter(|w| **w).count();

    // ports: fjord ports and eastern sea ports in both sets, western sea
    // ports only in the counterfactual set
    let fy = p.fjord_y();
    let span = p.east_sea_km - p.channel_end_km;
    let mut ports = Vec::new();
    let mut trade_locations = HashMap::new();
    for (i, frac) in [0.08, 0.22, 0.44, 0.52, 0.73, 0.88].iter().enumerate() {
        let x = p.channel_end_km + frac * span;
        let id = format!("F{}", i + 1);
        let d = x - p.divider_x_km;
        let loc = if d.abs() <= p.buffer_km {
            TradeLocation::Middle
        } else if d < 0.0 {
            TradeLocation::West
        } else {
            TradeLocation::East
        };
        trade_locations.insert(id.clone(), loc);
        ports.push(Port {
            id,
            location: Point::new(x, fy),
            in_baseline: true,
            in_counterfactual: true,
        });
    }
    let sea_east = (p.east_sea_km + p.width_km) / 2.0;
    let sea_west = p.west_sea_km / 2.0;
    for (id, x, y, base) in [
        ("E1", sea_east, p.height_km * 0.2, true),
        ("E2", sea_east, p.height_km * 0.8, true),
        ("W1", sea_west, fy, false),
        ("W2", p.west_sea_km * 0.25, fy + 2.0, false),
    ] {
        trade_locations.insert(id.to_string(), TradeLocation::Other);
        ports.push(Port {
            id: id.to_string(),
            location: Point::new(x, y),
            in_baseline: base,
            in_counterfactual: true,
        });
    }

    let coast = p.coast_lines();
    let fjord = p.fjord_lines();
    let capital = parishes
        .iter()
        .max_by(|a, b| (a.centroid.x - a.centroid.y).total_cmp(&(b.centroid.x - b.centroid.y)))
        .map(|s| s.id.clone());
    let attributes: Vec<ParishAttributes> = parishes
        .iter()
        .map(|s| ParishAttributes {
            parish_id: s.id.clone(),
            coast_km: distance_to_polylines(s.centroid, &coast),
            fjord_km: distance_to_polylines(s.centroid, &fjord),
            market_town_km: ports.iter().map(|h| s.centroid.distance(h.location)).fold(f64::INFINITY, f64::min),
            capital: capital.as_deref() == Some(s.id.as_str()),
        })
        .collect();

    let census = simulate_census(p, &parishes, &west, &counties)?;
    let sound_toll = simulate_trade(p, &ports, &trade_locations)?;
    let findings = simulate_findings(p, &parish_polygons, &west)?;
    let soil = simulate_soil(p, &parishes, &west)?;

    Ok(SyntheticWorld {
        params: p.clone(),
        raster_open: p.raster(true),
        raster_closed: p.raster(false),
        truth: GroundTruth {
            seed: p.seed,
            population_effects: p.population_effects.clone(),
            trade_post_common: p.trade_post_common,
            trade_post_west: p.trade_post_west,
            trade_post_middle: p.trade_post_middle,
            trade_post_east: p.trade_post_east,
            arch_decline: p.arch_decline,
            arch_decline_after: p.arch_decline_after,
            n_parishes: parishes.len(),
            n_west,
        },
        parishes,
        parish_polygons,
        ports,
        trade_locations,
        census,
        counties,
        sound_toll,
        findings,
        soil,
        attributes,
    })
}

fn normal(mean: f64, sd: f64) -> Result<Normal<f64>> {
    Normal::new(mean, sd).map_err(|e| Error::Config(format!("normal({mean}, {sd}): {e}")))
}

fn simulate_census(
    p: &SynthParams,
    parishes: &[ParishSite],
    west: &[bool],
    counties: &HashMap<String, String>,
) -> Result<Vec<CensusRecord>> {
    let mut rng = stream(p.seed, 1);
    let fe = normal(0.0, 0.3)?;
    let noise = normal(0.0, p.population_noise.max(0.0))?;
    let mut county_names: Vec<&String> = counties.values().collect();
    county_names.sort();
    county_names.dedup();
    let mut out = Vec::new();
    for (i, site) in parishes.iter().enumerate() {
        let a_i = fe.sample(&mut rng);
        let own = &counties[&site.id];
        for &year in &CENSUS_YEARS {
            let gamma = 0.004 * (year - CENSUS_YEARS[0]) as f64;
            let beta = if west[i] {
                p.population_effects.get(&year).copied().unwrap_or(0.0)
            } else {
                0.0
            };
            let eps = if p.population_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let n = (p.base_population * (a_i + gamma + beta + eps).exp()).round().max(1.0) as usize;
            let treated_post = west[i] && year >= 1834;
            for k in 0..n {
                let age: u32 = rng.gen_range(0..=80);
                let sex = if rng.gen_bool(0.5) { Sex::Female } else { Sex::Male };
                let birth_county = if rng.gen_bool(0.85) || county_names.len() < 2 {
                    own.clone()
                } else {
                    county_names[rng.gen_range(0..county_names.len())].clone()
                };
                let hisco = if age >= 15 && rng.gen_bool(0.7) {
                    let u: f64 = rng.gen();
                    let prod_share = if treated_post { 0.3 } else { 0.2 };
                    let first = if u < 0.5 {
                        6
                    } else if u < 0.5 + prod_share {
                        rng.gen_range(7..=9)
                    } else {
                        rng.gen_range(0..=5)
                    };
                    Some(format!("{first}{:04}", rng.gen_range(0..10000)))
                } else {
                    None
                };
                out.push(CensusRecord {
                    person_id: format!("{}-{year}-{k}", site.id),
                    parish_id: site.id.clone(),
                    year,
                    age,
                    sex,
                    birth_county: Some(birth_county),
                    hisco,
                });
            }
        }
    }
    Ok(out)
}

fn simulate_trade(p: &SynthParams, ports: &[Port], locations: &HashMap<String, TradeLocation>) -> Result<Vec<SoundTollRecord>> {
    let mut rng = stream(p.seed, 2);
    let fe = normal(0.0, 0.3)?;
    let mut out = Vec::new();
    for port in ports {
        let mu = p.trade_base + fe.sample(&mut rng);
        let delta = match locations[&port.id] {
            TradeLocation::West => p.trade_post_west,
            TradeLocation::Middle => p.trade_post_middle,
            TradeLocation::East => p.trade_post_east,
            TradeLocation::Other => 0.0,
        };
        for year in p.trade_first_year..=p.trade_last_year {
            let post = if year >= p.trade_post_from { 1.0 } else { 0.0 };
            let lambda = (mu + post * (p.trade_post_common + delta)).exp();
            let n = Poisson::new(lambda)
                .map_err(|e| Error::Config(format!("poisson({lambda}): {e}")))?
                .sample(&mut rng);
            if n > 0.0 {
                out.push(SoundTollRecord {
                    port_id: port.id.clone(),
                    year,
                    passages: n,
                });
            }
        }
    }
    Ok(out)
}

/// For every parish, grid year and finding kind, a finding exists with
/// probability a_i + γ_g, minus the decline for west parishes after the
/// cutoff. Each finding is dated within its own grid window, so the
/// activity panel recovers the Bernoulli draws exactly.
fn simulate_findings(p: &SynthParams, polygons: &[(String, Polygon)], west: &[bool]) -> Result<Vec<RawFinding>> {
    let mut rng = stream(p.seed, 3);
    let grid = crate::archaeology::default_year_grid();
    let (start, end) = (crate::archaeology::PERIOD_START, crate::archaeology::PERIOD_END);
    let mut out = Vec::new();
    for (i, (id, poly)) in polygons.iter().enumerate() {
        let a_i: f64 = rng.gen_range(0.15..0.45);
        let (lo, hi) = poly.bbox();
        for &g in &grid {
            let gamma = 0.1 * (g - start) as f64 / (end - start) as f64;
            let decline = if west[i] && g > p.arch_decline_after { p.arch_decline } else { 0.0 };
            let pi = (a_i + gamma - decline).clamp(0.0, 1.0);
            for kind in [FindingKind::Coin, FindingKind::Building] {
                if !rng.gen_bool(pi) {
                    continue;
                }
                let wlo = (g - 25).max(start);
                let whi = (g + 24).min(end);
                let y_min = rng.gen_range(wlo..=whi);
                let y_max = rng.gen_range(y_min..=(y_min + 29).min(whi));
                out.push(RawFinding {
                    finding_id: format!("{id}-{g}-{kind}"),
                    lon: rng.gen_range(lo.x + 0.01..hi.x - 0.01),
                    lat: rng.gen_range(lo.y + 0.01..hi.y - 0.01),
                    kind,
                    year_min: y_min,
                    year_max: y_max,
                });
            }
        }
    }
    // a few strays in the western sea, outside every parish
    for k in 0..3 {
        out.push(RawFinding {
            finding_id: format!("sea-{k}"),
            lon: p.west_sea_km / 4.0,
            lat: 10.0 + 10.0 * k as f64,
            kind: FindingKind::Coin,
            year_min: 1000,
            year_max: 1020,
        });
    }
    Ok(out)
}

fn simulate_soil(p: &SynthParams, parishes: &[ParishSite], west: &[bool]) -> Result<SoilTable> {
    let mut rng = stream(p.seed, 4);
    let gamma = Gamma::new(2.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut rows = Vec::with_capacity(parishes.len());
    for (i, site) in parishes.iter().enumerate() {
        let mut w: Vec<f64> = (0..SOIL_TYPES.len()).map(|_| gamma.sample(&mut rng)).collect();
        if west[i] {
            w[0] *= 2.5;
            w[1] *= 0.4;
        }
        // the rare type shows up in roughly 5% of parishes
        if !rng.gen_bool(0.05) {
            w[5] = 0.0;
        }
        let total: f64 = w.iter().sum();
        let land = rng.gen_range(0.9..1.0);
        rows.push(SoilFeatureRow {
            parish_id: site.id.clone(),
            soil_shares: w.iter().map(|v| land * v / total).collect(),
            treated: west[i],
        });
    }
    SoilTable::new(SOIL_TYPES.iter().map(|s| s.to_string()).collect(), rows)
}

impl SyntheticWorld {
    pub fn regions(&self) -> HashMap<String, Region> {
        self.parishes
            .iter()
            .filter_map(|s| s.region.map(|r| (s.id.clone(), r)))
            .collect()
    }

    pub fn write(&self, dir: &Path, comment: Option<&str>) -> Result<WorldPaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = WorldPaths::in_dir(dir);
        self.raster_open.write(&paths.raster)?;
        self.raster_closed.write(&paths.raster_closed)?;
        write_parishes(&paths.parishes, comment, &self.parishes)?;
        let features: Vec<Feature> = self
            .parish_polygons
            .iter()
            .map(|(id, poly)| Feature {
                id: Some(id.clone()),
                properties: Default::default(),
                geometry: Geometry::Polygons(vec![poly.clone()]),
            })
            .collect();
        write_geojson(&paths.parish_polygons, &features)?;
        let lines = |l: Vec<Vec<Point>>| {
            vec![Feature {
                id: None,
                properties: Default::default(),
                geometry: Geometry::Lines(l),
            }]
        };
        write_geojson(&paths.fjord, &lines(self.params.fjord_lines()))?;
        write_geojson(&paths.coast, &lines(self.params.coast_lines()))?;
        write_ports(&paths.ports, comment, &self.ports)?;
        write_census(&paths.census, comment, &self.census)?;
        write_counties(&paths.counties, comment, &self.counties)?;
        write_sound_toll(&paths.sound_toll, comment, &self.sound_toll)?;
        write_trade_locations(&paths.trade_locations, comment, &self.trade_locations)?;
        write_findings(&paths.findings, comment, &self.findings)?;
        write_soil(&paths.soil, comment, &self.soil)?;
        write_attributes(&paths.attributes, comment, &self.attributes)?;
        let truth = serde_json::to_string_pretty(&self.truth)?;
        std::fs::write(&paths.truth, truth).map_err(|e| Error::io(&paths.truth, e))?;
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_channel_rejected() {
        let p = SynthParams {
            channel_end_km: 200.0,
            ..Default::default()
        };
        assert!(generate_synthetic_world(&p).is_err());
    }

    #[test]
    fn raster_has_channel() {
        let p = SynthParams::default();
        let open = p.raster(true);
        let closed = p.raster(false);
        let diff = open.values.iter().zip(&closed.values).filter(|(a, b)| a != b).count();
        let expected = ((p.channel_end_km - p.west_sea_km) / p.cell_km) * ((p.fjord_y_max - p.fjord_y_min) / p.cell_km);
        assert_eq!(diff, expected as usize);
    }

    #[test]
    fn regions_are_populated() {
        let p = SynthParams {
            base_population: 5.0,
            ..Default::default()
        };
        let w = generate_synthetic_world(&p).unwrap();
        let regions = w.regions();
        for r in [Region::West, Region::Middle, Region::East, Region::Reference] {
            assert!(regions.values().filter(|v| **v == r).count() >= 10, "{r:?}");
        }
        assert_eq!(w.truth.n_parishes, w.parishes.len());
        assert!(w.attributes.iter().filter(|a| a.capital).count() == 1);
    }
}
