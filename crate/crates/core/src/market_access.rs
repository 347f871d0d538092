//! Port-based market access and its change when new ports become usable.
//!
//! `MA_p = Σ_h (CostDist(p, h) + 1)^θ` over a port set. Cost distances are in
//! water-kilometres, so the `+1` offset is one kilometre of sea travel.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{cost_distance, distance_to_polylines, CellCoord, CostSurface, Point};
use crate::io;

/// Offset added to every cost distance before raising it to θ.
pub const DISTANCE_OFFSET_KM: f64 = 1.0;
pub const DEFAULT_THETA: f64 = -1.0;
pub const DEFAULT_ALPHA: f64 = 10.0;
pub const THETA_GRID: [f64; 5] = [-1.0, -2.0, -4.0, -8.0, -16.0];
pub const ALPHA_GRID: [f64; 4] = [5.0, 10.0, 20.0, 50.0];
/// Minimum number of register observations for a port to count.
pub const DEFAULT_MIN_PORT_OBSERVATIONS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub id: String,
    pub location: Point,
    pub in_baseline: bool,
    pub in_counterfactual: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    West,
    Middle,
    East,
    Reference,
}

impl Region {
    pub fn is_limfjord(self) -> bool {
        !matches!(self, Region::Reference)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::West => "west",
            Region::Middle => "middle",
            Region::East => "east",
            Region::Reference => "reference",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "west" => Ok(Region::West),
            "middle" => Ok(Region::Middle),
            "east" => Ok(Region::East),
            "reference" | "other" | "none" => Ok(Region::Reference),
            other => Err(Error::InvalidInput(format!("unknown region `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParishSite {
    pub id: String,
    pub centroid: Point,
    pub region: Option<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketAccessRecord {
    pub parish_id: String,
    pub ma_before: f64,
    pub ma_after: f64,
    pub delta_log_ma: f64,
    pub theta: f64,
    pub alpha: f64,
}

/// Ports split into the baseline set H and the counterfactual set H* ⊋ H.
#[derive(Debug, Clone)]
pub struct PortRegistry {
    ports: Vec<Port>,
}

impl PortRegistry {
    pub fn new(ports: Vec<Port>) -> Result<Self> {
        if let Some(p) = ports.iter().find(|p| p.in_baseline && !p.in_counterfactual) {
            return Err(Error::InvalidInput(format!(
                "port {} is in the baseline set but not the counterfactual set",
                p.id
            )));
        }
        if !ports.iter().any(|p| p.in_baseline) {
            return Err(Error::InvalidInput("baseline port set is empty".into()));
        }
        Ok(PortRegistry { ports })
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    pub fn baseline(&self) -> Vec<&Port> {
        self.ports.iter().filter(|p| p.in_baseline).collect()
    }

    pub fn counterfactual(&self) -> Vec<&Port> {
        self.ports.iter().filter(|p| p.in_counterfactual).collect()
    }

    /// True when H* adds at least one port to H.
    pub fn is_strict_extension(&self) -> bool {
        self.ports.iter().any(|p| p.in_counterfactual && !p.in_baseline)
    }
}

/// Keeps ports with at least `min_count` register observations.
pub fn eligible_ports(ports: Vec<Port>, observations: &HashMap<String, usize>, min_count: usize) -> Vec<Port> {
    ports
        .into_iter()
        .filter(|p| observations.get(&p.id).copied().unwrap_or(0) >= min_count)
        .collect()
}

/// Σ (d + 1)^θ over reachable distances; `None` entries contribute nothing.
pub fn market_access_from_distances(distances: &[Option<f64>], theta: f64) -> f64 {
    distances
        .iter()
        .flatten()
        .map(|d| (d + DISTANCE_OFFSET_KM).powf(theta))
        .sum()
}

fn check_theta(theta: f64) -> Result<()> {
    if theta < 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("theta must be negative, got {theta}")))
    }
}

fn port_cells(surface: &CostSurface, ports: &[&Port]) -> Result<Vec<Option<CellCoord>>> {
    ports
        .iter()
        .map(|p| {
            let cell = surface.snap_port(p.location)?;
            if cell.is_none() {
                warn!("port {} has no navigable cell nearby; treated as unreachable", p.id);
            }
            Ok(cell)
        })
        .collect()
}

fn parish_port_distances(surface: &CostSurface, parish: &ParishSite, cells: &[Option<CellCoord>]) -> Result<Vec<Option<f64>>> {
    let origin = surface.snap(parish.centroid)?;
    let field = cost_distance(surface, origin)?;
    Ok(cells.iter().map(|c| c.and_then(|c| field.get(c))).collect())
}

/// Market access of one parish over `ports`. Returns 0.0 when no port is
/// reachable.
pub fn market_access(parish: &ParishSite, ports: &[&Port], theta: f64, surface: &CostSurface) -> Result<f64> {
    check_theta(theta)?;
    if ports.is_empty() {
        return Err(Error::InvalidInput("empty port set".into()));
    }
    let cells = port_cells(surface, ports)?;
    let d = parish_port_distances(surface, parish, &cells)?;
    let ma = market_access_from_distances(&d, theta);
    if ma == 0.0 {
        warn!("parish {} cannot reach any port", parish.id);
    }
    Ok(ma)
}

/// Market access before (H) and after (H*) plus the log change.
pub fn delta_log_ma(parish: &ParishSite, registry: &PortRegistry, theta: f64, surface: &CostSurface) -> Result<MarketAccessRecord> {
    check_theta(theta)?;
    let all: Vec<&Port> = registry.ports().iter().collect();
    let cells = port_cells(surface, &all)?;
    let d = parish_port_distances(surface, parish, &cells)?;
    record_from_distances(parish, registry, &d, theta, surface.alpha())
}

fn record_from_distances(
    parish: &ParishSite,
    registry: &PortRegistry,
    distances: &[Option<f64>],
    theta: f64,
    alpha: f64,
) -> Result<MarketAccessRecord> {
    let pick = |keep: fn(&Port) -> bool| -> Vec<Option<f64>> {
        registry
            .ports()
            .iter()
            .zip(distances)
            .filter(|(p, _)| keep(p))
            .map(|(_, d)| *d)
            .collect()
    };
    let before = market_access_from_distances(&pick(|p| p.in_baseline), theta);
    let after = market_access_from_distances(&pick(|p| p.in_counterfactual), theta);
    if before == 0.0 {
        return Err(Error::InvalidInput(format!(
            "parish {} cannot reach any baseline port; log market access undefined",
            parish.id
        )));
    }
    Ok(MarketAccessRecord {
        parish_id: parish.id.clone(),
        ma_before: before,
        ma_after: after,
        delta_log_ma: after.ln() - before.ln(),
        theta,
        alpha,
    })
}

/// Outcome of a batch computation: kept records plus excluded parish ids.
#[derive(Debug, Clone, Default)]
pub struct MarketAccessTable {
    pub records: Vec<MarketAccessRecord>,
    pub excluded: Vec<String>,
}

impl MarketAccessTable {
    pub fn by_parish(&self) -> HashMap<String, f64> {
        self.records
            .iter()
            .map(|r| (r.parish_id.clone(), r.delta_log_ma))
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        io::write_rows(path, comment, &self.records)
    }
}

/// All parishes at once: one Dijkstra run per port (fields are symmetric),
/// parallel over ports. Parishes with zero baseline access are excluded.
pub fn compute_market_access(
    parishes: &[ParishSite],
    registry: &PortRegistry,
    theta: f64,
    surface: &CostSurface,
) -> Result<MarketAccessTable> {
    check_theta(theta)?;
    let ports: Vec<&Port> = registry.ports().iter().collect();
    let cells = port_cells(surface, &ports)?;
    let fields = cells
        .par_iter()
        .map(|c| c.map(|c| cost_distance(surface, c)).transpose())
        .collect::<Result<Vec<_>>>()?;
    let parish_cells = parishes
        .iter()
        .map(|p| surface.snap(p.centroid))
        .collect::<Result<Vec<_>>>()?;

    let mut table = MarketAccessTable::default();
    for (parish, cell) in parishes.iter().zip(parish_cells) {
        let d: Vec<Option<f64>> = fields
            .iter()
            .map(|f| f.as_ref().and_then(|f| f.get(cell)))
            .collect();
        match record_from_distances(parish, registry, &d, theta, surface.alpha()) {
            Ok(r) => table.records.push(r),
            Err(e) => {
                warn!("{e}; parish excluded");
                table.excluded.push(parish.id.clone());
            }
        }
    }
    Ok(table)
}

/// How lon/lat-like inputs are turned into kilometres for region geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Coordinates are already planar kilometres.
    Planar,
    /// Longitude/latitude degrees, projected equirectangularly about the
    /// divider's mean latitude.
    Geographic,
}

const KM_PER_DEG_LAT: f64 = 110.574;
const KM_PER_DEG_LON_EQUATOR: f64 = 111.320;

/// Default west/east divider through Løgstør as (lon, lat).
pub const DEFAULT_DIVIDER: [Point; 2] = [Point::new(9.186837, 57.044185), Point::new(9.275585, 56.958951)];
pub const DEFAULT_BUFFER_KM: f64 = 20.0;

/// Splits fjord parishes into west / middle / east around a divider line.
#[derive(Debug, Clone)]
pub struct RegionClassifier {
    fjord: Vec<Vec<Point>>,
    coast: Vec<Vec<Point>>,
    divider: [Point; 2],
    buffer_km: f64,
    projection: Projection,
    ref_lat: f64,
}

impl RegionClassifier {
    pub fn new(
        fjord: Vec<Vec<Point>>,
        coast: Vec<Vec<Point>>,
        divider: [Point; 2],
        buffer_km: f64,
        projection: Projection,
    ) -> Result<Self> {
        if divider[0] == divider[1] {
            return Err(Error::InvalidInput("divider endpoints coincide".into()));
        }
        if !(buffer_km >= 0.0) {
            return Err(Error::InvalidInput(format!("buffer must be nonnegative, got {buffer_km}")));
        }
        let ref_lat = (divider[0].y + divider[1].y) / 2.0;
        let c = RegionClassifier {
            fjord,
            coast,
            divider,
            buffer_km,
            projection,
            ref_lat,
        };
        let (a, b) = (c.project(divider[0]), c.project(divider[1]));
        if a.y == b.y {
            return Err(Error::InvalidInput("divider runs due east-west; west side undefined".into()));
        }
        Ok(c)
    }

    fn project(&self, p: Point) -> Point {
        match self.projection {
            Projection::Planar => p,
            Projection::Geographic => Point::new(
                p.x * KM_PER_DEG_LON_EQUATOR * self.ref_lat.to_radians().cos(),
                p.y * KM_PER_DEG_LAT,
            ),
        }
    }

    fn project_lines(&self, lines: &[Vec<Point>]) -> Vec<Vec<Point>> {
        lines
            .iter()
            .map(|l| l.iter().map(|p| self.project(*p)).collect())
            .collect()
    }

    /// Fjord parish iff strictly nearer the fjord than the open coast.
    pub fn is_fjord_parish(&self, centroid: Point) -> bool {
        let p = self.project(centroid);
        distance_to_polylines(p, &self.project_lines(&self.fjord)) < distance_to_polylines(p, &self.project_lines(&self.coast))
    }

    /// Perpendicular distance (km) to the infinite divider line, signed
    /// negative on the west side.
    pub fn signed_divider_distance(&self, centroid: Point) -> f64 {
        let (a, b, p) = (self.project(self.divider[0]), self.project(self.divider[1]), self.project(centroid));
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let cross = dx * (p.y - a.y) - dy * (p.x - a.x);
        let dist = cross.abs() / dx.hypot(dy);
        // a point due west of `a` has cross == dy
        if cross != 0.0 && cross.signum() == dy.signum() {
            -dist
        } else {
            dist
        }
    }

    pub fn classify(&self, centroid: Point) -> Region {
        if !self.is_fjord_parish(centroid) {
            return Region::Reference;
        }
        let s = self.signed_divider_distance(centroid);
        if s.abs() <= self.buffer_km {
            Region::Middle
        } else if s < 0.0 {
            Region::West
        } else {
            Region::East
        }
    }
}

#[derive(Debug, Deserialize)]
struct PortRow {
    id: String,
    lon: f64,
    lat: f64,
    #[serde(deserialize_with = "io::de_flag")]
    in_baseline: bool,
    #[serde(deserialize_with = "io::de_flag")]
    in_counterfactual: bool,
}

pub fn read_ports(path: impl AsRef<Path>) -> Result<Vec<Port>> {
    Ok(io::read_rows::<PortRow>(path)?
        .into_iter()
        .map(|r| Port {
            id: r.id,
            location: Point::new(r.lon, r.lat),
            in_baseline: r.in_baseline,
            in_counterfactual: r.in_counterfactual,
        })
        .collect())
}

#[derive(Debug, Serialize)]
struct PortOut<'a> {
    id: &'a str,
    lon: f64,
    lat: f64,
    in_baseline: u8,
    in_counterfactual: u8,
}

pub fn write_ports(path: impl AsRef<Path>, comment: Option<&str>, ports: &[Port]) -> Result<()> {
    let rows: Vec<PortOut> = ports
        .iter()
        .map(|p| PortOut {
            id: &p.id,
            lon: p.location.x,
            lat: p.location.y,
            in_baseline: p.in_baseline as u8,
            in_counterfactual: p.in_counterfactual as u8,
        })
        .collect();
    io::write_rows(path, comment, &rows)
}

#[derive(Debug, Deserialize)]
struct ParishRow {
    id: String,
    lon: f64,
    lat: f64,
    #[serde(default, deserialize_with = "io::de_opt_string")]
    region: Option<String>,
}

pub fn read_parishes(path: impl AsRef<Path>) -> Result<Vec<ParishSite>> {
    io::read_rows::<ParishRow>(path)?
        .into_iter()
        .map(|r| {
            Ok(ParishSite {
                id: r.id,
                centroid: Point::new(r.lon, r.lat),
                region: r.region.as_deref().map(str::parse).transpose()?,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct ParishOut<'a> {
    id: &'a str,
    lon: f64,
    lat: f64,
    region: &'a str,
}

pub fn write_parishes(path: impl AsRef<Path>, comment: Option<&str>, parishes: &[ParishSite]) -> Result<()> {
    let rows: Vec<ParishOut> = parishes
        .iter()
        .map(|p| ParishOut {
            id: &p.id,
            lon: p.centroid.x,
            lat: p.centroid.y,
            region: p.region.map_or("", Region::as_str),
        })
        .collect();
    io::write_rows(path, comment, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::CellClass;

    fn water_row(n: usize) -> CostSurface {
        CostSurface::from_classes(n, 1, 1.0, 10.0, vec![CellClass::Water; n]).unwrap()
    }

    fn port(id: &str, x: f64, base: bool) -> Port {
        Port {
            id: id.into(),
            location: Point::new(x, 0.5),
            in_baseline: base,
            in_counterfactual: true,
        }
    }

    fn parish(x: f64) -> ParishSite {
        ParishSite {
            id: "p".into(),
            centroid: Point::new(x, 0.5),
            region: None,
        }
    }

    #[test]
    fn port_at_zero_distance_gives_one() {
        let s = water_row(4);
        for theta in [-1.0, -3.5, -16.0] {
            let p = port("a", 2.5, true);
            assert_eq!(market_access(&parish(2.5), &[&p], theta, &s).unwrap(), 1.0);
        }
    }

    #[test]
    fn two_ports_analytic() {
        let s = water_row(5);
        let (a, b) = (port("a", 1.5, true), port("b", 3.5, true));
        let ma = market_access(&parish(0.5), &[&a, &b], -1.0, &s).unwrap();
        assert_eq!(ma, 0.75);
    }

    #[test]
    fn delta_log_ma_for_added_port() {
        let s = water_row(5);
        let reg = PortRegistry::new(vec![port("far", 3.5, true), port("near", 1.5, false)]).unwrap();
        let r = delta_log_ma(&parish(0.5), &reg, -1.0, &s).unwrap();
        assert_eq!(r.ma_before, 0.25);
        assert_eq!(r.ma_after, 0.75);
        assert!((r.delta_log_ma - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identical_sets_give_zero_change() {
        let s = water_row(5);
        let reg = PortRegistry::new(vec![port("a", 3.5, true), port("b", 1.5, true)]).unwrap();
        assert!(!reg.is_strict_extension());
        assert_eq!(delta_log_ma(&parish(0.5), &reg, -1.0, &s).unwrap().delta_log_ma, 0.0);
    }

    #[test]
    fn errors() {
        let s = water_row(3);
        assert!(market_access(&parish(0.5), &[], -1.0, &s).is_err());
        let p = port("a", 1.5, true);
        assert!(market_access(&parish(0.5), &[&p], 1.0, &s).is_err());
        assert!(PortRegistry::new(vec![Port { in_counterfactual: false, ..port("a", 1.5, true) }]).is_err());
        assert!(PortRegistry::new(vec![port("a", 1.5, false)]).is_err());
    }

    #[test]
    fn unreachable_port_contributes_nothing() {
        assert_eq!(market_access_from_distances(&[None, Some(1.0)], -1.0), 0.5);
        assert_eq!(market_access_from_distances(&[None], -1.0), 0.0);
    }

    #[test]
    fn eligibility_threshold() {
        let counts: HashMap<String, usize> = [("a".to_string(), 1), ("b".to_string(), 2)].into();
        let kept = eligible_ports(vec![port("a", 0.5, true), port("b", 0.5, true)], &counts, DEFAULT_MIN_PORT_OBSERVATIONS);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "b");
    }

    fn planar_classifier() -> RegionClassifier {
        // fjord is the x axis, coast the line y = 100; divider the y axis
        RegionClassifier::new(
            vec![vec![Point::new(-200.0, 0.0), Point::new(200.0, 0.0)]],
            vec![vec![Point::new(-200.0, 100.0), Point::new(200.0, 100.0)]],
            [Point::new(0.0, 10.0), Point::new(0.0, -10.0)],
            DEFAULT_BUFFER_KM,
            Projection::Planar,
        )
        .unwrap()
    }

    #[test]
    fn region_rules() {
        let c = planar_classifier();
        assert_eq!(c.classify(Point::new(0.0, 5.0)), Region::Middle);
        assert_eq!(c.classify(Point::new(-50.0, 5.0)), Region::West);
        assert_eq!(c.classify(Point::new(50.0, 5.0)), Region::East);
        assert_eq!(c.classify(Point::new(20.0, 5.0)), Region::Middle);
        assert_eq!(c.classify(Point::new(-50.0, 80.0)), Region::Reference);
    }

    #[test]
    fn degenerate_divider() {
        let p = Point::new(1.0, 1.0);
        assert!(RegionClassifier::new(vec![], vec![], [p, p], 20.0, Projection::Planar).is_err());
    }

    #[test]
    fn default_divider_west_side() {
        let c = RegionClassifier::new(
            vec![vec![Point::new(8.0, 56.9), Point::new(10.5, 56.9)]],
            vec![vec![Point::new(8.0, 58.5), Point::new(10.5, 58.5)]],
            DEFAULT_DIVIDER,
            DEFAULT_BUFFER_KM,
            Projection::Geographic,
        )
        .unwrap();
        // Thisted lies well west of Løgstør, Aalborg well east
        assert_eq!(c.classify(Point::new(8.69, 56.96)), Region::West);
        assert_eq!(c.classify(Point::new(9.92, 57.05)), Region::East);
        assert_eq!(c.classify(Point::new(9.25, 56.97)), Region::Middle);
    }
}
