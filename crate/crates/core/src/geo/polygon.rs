//! Planar polygons, polylines and a small GeoJSON reader.

use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

use super::Point;

/// A polygon with one exterior ring and optional holes. Rings need not be
/// explicitly closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(exterior: Vec<Point>) -> Self {
        Polygon {
            exterior,
            holes: Vec::new(),
        }
    }

    pub fn rect(min: Point, max: Point) -> Self {
        Polygon::new(vec![
            min,
            Point::new(max.x, min.y),
            max,
            Point::new(min.x, max.y),
        ])
    }

    /// Even-odd containment over the exterior and all holes.
    pub fn contains(&self, p: Point) -> bool {
        ring_crossings(&self.exterior, p)
            && !self.holes.iter().any(|h| ring_crossings(h, p))
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.exterior {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        (min, max)
    }

    pub fn is_valid(&self) -> bool {
        self.exterior.len() >= 3
            && self.exterior.iter().all(|p| p.x.is_finite() && p.y.is_finite())
    }

    pub fn boundary(&self) -> Vec<Point> {
        let mut ring = self.exterior.clone();
        if let (Some(&first), Some(&last)) = (ring.first(), ring.last()) {
            if first != last {
                ring.push(first);
            }
        }
        ring
    }
}

fn ring_crossings(ring: &[Point], p: Point) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Euclidean distance from `p` to the segment `a`-`b`.
pub fn distance_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Distance from `p` to the nearest vertex-to-vertex segment of any polyline.
pub fn distance_to_polylines(p: Point, lines: &[Vec<Point>]) -> f64 {
    let mut best = f64::INFINITY;
    for line in lines {
        match line.len() {
            0 => {}
            1 => best = best.min(p.distance(line[0])),
            _ => {
                for seg in line.windows(2) {
                    best = best.min(distance_to_segment(p, seg[0], seg[1]));
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(Point),
    Lines(Vec<Vec<Point>>),
    Polygons(Vec<Polygon>),
}

impl Geometry {
    pub fn polygons(&self) -> &[Polygon] {
        match self {
            Geometry::Polygons(p) => p,
            _ => &[],
        }
    }

    /// The geometry as polylines; polygon boundaries are closed rings.
    pub fn as_lines(&self) -> Vec<Vec<Point>> {
        match self {
            Geometry::Point(p) => vec![vec![*p]],
            Geometry::Lines(l) => l.clone(),
            Geometry::Polygons(polys) => polys.iter().map(Polygon::boundary).collect(),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.polygons().iter().any(|poly| poly.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub id: Option<String>,
    pub properties: serde_json::Map<String, Value>,
    pub geometry: Geometry,
}

impl Feature {
    /// `id` member, falling back to an `id` property.
    pub fn identifier(&self) -> Option<String> {
        self.id.clone().or_else(|| {
            self.properties.get("id").map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
        })
    }
}

pub fn read_geojson(path: impl AsRef<Path>) -> Result<Vec<Feature>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_geojson(&text)
}

/// Accepts a FeatureCollection, a single Feature, or a bare geometry.
pub fn parse_geojson(text: &str) -> Result<Vec<Feature>> {
    let root: Value = serde_json::from_str(text)?;
    match root.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => root
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidInput("FeatureCollection without features".into()))?
            .iter()
            .map(parse_feature)
            .collect(),
        Some("Feature") => Ok(vec![parse_feature(&root)?]),
        Some(_) => Ok(vec![Feature {
            id: None,
            properties: Default::default(),
            geometry: parse_geometry(&root)?,
        }]),
        None => Err(Error::InvalidInput("GeoJSON object without `type`".into())),
    }
}

fn parse_feature(v: &Value) -> Result<Feature> {
    let id = v.get("id").map(|id| match id {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    });
    let properties = v
        .get("properties")
        .and_then(Value::as_object)
        .cloned()
        .unwrap_or_default();
    let geometry = parse_geometry(
        v.get("geometry")
            .ok_or_else(|| Error::InvalidInput("Feature without geometry".into()))?,
    )?;
    Ok(Feature {
        id,
        properties,
        geometry,
    })
}

fn parse_geometry(v: &Value) -> Result<Geometry> {
    let kind = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::InvalidInput("geometry without `type`".into()))?;
    let coords = v
        .get("coordinates")
        .ok_or_else(|| Error::InvalidInput(format!("{kind} without coordinates")))?;
    match kind {
        "Point" => Ok(Geometry::Point(parse_position(coords)?)),
        "LineString" => Ok(Geometry::Lines(vec![parse_ring(coords)?])),
        "MultiLineString" => Ok(Geometry::Lines(
            as_array(coords)?.iter().map(parse_ring).collect::<Result<_>>()?,
        )),
        "Polygon" => Ok(Geometry::Polygons(vec![parse_polygon(coords)?])),
        "MultiPolygon" => Ok(Geometry::Polygons(
            as_array(coords)?.iter().map(parse_polygon).collect::<Result<_>>()?,
        )),
        other => Err(Error::InvalidInput(format!("unsupported geometry type {other}"))),
    }
}

fn as_array(v: &Value) -> Result<&Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::InvalidInput("expected a coordinate array".into()))
}

fn parse_position(v: &Value) -> Result<Point> {
    let a = as_array(v)?;
    match (a.first().and_then(Value::as_f64), a.get(1).and_then(Value::as_f64)) {
        (Some(x), Some(y)) => Ok(Point::new(x, y)),
        _ => Err(Error::InvalidInput("position needs two numbers".into())),
    }
}

fn parse_ring(v: &Value) -> Result<Vec<Point>> {
    as_array(v)?.iter().map(parse_position).collect()
}

fn parse_polygon(v: &Value) -> Result<Polygon> {
    let rings: Vec<Vec<Point>> = as_array(v)?.iter().map(parse_ring).collect::<Result<_>>()?;
    let mut it = rings.into_iter();
    let exterior = it
        .next()
        .ok_or_else(|| Error::InvalidInput("polygon without rings".into()))?;
    Ok(Polygon {
        exterior,
        holes: it.collect(),
    })
}

fn position(p: &Point) -> Value {
    serde_json::json!([p.x, p.y])
}

fn closed_ring(ring: &[Point]) -> Value {
    let mut pts: Vec<Value> = ring.iter().map(position).collect();
    if let (Some(first), Some(last)) = (ring.first(), ring.last()) {
        if first != last {
            pts.push(position(first));
        }
    }
    Value::Array(pts)
}

fn geometry_json(g: &Geometry) -> Value {
    match g {
        Geometry::Point(p) => serde_json::json!({"type": "Point", "coordinates": position(p)}),
        Geometry::Lines(lines) => serde_json::json!({
            "type": "MultiLineString",
            "coordinates": lines.iter().map(|l| l.iter().map(position).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }),
        Geometry::Polygons(polys) => serde_json::json!({
            "type": "MultiPolygon",
            "coordinates": polys
                .iter()
                .map(|p| std::iter::once(&p.exterior).chain(&p.holes).map(|r| closed_ring(r)).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        }),
    }
}

/// Serialises features as a FeatureCollection.
pub fn to_geojson(features: &[Feature]) -> String {
    let feats: Vec<Value> = features
        .iter()
        .map(|f| {
            let mut obj = serde_json::Map::new();
            obj.insert("type".into(), "Feature".into());
            if let Some(id) = &f.id {
                obj.insert("id".into(), id.clone().into());
            }
            obj.insert("properties".into(), Value::Object(f.properties.clone()));
            obj.insert("geometry".into(), geometry_json(&f.geometry));
            Value::Object(obj)
        })
        .collect();
    serde_json::json!({"type": "FeatureCollection", "features": feats}).to_string()
}

pub fn write_geojson(path: impl AsRef<Path>, features: &[Feature]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_geojson(features)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment_respects_holes() {
        let mut poly = Polygon::rect(Point::new(0.0, 0.0), Point::new(10.0, 10.0));
        poly.holes.push(Polygon::rect(Point::new(4.0, 4.0), Point::new(6.0, 6.0)).exterior);
        assert!(poly.contains(Point::new(1.0, 1.0)));
        assert!(!poly.contains(Point::new(5.0, 5.0)));
        assert!(!poly.contains(Point::new(11.0, 5.0)));
    }

    #[test]
    fn segment_distance() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(10.0, 0.0);
        assert_eq!(distance_to_segment(Point::new(5.0, 3.0), a, b), 3.0);
        assert_eq!(distance_to_segment(Point::new(13.0, 4.0), a, b), 5.0);
        assert_eq!(distance_to_segment(Point::new(1.0, 1.0), a, a), 2f64.sqrt());
    }

    #[test]
    fn reads_feature_collections() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","id":"p1","properties":{},"geometry":{"type":"Polygon","coordinates":[[[0,0],[2,0],[2,2],[0,2],[0,0]]]}},
            {"type":"Feature","properties":{"id":7},"geometry":{"type":"MultiLineString","coordinates":[[[0,0],[1,1]],[[2,2],[3,3]]]}}
        ]}"#;
        let feats = parse_geojson(text).unwrap();
        assert_eq!(feats.len(), 2);
        assert_eq!(feats[0].identifier().as_deref(), Some("p1"));
        assert!(feats[0].geometry.contains(Point::new(1.0, 1.0)));
        assert_eq!(feats[1].identifier().as_deref(), Some("7"));
        assert_eq!(feats[1].geometry.as_lines().len(), 2);
    }

    #[test]
    fn geojson_roundtrip() {
        let feats = vec![
            Feature {
                id: Some("a".into()),
                properties: Default::default(),
                geometry: Geometry::Polygons(vec![Polygon::rect(Point::new(0.0, 0.0), Point::new(1.0, 2.0))]),
            },
            Feature {
                id: None,
                properties: Default::default(),
                geometry: Geometry::Lines(vec![vec![Point::new(0.0, 0.0), Point::new(3.0, 1.5)]]),
            },
        ];
        let back = parse_geojson(&to_geojson(&feats)).unwrap();
        assert_eq!(back[0].identifier().as_deref(), Some("a"));
        assert!(back[0].geometry.contains(Point::new(0.5, 1.0)));
        assert_eq!(back[1].geometry, feats[1].geometry);
    }
}
