//! Raster cost surfaces and least-cost distances.
//!
//! A [`CostSurface`] prices every cell of an ASCII-grid raster: water costs
//! 1.0 per kilometre, land and forced-land cost `alpha` per kilometre.
//! [`cost_distance`] runs Dijkstra over the 8-connected grid where moving
//! between neighbours costs the centroid step length times the cheaper of
//! the two cells' unit costs. Distances come out in water-kilometres.

mod dijkstra;
mod grid;
mod polygon;
mod surface;

pub use dijkstra::{
    cost_distance, cost_distance_from_cells, cost_distance_to_points, CostDistanceField,
};
pub use grid::AsciiGrid;
pub use polygon::{
    distance_to_polylines, distance_to_segment, parse_geojson, read_geojson, to_geojson, write_geojson, Feature, Geometry,
    Polygon,
};
pub use surface::{build_cost_surface, CellClass, CostSurface, PORT_SNAP_RADIUS_CELLS};

/// Planar map coordinate (x = easting or longitude, y = northing or latitude).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Raster cell index; row 0 is the northern edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellCoord {
    pub col: usize,
    pub row: usize,
}

impl CellCoord {
    pub const fn new(col: usize, row: usize) -> Self {
        CellCoord { col, row }
    }
}
