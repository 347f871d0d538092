use std::path::Path;

use log::warn;

use crate::error::{Error, Result};

use super::{AsciiGrid, CellCoord, Point, Polygon};

/// Ports that snap onto land are moved to the nearest navigable cell within
/// this many cells (centre-to-centre), otherwise they are unreachable.
pub const PORT_SNAP_RADIUS_CELLS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Water,
    Land,
    /// Hydrologically water but priced as land (shallow straits that force
    /// reloading onto land transport).
    ForcedLand,
}

impl CellClass {
    pub fn is_navigable(self) -> bool {
        !matches!(self, CellClass::Land)
    }
}

/// Immutable, priced raster.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSurface {
    width: usize,
    height: usize,
    cell_size_km: f64,
    /// Map units per cell edge, used to place points.
    map_cell_size: f64,
    origin: Point,
    alpha: f64,
    cells: Vec<CellClass>,
}

impl CostSurface {
    /// Builds a surface from explicit classes, row-major with row 0 at the top.
    pub fn from_classes(
        width: usize,
        height: usize,
        cell_size_km: f64,
        alpha: f64,
        cells: Vec<CellClass>,
    ) -> Result<Self> {
        Self::with_georef(width, height, cell_size_km, cell_size_km, Point::new(0.0, 0.0), alpha, cells)
    }

    pub fn with_georef(
        width: usize,
        height: usize,
        cell_size_km: f64,
        map_cell_size: f64,
        origin: Point,
        alpha: f64,
        cells: Vec<CellClass>,
    ) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::InvalidInput(format!("alpha must exceed 1, got {alpha}")));
        }
        if !(cell_size_km > 0.0) || !(map_cell_size > 0.0) {
            return Err(Error::InvalidInput("cell size must be positive".into()));
        }
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{} cells do not fill a {width}x{height} raster",
                cells.len()
            )));
        }
        Ok(CostSurface {
            width,
            height,
            cell_size_km,
            map_cell_size,
            origin,
            alpha,
            cells,
        })
    }

    /// Interprets grid values 0 as water and 1 as land. NODATA cells are
    /// treated as land (off-map areas are not navigable).
    pub fn from_grid(grid: &AsciiGrid, alpha: f64, km_per_map_unit: f64) -> Result<Self> {
        let mut nodata_cells = 0usize;
        let cells = grid
            .values
            .iter()
            .map(|&v| {
                if grid.nodata == Some(v) {
                    nodata_cells += 1;
                    Ok(CellClass::Land)
                } else if v == 0.0 {
                    Ok(CellClass::Water)
                } else if v == 1.0 {
                    Ok(CellClass::Land)
                } else {
                    Err(Error::Raster(format!("cell value {v} is neither 0 (water) nor 1 (land)")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if nodata_cells > 0 {
            warn!("{nodata_cells} NODATA cells treated as land");
        }
        Self::with_georef(
            grid.ncols,
            grid.nrows,
            grid.cellsize * km_per_map_unit,
            grid.cellsize,
            Point::new(grid.xllcorner, grid.yllcorner),
            alpha,
            cells,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cell_size_km(&self) -> f64 {
        self.cell_size_km
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index(&self, c: CellCoord) -> usize {
        c.row * self.width + c.col
    }

    pub fn coord(&self, index: usize) -> CellCoord {
        CellCoord::new(index % self.width, index / self.width)
    }

    pub fn contains(&self, c: CellCoord) -> bool {
        c.col < self.width && c.row < self.height
    }

    pub fn class(&self, c: CellCoord) -> CellClass {
        self.cells[self.index(c)]
    }

    pub fn classes(&self) -> &[CellClass] {
        &self.cells
    }

    /// Cost per kilometre of crossing the cell at `index`.
    pub fn unit_cost_at(&self, index: usize) -> f64 {
        match self.cells[index] {
            CellClass::Water => 1.0,
            CellClass::Land | CellClass::ForcedLand => self.alpha,
        }
    }

    pub fn unit_cost(&self, c: CellCoord) -> f64 {
        self.unit_cost_at(self.index(c))
    }

    /// Same raster with a different land/water cost ratio.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::InvalidInput(format!("alpha must exceed 1, got {alpha}")));
        }
        Ok(CostSurface { alpha, ..self.clone() })
    }

    pub fn cell_center(&self, c: CellCoord) -> Point {
        Point::new(
            self.origin.x + (c.col as f64 + 0.5) * self.map_cell_size,
            self.origin.y + ((self.height - c.row) as f64 - 0.5) * self.map_cell_size,
        )
    }

    /// Cell whose centre is nearest to `p` (the cell containing it).
    pub fn snap(&self, p: Point) -> Result<CellCoord> {
        let fx = (p.x - self.origin.x) / self.map_cell_size;
        let fy = (p.y - self.origin.y) / self.map_cell_size;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= self.width as f64 && fy <= self.height as f64) {
            return Err(Error::OutOfExtent { x: p.x, y: p.y });
        }
        let col = (fx.floor() as usize).min(self.width - 1);
        let from_bottom = (fy.floor() as usize).min(self.height - 1);
        Ok(CellCoord::new(col, self.height - 1 - from_bottom))
    }

    /// Snaps a port location. Ports on land move to the nearest navigable
    /// cell within [`PORT_SNAP_RADIUS_CELLS`]; `Ok(None)` if none exists.
    pub fn snap_port(&self, p: Point) -> Result<Option<CellCoord>> {
        let cell = self.snap(p)?;
        if self.class(cell).is_navigable() {
            return Ok(Some(cell));
        }
        let r = PORT_SNAP_RADIUS_CELLS.floor() as i64;
        let mut best: Option<(f64, usize)> = None;
        for dr in -r..=r {
            for dc in -r..=r {
                let (col, row) = (cell.col as i64 + dc, cell.row as i64 + dr);
                if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
                    continue;
                }
                let cand = CellCoord::new(col as usize, row as usize);
                if !self.class(cand).is_navigable() {
                    continue;
                }
                if ((dr * dr + dc * dc) as f64).sqrt() > PORT_SNAP_RADIUS_CELLS {
                    continue;
                }
                let d = self.cell_center(cand).distance(p);
                let idx = self.index(cand);
                if best.map_or(true, |(bd, bi)| d < bd || (d == bd && idx < bi)) {
                    best = Some((d, idx));
                }
            }
        }
        Ok(best.map(|(_, idx)| self.coord(idx)))
    }

    /// Marks water cells whose centres fall inside any polygon as forced
    /// land. Polygons that miss the raster entirely are ignored with a warning.
    pub fn apply_forced_land(&mut self, regions: &[Polygon]) -> Result<usize> {
        let (ext_min, ext_max) = self.extent();
        let mut changed = 0;
        for poly in regions {
            if !poly.is_valid() {
                return Err(Error::InvalidInput("forced-land polygon needs at least 3 finite vertices".into()));
            }
            let (pmin, pmax) = poly.bbox();
            if pmax.x < ext_min.x || pmin.x > ext_max.x || pmax.y < ext_min.y || pmin.y > ext_max.y {
                warn!("forced-land polygon lies outside the raster; ignored");
                continue;
            }
            for idx in 0..self.cells.len() {
                if self.cells[idx] == CellClass::Water && poly.contains(self.cell_center(self.coord(idx))) {
                    self.cells[idx] = CellClass::ForcedLand;
                    changed += 1;
                }
            }
        }
        Ok(changed)
    }

    pub fn extent(&self) -> (Point, Point) {
        (
            self.origin,
            Point::new(
                self.origin.x + self.width as f64 * self.map_cell_size,
                self.origin.y + self.height as f64 * self.map_cell_size,
            ),
        )
    }

    /// Back to a 0/1 grid (forced land is written as water).
    pub fn to_grid(&self) -> AsciiGrid {
        AsciiGrid {
            ncols: self.width,
            nrows: self.height,
            xllcorner: self.origin.x,
            yllcorner: self.origin.y,
            cellsize: self.map_cell_size,
            nodata: None,
            values: self
                .cells
                .iter()
                .map(|c| if *c == CellClass::Land { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Reads an ASCII grid, prices it with `alpha` and applies forced-land regions.
pub fn build_cost_surface(
    raster: impl AsRef<Path>,
    alpha: f64,
    forced_land_regions: &[Polygon],
    km_per_map_unit: f64,
) -> Result<CostSurface> {
    let grid = AsciiGrid::read(raster)?;
    let mut surface = CostSurface::from_grid(&grid, alpha, km_per_map_unit)?;
    surface.apply_forced_land(forced_land_regions)?;
    Ok(surface)
}
