use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::{CellCoord, CostSurface, Point};

/// Least-cost distances from one source cell. Unreachable cells hold
/// `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDistanceField {
    pub source: CellCoord,
    pub width: usize,
    pub height: usize,
    pub distances: Vec<f64>,
}

impl CostDistanceField {
    pub fn get(&self, c: CellCoord) -> Option<f64> {
        let d = self.distances[c.row * self.width + c.col];
        d.is_finite().then_some(d)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, header_comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        if let Some(c) = header_comment {
            writeln!(out, "# {c}").map_err(io)?;
        }
        writeln!(out, "col,row,distance").map_err(io)?;
        for (i, d) in self.distances.iter().enumerate() {
            let (col, row) = (i % self.width, i / self.width);
            if d.is_finite() {
                writeln!(out, "{col},{row},{d}").map_err(io)?;
            } else {
                writeln!(out, "{col},{row},NA").map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }
}

#[derive(Clone, Copy)]
struct Entry {
    dist: f64,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.index.cmp(&self.index))
    }
}

const NEIGHBOURS: [(i64, i64, f64); 8] = [
    (-1, -1, SQRT_2),
    (0, -1, 1.0),
    (1, -1, SQRT_2),
    (-1, 0, 1.0),
    (1, 0, 1.0),
    (-1, 1, SQRT_2),
    (0, 1, 1.0),
    (1, 1, SQRT_2),
];

/// Single-source least-cost distance over the 8-connected grid.
pub fn cost_distance(surface: &CostSurface, source: CellCoord) -> Result<CostDistanceField> {
    cost_distance_from_cells(surface, &[source])
}

/// Multi-source variant: distance to the nearest of `sources`. The returned
/// field records the first source.
pub fn cost_distance_from_cells(surface: &CostSurface, sources: &[CellCoord]) -> Result<CostDistanceField> {
    let first = *sources
        .first()
        .ok_or_else(|| Error::InvalidInput("no source cells".into()))?;
    let (w, h) = (surface.width(), surface.height());
    for s in sources {
        if !surface.contains(*s) {
            return Err(Error::OutOfBounds {
                col: s.col as i64,
                row: s.row as i64,
                width: w,
                height: h,
            });
        }
    }

    let step = surface.cell_size_km();
    let mut dist = vec![f64::INFINITY; w * h];
    let mut done = vec![false; w * h];
    let mut heap = BinaryHeap::new();
    for s in sources {
        let i = surface.index(*s);
        dist[i] = 0.0;
        heap.push(Entry { dist: 0.0, index: i });
    }

    while let Some(Entry { dist: d, index }) = heap.pop() {
        if done[index] {
            continue;
        }
        done[index] = true;
        let (col, row) = ((index % w) as i64, (index / w) as i64);
        let here = surface.unit_cost_at(index);
        for (dc, dr, len) in NEIGHBOURS {
            let (nc, nr) = (col + dc, row + dr);
            if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
                continue;
            }
            let ni = nr as usize * w + nc as usize;
            if done[ni] {
                continue;
            }
            let nd = d + step * len * here.min(surface.unit_cost_at(ni));
            if nd < dist[ni] {
                dist[ni] = nd;
                heap.push(Entry { dist: nd, index: ni });
            }
        }
    }

    Ok(CostDistanceField {
        source: first,
        width: w,
        height: h,
        distances: dist,
    })
}

/// Snaps `source` and `targets` to their containing cells and returns the
/// cost distance to each target; `None` marks an unreachable target.
pub fn cost_distance_to_points(
    surface: &CostSurface,
    source: Point,
    targets: &[Point],
) -> Result<Vec<Option<f64>>> {
    let src = surface.snap(source)?;
    let cells = targets
        .iter()
        .map(|t| surface.snap(*t))
        .collect::<Result<Vec<_>>>()?;
    let field = cost_distance(surface, src)?;
    Ok(cells.into_iter().map(|c| field.get(c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::CellClass;

    fn water(w: usize, h: usize) -> CostSurface {
        CostSurface::from_classes(w, h, 1.0, 10.0, vec![CellClass::Water; w * h]).unwrap()
    }

    #[test]
    fn straight_water_row() {
        let f = cost_distance(&water(5, 1), CellCoord::new(0, 0)).unwrap();
        assert_eq!(f.get(CellCoord::new(4, 0)), Some(4.0));
        assert_eq!(f.get(CellCoord::new(0, 0)), Some(0.0));
    }

    #[test]
    fn single_diagonal_step() {
        let f = cost_distance(&water(2, 2), CellCoord::new(0, 0)).unwrap();
        assert!((f.get(CellCoord::new(1, 1)).unwrap() - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn land_step_uses_cheaper_endpoint() {
        let s = CostSurface::from_classes(3, 1, 2.0, 10.0, vec![CellClass::Water, CellClass::Land, CellClass::Land])
            .unwrap();
        let f = cost_distance(&s, CellCoord::new(0, 0)).unwrap();
        assert_eq!(f.get(CellCoord::new(1, 0)), Some(2.0));
        assert_eq!(f.get(CellCoord::new(2, 0)), Some(22.0));
    }

    #[test]
    fn out_of_bounds_source() {
        assert!(matches!(
            cost_distance(&water(2, 2), CellCoord::new(2, 0)),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn point_queries() {
        let s = water(5, 2);
        let d = cost_distance_to_points(&s, Point::new(0.5, 0.5), &[Point::new(0.4, 0.6), Point::new(3.5, 0.5)])
            .unwrap();
        assert_eq!(d, vec![Some(0.0), Some(3.0)]);
        assert!(cost_distance_to_points(&s, Point::new(0.5, 0.5), &[Point::new(9.0, 0.5)]).is_err());
    }

    #[test]
    fn csv_export_marks_unreachable() {
        let f = CostDistanceField {
            source: CellCoord::new(0, 0),
            width: 2,
            height: 1,
            distances: vec![0.0, f64::INFINITY],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        f.write_csv(&p, Some("seed=1")).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "# seed=1\ncol,row,distance\n0,0,0\n1,0,NA\n");
    }
}
