//! Plain-text ESRI ASCII grid reader and writer.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A raster as stored in an ESRI ASCII grid: header plus row-major values,
/// first row at the top (north) edge.
#[derive(Debug, Clone, PartialEq)]
pub struct AsciiGrid {
    pub ncols: usize,
    pub nrows: usize,
    /// x of the lower-left corner (not center) of the lower-left cell.
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: Option<f64>,
    pub values: Vec<f64>,
}

impl AsciiGrid {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut ncols = None;
        let mut nrows = None;
        let mut xll = None;
        let mut yll = None;
        let mut x_is_center = false;
        let mut y_is_center = false;
        let mut cellsize = None;
        let mut nodata = None;
        let mut values = Vec::new();

        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let first = trimmed.split_whitespace().next().unwrap_or_default();
            if first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                if !values.is_empty() {
                    return Err(Error::Raster(format!(
                        "header key `{first}` after data on line {}",
                        lineno + 1
                    )));
                }
                let mut parts = trimmed.split_whitespace();
                let key = parts.next().unwrap_or_default().to_ascii_lowercase();
                let value = parts
                    .next()
                    .ok_or_else(|| Error::Raster(format!("header `{key}` has no value")))?;
                let num: f64 = value
                    .parse()
                    .map_err(|_| Error::Raster(format!("header `{key}` value `{value}` is not numeric")))?;
                match key.as_str() {
                    "ncols" => ncols = Some(parse_dim(&key, num)?),
                    "nrows" => nrows = Some(parse_dim(&key, num)?),
                    "xllcorner" => xll = Some(num),
                    "yllcorner" => yll = Some(num),
                    "xllcenter" => {
                        xll = Some(num);
                        x_is_center = true;
                    }
                    "yllcenter" => {
                        yll = Some(num);
                        y_is_center = true;
                    }
                    "cellsize" => cellsize = Some(num),
                    "nodata_value" => nodata = Some(num),
                    other => return Err(Error::Raster(format!("unknown header key `{other}`"))),
                }
            } else {
                for tok in trimmed.split_whitespace() {
                    let v: f64 = tok.parse().map_err(|_| {
                        Error::Raster(format!("non-numeric cell `{tok}` on line {}", lineno + 1))
                    })?;
                    values.push(v);
                }
            }
        }

        let ncols = ncols.ok_or_else(|| Error::Raster("missing ncols".into()))?;
        let nrows = nrows.ok_or_else(|| Error::Raster("missing nrows".into()))?;
        let cellsize = cellsize.ok_or_else(|| Error::Raster("missing cellsize".into()))?;
        if !(cellsize > 0.0) {
            return Err(Error::Raster(format!("cellsize must be positive, got {cellsize}")));
        }
        let mut xll = xll.ok_or_else(|| Error::Raster("missing xllcorner".into()))?;
        let mut yll = yll.ok_or_else(|| Error::Raster("missing yllcorner".into()))?;
        if x_is_center {
            xll -= cellsize / 2.0;
        }
        if y_is_center {
            yll -= cellsize / 2.0;
        }
        if values.len() != ncols * nrows {
            return Err(Error::Raster(format!(
                "expected {} cells ({ncols}x{nrows}), found {}",
                ncols * nrows,
                values.len()
            )));
        }
        Ok(AsciiGrid {
            ncols,
            nrows,
            xllcorner: xll,
            yllcorner: yll,
            cellsize,
            nodata,
            values,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ncols {}", self.ncols);
        let _ = writeln!(out, "nrows {}", self.nrows);
        let _ = writeln!(out, "xllcorner {}", self.xllcorner);
        let _ = writeln!(out, "yllcorner {}", self.yllcorner);
        let _ = writeln!(out, "cellsize {}", self.cellsize);
        if let Some(nd) = self.nodata {
            let _ = writeln!(out, "NODATA_value {nd}");
        }
        for row in self.values.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn parse_dim(key: &str, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Raster(format!("`{key}` must be a positive integer, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_and_rows() {
        let g = AsciiGrid::parse(
            "ncols 3\nnrows 2\nxllcorner 10\nyllcorner 20\ncellsize 0.5\nNODATA_value -9999\n0 1 0\n1 1 -9999\n",
        )
        .unwrap();
        assert_eq!((g.ncols, g.nrows), (3, 2));
        assert_eq!(g.values, vec![0.0, 1.0, 0.0, 1.0, 1.0, -9999.0]);
        assert_eq!(g.nodata, Some(-9999.0));
        let back = AsciiGrid::parse(&g.to_text()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn center_registration_is_shifted_to_corner() {
        let g = AsciiGrid::parse("ncols 1\nnrows 1\nxllcenter 1\nyllcenter 1\ncellsize 2\n0\n").unwrap();
        assert_eq!((g.xllcorner, g.yllcorner), (0.0, 0.0));
    }

    #[test]
    fn rejects_malformed_headers() {
        assert!(AsciiGrid::parse("nrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n0\n").is_err());
        assert!(AsciiGrid::parse("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n0\n").is_err());
        assert!(AsciiGrid::parse("ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 0\n0\n").is_err());
        assert!(AsciiGrid::parse("ncols x\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n0\n").is_err());
    }
}
