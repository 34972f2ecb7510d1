//! Raster grids and their file formats.
//!
//! A [`FieldGrid`] holds estimates over a uniform rectangular raster. Cells
//! tile the bounds exactly: with `nx` columns over `[x_min, x_max]` the cell
//! width is `(x_max − x_min)/nx` and cell centers sit half a cell in from
//! the bounds. Values are stored row-major with row 0 at `y_min`, columns
//! running west→east.
//!
//! Two file formats are supported:
//!
//! * **delimited grid** — a key-value header (bounds and dimensions)
//!   followed by one tab-separated row of values per grid row, written at
//!   full precision so a round-trip reproduces the grid bit for bit;
//!   invalid cells print `NA`.
//! * **portable graymap (PGM)** — binary 8-bit `P5` image, linearly scaled
//!   between the grid minimum and maximum, with those two numbers recorded
//!   in a sidecar text file so the scaling stays invertible. Invalid cells
//!   render black.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Bounds and dimensions of a uniform raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridSpec<T: Scalar> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
    /// Number of columns (west→east).
    pub nx: usize,
    /// Number of rows (south→north).
    pub ny: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite()
            && self.x_max.is_finite()
            && self.y_min.is_finite()
            && self.y_max.is_finite())
        {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::Config(format!(
                "grid bounds must be ordered: x [{}, {}], y [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Config(format!(
                "grid needs at least one cell per axis, got {}x{}",
                self.nx, self.ny
            )));
        }
        Ok(())
    }

    /// Center coordinates of cell `(ix, iy)`.
    pub fn cell_center(&self, ix: usize, iy: usize) -> (T, T) {
        let half = T::from_f64_const(0.5);
        let dx = (self.x_max - self.x_min) / T::from_usize_const(self.nx);
        let dy = (self.y_max - self.y_min) / T::from_usize_const(self.ny);
        (
            self.x_min + (T::from_usize_const(ix) + half) * dx,
            self.y_min + (T::from_usize_const(iy) + half) * dy,
        )
    }

    /// All cell centers in storage order (row 0 first, west→east within
    /// each row).
    pub fn cell_centers(&self) -> Vec<(T, T)> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                out.push(self.cell_center(ix, iy));
            }
        }
        out
    }
}

/// Estimated values over a uniform raster, with an optional validity mask.
///
/// `values` has shape `(ny, nx)`; `mask` (same shape, `true` = valid) is
/// present only when at least one cell is invalid. Valid cells are always
/// finite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FieldGrid<T: Scalar> {
    pub spec: GridSpec<T>,
    pub values: Array2<T>,
    pub mask: Option<Array2<bool>>,
}

impl<T: Scalar> FieldGrid<T> {
    /// Wrap raw values, masking non-finite cells.
    ///
    /// Any non-finite value is marked invalid (with a logged warning naming
    /// how many); an all-finite grid carries no mask.
    pub fn from_values(spec: GridSpec<T>, values: Array2<T>) -> Result<Self> {
        spec.validate()?;
        if values.dim() != (spec.ny, spec.nx) {
            return Err(Error::Config(format!(
                "grid values have shape {:?} but the spec is {}x{} (rows x cols)",
                values.dim(),
                spec.ny,
                spec.nx
            )));
        }
        let invalid = values.iter().filter(|v| !v.is_finite()).count();
        let mask = if invalid > 0 {
            log::warn!(
                "{invalid} of {} grid cells are non-finite and were masked invalid",
                values.len()
            );
            Some(values.map(|v| v.is_finite()))
        } else {
            None
        };
        Ok(Self { spec, values, mask })
    }

    /// Whether cell `(ix, iy)` holds a valid value.
    pub fn is_valid(&self, ix: usize, iy: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[[iy, ix]])
    }

    /// Number of invalid cells.
    pub fn invalid_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(0, |m| m.iter().filter(|&&v| !v).count())
    }

    /// Minimum and maximum over valid cells; error if every cell is masked.
    fn valid_range(&self) -> Result<(T, T)> {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for iy in 0..self.spec.ny {
            for ix in 0..self.spec.nx {
                if self.is_valid(ix, iy) {
                    let v = self.values[[iy, ix]];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        if lo > hi {
            return Err(Error::Data(
                "grid has no valid cells to export".into(),
            ));
        }
        Ok((lo, hi))
    }

    /// Render the full-precision delimited text form.
    ///
    /// Header lines are `key<TAB>value` pairs (`x_min`, `x_max`, `y_min`,
    /// `y_max`, `nx`, `ny`) followed by `ny` lines of `nx` tab-separated
    /// values, row 0 (the `y_min` row) first. Invalid cells print `NA`.
    pub fn to_delimited(&self) -> Result<String> {
        self.valid_range()?;
        let s = &self.spec;
        let mut out = format!(
            "x_min\t{}\nx_max\t{}\ny_min\t{}\ny_max\t{}\nnx\t{}\nny\t{}\n",
            s.x_min, s.x_max, s.y_min, s.y_max, s.nx, s.ny
        );
        for iy in 0..s.ny {
            for ix in 0..s.nx {
                if ix > 0 {
                    out.push('\t');
                }
                if self.is_valid(ix, iy) {
                    out.push_str(&format!("{}", self.values[[iy, ix]]));
                } else {
                    out.push_str("NA");
                }
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Parse the delimited text form back into a grid.
    ///
    /// Values written by [`FieldGrid::to_delimited`] parse back to the
    /// identical bit pattern. Lines starting with `#` are ignored.
    pub fn from_delimited(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));
        let mut header = std::collections::BTreeMap::new();
        for _ in 0..6 {
            let line = lines
                .next()
                .ok_or_else(|| Error::Data("grid header truncated".into()))?;
            let (key, value) = line.split_once('\t').ok_or_else(|| {
                Error::Data(format!("malformed grid header line: {line:?}"))
            })?;
            header.insert(key.trim().to_string(), value.trim().to_string());
        }
        let scalar = |key: &str| -> Result<T> {
            let raw = header
                .get(key)
                .ok_or_else(|| Error::Data(format!("grid header is missing '{key}'")))?;
            serde_json::from_str(raw)
                .map_err(|_| Error::Data(format!("grid header '{key}' is not a number: {raw:?}")))
        };
        let count = |key: &str| -> Result<usize> {
            let raw = header
                .get(key)
                .ok_or_else(|| Error::Data(format!("grid header is missing '{key}'")))?;
            raw.parse()
                .map_err(|_| Error::Data(format!("grid header '{key}' is not a count: {raw:?}")))
        };
        let spec = GridSpec {
            x_min: scalar("x_min")?,
            x_max: scalar("x_max")?,
            y_min: scalar("y_min")?,
            y_max: scalar("y_max")?,
            nx: count("nx")?,
            ny: count("ny")?,
        };
        spec.validate()?;
        let mut values = Array2::from_elem((spec.ny, spec.nx), T::nan());
        for iy in 0..spec.ny {
            let line = lines.next().ok_or_else(|| {
                Error::Data(format!("grid body ends early: expected {} rows", spec.ny))
            })?;
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != spec.nx {
                return Err(Error::Data(format!(
                    "grid row {iy} has {} cells, expected {}",
                    cells.len(),
                    spec.nx
                )));
            }
            for (ix, cell) in cells.iter().enumerate() {
                if cell.trim() == "NA" {
                    continue;
                }
                values[[iy, ix]] = serde_json::from_str(cell.trim()).map_err(|_| {
                    Error::Data(format!("grid cell ({ix}, {iy}) is not a number: {cell:?}"))
                })?;
            }
        }
        if lines.next().is_some_and(|l| !l.trim().is_empty()) {
            return Err(Error::Data(format!(
                "grid body has trailing content beyond {} rows",
                spec.ny
            )));
        }
        Self::from_values(spec, values)
    }

    /// Render a binary 8-bit PGM image plus its min/max sidecar text.
    ///
    /// Valid values map linearly onto 0–255 between the grid minimum and
    /// maximum; a constant grid renders uniform mid-gray (128) and the
    /// sidecar records `min == max`. Invalid cells render 0. The sidecar
    /// keeps full precision so pixel levels can be mapped back to field
    /// units.
    pub fn to_pgm(&self) -> Result<(Vec<u8>, String)> {
        let (lo, hi) = self.valid_range()?;
        let span = hi - lo;
        let mut bytes = format!("P5\n{} {}\n255\n", self.spec.nx, self.spec.ny).into_bytes();
        for iy in 0..self.spec.ny {
            for ix in 0..self.spec.nx {
                let level = if !self.is_valid(ix, iy) {
                    0u8
                } else if span == T::zero() {
                    128u8
                } else {
                    let t = (self.values[[iy, ix]] - lo) / span;
                    let scaled = (t * T::from_f64_const(255.0)).round();
                    scaled.to_u8().unwrap_or(255)
                };
                bytes.push(level);
            }
        }
        let sidecar = format!("min\t{lo}\nmax\t{hi}\n");
        Ok((bytes, sidecar))
    }
}
