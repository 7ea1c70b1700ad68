//! The uniform cell grid used for every raster intermediate.
//!
//! Rows are stored south-up: row 0 is the southernmost row and its cells
//! span `origin[1] .. origin[1] + cell_spacing`. Cell `(col, row)` has its
//! center at `origin + (col + 0.5, row + 0.5) * cell_spacing`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("cell spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("value array has {actual} cells, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// Placement and resolution of a grid, without values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Lower-left corner of cell (0, 0), meters.
    pub origin: [f64; 2],
    /// Square cell edge length, meters.
    pub cell_spacing: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(origin: [f64; 2], cell_spacing: f64, width: usize, height: usize) -> Result<Self, GridError> {
        let spec = GridSpec {
            origin,
            cell_spacing,
            width,
            height,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.width == 0 || self.height == 0 {
            return Err(GridError::EmptyDimensions {
                width: self.width,
                height: self.height,
            });
        }
        if !(self.cell_spacing > 0.0 && self.cell_spacing.is_finite()) {
            return Err(GridError::BadSpacing(self.cell_spacing));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_center(&self, col: usize, row: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.cell_spacing,
            self.origin[1] + (row as f64 + 0.5) * self.cell_spacing,
        ]
    }

    /// Upper-right corner of the grid.
    pub fn max_corner(&self) -> [f64; 2] {
        [
            self.origin[0] + self.width as f64 * self.cell_spacing,
            self.origin[1] + self.height as f64 * self.cell_spacing,
        ]
    }

    /// Continuous cell-center coordinates of a world point: integer values
    /// land exactly on cell centers.
    pub fn to_cell_coords(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.origin[0]) / self.cell_spacing - 0.5,
            (p[1] - self.origin[1]) / self.cell_spacing - 0.5,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterGrid {
    pub origin: [f64; 2],
    pub cell_spacing: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major, south-up.
    pub values: Vec<f64>,
    pub nodata: f64,
}

pub const DEFAULT_NODATA: f64 = -9999.0;

impl RasterGrid {
    pub fn from_values(spec: GridSpec, values: Vec<f64>, nodata: f64) -> Result<Self, GridError> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(GridError::LengthMismatch {
                expected: spec.len(),
                actual: values.len(),
            });
        }
        Ok(RasterGrid {
            origin: spec.origin,
            cell_spacing: spec.cell_spacing,
            width: spec.width,
            height: spec.height,
            values,
            nodata,
        })
    }

    pub fn filled(spec: GridSpec, value: f64, nodata: f64) -> Self {
        RasterGrid {
            origin: spec.origin,
            cell_spacing: spec.cell_spacing,
            width: spec.width,
            height: spec.height,
            values: vec![value; spec.len()],
            nodata,
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            origin: self.origin,
            cell_spacing: self.cell_spacing,
            width: self.width,
            height: self.height,
        }
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[self.index(col, row)]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: f64) {
        let i = self.index(col, row);
        self.values[i] = v;
    }

    /// Whether `v` is a data value (not the sentinel, not NaN).
    #[inline]
    pub fn is_data(&self, v: f64) -> bool {
        !(v == self.nodata || v.is_nan())
    }

    pub fn data_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|&v| self.is_data(v))
    }

    /// Bilinear interpolation between cell centers, clamped to the outermost
    /// centers. Nodata contributors with nonzero weight yield `None`.
    pub fn sample_bilinear(&self, p: [f64; 2]) -> Option<f64> {
        let [fx, fy] = self.spec().to_cell_coords(p);
        self.sample_bilinear_cells(fx, fy)
    }

    /// Bilinear interpolation in continuous cell-center coordinates.
    pub fn sample_bilinear_cells(&self, fx: f64, fy: f64) -> Option<f64> {
        let (c0, c1, tx) = lerp_indices(fx, self.width);
        let (r0, r1, ty) = lerp_indices(fy, self.height);
        let mut acc = 0.0;
        for (r, wy) in [(r0, 1.0 - ty), (r1, ty)] {
            for (c, wx) in [(c0, 1.0 - tx), (c1, tx)] {
                let w = wx * wy;
                if w == 0.0 {
                    continue;
                }
                let v = self.get(c, r);
                if !self.is_data(v) {
                    return None;
                }
                acc += w * v;
            }
        }
        Some(acc)
    }

    /// Nearest cell-center value, clamped to the grid.
    pub fn sample_nearest_cells(&self, fx: f64, fy: f64) -> Option<f64> {
        let c = nearest_index(fx, self.width);
        let r = nearest_index(fy, self.height);
        let v = self.get(c, r);
        self.is_data(v).then_some(v)
    }
}

/// Lower index, upper index and blend factor for linear interpolation along
/// one axis of `n` samples.
pub(crate) fn lerp_indices(f: f64, n: usize) -> (usize, usize, f64) {
    let max = (n - 1) as f64;
    let f = if f.is_nan() { 0.0 } else { f.clamp(0.0, max) };
    let i0 = f.floor();
    let t = f - i0;
    let i0 = i0 as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, t)
}

pub(crate) fn nearest_index(f: f64, n: usize) -> usize {
    let max = (n - 1) as f64;
    let f = if f.is_nan() { 0.0 } else { f.clamp(0.0, max) };
    (f + 0.5).floor().min(max) as usize
}
