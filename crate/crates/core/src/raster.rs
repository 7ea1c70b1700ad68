//! Grid-space transformations: polygon rasterization, centerline buffering,
//! mosaicking, resampling, Gaussian convolution and per-cell arithmetic.
//!
//! Every operation computes each output cell independently, so row-parallel
//! execution is bit-identical to sequential execution.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, Point2};
use crate::grid::{GridSpec, RasterGrid};
use crate::ingest::{LayerKind, VectorLayer};
use crate::par;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("expected a {expected:?} layer, got {found:?}")]
    WrongKind { expected: LayerKind, found: LayerKind },
    #[error("road class {0:?} has no configured width")]
    UnknownRoadClass(String),
    #[error("invalid road class widths: {0}")]
    BadWidths(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("mosaic needs at least one grid")]
    NoGrids,
    #[error("cell spacing mismatch: {0} vs {1}")]
    SpacingMismatch(f64, f64),
    #[error("grid {index} origin is not a whole number of cells from the first grid")]
    MisalignedOrigin { index: usize },
    #[error("conflicting overlap at cell ({col}, {row}): {a} vs {b}")]
    Conflict { col: usize, row: usize, a: f64, b: f64 },
    #[error("grid specs differ")]
    SpecMismatch,
    #[error("grid has no data cells")]
    AllNodata,
}

/// The four simplified road classes and their full buffer widths (m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct RoadClassWidths(BTreeMap<String, f64>);

impl RoadClassWidths {
    pub const CLASS_COUNT: usize = 4;

    pub fn new(widths: BTreeMap<String, f64>) -> Result<Self, RasterError> {
        if widths.len() != Self::CLASS_COUNT {
            return Err(RasterError::BadWidths(format!(
                "expected exactly {} classes, got {}",
                Self::CLASS_COUNT,
                widths.len()
            )));
        }
        if let Some((k, w)) = widths.iter().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(RasterError::BadWidths(format!("class {k:?} has width {w}")));
        }
        Ok(RoadClassWidths(widths))
    }

    pub fn get(&self, class: &str) -> Option<f64> {
        self.0.get(class).copied()
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

impl TryFrom<BTreeMap<String, f64>> for RoadClassWidths {
    type Error = RasterError;
    fn try_from(m: BTreeMap<String, f64>) -> Result<Self, Self::Error> {
        RoadClassWidths::new(m)
    }
}

impl From<RoadClassWidths> for BTreeMap<String, f64> {
    fn from(w: RoadClassWidths) -> Self {
        w.0
    }
}

/// Columns whose center x lies in `[lo, hi)`.
fn col_range(spec: &GridSpec, lo: f64, hi: f64) -> Range<usize> {
    let w = spec.width;
    let center = |c: usize| spec.cell_center(c, 0)[0];
    let guess = ((lo - spec.origin[0]) / spec.cell_spacing - 0.5).ceil();
    let mut start = if guess.is_nan() || guess < 0.0 { 0 } else { (guess as usize).min(w) };
    while start > 0 && center(start - 1) >= lo {
        start -= 1;
    }
    while start < w && center(start) < lo {
        start += 1;
    }
    let mut end = start;
    let guess = ((hi - spec.origin[0]) / spec.cell_spacing - 0.5).ceil();
    if !guess.is_nan() && guess > end as f64 {
        end = (guess as usize).min(w);
    }
    while end > start && center(end - 1) >= hi {
        end -= 1;
    }
    while end < w && center(end) < hi {
        end += 1;
    }
    start..end
}

/// Cells whose center lies inside any polygon (even-odd rule) become 1.
pub fn rasterize_polygons_binary(layer: &VectorLayer, spec: &GridSpec) -> Result<RasterGrid, RasterError> {
    if layer.kind != LayerKind::Polygon {
        return Err(RasterError::WrongKind {
            expected: LayerKind::Polygon,
            found: layer.kind,
        });
    }
    let features: Vec<(&[Vec<Point2>], f64, f64)> = layer
        .features
        .iter()
        .filter_map(|f| {
            let rings = f.rings();
            let (lo, hi) = geom::bounds(rings.iter().flatten().copied())?;
            Some((rings, lo[1], hi[1]))
        })
        .collect();
    let mut grid = RasterGrid::filled(*spec, 0.0, crate::grid::DEFAULT_NODATA);
    par::for_each_row(&mut grid.values, spec.width, |row, out| {
        let y = spec.cell_center(0, row)[1];
        let mut xs = Vec::new();
        for (rings, ymin, ymax) in &features {
            if y < *ymin || y > *ymax {
                continue;
            }
            xs.clear();
            for ring in rings.iter() {
                geom::ring_crossings(ring, y, &mut xs);
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                for c in col_range(spec, pair[0], pair[1]) {
                    out[c] = 1.0;
                }
            }
        }
    });
    Ok(grid)
}

/// Cells whose center is within half the class width of any centerline
/// segment become 1. The distance metric gives round caps and joins.
pub fn rasterize_buffered_polylines(
    layer: &VectorLayer,
    widths: &RoadClassWidths,
    spec: &GridSpec,
) -> Result<RasterGrid, RasterError> {
    if layer.kind != LayerKind::Polyline {
        return Err(RasterError::WrongKind {
            expected: LayerKind::Polyline,
            found: layer.kind,
        });
    }
    let mut segments: Vec<(Point2, Point2, f64)> = Vec::new();
    for f in &layer.features {
        let w = widths
            .get(&f.class_label)
            .ok_or_else(|| RasterError::UnknownRoadClass(f.class_label.clone()))?;
        let half = 0.5 * w;
        for s in f.polyline().windows(2) {
            segments.push((s[0], s[1], half));
        }
    }
    let mut grid = RasterGrid::filled(*spec, 0.0, crate::grid::DEFAULT_NODATA);
    par::for_each_row(&mut grid.values, spec.width, |row, out| {
        let y = spec.cell_center(0, row)[1];
        for &(a, b, half) in &segments {
            if y < a[1].min(b[1]) - half || y > a[1].max(b[1]) + half {
                continue;
            }
            let lo = a[0].min(b[0]) - half;
            let hi = a[0].max(b[0]) + half;
            let r2 = half * half;
            for c in col_range(spec, lo, f64::from_bits(hi.to_bits() + 1)) {
                if out[c] == 0.0 && geom::point_segment_distance_sq(spec.cell_center(c, row), a, b) <= r2 {
                    out[c] = 1.0;
                }
            }
        }
    });
    Ok(grid)
}

/// Joins aligned grids of equal spacing into one grid covering their union.
pub fn mosaic(grids: &[RasterGrid]) -> Result<RasterGrid, RasterError> {
    let first = grids.first().ok_or(RasterError::NoGrids)?;
    let s = first.cell_spacing;
    let mut offsets = Vec::with_capacity(grids.len());
    for (i, g) in grids.iter().enumerate() {
        if (g.cell_spacing - s).abs() > 1e-12 * s {
            return Err(RasterError::SpacingMismatch(s, g.cell_spacing));
        }
        let mut off = [0i64; 2];
        for a in 0..2 {
            let f = (g.origin[a] - first.origin[a]) / s;
            let r = f.round();
            if (f - r).abs() > 1e-6 {
                return Err(RasterError::MisalignedOrigin { index: i });
            }
            off[a] = r as i64;
        }
        offsets.push(off);
    }
    let min_c = offsets.iter().map(|o| o[0]).min().unwrap();
    let min_r = offsets.iter().map(|o| o[1]).min().unwrap();
    let max_c = grids.iter().zip(&offsets).map(|(g, o)| o[0] + g.width as i64).max().unwrap();
    let max_r = grids.iter().zip(&offsets).map(|(g, o)| o[1] + g.height as i64).max().unwrap();
    let spec = GridSpec {
        origin: [first.origin[0] + min_c as f64 * s, first.origin[1] + min_r as f64 * s],
        cell_spacing: s,
        width: (max_c - min_c) as usize,
        height: (max_r - min_r) as usize,
    };
    let mut out = RasterGrid::filled(spec, first.nodata, first.nodata);
    for (g, o) in grids.iter().zip(&offsets) {
        let c0 = (o[0] - min_c) as usize;
        let r0 = (o[1] - min_r) as usize;
        for row in 0..g.height {
            for col in 0..g.width {
                let v = g.get(col, row);
                if !g.is_data(v) {
                    continue;
                }
                let (oc, or) = (c0 + col, r0 + row);
                let existing = out.get(oc, or);
                if out.is_data(existing) {
                    if (existing - v).abs() > 1e-6 {
                        return Err(RasterError::Conflict {
                            col: oc,
                            row: or,
                            a: existing,
                            b: v,
                        });
                    }
                } else {
                    out.set(oc, or, v);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleMethod {
    Bilinear,
    Nearest,
}

/// Resamples onto a new spacing over the same origin and (rounded) extent.
pub fn resample(grid: &RasterGrid, new_spacing: f64, method: ResampleMethod) -> Result<RasterGrid, RasterError> {
    if !(new_spacing > 0.0 && new_spacing.is_finite()) {
        return Err(RasterError::BadParameter(format!("new spacing {new_spacing}")));
    }
    let ratio = new_spacing / grid.cell_spacing;
    let width = ((grid.width as f64 / ratio).round() as usize).max(1);
    let height = ((grid.height as f64 / ratio).round() as usize).max(1);
    let spec = GridSpec {
        origin: grid.origin,
        cell_spacing: new_spacing,
        width,
        height,
    };
    let mut out = RasterGrid::filled(spec, grid.nodata, grid.nodata);
    par::for_each_row(&mut out.values, width, |row, dst| {
        let fy = (row as f64 + 0.5) * ratio - 0.5;
        for (col, cell) in dst.iter_mut().enumerate() {
            let fx = (col as f64 + 0.5) * ratio - 0.5;
            let v = match method {
                ResampleMethod::Bilinear => grid.sample_bilinear_cells(fx, fy),
                ResampleMethod::Nearest => grid.sample_nearest_cells(fx, fy),
            };
            if let Some(v) = v {
                *cell = v;
            }
        }
    });
    Ok(out)
}

/// Gaussian kernel parameters in cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub sigma: f64,
    pub radius: usize,
}

impl GaussianParams {
    /// Radius defaults to 3σ rounded up.
    pub fn with_sigma(sigma: f64) -> Self {
        GaussianParams {
            sigma,
            radius: ((3.0 * sigma).ceil() as usize).max(1),
        }
    }
}

impl Default for GaussianParams {
    fn default() -> Self {
        GaussianParams::with_sigma(2.0)
    }
}

/// Unnormalized 1D weights `exp(-i²/2σ²)` for `i` in `-radius..=radius`.
fn gaussian_weights(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Whole-sample symmetric reflection: `.. 1 0 | 0 1 .. n-1 | n-1 n-2 ..`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let p = 2 * n as isize;
    let m = i.rem_euclid(p) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// Normalized 2D Gaussian blur with reflect padding. Nodata cells stay
/// nodata and are left out of their neighbours' weighted sums.
pub fn gaussian_convolve(grid: &RasterGrid, params: GaussianParams) -> Result<RasterGrid, RasterError> {
    if !(params.sigma > 0.0 && params.sigma.is_finite()) {
        return Err(RasterError::BadParameter(format!("sigma {}", params.sigma)));
    }
    if params.radius < 1 {
        return Err(RasterError::BadParameter("radius must be at least 1".into()));
    }
    let k = gaussian_weights(params.sigma, params.radius);
    let has_nodata = grid.values.iter().any(|&v| !grid.is_data(v));
    if has_nodata {
        Ok(convolve_masked(grid, &k, params.radius))
    } else {
        Ok(convolve_separable(grid, &k, params.radius))
    }
}

fn convolve_separable(grid: &RasterGrid, k: &[f64], radius: usize) -> RasterGrid {
    let total: f64 = k.iter().sum();
    let k: Vec<f64> = k.iter().map(|w| w / total).collect();
    let (w, h) = (grid.width, grid.height);
    let r = radius as isize;
    let mut tmp = grid.clone();
    par::for_each_row(&mut tmp.values, w, |row, dst| {
        let src = &grid.values[row * w..(row + 1) * w];
        for (col, cell) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, wt) in k.iter().enumerate() {
                acc += wt * src[reflect(col as isize + t as isize - r, w)];
            }
            *cell = acc;
        }
    });
    let mut out = grid.clone();
    par::for_each_row(&mut out.values, w, |row, dst| {
        for (col, cell) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, wt) in k.iter().enumerate() {
                acc += wt * tmp.values[reflect(row as isize + t as isize - r, h) * w + col];
            }
            *cell = acc;
        }
    });
    out
}

fn convolve_masked(grid: &RasterGrid, k: &[f64], radius: usize) -> RasterGrid {
    let (w, h) = (grid.width, grid.height);
    let r = radius as isize;
    let mut out = grid.clone();
    par::for_each_row(&mut out.values, w, |row, dst| {
        for (col, cell) in dst.iter_mut().enumerate() {
            if !grid.is_data(grid.get(col, row)) {
                continue;
            }
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (ty, wy) in k.iter().enumerate() {
                let sr = reflect(row as isize + ty as isize - r, h);
                for (tx, wx) in k.iter().enumerate() {
                    let v = grid.get(reflect(col as isize + tx as isize - r, w), sr);
                    if grid.is_data(v) {
                        let wt = wx * wy;
                        acc += wt * v;
                        wsum += wt;
                    }
                }
            }
            *cell = acc / wsum;
        }
    });
    out
}

/// `max(0, a - b)` per cell; nodata in either input gives nodata.
pub fn subtract_clamp(a: &RasterGrid, b: &RasterGrid) -> Result<RasterGrid, RasterError> {
    if a.spec() != b.spec() {
        return Err(RasterError::SpecMismatch);
    }
    let mut out = a.clone();
    for (i, o) in out.values.iter_mut().enumerate() {
        let (va, vb) = (a.values[i], b.values[i]);
        *o = if a.is_data(va) && b.is_data(vb) {
            (va - vb).max(0.0)
        } else {
            a.nodata
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub grid: RasterGrid,
    pub min: f64,
    pub max: f64,
    /// Set when every data cell had the same value; all outputs are 0.
    pub degenerate: bool,
}

/// Min-max normalization of data cells into `[0, 1]`.
pub fn normalize_minmax(grid: &RasterGrid) -> Result<Normalized, RasterError> {
    let (min, max) = grid
        .data_values()
        .fold(None, |acc: Option<(f64, f64)>, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
        .ok_or(RasterError::AllNodata)?;
    let degenerate = max == min;
    let mut out = grid.clone();
    for v in out.values.iter_mut() {
        if grid.is_data(*v) {
            *v = if degenerate { 0.0 } else { (*v - min) / (max - min) };
        }
    }
    Ok(Normalized {
        grid: out,
        min,
        max,
        degenerate,
    })
}
