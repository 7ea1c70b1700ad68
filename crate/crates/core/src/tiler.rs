//! Splitting rasters into engine-importable tiles, tile image IO and the
//! inverse reassembly used for verification.
//!
//! Tile `(col, row)` is named `{basename}_x{col}_y{row}`; row 0 is the
//! northernmost tile and column 0 the westernmost. Edge tiles are padded on
//! their east and south sides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridSpec, RasterGrid};
use crate::io::{self, ImageError};
use crate::par;

/// Landscape component resolutions the engine import recommends.
pub const RECOMMENDED_TILE_SIZES: [usize; 6] = [127, 253, 505, 1009, 2017, 4033];
pub const DEFAULT_TILE_SIZE: usize = 1009;

#[derive(Debug, Error)]
pub enum TileError {
    #[error("tile size must be positive")]
    ZeroTileSize,
    #[error("tile set is missing tile ({col}, {row})")]
    MissingTile { col: usize, row: usize },
    #[error("tile ({col}, {row}) lies outside the {cols}x{rows} tile grid")]
    ExtraTile { col: usize, row: usize, cols: usize, rows: usize },
    #[error("tile ({col}, {row}) is not {size}x{size}")]
    TileShape { col: usize, row: usize, size: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: String,
        #[source]
        source: ImageError,
    },
    #[error("{path}: expected {expected}-bit {size}x{size} image")]
    ImageShape { path: String, expected: u8, size: usize },
    #[error("invalid quantization range [{0}, {1}]")]
    BadRange(f64, f64),
}

/// What a tile set carries, which fixes its padding and bit depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TileRole {
    /// Edge-replicated padding, 16-bit output.
    Heightmap,
    /// Zero padding, 8-bit output.
    Mask,
}

impl TileRole {
    pub fn bit_depth(self) -> u8 {
        match self {
            TileRole::Heightmap => 16,
            TileRole::Mask => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamingScheme {
    pub basename: String,
}

impl NamingScheme {
    pub const PATTERN: &'static str = "{basename}_x{col}_y{row}";

    pub fn new(basename: impl Into<String>) -> Self {
        NamingScheme {
            basename: basename.into(),
        }
    }

    pub fn name(&self, col: usize, row: usize) -> String {
        format!("{}_x{col}_y{row}", self.basename)
    }

    /// Inverse of [`NamingScheme::name`]; rejects padded or signed numbers.
    pub fn parse(&self, name: &str) -> Option<(usize, usize)> {
        let rest = name.strip_prefix(&self.basename)?.strip_prefix("_x")?;
        let (col, row) = rest.split_once("_y")?;
        Some((parse_plain_uint(col)?, parse_plain_uint(row)?))
    }
}

fn parse_plain_uint(s: &str) -> Option<usize> {
    let canonical = !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && (s == "0" || !s.starts_with('0'));
    canonical.then(|| s.parse().ok()).flatten()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileSet {
    pub tiles: BTreeMap<(usize, usize), RasterGrid>,
    pub tile_size: usize,
    pub naming: NamingScheme,
    pub role: TileRole,
    /// Width and height of the source before padding.
    pub valid_region: (usize, usize),
    pub source_origin: [f64; 2],
    pub cell_spacing: f64,
    pub nodata: f64,
    pub cols: usize,
    pub rows: usize,
}

impl TileSet {
    pub fn bit_depth(&self) -> u8 {
        self.role.bit_depth()
    }
}

/// Splits `grid` into `tile_size`² tiles.
pub fn retile(grid: &RasterGrid, tile_size: usize, naming: NamingScheme, role: TileRole) -> Result<TileSet, TileError> {
    if tile_size == 0 {
        return Err(TileError::ZeroTileSize);
    }
    if !RECOMMENDED_TILE_SIZES.contains(&tile_size) {
        log::warn!("tile size {tile_size} is not an engine-recommended landscape resolution");
    }
    let (w, h) = (grid.width, grid.height);
    let cols = w.div_ceil(tile_size);
    let rows = h.div_ceil(tile_size);
    let s = tile_size;
    let cs = grid.cell_spacing;
    let top = grid.origin[1] + h as f64 * cs;
    let keys: Vec<(usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (c, r))).collect();
    let tiles = par::map(&keys, |&(col, row)| {
        let spec = GridSpec {
            origin: [grid.origin[0] + (col * s) as f64 * cs, top - ((row + 1) * s) as f64 * cs],
            cell_spacing: cs,
            width: s,
            height: s,
        };
        let mut tile = RasterGrid::filled(spec, 0.0, grid.nodata);
        for lr in 0..s {
            // North-down index of this tile row within the source.
            let north = row * s + (s - 1 - lr);
            for lc in 0..s {
                let sc = col * s + lc;
                let v = if sc < w && north < h {
                    grid.get(sc, h - 1 - north)
                } else {
                    match role {
                        TileRole::Heightmap => grid.get(sc.min(w - 1), h - 1 - north.min(h - 1)),
                        TileRole::Mask => 0.0,
                    }
                };
                tile.set(lc, lr, v);
            }
        }
        ((col, row), tile)
    });
    Ok(TileSet {
        tiles: tiles.into_iter().collect(),
        tile_size,
        naming,
        role,
        valid_region: (w, h),
        source_origin: grid.origin,
        cell_spacing: cs,
        nodata: grid.nodata,
        cols,
        rows,
    })
}

/// Reassembles tiles and crops to the valid region.
pub fn reassemble(set: &TileSet) -> Result<RasterGrid, TileError> {
    let s = set.tile_size;
    for row in 0..set.rows {
        for col in 0..set.cols {
            let t = set.tiles.get(&(col, row)).ok_or(TileError::MissingTile { col, row })?;
            if t.width != s || t.height != s {
                return Err(TileError::TileShape { col, row, size: s });
            }
        }
    }
    if let Some(&(col, row)) = set.tiles.keys().find(|(c, r)| *c >= set.cols || *r >= set.rows) {
        return Err(TileError::ExtraTile {
            col,
            row,
            cols: set.cols,
            rows: set.rows,
        });
    }
    let (w, h) = set.valid_region;
    let spec = GridSpec {
        origin: set.source_origin,
        cell_spacing: set.cell_spacing,
        width: w,
        height: h,
    };
    let mut out = RasterGrid::filled(spec, set.nodata, set.nodata);
    for sr in 0..h {
        let north = h - 1 - sr;
        let (row, lr) = (north / s, s - 1 - north % s);
        for sc in 0..w {
            let (col, lc) = (sc / s, sc % s);
            out.set(sc, sr, set.tiles[&(col, row)].get(lc, lr));
        }
    }
    Ok(out)
}

/// Linear quantization onto the output bit depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QuantSpec {
    /// `[z_min, z_max]` onto `[0, 65535]`.
    Height16 { z_min: f64, z_max: f64 },
    /// `[0, 1]` onto `[0, 255]`.
    Mask8,
}

impl QuantSpec {
    fn bounds(&self) -> (f64, f64, f64) {
        match *self {
            QuantSpec::Height16 { z_min, z_max } => (z_min, z_max, 65535.0),
            QuantSpec::Mask8 => (0.0, 1.0, 255.0),
        }
    }

    /// Quantized level of `v` (round half to even) and whether it was
    /// clamped into range.
    pub fn quantize(&self, v: f64) -> (u16, bool) {
        let (lo, hi, levels) = self.bounds();
        let span = hi - lo;
        let t = if span > 0.0 { (v - lo) / span * levels } else { 0.0 };
        let q = t.round_ties_even();
        if q.is_nan() || q < 0.0 {
            (0, true)
        } else if q > levels {
            (levels as u16, true)
        } else {
            (q as u16, false)
        }
    }

    pub fn dequantize(&self, q: u16) -> f64 {
        let (lo, hi, levels) = self.bounds();
        lo + q as f64 / levels * (hi - lo)
    }

    /// Width of one quantization level in source units.
    pub fn step(&self) -> f64 {
        let (lo, hi, levels) = self.bounds();
        (hi - lo) / levels
    }

    pub fn bit_depth(&self) -> u8 {
        match self {
            QuantSpec::Height16 { .. } => 16,
            QuantSpec::Mask8 => 8,
        }
    }
}

/// Import scale factors in engine centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineScale {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EngineScale {
    /// x = y = spacing in cm; z = height range in cm over the engine's
    /// 512-unit 16-bit height convention.
    pub fn for_tiles(cell_spacing: f64, quant: &QuantSpec) -> Self {
        let z = match *quant {
            QuantSpec::Height16 { z_min, z_max } => (z_max - z_min) * 100.0 / 512.0,
            QuantSpec::Mask8 => 100.0 / 512.0,
        };
        EngineScale {
            x: cell_spacing * 100.0,
            y: cell_spacing * 100.0,
            z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileFile {
    pub name: String,
    /// Relative to the output directory.
    pub path: String,
    pub col: usize,
    pub row: usize,
    pub sha256: String,
    pub bytes: usize,
    /// Cells clamped into the quantization range (nodata included).
    pub clamped: usize,
}

/// Manifest fragment describing one written tile set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileSetEntry {
    pub basename: String,
    pub role: TileRole,
    pub naming_pattern: String,
    pub row_origin: String,
    pub bit_depth: u8,
    pub tile_size: usize,
    pub cols: usize,
    pub rows: usize,
    pub valid_width: usize,
    pub valid_height: usize,
    pub origin: [f64; 2],
    pub cell_spacing: f64,
    pub nodata: f64,
    pub quantization: QuantSpec,
    pub engine_scale: EngineScale,
    pub files: Vec<TileFile>,
}

impl TileSetEntry {
    pub fn naming(&self) -> NamingScheme {
        NamingScheme::new(self.basename.clone())
    }
}

/// Quantizes every tile and writes one grayscale PNG per tile into
/// `out_dir`. Files are listed ordered by `(row, col)`.
pub fn write_tiles(set: &TileSet, quant: QuantSpec, out_dir: &Path, rel_prefix: &str) -> Result<TileSetEntry, TileError> {
    if let QuantSpec::Height16 { z_min, z_max } = quant {
        if !(z_min.is_finite() && z_max.is_finite() && z_max >= z_min) {
            return Err(TileError::BadRange(z_min, z_max));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|source| TileError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut keys: Vec<(usize, usize)> = set.tiles.keys().copied().collect();
    keys.sort_by_key(|&(c, r)| (r, c));
    let encoded = par::map(&keys, |&(col, row)| {
        let tile = &set.tiles[&(col, row)];
        let s = set.tile_size;
        let mut clamped = 0;
        let mut levels = Vec::with_capacity(s * s);
        for lr in (0..s).rev() {
            for lc in 0..s {
                let v = tile.get(lc, lr);
                let (q, c) = if tile.is_data(v) { quant.quantize(v) } else { (0, true) };
                clamped += c as usize;
                levels.push(q);
            }
        }
        let png = match quant {
            QuantSpec::Height16 { .. } => io::encode_gray16(s as u32, s as u32, &levels),
            QuantSpec::Mask8 => {
                let px: Vec<u8> = levels.iter().map(|&q| q as u8).collect();
                io::encode_gray8(s as u32, s as u32, &px)
            }
        };
        (col, row, png, clamped)
    });
    let mut files = Vec::with_capacity(encoded.len());
    for (col, row, png, clamped) in encoded {
        let name = set.naming.name(col, row);
        let file = format!("{name}.png");
        let path = out_dir.join(&file);
        let png = png.map_err(|source| TileError::Image {
            path: path.display().to_string(),
            source,
        })?;
        std::fs::write(&path, &png).map_err(|source| TileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        files.push(TileFile {
            name,
            path: if rel_prefix.is_empty() { file } else { format!("{rel_prefix}/{file}") },
            col,
            row,
            sha256: io::sha256_hex(&png),
            bytes: png.len(),
            clamped,
        });
    }
    Ok(TileSetEntry {
        basename: set.naming.basename.clone(),
        role: set.role,
        naming_pattern: NamingScheme::PATTERN.to_string(),
        row_origin: "north".into(),
        bit_depth: quant.bit_depth(),
        tile_size: set.tile_size,
        cols: set.cols,
        rows: set.rows,
        valid_width: set.valid_region.0,
        valid_height: set.valid_region.1,
        origin: set.source_origin,
        cell_spacing: set.cell_spacing,
        nodata: set.nodata,
        quantization: quant,
        engine_scale: EngineScale::for_tiles(set.cell_spacing, &quant),
        files,
    })
}

/// Reads back and dequantizes the tiles listed in `entry`, with paths
/// resolved against `root`.
pub fn read_tiles(entry: &TileSetEntry, root: &Path) -> Result<TileSet, TileError> {
    let s = entry.tile_size;
    let cs = entry.cell_spacing;
    let top = entry.origin[1] + entry.valid_height as f64 * cs;
    let mut tiles = BTreeMap::new();
    for f in &entry.files {
        let path = root.join(&f.path);
        let bytes = std::fs::read(&path).map_err(|source| TileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let img = io::decode_gray(&bytes).map_err(|source| TileError::Image {
            path: path.display().to_string(),
            source,
        })?;
        if img.bit_depth != entry.bit_depth || img.width as usize != s || img.height as usize != s {
            return Err(TileError::ImageShape {
                path: path.display().to_string(),
                expected: entry.bit_depth,
                size: s,
            });
        }
        let spec = GridSpec {
            origin: [entry.origin[0] + (f.col * s) as f64 * cs, top - ((f.row + 1) * s) as f64 * cs],
            cell_spacing: cs,
            width: s,
            height: s,
        };
        let mut tile = RasterGrid::filled(spec, 0.0, entry.nodata);
        for (i, &q) in img.samples.iter().enumerate() {
            let (lc, top_row) = (i % s, i / s);
            tile.set(lc, s - 1 - top_row, entry.quantization.dequantize(q));
        }
        tiles.insert((f.col, f.row), tile);
    }
    Ok(TileSet {
        tiles,
        tile_size: s,
        naming: entry.naming(),
        role: entry.role,
        valid_region: (entry.valid_width, entry.valid_height),
        source_origin: entry.origin,
        cell_spacing: cs,
        nodata: entry.nodata,
        cols: entry.cols,
        rows: entry.rows,
    })
}

/// Serializes a grid as ESRI ASCII, north row first. Values use the
/// shortest representation that parses back to the same f64.
pub fn write_esri_ascii_grid(grid: &RasterGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", grid.width);
    let _ = writeln!(out, "nrows {}", grid.height);
    let _ = writeln!(out, "xllcorner {}", grid.origin[0]);
    let _ = writeln!(out, "yllcorner {}", grid.origin[1]);
    let _ = writeln!(out, "cellsize {}", grid.cell_spacing);
    let _ = writeln!(out, "NODATA_value {}", grid.nodata);
    for row in (0..grid.height).rev() {
        let line: Vec<String> = (0..grid.width).map(|c| grid.get(c, row).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_NODATA;
    use crate::ingest::parse_esri_ascii_grid;

    fn ramp(w: usize, h: usize) -> RasterGrid {
        let spec = GridSpec::new([100.0, 200.0], 2.0, w, h).unwrap();
        RasterGrid::from_values(spec, (0..w * h).map(|i| i as f64).collect(), DEFAULT_NODATA).unwrap()
    }

    #[test]
    fn sixteen_tiles_named_by_col_row() {
        let g = RasterGrid::filled(GridSpec::new([0.0, 0.0], 1.0, 2048, 2048).unwrap(), 1.0, DEFAULT_NODATA);
        let set = retile(&g, 512, NamingScheme::new("height"), TileRole::Heightmap).unwrap();
        assert_eq!(set.tiles.len(), 16);
        let names: Vec<String> = set.tiles.keys().map(|&(c, r)| set.naming.name(c, r)).collect();
        assert!(names.contains(&"height_x0_y0".to_string()));
        assert!(names.contains(&"height_x3_y3".to_string()));
    }

    #[test]
    fn padded_tiles_reassemble() {
        let g = ramp(100, 100);
        let set = retile(&g, 64, NamingScheme::new("t"), TileRole::Heightmap).unwrap();
        assert_eq!((set.cols, set.rows, set.tiles.len()), (2, 2, 4));
        assert_eq!(set.valid_region, (100, 100));
        // East padding strip of tile (1, 0) replicates the last source column.
        let t = &set.tiles[&(1, 0)];
        assert_eq!(t.get(63, 63), g.get(99, 99));
        // South padding of the bottom tiles (rows 0..28 local) replicates row 0.
        let b = &set.tiles[&(0, 1)];
        assert_eq!(b.get(5, 0), g.get(5, 0));
        assert_eq!(b.get(5, 27), g.get(5, 0));
        assert_eq!(b.get(5, 28), g.get(5, 0));
        assert_eq!(b.get(5, 29), g.get(5, 1));
        assert_eq!(reassemble(&set).unwrap(), g);

        let masks = retile(&g, 64, NamingScheme::new("m"), TileRole::Mask).unwrap();
        assert_eq!(masks.tiles[&(1, 0)].get(63, 63), 0.0);
        assert_eq!(reassemble(&masks).unwrap(), g);
    }

    #[test]
    fn small_grid_single_tile() {
        let g = ramp(5, 3);
        let set = retile(&g, 127, NamingScheme::new("t"), TileRole::Mask).unwrap();
        assert_eq!(set.tiles.len(), 1);
        assert_eq!(reassemble(&set).unwrap(), g);
    }

    #[test]
    fn tile_origins_are_geographic() {
        let g = ramp(100, 100);
        let set = retile(&g, 64, NamingScheme::new("t"), TileRole::Mask).unwrap();
        // Row 0 is north: its top edge is the source's top edge.
        let t = &set.tiles[&(0, 0)];
        assert_eq!(t.origin[1] + 64.0 * 2.0, 200.0 + 100.0 * 2.0);
        assert_eq!(t.get(0, 63), g.get(0, 99));
        assert_eq!(t.sample_bilinear([101.0, 399.0]), g.sample_bilinear([101.0, 399.0]));
    }

    #[test]
    fn missing_tile_is_an_error() {
        let g = ramp(100, 50);
        let mut set = retile(&g, 64, NamingScheme::new("t"), TileRole::Mask).unwrap();
        set.tiles.remove(&(1, 0));
        assert!(matches!(reassemble(&set), Err(TileError::MissingTile { col: 1, row: 0 })));
    }

    #[test]
    fn naming_parse_inverts() {
        let n = NamingScheme::new("forest");
        assert_eq!(n.parse(&n.name(12, 0)), Some((12, 0)));
        assert_eq!(n.parse("forest_x01_y0"), None);
        assert_eq!(n.parse("forest_x1_y"), None);
        assert_eq!(n.parse("water_x1_y1"), None);
    }

    #[test]
    fn quantization_endpoints_and_midpoint() {
        assert_eq!(QuantSpec::Mask8.quantize(1.0), (255, false));
        assert_eq!(QuantSpec::Mask8.quantize(0.0), (0, false));
        let h = QuantSpec::Height16 { z_min: 10.0, z_max: 20.0 };
        assert_eq!(h.quantize(10.0), (0, false));
        assert_eq!(h.quantize(20.0), (65535, false));
        // 0.5 * 65535 = 32767.5 rounds half to even.
        assert_eq!(h.quantize(15.0), (32768, false));
        assert_eq!(h.quantize(25.0), (65535, true));
        assert_eq!(h.quantize(-5.0), (0, true));
    }

    #[test]
    fn engine_scale() {
        let s = EngineScale::for_tiles(2.0, &QuantSpec::Height16 { z_min: 0.0, z_max: 512.0 });
        assert_eq!((s.x, s.y, s.z), (200.0, 200.0, 100.0));
    }

    #[test]
    fn png_round_trip_within_one_step() {
        let g = ramp(70, 40);
        let set = retile(&g, 32, NamingScheme::new("h"), TileRole::Heightmap).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let quant = QuantSpec::Height16 { z_min: 0.0, z_max: 2799.0 };
        let entry = write_tiles(&set, quant, dir.path(), "").unwrap();
        assert_eq!(entry.files.len(), 6);
        assert_eq!(entry.files[1].name, "h_x1_y0");
        let back = reassemble(&read_tiles(&entry, dir.path()).unwrap()).unwrap();
        for (a, b) in g.values.iter().zip(&back.values) {
            assert!((a - b).abs() <= quant.step() * 0.5 + 1e-9);
        }
    }

    #[test]
    fn ascii_writer_round_trip() {
        let mut g = ramp(7, 3);
        g.values[4] = 0.1 + 0.2;
        g.values[5] = DEFAULT_NODATA;
        let back = parse_esri_ascii_grid(write_esri_ascii_grid(&g).as_bytes()).unwrap();
        assert_eq!(back, g);
    }
}
