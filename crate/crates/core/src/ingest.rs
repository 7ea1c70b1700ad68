//! Readers for the external input formats: GeoJSON feature collections,
//! ESRI ASCII grids, LAS 1.2 point clouds and plain xyz text.

use serde_json::Value;
use thiserror::Error;

use crate::geom::{self, Point2};
use crate::grid::{GridSpec, RasterGrid, DEFAULT_NODATA};

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("invalid GeoJSON structure: {0}")]
    Structure(String),
    #[error("feature {feature_id}: expected {expected} geometry, found {found}")]
    Kind {
        feature_id: String,
        expected: &'static str,
        found: String,
    },
    #[error("feature {feature_id}: {message}")]
    Geometry { feature_id: String, message: String },
    #[error("feature {feature_id}: missing or empty class property {key:?}")]
    MissingClass { feature_id: String, key: String },
    #[error("ASCII grid header is missing {0}")]
    MissingHeader(&'static str),
    #[error("ASCII grid header value for {key} is invalid: {value:?}")]
    BadHeader { key: String, value: String },
    #[error("ASCII grid row {row} has {found} values, expected {expected}")]
    RowLength { row: usize, expected: usize, found: usize },
    #[error("ASCII grid has {found} data rows, expected {expected}")]
    RowCount { expected: usize, found: usize },
    #[error("ASCII grid row {row}: invalid value {token:?}")]
    BadValue { row: usize, token: String },
    #[error("line {line}: cannot parse {token:?} as a number")]
    XyzParse { line: usize, token: String },
    #[error("line {line}: expected at least 3 coordinates")]
    XyzArity { line: usize },
    #[error("not a LAS file: {0}")]
    LasFormat(String),
    #[error("unsupported point format: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Polygon,
    Polyline,
}

impl LayerKind {
    fn name(self) -> &'static str {
        match self {
            LayerKind::Polygon => "polygon",
            LayerKind::Polyline => "polyline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Closed rings; the first is the exterior, any others are holes.
    Polygon(Vec<Vec<Point2>>),
    Polyline(Vec<Point2>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub geometry: Geometry,
    pub class_label: String,
    pub value: Option<f64>,
    pub feature_id: String,
}

impl Feature {
    pub fn rings(&self) -> &[Vec<Point2>] {
        match &self.geometry {
            Geometry::Polygon(r) => r,
            Geometry::Polyline(_) => &[],
        }
    }

    pub fn polyline(&self) -> &[Point2] {
        match &self.geometry {
            Geometry::Polyline(p) => p,
            Geometry::Polygon(_) => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorLayer {
    pub features: Vec<Feature>,
    pub crs_id: String,
    pub kind: LayerKind,
}

impl VectorLayer {
    pub fn empty(kind: LayerKind, crs_id: impl Into<String>) -> Self {
        VectorLayer {
            features: Vec::new(),
            crs_id: crs_id.into(),
            kind,
        }
    }
}

/// A feature part dropped during ingestion, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestWarning {
    pub feature_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLayer {
    pub layer: VectorLayer,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Clone)]
pub struct GeoJsonOptions {
    /// Property carrying the class label.
    pub class_key: String,
    /// Property carrying the optional numeric value.
    pub value_key: String,
    /// Label used when the class property is absent; `None` makes it an error.
    pub default_class: Option<String>,
    /// CRS identifier when the document carries no `crs` member.
    pub default_crs: String,
}

impl Default for GeoJsonOptions {
    fn default() -> Self {
        GeoJsonOptions {
            class_key: "class".into(),
            value_key: "value".into(),
            default_class: None,
            default_crs: "EPSG:3006".into(),
        }
    }
}

fn byte_offset(text: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current = 1;
    for (i, &b) in text.iter().enumerate() {
        if current == line {
            return (i + column.saturating_sub(1)).min(text.len());
        }
        if b == b'\n' {
            current += 1;
        }
    }
    text.len()
}

/// Parses a GeoJSON FeatureCollection into a layer of `expected` kind.
///
/// Multi-geometries are exploded into one feature per part. Rings that
/// self-intersect are skipped and reported in `warnings`; unclosed or short
/// rings and short polylines are errors.
pub fn parse_geojson_layer(
    bytes: &[u8],
    expected: LayerKind,
    opts: &GeoJsonOptions,
) -> Result<ParsedLayer, IngestError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| IngestError::Json {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(IngestError::Structure("top-level object is not a FeatureCollection".into()));
    }
    let crs_id = doc
        .pointer("/crs/properties/name")
        .and_then(Value::as_str)
        .map(normalize_crs)
        .unwrap_or_else(|| opts.default_crs.clone());
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::Structure("missing features array".into()))?;

    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (index, f) in features.iter().enumerate() {
        let feature_id = match f.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => format!("feature-{index}"),
        };
        let props = f.get("properties").cloned().unwrap_or(Value::Null);
        let class_label = match props.get(&opts.class_key) {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => match &opts.default_class {
                Some(d) => d.clone(),
                None => {
                    return Err(IngestError::MissingClass {
                        feature_id,
                        key: opts.class_key.clone(),
                    })
                }
            },
        };
        let value = props.get(&opts.value_key).and_then(Value::as_f64);
        let geometry = f
            .get("geometry")
            .ok_or_else(|| IngestError::Geometry {
                feature_id: feature_id.clone(),
                message: "missing geometry".into(),
            })?;
        let gtype = geometry.get("type").and_then(Value::as_str).unwrap_or("null");
        let coords = geometry.get("coordinates").unwrap_or(&Value::Null);
        let parts: Vec<Geometry> = match (expected, gtype) {
            (LayerKind::Polygon, "Polygon") => vec![Geometry::Polygon(rings_of(coords, &feature_id)?)],
            (LayerKind::Polygon, "MultiPolygon") => array_of(coords, &feature_id)?
                .iter()
                .map(|p| rings_of(p, &feature_id).map(Geometry::Polygon))
                .collect::<Result<_, _>>()?,
            (LayerKind::Polyline, "LineString") => vec![Geometry::Polyline(points_of(coords, &feature_id)?)],
            (LayerKind::Polyline, "MultiLineString") => array_of(coords, &feature_id)?
                .iter()
                .map(|p| points_of(p, &feature_id).map(Geometry::Polyline))
                .collect::<Result<_, _>>()?,
            _ => {
                return Err(IngestError::Kind {
                    feature_id,
                    expected: expected.name(),
                    found: gtype.to_string(),
                })
            }
        };
        let multi = parts.len() > 1;
        for (k, geometry) in parts.into_iter().enumerate() {
            let id = if multi { format!("{feature_id}:{k}") } else { feature_id.clone() };
            validate_geometry(&geometry, &id)?;
            if let Geometry::Polygon(rings) = &geometry {
                if let Some(bad) = rings.iter().position(|r| !geom::ring_is_simple(r)) {
                    warnings.push(IngestWarning {
                        feature_id: id,
                        message: format!("ring {bad} self-intersects; feature skipped"),
                    });
                    continue;
                }
            }
            out.push(Feature {
                geometry,
                class_label: class_label.clone(),
                value,
                feature_id: id,
            });
        }
    }
    Ok(ParsedLayer {
        layer: VectorLayer {
            features: out,
            crs_id,
            kind: expected,
        },
        warnings,
    })
}

/// Maps the legacy URN spelling onto the short `EPSG:n` form.
fn normalize_crs(name: &str) -> String {
    match name.rsplit_once("EPSG::") {
        Some((_, code)) => format!("EPSG:{code}"),
        None => name.to_string(),
    }
}

fn array_of<'a>(v: &'a Value, id: &str) -> Result<&'a Vec<Value>, IngestError> {
    v.as_array().ok_or_else(|| IngestError::Geometry {
        feature_id: id.to_string(),
        message: "coordinates are not an array".into(),
    })
}

fn point_of(v: &Value, id: &str) -> Result<Point2, IngestError> {
    let bad = || IngestError::Geometry {
        feature_id: id.to_string(),
        message: format!("invalid position {v}"),
    };
    let arr = v.as_array().ok_or_else(bad)?;
    if arr.len() < 2 {
        return Err(bad());
    }
    let x = arr[0].as_f64().ok_or_else(bad)?;
    let y = arr[1].as_f64().ok_or_else(bad)?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(bad());
    }
    Ok([x, y])
}

fn points_of(v: &Value, id: &str) -> Result<Vec<Point2>, IngestError> {
    array_of(v, id)?.iter().map(|p| point_of(p, id)).collect()
}

fn rings_of(v: &Value, id: &str) -> Result<Vec<Vec<Point2>>, IngestError> {
    array_of(v, id)?.iter().map(|r| points_of(r, id)).collect()
}

fn validate_geometry(g: &Geometry, id: &str) -> Result<(), IngestError> {
    let err = |message: String| IngestError::Geometry {
        feature_id: id.to_string(),
        message,
    };
    match g {
        Geometry::Polygon(rings) => {
            if rings.is_empty() {
                return Err(err("polygon has no rings".into()));
            }
            for (i, r) in rings.iter().enumerate() {
                if r.len() < 4 {
                    return Err(err(format!("ring {i} has {} vertices, need at least 4", r.len())));
                }
                if r.first() != r.last() {
                    return Err(err(format!("ring {i} is not closed")));
                }
            }
        }
        Geometry::Polyline(pts) => {
            if pts.len() < 2 {
                return Err(err(format!("polyline has {} vertices, need at least 2", pts.len())));
            }
        }
    }
    Ok(())
}

/// Parses an ESRI ASCII grid. The file's first data row is the northernmost
/// and lands in the last (top) row of the south-up grid.
pub fn parse_esri_ascii_grid(bytes: &[u8]) -> Result<RasterGrid, IngestError> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();

    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut center = (false, false);
    let mut cellsize = None;
    let mut nodata = None;
    while let Some(line) = lines.peek() {
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default();
        if key.parse::<f64>().is_ok() || key.starts_with('-') {
            break;
        }
        let raw = toks.next().unwrap_or_default().to_string();
        let num = |key: &str| -> Result<f64, IngestError> {
            raw.parse::<f64>().map_err(|_| IngestError::BadHeader {
                key: key.to_string(),
                value: raw.clone(),
            })
        };
        let count = |key: &str| -> Result<usize, IngestError> {
            raw.parse::<usize>().map_err(|_| IngestError::BadHeader {
                key: key.to_string(),
                value: raw.clone(),
            })
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(count(key)?),
            "nrows" => nrows = Some(count(key)?),
            "xllcorner" => xll = Some(num(key)?),
            "yllcorner" => yll = Some(num(key)?),
            "xllcenter" => {
                xll = Some(num(key)?);
                center.0 = true;
            }
            "yllcenter" => {
                yll = Some(num(key)?);
                center.1 = true;
            }
            "cellsize" => cellsize = Some(num(key)?),
            "nodata_value" => nodata = Some(num(key)?),
            _ => {
                return Err(IngestError::BadHeader {
                    key: key.to_string(),
                    value: raw,
                })
            }
        }
        lines.next();
    }
    let ncols = ncols.ok_or(IngestError::MissingHeader("ncols"))?;
    let nrows = nrows.ok_or(IngestError::MissingHeader("nrows"))?;
    let mut xll = xll.ok_or(IngestError::MissingHeader("xllcorner"))?;
    let mut yll = yll.ok_or(IngestError::MissingHeader("yllcorner"))?;
    let cellsize = cellsize.ok_or(IngestError::MissingHeader("cellsize"))?;
    let nodata = nodata.unwrap_or(DEFAULT_NODATA);
    if center.0 {
        xll -= 0.5 * cellsize;
    }
    if center.1 {
        yll -= 0.5 * cellsize;
    }
    let spec = GridSpec::new([xll, yll], cellsize, ncols, nrows).map_err(|e| IngestError::BadHeader {
        key: "ncols/nrows/cellsize".into(),
        value: e.to_string(),
    })?;

    let mut values = vec![nodata; ncols * nrows];
    let mut file_row = 0;
    for line in lines {
        if file_row >= nrows {
            return Err(IngestError::RowCount {
                expected: nrows,
                found: file_row + 1,
            });
        }
        let grid_row = nrows - 1 - file_row;
        let dst = &mut values[grid_row * ncols..(grid_row + 1) * ncols];
        let mut found = 0;
        for tok in line.split_whitespace() {
            if found < ncols {
                dst[found] = tok.parse::<f64>().map_err(|_| IngestError::BadValue {
                    row: file_row,
                    token: tok.to_string(),
                })?;
            }
            found += 1;
        }
        if found != ncols {
            return Err(IngestError::RowLength {
                row: file_row,
                expected: ncols,
                found,
            });
        }
        file_row += 1;
    }
    if file_row != nrows {
        return Err(IngestError::RowCount {
            expected: nrows,
            found: file_row,
        });
    }
    Ok(RasterGrid::from_values(spec, values, nodata).expect("dimensions checked above"))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub classification: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFormat {
    XyzText,
    Las,
}

pub fn parse_point_cloud(bytes: &[u8], format: PointFormat) -> Result<PointCloud, IngestError> {
    match format {
        PointFormat::XyzText => parse_xyz(bytes),
        PointFormat::Las => parse_las(bytes),
    }
}

fn parse_xyz(bytes: &[u8]) -> Result<PointCloud, IngestError> {
    let text = String::from_utf8_lossy(bytes);
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let body = line.split('#').next().unwrap_or_default();
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < 3 {
            return Err(IngestError::XyzArity { line: line_no });
        }
        let mut p = [0.0; 3];
        for (slot, tok) in p.iter_mut().zip(&toks) {
            *slot = tok
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::XyzParse {
                    line: line_no,
                    token: tok.to_string(),
                })?;
        }
        points.push(p);
    }
    Ok(PointCloud {
        points,
        classification: None,
    })
}

const LAS_HEADER_SIZE: usize = 227;
const LAS_POINT0_SIZE: usize = 20;

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn le_i32(b: &[u8], at: usize) -> i32 {
    i32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn le_f64(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Reads uncompressed LAS 1.x point records. Formats 0 to 3 share the
/// leading 20-byte layout this reader uses; compressed (LAZ) data is
/// rejected.
fn parse_las(b: &[u8]) -> Result<PointCloud, IngestError> {
    if b.len() < 4 {
        return Err(IngestError::LasFormat("file shorter than signature".into()));
    }
    match &b[..4] {
        b"LASF" => {}
        b"LAZF" => return Err(IngestError::LasFormat("LAZF signature; compressed point clouds are not supported".into())),
        other => return Err(IngestError::LasFormat(format!("bad signature {:?}", String::from_utf8_lossy(other)))),
    }
    if b.len() < LAS_HEADER_SIZE {
        return Err(IngestError::LasFormat("truncated public header".into()));
    }
    let offset_to_points = le_u32(b, 96) as usize;
    let format_id = b[104];
    let record_len = le_u16(b, 105) as usize;
    let count = le_u32(b, 107) as usize;
    if format_id & 0x80 != 0 || format_id & 0x40 != 0 {
        return Err(IngestError::Unsupported(format!(
            "point data format {format_id} is LAZ-compressed"
        )));
    }
    if format_id > 3 {
        return Err(IngestError::Unsupported(format!("point data format {format_id}")));
    }
    if record_len < LAS_POINT0_SIZE {
        return Err(IngestError::LasFormat(format!("point record length {record_len} < 20")));
    }
    let scale = [le_f64(b, 131), le_f64(b, 139), le_f64(b, 147)];
    let offset = [le_f64(b, 155), le_f64(b, 163), le_f64(b, 171)];
    let end = offset_to_points.saturating_add(count.saturating_mul(record_len));
    if end > b.len() {
        return Err(IngestError::LasFormat(format!(
            "{count} records of {record_len} bytes exceed file length {}",
            b.len()
        )));
    }
    let mut points = Vec::with_capacity(count);
    let mut classes = Vec::with_capacity(count);
    for i in 0..count {
        let at = offset_to_points + i * record_len;
        let raw = [le_i32(b, at), le_i32(b, at + 4), le_i32(b, at + 8)];
        points.push([
            raw[0] as f64 * scale[0] + offset[0],
            raw[1] as f64 * scale[1] + offset[1],
            raw[2] as f64 * scale[2] + offset[2],
        ]);
        classes.push(b[at + 15] & 0x1f);
    }
    Ok(PointCloud {
        points,
        classification: Some(classes),
    })
}

/// Writes a LAS 1.2 file with point data format 0 and no VLRs.
pub fn write_las(cloud: &PointCloud, scale: [f64; 3], offset: [f64; 3]) -> Vec<u8> {
    let n = cloud.points.len();
    let mut h = vec![0u8; LAS_HEADER_SIZE];
    h[..4].copy_from_slice(b"LASF");
    h[24] = 1;
    h[25] = 2;
    h[26..26 + 8].copy_from_slice(b"worldgen");
    h[94..96].copy_from_slice(&(LAS_HEADER_SIZE as u16).to_le_bytes());
    h[96..100].copy_from_slice(&(LAS_HEADER_SIZE as u32).to_le_bytes());
    h[104] = 0;
    h[105..107].copy_from_slice(&(LAS_POINT0_SIZE as u16).to_le_bytes());
    h[107..111].copy_from_slice(&(n as u32).to_le_bytes());
    h[111..115].copy_from_slice(&(n as u32).to_le_bytes());
    for (k, v) in scale.iter().chain(offset.iter()).enumerate() {
        h[131 + 8 * k..139 + 8 * k].copy_from_slice(&v.to_le_bytes());
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &cloud.points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    if n == 0 {
        lo = [0.0; 3];
        hi = [0.0; 3];
    }
    // max x, min x, max y, min y, max z, min z
    for a in 0..3 {
        h[179 + 16 * a..187 + 16 * a].copy_from_slice(&hi[a].to_le_bytes());
        h[187 + 16 * a..195 + 16 * a].copy_from_slice(&lo[a].to_le_bytes());
    }
    let mut out = h;
    out.reserve(n * LAS_POINT0_SIZE);
    for (i, p) in cloud.points.iter().enumerate() {
        for a in 0..3 {
            let raw = ((p[a] - offset[a]) / scale[a]).round() as i32;
            out.extend_from_slice(&raw.to_le_bytes());
        }
        out.extend_from_slice(&[0u8; 3]);
        let class = cloud.classification.as_ref().map_or(0, |c| c[i]);
        out.push(class);
        out.extend_from_slice(&[0u8; 4]);
    }
    out
}
