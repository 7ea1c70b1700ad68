//! LoD1 buildings: per-footprint height from the point cloud, terrain
//! alignment, prism extrusion and OBJ export.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, Point2};
use crate::grid::RasterGrid;
use crate::ingest::{Feature, Geometry, PointCloud};
pub use crate::mesh::TriangleMesh;
use crate::mesh;
use crate::par;

/// Depth the base is sunk below the lowest terrain sample, meters.
pub const TERRAIN_SINK: f64 = 0.2;
pub const DEFAULT_FALLBACK_HEIGHT: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum BuildingError {
    #[error("footprint {0} has interior rings")]
    HasHoles(String),
    #[error("footprint {0} self-intersects")]
    NotSimple(String),
    #[error("footprint {0} has zero area")]
    ZeroArea(String),
    #[error("feature {0} is not a polygon")]
    NotPolygon(String),
    #[error("footprint {0} lies outside the terrain extent")]
    OutsideTerrain(String),
    #[error("footprint {0} has no terrain data beneath it")]
    NoTerrainData(String),
    #[error("extrusion height must be positive, got {0}")]
    BadHeight(f64),
    #[error("footprint {0} could not be triangulated")]
    Triangulation(String),
}

/// A simple exterior ring, counterclockwise and closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub exterior_ring: Vec<Point2>,
    pub feature_id: String,
}

impl Footprint {
    pub fn new(ring: Vec<Point2>, feature_id: impl Into<String>) -> Result<Self, BuildingError> {
        let feature_id = feature_id.into();
        let mut ring = ring;
        if ring.first() != ring.last() {
            if let Some(&first) = ring.first() {
                ring.push(first);
            }
        }
        if ring.len() < 4 || !geom::ring_is_simple(&ring) {
            return Err(BuildingError::NotSimple(feature_id));
        }
        let area = geom::ring_signed_area(&ring);
        if area == 0.0 {
            return Err(BuildingError::ZeroArea(feature_id));
        }
        if area < 0.0 {
            ring.reverse();
        }
        Ok(Footprint {
            exterior_ring: ring,
            feature_id,
        })
    }

    pub fn from_feature(f: &Feature) -> Result<Self, BuildingError> {
        match &f.geometry {
            Geometry::Polygon(rings) if rings.len() == 1 => Footprint::new(rings[0].clone(), f.feature_id.clone()),
            Geometry::Polygon(_) => Err(BuildingError::HasHoles(f.feature_id.clone())),
            Geometry::Polyline(_) => Err(BuildingError::NotPolygon(f.feature_id.clone())),
        }
    }

    pub fn area(&self) -> f64 {
        geom::ring_signed_area(&self.exterior_ring)
    }

    pub fn bounds(&self) -> (Point2, Point2) {
        geom::bounds(self.exterior_ring.iter().copied()).expect("ring is non-empty")
    }

    pub fn contains(&self, p: Point2) -> bool {
        geom::point_in_ring(p, &self.exterior_ring)
    }
}

/// Uniform-grid bins over the point cloud's xy extent, built once and then
/// shared read-only.
#[derive(Debug, Clone)]
pub struct PointIndex {
    origin: Point2,
    bin: f64,
    cols: usize,
    rows: usize,
    bins: Vec<Vec<[f64; 3]>>,
}

impl PointIndex {
    /// Indexes points whose classification is in `classes` (all points when
    /// `None` or when the cloud carries no classification).
    pub fn build(cloud: &PointCloud, bin_size: f64, classes: Option<&[u8]>) -> Self {
        let keep = |i: usize| match (classes, &cloud.classification) {
            (Some(set), Some(c)) => set.contains(&c[i]),
            _ => true,
        };
        let pts: Vec<[f64; 3]> = cloud
            .points
            .iter()
            .enumerate()
            .filter(|&(i, _)| keep(i))
            .map(|(_, p)| *p)
            .collect();
        let (lo, hi) = geom::bounds(pts.iter().map(|p| [p[0], p[1]])).unwrap_or(([0.0, 0.0], [0.0, 0.0]));
        let bin = if bin_size > 0.0 { bin_size } else { 1.0 };
        let cols = (((hi[0] - lo[0]) / bin).floor() as usize + 1).max(1);
        let rows = (((hi[1] - lo[1]) / bin).floor() as usize + 1).max(1);
        let mut bins = vec![Vec::new(); cols * rows];
        for p in pts {
            let c = (((p[0] - lo[0]) / bin) as usize).min(cols - 1);
            let r = (((p[1] - lo[1]) / bin) as usize).min(rows - 1);
            bins[r * cols + c].push(p);
        }
        PointIndex {
            origin: lo,
            bin,
            cols,
            rows,
            bins,
        }
    }

    fn bin_range(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let a = ((lo - origin) / self.bin).floor();
        let b = ((hi - origin) / self.bin).floor();
        if b < 0.0 || a >= n as f64 {
            return None;
        }
        Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
    }

    /// Points whose xy lies in the closed box `[lo, hi]`.
    pub fn query(&self, lo: Point2, hi: Point2) -> impl Iterator<Item = &[f64; 3]> + '_ {
        let cr = self.bin_range(lo[0], hi[0], self.origin[0], self.cols);
        let rr = self.bin_range(lo[1], hi[1], self.origin[1], self.rows);
        let cells: Vec<usize> = match (cr, rr) {
            (Some((c0, c1)), Some((r0, r1))) => (r0..=r1).flat_map(|r| (c0..=c1).map(move |c| r * self.cols + c)).collect(),
            _ => Vec::new(),
        };
        cells
            .into_iter()
            .flat_map(move |i| self.bins[i].iter())
            .filter(move |p| p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HeightStatistic {
    Mean,
    /// Nearest-rank percentile in `[0, 100]`.
    Percentile { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeightOptions {
    pub statistic: HeightStatistic,
    pub fallback_height: f64,
    /// LAS classification codes to keep; empty keeps every point.
    pub classes: Vec<u8>,
}

impl Default for HeightOptions {
    fn default() -> Self {
        HeightOptions {
            statistic: HeightStatistic::Mean,
            fallback_height: DEFAULT_FALLBACK_HEIGHT,
            classes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightEstimate {
    pub height: f64,
    pub samples: usize,
    /// The fallback height was used.
    pub fallback: bool,
}

/// Height above `base_z` from the points inside the footprint.
///
/// Inside z values are sorted before reduction, so the result does not
/// depend on point order. With no inside points, or a non-positive result,
/// the configured fallback is returned and flagged.
pub fn estimate_height(fp: &Footprint, index: &PointIndex, base_z: f64, opts: &HeightOptions) -> HeightEstimate {
    let (lo, hi) = fp.bounds();
    let mut zs: Vec<f64> = index
        .query(lo, hi)
        .filter(|p| fp.contains([p[0], p[1]]))
        .map(|p| p[2])
        .collect();
    zs.sort_by(f64::total_cmp);
    let fallback = HeightEstimate {
        height: opts.fallback_height,
        samples: zs.len(),
        fallback: true,
    };
    if zs.is_empty() {
        return fallback;
    }
    let z = match opts.statistic {
        HeightStatistic::Mean => zs.iter().sum::<f64>() / zs.len() as f64,
        HeightStatistic::Percentile { p } => {
            let rank = ((p.clamp(0.0, 100.0) / 100.0) * zs.len() as f64).ceil() as usize;
            zs[rank.clamp(1, zs.len()) - 1]
        }
    };
    let height = z - base_z;
    if height > 0.0 && height.is_finite() {
        HeightEstimate {
            height,
            samples: zs.len(),
            fallback: false,
        }
    } else {
        fallback
    }
}

/// Lowest bilinear terrain sample over the ring vertices and the terrain
/// cell centers inside the ring, minus [`TERRAIN_SINK`].
pub fn align_to_terrain(fp: &Footprint, terrain: &RasterGrid) -> Result<f64, BuildingError> {
    let (lo, hi) = fp.bounds();
    let [gx1, gy1] = terrain.spec().max_corner();
    if lo[0] < terrain.origin[0] || lo[1] < terrain.origin[1] || hi[0] > gx1 || hi[1] > gy1 {
        return Err(BuildingError::OutsideTerrain(fp.feature_id.clone()));
    }
    let mut min = f64::INFINITY;
    for &p in geom::open_ring(&fp.exterior_ring) {
        if let Some(v) = terrain.sample_bilinear(p) {
            min = min.min(v);
        }
    }
    let spec = terrain.spec();
    let s = terrain.cell_spacing;
    let c0 = ((lo[0] - spec.origin[0]) / s).floor().max(0.0) as usize;
    let c1 = (((hi[0] - spec.origin[0]) / s).ceil() as usize).min(spec.width);
    let r0 = ((lo[1] - spec.origin[1]) / s).floor().max(0.0) as usize;
    let r1 = (((hi[1] - spec.origin[1]) / s).ceil() as usize).min(spec.height);
    for row in r0..r1 {
        for col in c0..c1 {
            let center = spec.cell_center(col, row);
            if fp.contains(center) {
                if let Some(v) = terrain.sample_bilinear(center) {
                    min = min.min(v);
                }
            }
        }
    }
    if min.is_finite() {
        Ok(min - TERRAIN_SINK)
    } else {
        Err(BuildingError::NoTerrainData(fp.feature_id.clone()))
    }
}

/// Extrudes the footprint into a closed prism from `base_z` to
/// `base_z + height`. Vertices `0..n` form the bottom ring, `n..2n` the top.
pub fn extrude_lod1(fp: &Footprint, height: f64, base_z: f64) -> Result<TriangleMesh, BuildingError> {
    if !(height > 0.0 && height.is_finite()) {
        return Err(BuildingError::BadHeight(height));
    }
    let ring = geom::prune_collinear(&fp.exterior_ring);
    let caps = geom::ear_clip(&ring).ok_or_else(|| BuildingError::Triangulation(fp.feature_id.clone()))?;
    let n = ring.len();
    let top_z = base_z + height;
    let mut vertices = Vec::with_capacity(2 * n);
    vertices.extend(ring.iter().map(|&[x, y]| [x, y, base_z]));
    vertices.extend(ring.iter().map(|&[x, y]| [x, y, top_z]));
    let mut triangles = Vec::with_capacity(2 * (n - 2) + 2 * n);
    let n32 = n as u32;
    for t in &caps {
        let [a, b, c] = t.map(|i| i as u32);
        triangles.push([a, c, b]);
        triangles.push([a + n32, b + n32, c + n32]);
    }
    for i in 0..n32 {
        let j = (i + 1) % n32;
        triangles.push([i, j, j + n32]);
        triangles.push([i, j + n32, i + n32]);
    }
    Ok(TriangleMesh { vertices, triangles })
}

/// OBJ text with one object per mesh, ordered by name.
pub fn export_obj(meshes: &[(String, TriangleMesh)]) -> String {
    let mut order: Vec<&(String, TriangleMesh)> = meshes.iter().collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    mesh::write_obj(order.into_iter().map(|(n, m)| (n.as_str(), m)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingWarning {
    pub feature_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingRecord {
    pub feature_id: String,
    pub base_z: f64,
    pub height: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BuildingsOutput {
    pub meshes: Vec<(String, TriangleMesh)>,
    pub records: Vec<BuildingRecord>,
    pub warnings: Vec<BuildingWarning>,
}

/// Runs height estimation, alignment and extrusion for every footprint.
/// Features that cannot be built are skipped with a warning. Without
/// terrain the base sits at z = 0.
pub fn build_all(
    footprints: &[Feature],
    cloud: Option<&PointCloud>,
    terrain: Option<&RasterGrid>,
    opts: &HeightOptions,
) -> BuildingsOutput {
    let classes = (!opts.classes.is_empty()).then_some(opts.classes.as_slice());
    let index = PointIndex::build(cloud.unwrap_or(&PointCloud::default()), 5.0, classes);
    let results = par::map(footprints, |f| -> Result<(BuildingRecord, TriangleMesh, Vec<String>), BuildingError> {
        let fp = Footprint::from_feature(f)?;
        let mut notes = Vec::new();
        let base_z = match terrain {
            Some(t) => align_to_terrain(&fp, t)?,
            None => 0.0,
        };
        let est = estimate_height(&fp, &index, base_z + TERRAIN_SINK, opts);
        if est.fallback {
            notes.push(format!(
                "no usable points inside footprint ({} samples); fallback height {} m",
                est.samples, est.height
            ));
        }
        // The walls start below ground by the sink depth.
        let mesh = extrude_lod1(&fp, est.height + TERRAIN_SINK, base_z)?;
        Ok((
            BuildingRecord {
                feature_id: fp.feature_id.clone(),
                base_z,
                height: est.height,
                samples: est.samples,
            },
            mesh,
            notes,
        ))
    });
    let mut out = BuildingsOutput::default();
    for (f, r) in footprints.iter().zip(results) {
        match r {
            Ok((rec, mesh, notes)) => {
                out.warnings.extend(notes.into_iter().map(|message| BuildingWarning {
                    feature_id: rec.feature_id.clone(),
                    message,
                }));
                out.meshes.push((rec.feature_id.clone(), mesh));
                out.records.push(rec);
            }
            Err(e) => out.warnings.push(BuildingWarning {
                feature_id: f.feature_id.clone(),
                message: format!("skipped: {e}"),
            }),
        }
    }
    out.meshes.sort_by(|a, b| a.0.cmp(&b.0));
    out.records.sort_by(|a, b| a.feature_id.cmp(&b.feature_id));
    out.warnings.sort_by(|a, b| a.feature_id.cmp(&b.feature_id));
    out
}
