//! Streamline geometry: tube meshes built from vertex rings around every
//! point, and one instance record per segment for particle-style rendering.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::par;

pub const DEFAULT_CAP_VERTICES: usize = 8;
pub const DEFAULT_RADIUS: f64 = 0.5;
/// Consecutive points closer than this are merged by [`Streamline::cleaned`].
pub const MIN_POINT_SPACING: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum TubeError {
    #[error("cap vertex count must be at least 3, got {0}")]
    TooFewCapVertices(usize),
    #[error("tube radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("streamline has {0} distinct points after cleaning, need at least 2")]
    Degenerate(usize),
    #[error("benchmark count {count} exceeds dataset size {available}")]
    CountTooLarge { count: usize, available: usize },
    #[error("benchmark needs at least one run")]
    NoRuns,
}

/// An ordered 3D polyline with an optional per-point scalar.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Streamline {
    pub points: Vec<[f32; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalars: Option<Vec<f32>>,
}

impl Streamline {
    pub fn new(points: Vec<[f32; 3]>) -> Self {
        Streamline { points, scalars: None }
    }

    pub fn segment_count(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    fn scalar(&self, i: usize) -> f64 {
        self.scalars.as_ref().and_then(|s| s.get(i)).map_or(0.0, |&v| v as f64)
    }

    /// Drops points within [`MIN_POINT_SPACING`] of the previously kept one.
    pub fn cleaned(&self) -> Streamline {
        let mut points = Vec::with_capacity(self.points.len());
        let mut scalars = self.scalars.as_ref().map(|_| Vec::with_capacity(self.points.len()));
        let mut last: Option<Vec3> = None;
        for (i, &p) in self.points.iter().enumerate() {
            let v = Vec3::from_f32(p);
            if last.is_some_and(|l| (v - l).norm() <= MIN_POINT_SPACING) {
                continue;
            }
            last = Some(v);
            points.push(p);
            if let (Some(out), Some(src)) = (scalars.as_mut(), self.scalars.as_ref()) {
                out.push(src.get(i).copied().unwrap_or(0.0));
            }
        }
        Streamline { points, scalars }
    }
}

/// Unit tangents: central differences inside, one-sided at the ends.
fn tangents(pts: &[Vec3]) -> Vec<Vec3> {
    let n = pts.len();
    let mut out: Vec<Vec3> = Vec::with_capacity(n);
    for i in 0..n {
        let forward = (i + 1 < n).then(|| pts[i + 1] - pts[i]);
        let backward = (i > 0).then(|| pts[i] - pts[i - 1]);
        let central = match (forward, backward) {
            (Some(f), Some(b)) => (f + b).normalized(),
            _ => None,
        };
        let t = central
            .or_else(|| forward.and_then(Vec3::normalized))
            .or_else(|| backward.and_then(Vec3::normalized))
            .or_else(|| out.last().copied())
            .unwrap_or(Vec3::X);
        out.push(t);
    }
    out
}

/// Ring normals transported along the line by the minimal rotation between
/// consecutive tangents, so rings do not twist.
fn transported_normals(tangents: &[Vec3]) -> Vec<Vec3> {
    let mut normals = Vec::with_capacity(tangents.len());
    let mut n = tangents[0].any_perpendicular();
    normals.push(n);
    for w in tangents.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let axis = t0.cross(t1);
        let s = axis.norm();
        if s > 1e-12 {
            let angle = s.atan2(t0.dot(t1));
            n = n.rotate_about(axis * (1.0 / s), angle);
        }
        n = (n - t1 * t1.dot(n)).normalized().unwrap_or_else(|| t1.any_perpendicular());
        normals.push(n);
    }
    normals
}

/// Builds a closed tube around `line`.
///
/// Each point gets a ring of `cap_vertices` vertices at distance `radius`
/// in the plane normal to the tangent, vertex `k` at angle `2πk/C` from the
/// transported normal. Rings `i` and `i + 1` are joined by two triangles per
/// quad `(a, b, c, d)` = ring `i` vertices `k, k+1` and ring `i+1` vertices
/// `k+1, k`, split along the `b`–`d` diagonal. Both ends are capped with a
/// fan from ring vertex 0. V = P·C and F = 2(C − 2) + 2(P − 1)C.
pub fn generate_tube_mesh(line: &Streamline, cap_vertices: usize, radius: f64) -> Result<TriangleMesh, TubeError> {
    if cap_vertices < 3 {
        return Err(TubeError::TooFewCapVertices(cap_vertices));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(TubeError::BadRadius(radius));
    }
    let line = line.cleaned();
    let p = line.points.len();
    if p < 2 {
        return Err(TubeError::Degenerate(p));
    }
    let pts: Vec<Vec3> = line.points.iter().map(|&q| Vec3::from_f32(q)).collect();
    let ts = tangents(&pts);
    let ns = transported_normals(&ts);
    let c = cap_vertices;
    let (sin, cos): (Vec<f64>, Vec<f64>) = (0..c)
        .map(|k| (std::f64::consts::TAU * k as f64 / c as f64).sin_cos())
        .unzip();

    let mut vertices = Vec::with_capacity(p * c);
    for i in 0..p {
        let b = ts[i].cross(ns[i]);
        for k in 0..c {
            vertices.push((pts[i] + (ns[i] * cos[k] + b * sin[k]) * radius).to_array());
        }
    }

    let c32 = c as u32;
    let mut triangles = Vec::with_capacity(2 * (c - 2) + 2 * (p - 1) * c);
    for k in 1..c32 - 1 {
        triangles.push([0, k + 1, k]);
    }
    for i in 0..(p as u32 - 1) {
        let ring = i * c32;
        let next = ring + c32;
        for k in 0..c32 {
            let k1 = (k + 1) % c32;
            let (a, b, cc, d) = (ring + k, ring + k1, next + k1, next + k);
            triangles.push([a, b, d]);
            triangles.push([b, cc, d]);
        }
    }
    let last = (p as u32 - 1) * c32;
    for k in 1..c32 - 1 {
        triangles.push([last, last + k, last + k + 1]);
    }
    Ok(TriangleMesh { vertices, triangles })
}

/// One particle's worth of a streamline segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentInstance {
    pub midpoint: [f64; 3],
    pub direction: [f64; 3],
    pub length: f64,
    pub scalar: f64,
}

impl SegmentInstance {
    /// Little-endian record size: midpoint, direction, length, scalar as f32.
    pub const RECORD_BYTES: usize = 32;

    pub fn endpoints(&self) -> ([f64; 3], [f64; 3]) {
        let m = Vec3::new(self.midpoint[0], self.midpoint[1], self.midpoint[2]);
        let d = Vec3::new(self.direction[0], self.direction[1], self.direction[2]) * (0.5 * self.length);
        ((m - d).to_array(), (m + d).to_array())
    }

    pub fn write_le(&self, out: &mut Vec<u8>) {
        for v in self.midpoint.iter().chain(&self.direction).chain([&self.length, &self.scalar]) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
}

/// One instance per segment of the cleaned line; the scalar is the mean of
/// the endpoint scalars (0 without scalars).
pub fn generate_segment_instances(line: &Streamline) -> Vec<SegmentInstance> {
    let line = line.cleaned();
    line.points
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let a = Vec3::from_f32(w[0]);
            let b = Vec3::from_f32(w[1]);
            let d = b - a;
            let length = d.norm();
            SegmentInstance {
                midpoint: ((a + b) * 0.5).to_array(),
                direction: (d * (1.0 / length)).to_array(),
                length,
                scalar: 0.5 * (line.scalar(k) + line.scalar(k + 1)),
            }
        })
        .collect()
}

/// Tube meshes for many lines, in input order.
pub fn tube_meshes(lines: &[Streamline], cap_vertices: usize, radius: f64) -> Vec<Result<TriangleMesh, TubeError>> {
    par::map(lines, |l| generate_tube_mesh(l, cap_vertices, radius))
}

/// Segment instances for many lines, concatenated in input order.
pub fn segment_instances(lines: &[Streamline]) -> Vec<SegmentInstance> {
    par::map(lines, generate_segment_instances).into_iter().flatten().collect()
}

/// Smooth random-walk streamlines inside a box, for tests and benchmarks.
///
/// Steps are `step` meters long and turn by at most ~25° per point, so tubes
/// of radius below `step / 2` never fold over themselves.
pub fn synthetic_streamlines(
    count: usize,
    points: std::ops::RangeInclusive<usize>,
    extent: [f64; 3],
    step: f64,
    seed: u64,
) -> Vec<Streamline> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(points.clone());
            let mut p = Vec3::new(
                rng.random::<f64>() * extent[0],
                rng.random::<f64>() * extent[1],
                rng.random::<f64>() * extent[2],
            );
            let mut dir = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, 0.2 * (rng.random::<f64>() - 0.5))
                .normalized()
                .unwrap_or(Vec3::X);
            let mut pts = Vec::with_capacity(n);
            let mut scalars = Vec::with_capacity(n);
            for _ in 0..n {
                pts.push([p.x as f32, p.y as f32, p.z as f32]);
                scalars.push(rng.random::<f32>() * 10.0);
                let jitter = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                dir = (dir + jitter * 0.8).normalized().unwrap_or(dir);
                p = p + dir * step;
            }
            Streamline {
                points: pts,
                scalars: Some(scalars),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    TubeMesh,
    SegmentInstances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: BenchMethod,
    pub count: usize,
    pub median_seconds: f64,
    pub run_seconds: Vec<f64>,
    /// Triangles for tubes, instances for the particle representation.
    pub primitives: usize,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub cap_vertices: usize,
    pub radius: f64,
    pub runs: usize,
    pub parallel: bool,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>8}  {:<18}  {:>12}  {:>12}  {:>14}\n",
            "lines", "method", "median ms", "primitives", "bytes"
        );
        for r in &self.rows {
            let name = match r.method {
                BenchMethod::TubeMesh => "tube_mesh",
                BenchMethod::SegmentInstances => "segment_instances",
            };
            out.push_str(&format!(
                "{:>8}  {:<18}  {:>12.3}  {:>12}  {:>14}\n",
                r.count,
                name,
                r.median_seconds * 1e3,
                r.primitives,
                r.bytes
            ));
        }
        out
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Times tube meshing and instance generation over the first `count` lines
/// of `dataset` for each count. Runs are strictly sequential; the two
/// methods alternate which goes first.
pub fn benchmark_generation(
    dataset: &[Streamline],
    counts: &[usize],
    cap_vertices: usize,
    radius: f64,
    runs: usize,
) -> Result<BenchReport, TubeError> {
    if runs == 0 {
        return Err(TubeError::NoRuns);
    }
    if let Some(&count) = counts.iter().find(|&&c| c > dataset.len()) {
        return Err(TubeError::CountTooLarge {
            count,
            available: dataset.len(),
        });
    }
    if cap_vertices < 3 {
        return Err(TubeError::TooFewCapVertices(cap_vertices));
    }
    let mut rows = Vec::with_capacity(2 * counts.len());
    for &count in counts {
        let lines = &dataset[..count];
        let mut tube_times = Vec::with_capacity(runs);
        let mut inst_times = Vec::with_capacity(runs);
        let mut triangles = 0;
        let mut tube_bytes = 0;
        let mut instances = 0;
        for run in 0..runs {
            let time_tubes = || {
                let t0 = Instant::now();
                let meshes = tube_meshes(lines, cap_vertices, radius);
                let dt = t0.elapsed().as_secs_f64();
                let (tris, bytes) = meshes
                    .iter()
                    .flatten()
                    .fold((0, 0), |(t, b), m| (t + m.triangles.len(), b + m.gpu_byte_size()));
                drop(meshes);
                (dt, tris, bytes)
            };
            let time_instances = || {
                let t0 = Instant::now();
                let inst = segment_instances(lines);
                let dt = t0.elapsed().as_secs_f64();
                (dt, inst.len())
            };
            let ((tdt, tris, bytes), (idt, n)) = if run % 2 == 0 {
                let a = time_tubes();
                (a, time_instances())
            } else {
                let b = time_instances();
                (time_tubes(), b)
            };
            tube_times.push(tdt);
            inst_times.push(idt);
            triangles = tris;
            tube_bytes = bytes;
            instances = n;
        }
        rows.push(BenchRow {
            method: BenchMethod::TubeMesh,
            count,
            median_seconds: median(&tube_times),
            run_seconds: tube_times,
            primitives: triangles,
            bytes: tube_bytes,
        });
        rows.push(BenchRow {
            method: BenchMethod::SegmentInstances,
            count,
            median_seconds: median(&inst_times),
            run_seconds: inst_times,
            primitives: instances,
            bytes: instances * SegmentInstance::RECORD_BYTES,
        });
    }
    Ok(BenchReport {
        cap_vertices,
        radius,
        runs,
        parallel: par::is_parallel(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[[f32; 3]]) -> Streamline {
        Streamline::new(points.to_vec())
    }

    #[test]
    fn two_point_octagon_tube() {
        let m = generate_tube_mesh(&line(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), 8, 0.5).unwrap();
        assert_eq!((m.vertices.len(), m.triangles.len(), m.edge_count()), (16, 28, 42));
        m.check_closed_manifold().unwrap();
    }

    #[test]
    fn straight_line_rings_are_perpendicular() {
        let pts: Vec<[f32; 3]> = (0..10).map(|i| [i as f32, 2.0 * i as f32, -(i as f32)]).collect();
        let m = generate_tube_mesh(&line(&pts), 6, 0.25).unwrap();
        assert_eq!((m.vertices.len(), m.triangles.len()), (60, 116));
        m.check_closed_manifold().unwrap();
        let axis = Vec3::new(1.0, 2.0, -1.0).normalized().unwrap();
        for (i, p) in pts.iter().enumerate() {
            let c = Vec3::from_f32(*p);
            for k in 0..6 {
                let [x, y, z] = m.vertices[i * 6 + k];
                let off = Vec3::new(x, y, z) - c;
                assert!(off.dot(axis).abs() < 1e-12);
                assert!((off.norm() - 0.25).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn x_aligned_line_matches_rotation_about_x() {
        let m = generate_tube_mesh(&line(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]), 4, 1.0).unwrap();
        // Every ring vertex is the first one rotated by a multiple of 90° about X.
        let v0 = Vec3::new(m.vertices[0][0], m.vertices[0][1], m.vertices[0][2]);
        for k in 0..4 {
            let expect = v0.rotate_about(Vec3::X, std::f64::consts::FRAC_PI_2 * k as f64);
            let [x, y, z] = m.vertices[k];
            assert!((Vec3::new(x, y, z) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn cap_vertex_precondition() {
        let l = line(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert_eq!(generate_tube_mesh(&l, 2, 0.5), Err(TubeError::TooFewCapVertices(2)));
        assert_eq!(generate_tube_mesh(&l, 3, 0.0), Err(TubeError::BadRadius(0.0)));
        let dup = line(&[[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]);
        assert_eq!(generate_tube_mesh(&dup, 8, 0.5), Err(TubeError::Degenerate(1)));
    }

    #[test]
    fn curved_line_does_not_twist() {
        // Quarter circle in the xy plane: the transported normal stays in
        // the plane's normal direction if it starts there.
        let pts: Vec<[f32; 3]> = (0..=20)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / 20.0;
                [(10.0 * a.cos()) as f32, (10.0 * a.sin()) as f32, 0.0]
            })
            .collect();
        let pts3: Vec<Vec3> = pts.iter().map(|&p| Vec3::from_f32(p)).collect();
        let ts = tangents(&pts3);
        let ns = transported_normals(&ts);
        let z_component = ns[0].z;
        for n in &ns {
            assert!((n.z - z_component).abs() < 1e-6, "normal drifted out of plane: {n:?}");
        }
    }

    #[test]
    fn segment_instance_examples() {
        let inst = generate_segment_instances(&line(&[[0.0, 0.0, 0.0], [0.0, 0.0, 2.0], [1.0, 0.0, 2.0]]));
        assert_eq!(inst.len(), 2);
        assert_eq!(inst[0].midpoint, [0.0, 0.0, 1.0]);
        assert_eq!(inst[0].direction, [0.0, 0.0, 1.0]);
        assert_eq!(inst[0].length, 2.0);
        let mut buf = Vec::new();
        inst[0].write_le(&mut buf);
        assert_eq!(buf.len(), SegmentInstance::RECORD_BYTES);
    }

    #[test]
    fn instance_scalar_is_endpoint_mean() {
        let l = Streamline {
            points: vec![[0.0; 3], [1.0, 0.0, 0.0]],
            scalars: Some(vec![2.0, 4.0]),
        };
        assert_eq!(generate_segment_instances(&l)[0].scalar, 3.0);
    }

    #[test]
    fn cleaning_drops_duplicates_with_scalars() {
        let l = Streamline {
            points: vec![[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]],
            scalars: Some(vec![1.0, 2.0, 3.0]),
        };
        let c = l.cleaned();
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.scalars, Some(vec![1.0, 3.0]));
    }

    #[test]
    fn bench_rejects_oversized_counts() {
        let data = synthetic_streamlines(3, 2..=4, [10.0; 3], 1.0, 1);
        assert_eq!(
            benchmark_generation(&data, &[1_000_000_000], 8, 0.5, 5),
            Err(TubeError::CountTooLarge { count: 1_000_000_000, available: 3 })
        );
        let r = benchmark_generation(&data, &[1], 8, 0.5, 5).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows[0].bytes > r.rows[1].bytes);
    }
}
