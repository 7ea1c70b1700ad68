//! Indexed triangle meshes, topology checks and Wavefront OBJ text.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::Vec3;

/// Indexed triangles; counterclockwise winding faces outward.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("triangle {0} references a vertex out of range")]
    IndexOutOfRange(usize),
    #[error("triangle {0} is degenerate")]
    Degenerate(usize),
    #[error("edge ({0}, {1}) has {2} incident triangles, expected 2")]
    NonManifoldEdge(u32, u32, usize),
    #[error("directed edge ({0}, {1}) appears twice; orientation is inconsistent")]
    InconsistentOrientation(u32, u32),
    #[error("Euler characteristic is {0}, expected 2")]
    EulerCharacteristic(i64),
    #[error("signed volume {0} is not positive")]
    InwardFacing(f64),
}

impl TriangleMesh {
    fn vertex(&self, i: u32) -> Vec3 {
        let [x, y, z] = self.vertices[i as usize];
        Vec3::new(x, y, z)
    }

    /// Number of distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Divergence-theorem volume: sum of signed tetrahedra against the origin.
    pub fn signed_volume(&self) -> f64 {
        // Shift to the first vertex to limit cancellation for far-away meshes.
        let anchor = self.vertices.first().map_or(Vec3::ZERO, |&[x, y, z]| Vec3::new(x, y, z));
        self.triangles
            .iter()
            .map(|t| {
                let a = self.vertex(t[0]) - anchor;
                let b = self.vertex(t[1]) - anchor;
                let c = self.vertex(t[2]) - anchor;
                a.dot(b.cross(c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Area-weighted unit normal of triangle `i` (unnormalized cross / 2).
    pub fn triangle_area(&self, i: usize) -> f64 {
        let t = self.triangles[i];
        let a = self.vertex(t[0]);
        (self.vertex(t[1]) - a).cross(self.vertex(t[2]) - a).norm() * 0.5
    }

    /// Checks indices, non-degeneracy, that every edge has exactly two
    /// oppositely oriented incident triangles, Euler characteristic 2 and a
    /// positive enclosed volume.
    pub fn check_closed_manifold(&self) -> Result<(), TopologyError> {
        let n = self.vertices.len() as u32;
        let mut directed: HashMap<(u32, u32), usize> = HashMap::with_capacity(self.triangles.len() * 3);
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(TopologyError::IndexOutOfRange(i));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || self.triangle_area(i) <= 0.0 {
                return Err(TopologyError::Degenerate(i));
            }
            for k in 0..3 {
                let e = (t[k], t[(k + 1) % 3]);
                if directed.insert(e, i).is_some() {
                    return Err(TopologyError::InconsistentOrientation(e.0, e.1));
                }
            }
        }
        let mut keys: Vec<_> = directed.keys().copied().collect();
        keys.sort_unstable();
        for (a, b) in keys {
            if !directed.contains_key(&(b, a)) {
                return Err(TopologyError::NonManifoldEdge(a.min(b), a.max(b), 1));
            }
        }
        let chi = self.euler_characteristic();
        if chi != 2 {
            return Err(TopologyError::EulerCharacteristic(chi));
        }
        let vol = self.signed_volume();
        if vol.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(TopologyError::InwardFacing(vol));
        }
        Ok(())
    }

    /// Appends `other`, offsetting its indices.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    /// Bytes of an f32 vertex buffer plus a u32 index buffer.
    pub fn gpu_byte_size(&self) -> usize {
        self.vertices.len() * 12 + self.triangles.len() * 12
    }
}

pub const OBJ_HEADER: &str = "# worldgen OBJ, units: meters\n";

/// Writes named meshes as OBJ objects in the given order, 1-based indices.
pub fn write_obj<'a>(meshes: impl IntoIterator<Item = (&'a str, &'a TriangleMesh)>) -> String {
    let mut out = String::from(OBJ_HEADER);
    let mut base = 1usize;
    for (name, mesh) in meshes {
        let _ = writeln!(out, "o {name}");
        for v in &mesh.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for t in &mesh.triangles {
            let _ = writeln!(
                out,
                "f {} {} {}",
                t[0] as usize + base,
                t[1] as usize + base,
                t[2] as usize + base
            );
        }
        base += mesh.vertices.len();
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum ObjError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Reads the `o`/`v`/`f` subset emitted by [`write_obj`]. Faces must
/// reference vertices of their own object.
pub fn parse_obj(text: &str) -> Result<Vec<(String, TriangleMesh)>, ObjError> {
    let mut objects: Vec<(String, TriangleMesh)> = Vec::new();
    let mut base = 1usize;
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| ObjError::Syntax { line: i + 1, message };
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("o") => {
                if let Some((_, m)) = objects.last() {
                    base += m.vertices.len();
                }
                objects.push((toks.collect::<Vec<_>>().join(" "), TriangleMesh::default()));
            }
            Some("v") => {
                let (_, m) = objects.last_mut().ok_or_else(|| err("vertex before any object".into()))?;
                let mut v = [0.0; 3];
                for slot in &mut v {
                    let t = toks.next().ok_or_else(|| err("short vertex".into()))?;
                    *slot = t.parse().map_err(|_| err(format!("bad coordinate {t:?}")))?;
                }
                m.vertices.push(v);
            }
            Some("f") => {
                let (_, m) = objects.last_mut().ok_or_else(|| err("face before any object".into()))?;
                let idx: Vec<usize> = toks
                    .map(|t| t.split('/').next().unwrap_or_default().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| err(format!("bad index: {e}")))?;
                if idx.len() != 3 {
                    return Err(err(format!("face has {} indices, expected 3", idx.len())));
                }
                let mut t = [0u32; 3];
                for (slot, &g) in t.iter_mut().zip(&idx) {
                    if g < base {
                        return Err(err(format!("index {g} belongs to an earlier object")));
                    }
                    *slot = (g - base) as u32;
                }
                m.triangles.push(t);
            }
            _ => {}
        }
    }
    Ok(objects)
}
