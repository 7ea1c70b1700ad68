//! Planar and spatial geometry primitives shared by the raster, building and
//! tube stages.

use std::ops::{Add, Mul, Neg, Sub};

/// A planar point in projected meters.
pub type Point2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_f32(p: [f32; 3]) -> Self {
        Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 1e-300 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Rotates `self` about the unit `axis` by `angle` radians (Rodrigues).
    pub fn rotate_about(self, axis: Vec3, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        self * c + axis.cross(self) * s + axis * (axis.dot(self) * (1.0 - c))
    }

    /// Any unit vector perpendicular to the unit vector `self`.
    pub fn any_perpendicular(self) -> Vec3 {
        let a = self.x.abs();
        let b = self.y.abs();
        let c = self.z.abs();
        let helper = if a <= b && a <= c {
            Vec3::X
        } else if b <= c {
            Vec3::Y
        } else {
            Vec3::Z
        };
        (helper - self * self.dot(helper))
            .normalized()
            .expect("helper axis is never parallel to the least-aligned axis")
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Drops the closing vertex of a closed ring, if present.
pub fn open_ring(ring: &[Point2]) -> &[Point2] {
    match ring {
        [first, .., last] if ring.len() > 1 && first == last => &ring[..ring.len() - 1],
        _ => ring,
    }
}

/// Shoelace area; positive for counterclockwise rings. Accepts open or
/// closed rings.
pub fn ring_signed_area(ring: &[Point2]) -> f64 {
    let r = open_ring(ring);
    let n = r.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = r[i];
        let [x1, y1] = r[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc
}

/// Axis-aligned bounds `(min, max)` of a point set.
pub fn bounds(points: impl IntoIterator<Item = Point2>) -> Option<(Point2, Point2)> {
    points.into_iter().fold(None, |acc, [x, y]| match acc {
        None => Some(([x, y], [x, y])),
        Some((lo, hi)) => Some(([lo[0].min(x), lo[1].min(y)], [hi[0].max(x), hi[1].max(y)])),
    })
}

/// x-coordinates where the horizontal line at `y` crosses the ring's edges,
/// using the half-open rule `(y0 > y) != (y1 > y)`. Appends to `out`.
///
/// This is the same crossing predicate as [`point_in_rings`], so a scanline
/// fill built on it agrees exactly with per-point testing.
pub fn ring_crossings(ring: &[Point2], y: f64, out: &mut Vec<f64>) {
    let r = open_ring(ring);
    let n = r.len();
    for i in 0..n {
        let [xi, yi] = r[i];
        let [xj, yj] = r[(i + n - 1) % n];
        if (yi > y) != (yj > y) {
            out.push(crossing_x(xi, yi, xj, yj, y));
        }
    }
}

#[inline]
fn crossing_x(xi: f64, yi: f64, xj: f64, yj: f64, y: f64) -> f64 {
    xi + (y - yi) * (xj - xi) / (yj - yi)
}

/// Even-odd point-in-polygon test over any number of rings.
pub fn point_in_rings<'a>(p: Point2, rings: impl IntoIterator<Item = &'a [Point2]>) -> bool {
    let [x, y] = p;
    let mut inside = false;
    for ring in rings {
        let r = open_ring(ring);
        let n = r.len();
        for i in 0..n {
            let [xi, yi] = r[i];
            let [xj, yj] = r[(i + n - 1) % n];
            if (yi > y) != (yj > y) && x < crossing_x(xi, yi, xj, yj, y) {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn point_in_ring(p: Point2, ring: &[Point2]) -> bool {
    point_in_rings(p, std::iter::once(ring))
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test, touching and collinear overlap included.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Pairwise check that no two non-adjacent edges of the ring meet and no
/// adjacent pair folds back onto itself. O(n²).
pub fn ring_is_simple(ring: &[Point2]) -> bool {
    let r = open_ring(ring);
    let n = r.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = r[i];
        let b = r[(i + 1) % n];
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let c = r[j];
            let d = r[(j + 1) % n];
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Shared vertex only; reject collinear backtracking.
                let (shared, p, q) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                if orient(shared, p, q) == 0.0 {
                    let u = [p[0] - shared[0], p[1] - shared[1]];
                    let v = [q[0] - shared[0], q[1] - shared[1]];
                    if u[0] * v[0] + u[1] * v[1] > 0.0 {
                        return false;
                    }
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Squared Euclidean distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance_sq(p: Point2, a: Point2, b: Point2) -> f64 {
    let abx = b[0] - a[0];
    let aby = b[1] - a[1];
    let apx = p[0] - a[0];
    let apy = p[1] - a[1];
    let len_sq = abx * abx + aby * aby;
    let t = if len_sq > 0.0 {
        ((apx * abx + apy * aby) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = apx - t * abx;
    let dy = apy - t * aby;
    dx * dx + dy * dy
}

/// Area below which a vertex is treated as collinear with its neighbours.
pub const COLLINEAR_AREA_TOLERANCE: f64 = 1e-9;

/// Removes vertices whose triangle with their neighbours has area below
/// [`COLLINEAR_AREA_TOLERANCE`]. Input and output are open rings.
pub fn prune_collinear(ring: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = open_ring(ring).to_vec();
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let hit = (0..n).find(|&i| {
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            (0.5 * orient(prev, pts[i], next)).abs() < COLLINEAR_AREA_TOLERANCE
        });
        match hit {
            Some(i) => {
                pts.remove(i);
            }
            None => return pts,
        }
    }
}

fn point_in_triangle_closed(p: Point2, a: Point2, b: Point2, c: Point2) -> bool {
    let d1 = orient(a, b, p);
    let d2 = orient(b, c, p);
    let d3 = orient(c, a, p);
    d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
}

/// Ear-clipping triangulation of an open, counterclockwise, simple ring.
///
/// Returns counterclockwise index triples into `ring`, n − 2 of them. Fails
/// with `None` when no strictly convex empty ear exists, which for a simple
/// ring only happens through collinear or repeated vertices.
pub fn ear_clip(ring: &[Point2]) -> Option<Vec<[usize; 3]>> {
    let n = ring.len();
    if n < 3 {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&k| {
            let ia = idx[(k + m - 1) % m];
            let ib = idx[k];
            let ic = idx[(k + 1) % m];
            let (a, b, c) = (ring[ia], ring[ib], ring[ic]);
            if 0.5 * orient(a, b, c) < COLLINEAR_AREA_TOLERANCE {
                return false;
            }
            idx.iter()
                .filter(|&&j| j != ia && j != ib && j != ic)
                .all(|&j| !point_in_triangle_closed(ring[j], a, b, c))
        })?;
        let ia = idx[(ear + m - 1) % m];
        let ib = idx[ear];
        let ic = idx[(ear + 1) % m];
        tris.push([ia, ib, ic]);
        idx.remove(ear);
    }
    let (a, b, c) = (ring[idx[0]], ring[idx[1]], ring[idx[2]]);
    if 0.5 * orient(a, b, c) < COLLINEAR_AREA_TOLERANCE {
        return None;
    }
    tris.push([idx[0], idx[1], idx[2]]);
    Some(tris)
}
