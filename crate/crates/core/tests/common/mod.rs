//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use worldgen::ingest::{Feature, Geometry, LayerKind, VectorLayer};

/// Classic crossing-number test (W. R. Franklin's PNPOLY).
pub fn pnpoly(ring: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (ring[i][0], ring[i][1]);
        let (xj, yj) = (ring[j][0], ring[j][1]);
        if (yi > p[1]) != (yj > p[1]) && p[0] < (xj - xi) * (p[1] - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Shoelace area of an open ring (positive for counter-clockwise).
pub fn shoelace(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Trilinear interpolation of `f` over an `n`-sized lattice with clamped
/// coordinates, written out corner by corner.
pub fn trilinear(n: [usize; 3], f: impl Fn(usize, usize, usize) -> f64, p: [f64; 3]) -> f64 {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut t = [0f64; 3];
    for a in 0..3 {
        let c = p[a].clamp(0.0, (n[a] - 1) as f64);
        lo[a] = c.floor() as usize;
        hi[a] = (lo[a] + 1).min(n[a] - 1);
        t[a] = c - lo[a] as f64;
    }
    let mut acc = 0.0;
    for corner in 0..8 {
        let pick = |a: usize| corner >> a & 1 == 1;
        let idx: Vec<usize> = (0..3).map(|a| if pick(a) { hi[a] } else { lo[a] }).collect();
        let w: f64 = (0..3).map(|a| if pick(a) { t[a] } else { 1.0 - t[a] }).product();
        acc += w * f(idx[0], idx[1], idx[2]);
    }
    acc
}

/// Random simple counter-clockwise polygon: vertices at jittered, sorted
/// angles around `center` so each edge spans less than half a turn.
pub fn random_star_polygon(rng: &mut impl Rng, center: [f64; 2], radius: f64, n: usize) -> Vec<[f64; 2]> {
    let n = n.max(3);
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * (i as f64 + 0.8 * rng.random::<f64>()) / n as f64;
            let r = radius * (0.3 + 0.7 * rng.random::<f64>());
            [center[0] + r * a.cos(), center[1] + r * a.sin()]
        })
        .collect()
}

pub fn closed(ring: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut r = ring.to_vec();
    r.push(ring[0]);
    r
}

pub fn polygon_layer(rings: Vec<Vec<[f64; 2]>>) -> VectorLayer {
    VectorLayer {
        features: rings
            .into_iter()
            .enumerate()
            .map(|(i, r)| Feature {
                geometry: Geometry::Polygon(vec![closed(&r)]),
                class_label: "x".into(),
                value: None,
                feature_id: format!("f{i}"),
            })
            .collect(),
        crs_id: "EPSG:3006".into(),
        kind: LayerKind::Polygon,
    }
}

pub fn polyline_layer(lines: Vec<(Vec<[f64; 2]>, &str)>) -> VectorLayer {
    VectorLayer {
        features: lines
            .into_iter()
            .enumerate()
            .map(|(i, (pts, class))| Feature {
                geometry: Geometry::Polyline(pts),
                class_label: class.into(),
                value: None,
                feature_id: format!("l{i}"),
            })
            .collect(),
        crs_id: "EPSG:3006".into(),
        kind: LayerKind::Polyline,
    }
}

/// Peak resident set size of this process in bytes (Linux), if available.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
