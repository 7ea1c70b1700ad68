//! Deterministic synthetic dataset covering every input kind: about 2 km²
//! of terrain, 50 buildings with a LAS point cloud, roads in four classes,
//! land use in five, nested isolines, a 32³ volume and 100 streamlines.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::PipelineError;
use crate::datatex::Volume3D;
use crate::grid::{GridSpec, RasterGrid, DEFAULT_NODATA};
use crate::ingest::{self, PointCloud};
use crate::tiler;
use crate::tubes;

pub const SAMPLE_CONFIG: &str = "sample.json";

const ORIGIN: [f64; 2] = [500_000.0, 6_400_000.0];
const EXTENT: [f64; 2] = [1600.0, 1250.0];
const DEM_SPACING: f64 = 5.0;
const BUILDING_CLASS: u8 = 6;
const GROUND_CLASS: u8 = 2;

/// Road source labels and the reduced class each maps to.
const ROAD_LABELS: [(&str, &str); 8] = [
    ("motorway", "major"),
    ("trunk", "major"),
    ("primary", "arterial"),
    ("secondary", "arterial"),
    ("residential", "local"),
    ("service", "local"),
    ("track", "path"),
    ("footway", "path"),
];

/// Land-use source labels and their reduced class.
const LANDUSE_LABELS: [(&str, &str); 13] = [
    ("lake", "water"),
    ("river", "water"),
    ("coniferous_forest", "forest"),
    ("deciduous_forest", "forest"),
    ("mixed_forest", "forest"),
    ("arable_land", "farm"),
    ("pasture", "farm"),
    ("residential_area", "urban"),
    ("industrial_area", "urban"),
    ("town_centre", "urban"),
    ("meadow", "open"),
    ("park", "open"),
    ("bare_rock", "open"),
];

/// Terrain height at a world position.
pub fn sample_elevation(x: f64, y: f64) -> f64 {
    let (u, v) = (x - ORIGIN[0], y - ORIGIN[1]);
    40.0 + 0.01 * u + 15.0 * (u / 260.0).sin() * (v / 210.0).cos() + 6.0 * ((u + v) / 90.0).sin()
}

fn ring_json(ring: &[[f64; 2]]) -> Value {
    let mut pts: Vec<Value> = ring.iter().map(|p| json!([p[0], p[1]])).collect();
    pts.push(json!([ring[0][0], ring[0][1]]));
    Value::Array(pts)
}

fn polygon_feature(id: String, class: &str, ring: &[[f64; 2]], value: Option<f64>) -> Value {
    let mut props = json!({"class": class});
    if let Some(v) = value {
        props["value"] = json!(v);
    }
    json!({"type": "Feature", "id": id, "properties": props,
           "geometry": {"type": "Polygon", "coordinates": [ring_json(ring)]}})
}

fn collection(features: Vec<Value>) -> Vec<u8> {
    let doc = json!({"type": "FeatureCollection",
                     "crs": {"type": "name", "properties": {"name": "EPSG:3006"}},
                     "features": features});
    serde_json::to_vec_pretty(&doc).expect("geojson serializes")
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
    let p = dir.join(name);
    std::fs::write(&p, bytes).map_err(|e| PipelineError::io(&p, e))
}

fn dem_tiles() -> Vec<RasterGrid> {
    let (w, h) = ((EXTENT[0] / DEM_SPACING) as usize / 2, (EXTENT[1] / DEM_SPACING) as usize);
    (0..2)
        .map(|k| {
            let origin = [ORIGIN[0] + (k * w) as f64 * DEM_SPACING, ORIGIN[1]];
            let spec = GridSpec::new(origin, DEM_SPACING, w, h).expect("static spec");
            let values = (0..w * h)
                .map(|i| {
                    let [x, y] = spec.cell_center(i % w, i / w);
                    (sample_elevation(x, y) * 1000.0).round() / 1000.0
                })
                .collect();
            RasterGrid::from_values(spec, values, DEFAULT_NODATA).expect("static grid")
        })
        .collect()
}

fn roads(rng: &mut ChaCha8Rng) -> Vec<Value> {
    let mut features = Vec::new();
    let add = |features: &mut Vec<Value>, id: usize, label: &str, pts: Vec<[f64; 2]>| {
        let coords: Vec<Value> = pts.iter().map(|p| json!([p[0], p[1]])).collect();
        features.push(json!({"type": "Feature", "id": format!("road{id}"), "properties": {"class": label},
                             "geometry": {"type": "LineString", "coordinates": coords}}));
    };
    let mut id = 0;
    // East-west roads at fixed northings, north-south at fixed eastings.
    for (k, y) in [150.0, 480.0, 800.0, 1100.0].into_iter().enumerate() {
        let label = ROAD_LABELS[(2 * k) % ROAD_LABELS.len()].0;
        let amp = rng.random_range(5.0..25.0);
        let pts = (0..=32)
            .map(|i| {
                let x = EXTENT[0] * i as f64 / 32.0;
                [ORIGIN[0] + x, ORIGIN[1] + y + amp * (x / 180.0).sin()]
            })
            .collect();
        add(&mut features, id, label, pts);
        id += 1;
    }
    for (k, x) in [200.0, 620.0, 1010.0, 1420.0].into_iter().enumerate() {
        let label = ROAD_LABELS[(2 * k + 1) % ROAD_LABELS.len()].0;
        let amp = rng.random_range(5.0..25.0);
        let pts = (0..=24)
            .map(|i| {
                let y = EXTENT[1] * i as f64 / 24.0;
                [ORIGIN[0] + x + amp * (y / 150.0).cos(), ORIGIN[1] + y]
            })
            .collect();
        add(&mut features, id, label, pts);
        id += 1;
    }
    // Short dead ends with random labels.
    for _ in 0..6 {
        let label = ROAD_LABELS[rng.random_range(0..ROAD_LABELS.len())].0;
        let start = [rng.random_range(100.0..1500.0), rng.random_range(100.0..1150.0)];
        let heading = rng.random_range(0.0..TAU);
        let len = rng.random_range(60.0..200.0);
        let pts = (0..=4)
            .map(|i| {
                let d = len * i as f64 / 4.0;
                [ORIGIN[0] + start[0] + d * heading.cos(), ORIGIN[1] + start[1] + d * heading.sin()]
            })
            .collect();
        add(&mut features, id, label, pts);
        id += 1;
    }
    features
}

type Rect = ([f64; 2], [f64; 2]);

/// Land-use blocks of a 5×4 partition, each shrunk and slightly irregular.
/// The first five blocks use each reduced class once.
fn landuse(rng: &mut ChaCha8Rng) -> (Vec<Value>, Vec<Rect>) {
    let (nx, ny) = (5, 4);
    let (bw, bh) = (EXTENT[0] / nx as f64, EXTENT[1] / ny as f64);
    let mut features = Vec::new();
    let mut urban = Vec::new();
    let reps = [0usize, 2, 5, 7, 10];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let (label, class) = if k < reps.len() {
                LANDUSE_LABELS[reps[k]]
            } else {
                LANDUSE_LABELS[rng.random_range(0..LANDUSE_LABELS.len())]
            };
            let x0 = ORIGIN[0] + i as f64 * bw;
            let y0 = ORIGIN[1] + j as f64 * bh;
            let m = 10.0;
            let jit = |rng: &mut ChaCha8Rng| rng.random_range(0.0..20.0);
            let ring = vec![
                [x0 + m + jit(rng), y0 + m + jit(rng)],
                [x0 + bw / 2.0, y0 + m + jit(rng)],
                [x0 + bw - m - jit(rng), y0 + m + jit(rng)],
                [x0 + bw - m - jit(rng), y0 + bh / 2.0],
                [x0 + bw - m - jit(rng), y0 + bh - m - jit(rng)],
                [x0 + bw / 2.0, y0 + bh - m - jit(rng)],
                [x0 + m + jit(rng), y0 + bh - m - jit(rng)],
                [x0 + m + jit(rng), y0 + bh / 2.0],
            ];
            features.push(polygon_feature(format!("lu{k}"), label, &ring, None));
            if class == "urban" {
                urban.push(([x0 + 40.0, y0 + 40.0], [x0 + bw - 40.0, y0 + bh - 40.0]));
            }
        }
    }
    (features, urban)
}

/// Rectangles and L-shapes rotated about their center.
fn footprint(rng: &mut ChaCha8Rng, center: [f64; 2]) -> Vec<[f64; 2]> {
    let (w, d) = (rng.random_range(10.0..24.0), rng.random_range(8.0..18.0));
    let local: Vec<[f64; 2]> = if rng.random_bool(0.3) {
        let (cw, cd) = (w * 0.45, d * 0.45);
        vec![[-w / 2.0, -d / 2.0], [w / 2.0, -d / 2.0], [w / 2.0, d / 2.0 - cd], [w / 2.0 - cw, d / 2.0 - cd], [w / 2.0 - cw, d / 2.0], [-w / 2.0, d / 2.0]]
    } else {
        vec![[-w / 2.0, -d / 2.0], [w / 2.0, -d / 2.0], [w / 2.0, d / 2.0], [-w / 2.0, d / 2.0]]
    };
    let a = rng.random_range(0.0..std::f64::consts::PI);
    let (s, c) = a.sin_cos();
    local.iter().map(|p| [center[0] + c * p[0] - s * p[1], center[1] + s * p[0] + c * p[1]]).collect()
}

fn buildings(rng: &mut ChaCha8Rng, urban: &[([f64; 2], [f64; 2])]) -> (Vec<Value>, PointCloud) {
    // Candidate lots on a 40 m lattice inside urban blocks.
    let mut lots = Vec::new();
    for (lo, hi) in urban {
        let mut y = lo[1];
        while y <= hi[1] {
            let mut x = lo[0];
            while x <= hi[0] {
                lots.push([x, y]);
                x += 40.0;
            }
            y += 40.0;
        }
    }
    let mut features = Vec::new();
    let mut points = Vec::new();
    let mut classes = Vec::new();
    let step = (lots.len() / 50).max(1);
    for (n, lot) in lots.iter().step_by(step).take(50).enumerate() {
        let ring = footprint(rng, *lot);
        let storeys = rng.random_range(1..=8) as f64;
        let roof = sample_elevation(lot[0], lot[1]) + 3.2 * storeys;
        let (lo, hi) = crate::geom::bounds(ring.iter().copied()).expect("non-empty ring");
        let mut inside = 0;
        while inside < 40 {
            let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
            if crate::geom::point_in_ring(p, &ring) {
                points.push([p[0], p[1], roof + rng.random_range(-0.3..0.3)]);
                classes.push(BUILDING_CLASS);
                inside += 1;
            }
        }
        features.push(polygon_feature(format!("b{n:03}"), "building", &ring, None));
    }
    for _ in 0..4000 {
        let (x, y) = (ORIGIN[0] + rng.random_range(0.0..EXTENT[0]), ORIGIN[1] + rng.random_range(0.0..EXTENT[1]));
        points.push([x, y, sample_elevation(x, y)]);
        classes.push(GROUND_CLASS);
    }
    (
        features,
        PointCloud {
            points,
            classification: Some(classes),
        },
    )
}

/// Concentric wobbly rings around two hills, 5 m apart in value.
fn isolines(rng: &mut ChaCha8Rng) -> Vec<Value> {
    let mut features = Vec::new();
    for (h, center) in [[450.0, 400.0], [1150.0, 850.0]].into_iter().enumerate() {
        let phase = rng.random_range(0.0..TAU);
        for level in 0..6 {
            let r = 260.0 - 40.0 * level as f64;
            let ring: Vec<[f64; 2]> = (0..48)
                .map(|i| {
                    let t = TAU * i as f64 / 48.0;
                    let rr = r * (1.0 + 0.08 * (3.0 * t + phase).sin());
                    [ORIGIN[0] + center[0] + rr * t.cos(), ORIGIN[1] + center[1] + rr * t.sin()]
                })
                .collect();
            features.push(polygon_feature(format!("iso{h}_{level}"), "isoline", &ring, Some(40.0 + 5.0 * level as f64)));
        }
    }
    features
}

fn volume(rng: &mut ChaCha8Rng) -> Volume3D {
    let n = 32;
    let c = [rng.random_range(10.0..22.0), rng.random_range(10.0..22.0), rng.random_range(10.0..22.0)];
    let mut values = Vec::with_capacity(n * n * n);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let d2 = (x as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2) + (z as f64 - c[2]).powi(2);
                let v = 30.0 * (-d2 / 60.0).exp() + 2.0 * (x as f64 / 5.0).sin() + 0.1 * z as f64;
                values.push(v as f32);
            }
        }
    }
    Volume3D::new([n, n, n], [0.0, 0.0, 0.0], 40.0, values).expect("static volume")
}

/// Writes the sample inputs and `sample.json` into `dir`; returns the
/// config path. The same `seed` always produces the same bytes.
pub fn write_sample_dataset(dir: &Path, seed: u64) -> Result<PathBuf, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut elevation = Vec::new();
    for (k, g) in dem_tiles().iter().enumerate() {
        let name = format!("dem_{k}.asc");
        write(dir, &name, tiler::write_esri_ascii_grid(g).as_bytes())?;
        elevation.push(name);
    }
    write(dir, "roads.geojson", &collection(roads(&mut rng)))?;
    let (lu, urban) = landuse(&mut rng);
    write(dir, "landuse.geojson", &collection(lu))?;
    let (fps, cloud) = buildings(&mut rng, &urban);
    write(dir, "buildings.geojson", &collection(fps))?;
    write(dir, "points.las", &ingest::write_las(&cloud, [0.001; 3], [ORIGIN[0], ORIGIN[1], 0.0]))?;
    write(dir, "isolines.geojson", &collection(isolines(&mut rng)))?;
    let vol = volume(&mut rng);
    write(dir, "volume.json", &serde_json::to_vec(&vol).expect("volume serializes"))?;
    // Streamlines live in the volume's local frame (meters from its origin).
    let lines = tubes::synthetic_streamlines(100, 20..=200, [1240.0; 3], 4.0, rng.random());
    write(dir, "streamlines.json", &serde_json::to_vec(&json!({"streamlines": lines})).expect("lines serialize"))?;

    let road_classes: BTreeMap<&str, &str> = ROAD_LABELS.into_iter().collect();
    let landuse_classes: BTreeMap<&str, &str> = LANDUSE_LABELS.into_iter().collect();
    let config = json!({
        "version": 1,
        "inputs": {
            "elevation": elevation,
            "roads": "roads.geojson",
            "landuse": "landuse.geojson",
            "buildings": "buildings.geojson",
            "pointcloud": "points.las",
            "isolines": "isolines.geojson",
            "volume": "volume.json",
            "streamlines": "streamlines.json"
        },
        "grid": {"origin": ORIGIN, "cell_spacing": 2.0, "width": (EXTENT[0] / 2.0) as usize, "height": (EXTENT[1] / 2.0) as usize},
        "tile_size": 505,
        "crs": "EPSG:3006",
        "road_widths": {"major": 14.0, "arterial": 10.0, "local": 6.0, "path": 3.0},
        "road_classes": road_classes,
        "landuse_classes": landuse_classes,
        "sigma": {"default": 2.0, "layers": {"road": 1.5}},
        "buildings": {"statistic": {"kind": "mean"}, "fallback_height": 3.0, "classes": [BUILDING_CLASS]},
        "tubes": {"cap_vertices": 8, "radius": 0.5, "sample_lines": 10, "bench_counts": [25, 50, 100], "bench_runs": 5},
        "volume": {"particles": 2000, "particle_threshold": 10.0},
        "output_dir": "out",
        "seed": seed
    });
    let path = dir.join(SAMPLE_CONFIG);
    write(dir, SAMPLE_CONFIG, &serde_json::to_vec_pretty(&config).expect("config serializes"))?;
    Ok(path)
}
