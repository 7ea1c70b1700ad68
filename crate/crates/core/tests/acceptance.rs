// `ensure!` negates comparisons on purpose so that NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs as a plain binary so every criterion shares one
//! process and the peak-memory reading covers the whole suite.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use worldgen::buildings::{self, Footprint};
use worldgen::datatex::{self, Volume3D, ZFoldSampler};
use worldgen::grid::{GridSpec, RasterGrid, DEFAULT_NODATA};
use worldgen::pipeline::{self, PipelineConfig};
use worldgen::raster::{self, RoadClassWidths};
use worldgen::tiler::{self, NamingScheme, QuantSpec, TileRole};
use worldgen::tubes::{self, BenchMethod, Streamline};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn c1_zfold_dimensions() -> Outcome {
    let (nx, ny, nz) = (512usize, 512usize, 64usize);
    let values: Vec<f32> = (0..nx * ny * nz).map(|i| ((i % nx) + (i / nx) % ny + i / (nx * ny)) as f32).collect();
    let vol = Volume3D::new([nx, ny, nz], [0.0; 3], 1.0, values).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let tex = datatex::zfold_encode(&vol, 8, 8).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    ensure!((tex.width, tex.height) == (4096, 4096), "texture is {}x{}", tex.width, tex.height);
    let s = ZFoldSampler::new(&tex).map_err(|e| e.to_string())?;
    for (x, y, z) in [(0, 0, 0), (511, 511, 63), (17, 300, 9), (400, 2, 56)] {
        let want = (x + y + z) as f64;
        ensure!((s.voxel(x, y, z) - want).abs() <= s.quantization_step(), "voxel ({x},{y},{z})");
    }
    ensure!(secs < 5.0, "encode took {secs:.2} s");
    Ok(format!("512x512x64 in 8x8 tiles -> 4096x4096 in {secs:.2} s"))
}

fn c2_trilinear_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut points = 0;
    for _ in 0..20 {
        let dims = [0; 3].map(|_: u8| rng.random_range(1..=16usize));
        let values: Vec<f32> = (0..dims.iter().product()).map(|_| rng.random_range(-1000.0..1000.0)).collect();
        let vol = Volume3D::new(dims, [0.0; 3], 1.0, values).map_err(|e| e.to_string())?;
        let tx = (dims[2] as f64).sqrt().ceil() as usize;
        let tex = datatex::zfold_encode(&vol, tx, dims[2].div_ceil(tx)).map_err(|e| e.to_string())?;
        let s = ZFoldSampler::new(&tex).map_err(|e| e.to_string())?;
        let step = s.quantization_step();
        for _ in 0..50 {
            let p = [0, 1, 2].map(|a| rng.random::<f64>() * (dims[a] - 1) as f64);
            let oracle = common::trilinear(dims, |x, y, z| vol.get(x, y, z), p);
            let err = (s.sample(p[0], p[1], p[2]) - oracle).abs();
            if step > 0.0 {
                worst = worst.max(err / step);
            } else {
                ensure!(err == 0.0, "constant volume error {err}");
            }
            points += 1;
        }
    }
    ensure!(worst <= 1.5, "max error {worst:.3} steps");
    Ok(format!("{points} points, max error {worst:.3} quantization steps"))
}

fn c3_split_merge() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let specials = [
        0x7FC0_0000u32, 0xFFC0_0000, 0x7F80_0001, 0x7FBF_FFFF, 0xFFFF_FFFF, 0x7F80_0000, 0xFF80_0000,
        0x0000_0000, 0x8000_0000, 0x0000_0001, 0x807F_FFFF, 0x7F7F_FFFF,
    ];
    let mut failures = 0usize;
    let mut nonfinite = 0usize;
    let total = 1_000_000;
    for i in 0..total {
        let bits = if i < specials.len() { specials[i] } else { rng.random::<u32>() };
        let v = f32::from_bits(bits);
        nonfinite += !v.is_finite() as usize;
        let (hi, lo) = datatex::split_f32(v);
        if datatex::merge_f32(hi, lo).to_bits() != bits || (hi as u32) << 16 | lo as u32 != bits {
            failures += 1;
        }
    }
    ensure!(failures == 0, "{failures} mismatches");
    Ok(format!("{total} patterns ({nonfinite} NaN/Inf), 0 failures"))
}

fn c4_streamline_scale() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lines: Vec<Streamline> = (0..10_000)
        .map(|_| Streamline::new((0..1000).map(|_| [0; 3].map(|_: u8| f32::from_bits(rng.random()))).collect()))
        .collect();
    let t = Instant::now();
    let tex = datatex::encode_streamlines_texture(&lines).map_err(|e| e.to_string())?;
    let back = datatex::decode_streamlines_texture(&tex).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    ensure!(tex.layout.max_points == 1000 && tex.layout.line_count == 10_000, "layout {:?}", (tex.layout.max_points, tex.layout.line_count));
    ensure!(tex.layout.segment_count() == 10_000 * 999, "segment count");
    let mismatched = lines
        .iter()
        .zip(&back)
        .filter(|(a, b)| a.points.len() != b.points.len() || a.points.iter().flatten().zip(b.points.iter().flatten()).any(|(x, y)| x.to_bits() != y.to_bits()))
        .count();
    ensure!(mismatched == 0, "{mismatched} lines differ");
    let peak = common::peak_rss_bytes();
    ensure!(secs < 60.0, "took {secs:.1} s");
    if let Some(p) = peak {
        ensure!(p < 4 << 30, "peak RSS {:.2} GB", p as f64 / (1u64 << 30) as f64);
    }
    Ok(format!(
        "10000 x 1000 points bit-exact in {secs:.2} s, peak RSS {}",
        peak.map_or("unknown".into(), |p| format!("{:.0} MB", p as f64 / 1048576.0))
    ))
}

fn c5_tube_topology() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    for i in 0..200 {
        let p = rng.random_range(2..=100usize);
        let c = rng.random_range(3..=16usize);
        let line = tubes::synthetic_streamlines(1, p..=p, [500.0; 3], 4.0, rng.random()).remove(0);
        let m = match tubes::generate_tube_mesh(&line, c, 0.5) {
            Ok(m) => m,
            Err(e) => {
                failures.push(format!("#{i}: {e}"));
                continue;
            }
        };
        let ok = m.vertices.len() == p * c
            && m.triangles.len() == 2 * (c - 2) + 2 * (p - 1) * c
            && m.euler_characteristic() == 2
            && m.check_closed_manifold().is_ok()
            && m.signed_volume() > 0.0;
        if !ok {
            failures.push(format!("#{i} (P={p}, C={c})"));
        }
    }
    ensure!(failures.is_empty(), "failures: {}", failures.join(", "));
    Ok("200 random tubes: counts, chi = 2, watertight, positive volume".into())
}

fn c6_benchmark_ordering() -> Outcome {
    let counts = [1003usize, 4158, 8316, 12474];
    let c = 8;
    let data = tubes::synthetic_streamlines(12474, 10..=60, [3000.0; 3], 4.0, 6);
    let report = tubes::benchmark_generation(&data, &counts, c, 0.5, 5).map_err(|e| e.to_string())?;
    ensure!(report.rows.len() == 8, "{} rows", report.rows.len());
    let mut lines = Vec::new();
    for &n in &counts {
        let row = |m: BenchMethod| report.rows.iter().find(|r| r.count == n && r.method == m).ok_or(format!("missing row {n}"));
        let (tube, inst) = (row(BenchMethod::TubeMesh)?, row(BenchMethod::SegmentInstances)?);
        let tris: usize = data[..n].iter().map(|l| 2 * (c - 2) + 2 * (l.points.len() - 1) * c).sum();
        let segs: usize = data[..n].iter().map(|l| l.points.len() - 1).sum();
        ensure!(tube.primitives == tris && inst.primitives == segs, "primitive counts at {n}");
        let ratio = tris as f64 / segs as f64;
        ensure!(ratio >= 2.0 * c as f64, "ratio {ratio:.2} at {n}");
        let wins = inst.run_seconds.iter().zip(&tube.run_seconds).filter(|(i, t)| i < t).count();
        ensure!(wins == report.runs, "instances faster in only {wins}/{} runs at {n}", report.runs);
        lines.push(format!("{n}: {:.1}x faster, ratio {ratio:.1}", tube.median_seconds / inst.median_seconds));
    }
    Ok(format!("instances faster in 5/5 runs at every count ({})", lines.join("; ")))
}

fn c7_lod1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = rng.random_range(3..=20);
        let (cx, cy, r) = (rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3), rng.random_range(3.0..60.0));
        let ring = common::random_star_polygon(&mut rng, [cx, cy], r, n);
        let fp = Footprint::new(common::closed(&ring), format!("fp{i}")).map_err(|e| format!("#{i}: {e}"))?;
        let h = rng.random_range(2.0..120.0);
        let m = buildings::extrude_lod1(&fp, h, rng.random_range(0.0..300.0)).map_err(|e| format!("#{i}: {e}"))?;
        m.check_closed_manifold().map_err(|e| format!("#{i}: {e}"))?;
        let want = common::shoelace(&ring) * h;
        worst = worst.max((m.signed_volume() - want).abs() / want);
    }
    ensure!(worst <= 1e-6, "relative volume error {worst:e}");
    Ok(format!("100 footprints manifold, max relative volume error {worst:.1e}"))
}

fn c8_rasterization() -> Outcome {
    let spec = GridSpec::new([0.0, 0.0], 1.0, 256, 256).map_err(|e| e.to_string())?;
    let tri = common::polygon_layer(vec![vec![[0.0, 0.0], [256.0, 0.0], [0.0, 256.0]]]);
    let g = raster::rasterize_polygons_binary(&tri, &spec).map_err(|e| e.to_string())?;
    let frac = g.values.iter().filter(|&&v| v == 1.0).count() as f64 / g.values.len() as f64;
    ensure!((frac - 0.5).abs() <= 0.02, "ones fraction {frac}");

    let spec = GridSpec::new([-60.0, -20.0], 0.5, 240, 80).map_err(|e| e.to_string())?;
    let widths = RoadClassWidths::new(BTreeMap::from([
        ("a".to_string(), 8.0),
        ("b".to_string(), 1.0),
        ("c".to_string(), 2.0),
        ("d".to_string(), 3.0),
    ]))
    .map_err(|e| e.to_string())?;
    let seg = common::polyline_layer(vec![(vec![[-50.0, 0.1], [50.0, 0.1]], "a")]);
    let g = raster::rasterize_buffered_polylines(&seg, &widths, &spec).map_err(|e| e.to_string())?;
    let area = g.values.iter().filter(|&&v| v == 1.0).count() as f64 * 0.25;
    let analytic = 100.0 * 8.0 + std::f64::consts::PI * 16.0;
    let rel = (area - analytic).abs() / analytic;
    ensure!(rel <= 0.02, "buffer area {area} vs {analytic:.2}");
    Ok(format!("triangle fraction {frac:.4}; buffer area {area} vs {analytic:.2} ({:.2}%)", rel * 100.0))
}

fn c9_tiling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut tiles = 0;
    for i in 0..50 {
        let (w, h) = (rng.random_range(1..=300usize), rng.random_range(1..=300usize));
        let s = if i % 5 == 0 { 127 } else { rng.random_range(1..=160usize) };
        let spec = GridSpec::new([rng.random_range(-1e5..1e5), rng.random_range(-1e5..1e5)], 2.0, w, h).map_err(|e| e.to_string())?;
        let mask = i % 2 == 1;
        let values = (0..w * h).map(|_| if mask { rng.random::<f64>() } else { rng.random_range(-30.0..900.0) }).collect();
        let g = RasterGrid::from_values(spec, values, DEFAULT_NODATA).map_err(|e| e.to_string())?;
        let (role, quant) = if mask {
            (TileRole::Mask, QuantSpec::Mask8)
        } else {
            let (lo, hi) = g.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            (TileRole::Heightmap, QuantSpec::Height16 { z_min: lo, z_max: hi })
        };
        let set = tiler::retile(&g, s, NamingScheme::new(format!("g{i}")), role).map_err(|e| e.to_string())?;
        ensure!(set.tiles.len() == w.div_ceil(s) * h.div_ceil(s), "tile count for grid {i}");
        ensure!(tiler::reassemble(&set).map_err(|e| e.to_string())? == g, "reassembly differs for grid {i}");
        let mut names = std::collections::BTreeSet::new();
        for &(c, r) in set.tiles.keys() {
            let name = set.naming.name(c, r);
            ensure!(set.naming.parse(&name) == Some((c, r)), "naming not invertible: {name}");
            names.insert(name);
        }
        ensure!(names.len() == set.tiles.len(), "duplicate names in grid {i}");
        let sub = dir.path().join(format!("g{i}"));
        let entry = tiler::write_tiles(&set, quant, &sub, "").map_err(|e| e.to_string())?;
        let back = tiler::reassemble(&tiler::read_tiles(&entry, &sub).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let worst = g.values.iter().zip(&back.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(worst <= quant.step(), "grid {i}: PNG round trip error {worst} > step {}", quant.step());
        tiles += set.tiles.len();
    }
    ensure!(NamingScheme::new("g").parse("g_x01_y0").is_none(), "zero-padded name accepted");
    Ok(format!("50 grids, {tiles} tiles: exact reassembly, PNG within one step, names bijective"))
}

fn sample_config(dir: &std::path::Path) -> Result<PipelineConfig, String> {
    let path = pipeline::write_sample_dataset(dir, 7).map_err(|e| e.to_string())?;
    PipelineConfig::load(&path).map_err(|e| e.to_string())
}

fn c10_overlap() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = sample_config(dir.path())?;
    let (masks, _) = pipeline::build_masks(&cfg).map_err(|e| e.to_string())?;
    let road = masks.road.as_ref().ok_or("sample has no road mask")?;
    ensure!(masks.landuse.len() == 5, "{} land-use masks", masks.landuse.len());
    let violations = (0..road.values.len())
        .filter(|&i| masks.landuse.values().any(|m| road.values[i] + m.values[i] > 1.0))
        .count();
    ensure!(violations == 0, "{violations} cells with road + land use > 1");
    // Without subtraction the layers do overlap, so the check is not vacuous.
    let mut no_roads = cfg.clone();
    no_roads.inputs.roads = None;
    let (raw, _) = pipeline::build_masks(&no_roads).map_err(|e| e.to_string())?;
    let removed = (0..road.values.len())
        .filter(|&i| road.values[i] == 1.0 && raw.landuse.values().any(|m| m.values[i] == 1.0))
        .count();
    ensure!(removed > 0, "road and land use never overlapped before subtraction");
    Ok(format!("{} cells, 0 violations ({removed} overlapping cells removed by subtraction)", road.values.len()))
}

fn c11_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = sample_config(dir.path())?;
    let area_km2 = cfg.grid.width as f64 * cfg.grid.height as f64 * cfg.grid.cell_spacing.powi(2) / 1e6;
    let t = Instant::now();
    let m = pipeline::run_pipeline(&cfg).map_err(|f| f.error.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let report = pipeline::cmd_validate(&cfg.resolved_output_dir()).map_err(|e| e.to_string())?;
    ensure!(report.ok(), "validation failed: {}", report.failures().map(|c| c.name.clone()).collect::<Vec<_>>().join(", "));
    let masks = m.tile_sets.iter().filter(|t| t.role == TileRole::Mask).count();
    let heights = m.tile_sets.iter().filter(|t| t.role == TileRole::Heightmap).count();
    ensure!((masks, heights) == (6, 1), "{masks} mask and {heights} heightmap tile sets");
    let buildings = m.meshes.iter().find(|e| e.role == "buildings").ok_or("no building OBJ")?;
    ensure!((45..=55).contains(&buildings.objects), "{} buildings", buildings.objects);
    ensure!(m.textures.len() == 3, "{} data textures", m.textures.len());
    ensure!(secs < 60.0, "run took {secs:.1} s");
    let mut again = cfg.clone();
    again.output_dir = "out_rerun".into();
    let m2 = pipeline::run_pipeline(&again).map_err(|f| f.error.to_string())?;
    ensure!(m.checksums() == m2.checksums(), "rerun checksums differ");
    Ok(format!(
        "{area_km2:.2} km2, {} buildings, {} files in {secs:.2} s; {} validation checks pass; rerun identical",
        buildings.objects,
        m.files.len(),
        report.checks.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("z-fold dimensions", c1_zfold_dimensions),
        ("trilinear equivalence", c2_trilinear_equivalence),
        ("32-bit split/merge round trip", c3_split_merge),
        ("streamline texture scale", c4_streamline_scale),
        ("tube mesh topology", c5_tube_topology),
        ("benchmark ordering", c6_benchmark_ordering),
        ("LoD1 correctness", c7_lod1),
        ("rasterization convergence", c8_rasterization),
        ("tiling round trip", c9_tiling),
        ("road/land-use overlap invariant", c10_overlap),
        ("end-to-end sample run", c11_end_to_end),
    ];
    // Criteria run even when an earlier one panics.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
