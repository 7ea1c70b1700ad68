use proptest::prelude::*;
use worldgen::grid::{GridSpec, RasterGrid, DEFAULT_NODATA};
use worldgen::tiler::{self, NamingScheme, QuantSpec, TileRole};

fn grid(w: usize, h: usize, seed: u64) -> RasterGrid {
    let spec = GridSpec::new([100.0, 200.0], 2.0, w, h).unwrap();
    let values = (0..w * h).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 7.0).collect();
    RasterGrid::from_values(spec, values, DEFAULT_NODATA).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn retile_then_reassemble_is_identity(w in 1usize..150, h in 1usize..150, s in 1usize..70, seed in any::<u64>(), mask in any::<bool>()) {
        let g = grid(w, h, seed);
        let role = if mask { TileRole::Mask } else { TileRole::Heightmap };
        let set = tiler::retile(&g, s, NamingScheme::new("t"), role).unwrap();
        prop_assert_eq!(set.tiles.len(), w.div_ceil(s) * h.div_ceil(s));
        prop_assert_eq!(tiler::reassemble(&set).unwrap(), g);
        for (&(c, r), _) in &set.tiles {
            prop_assert_eq!(set.naming.parse(&set.naming.name(c, r)), Some((c, r)));
        }
    }

    #[test]
    fn quantization_round_trip_within_one_step(v in 0.0f64..1.0, lo in -100.0f64..100.0, span in 0.001f64..5000.0) {
        let q = QuantSpec::Height16 { z_min: lo, z_max: lo + span };
        let z = lo + v * span;
        let (level, clamped) = q.quantize(z);
        prop_assert!(!clamped);
        prop_assert!((q.dequantize(level) - z).abs() <= q.step());
        let (m, _) = QuantSpec::Mask8.quantize(v);
        prop_assert!((QuantSpec::Mask8.dequantize(m) - v).abs() <= QuantSpec::Mask8.step());
    }
}

#[test]
fn padding_accounting() {
    let g = grid(100, 100, 3);
    let set = tiler::retile(&g, 64, NamingScheme::new("dem"), TileRole::Heightmap).unwrap();
    assert_eq!((set.cols, set.rows, set.valid_region), (2, 2, (100, 100)));
    // The east strip of the north-east tile replicates the last valid column.
    let ne = &set.tiles[&(1, 0)];
    let last_valid = 100 - 64 - 1;
    for lc in last_valid + 1..64 {
        assert_eq!(ne.get(lc, 63), ne.get(last_valid, 63));
    }
    let mset = tiler::retile(&g, 64, NamingScheme::new("m"), TileRole::Mask).unwrap();
    assert_eq!(mset.tiles[&(1, 1)].get(63, 0), 0.0);
}

#[test]
fn png_write_read_within_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(130, 77, 11);
    let (lo, hi) = g.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let quant = QuantSpec::Height16 { z_min: lo, z_max: hi };
    let set = tiler::retile(&g, 64, NamingScheme::new("h"), TileRole::Heightmap).unwrap();
    let entry = tiler::write_tiles(&set, quant, dir.path(), "").unwrap();
    assert_eq!(entry.files.len(), 6);
    assert!(entry.files.iter().all(|f| f.clamped == 0));
    let back = tiler::reassemble(&tiler::read_tiles(&entry, dir.path()).unwrap()).unwrap();
    for (a, b) in g.values.iter().zip(&back.values) {
        assert!((a - b).abs() <= quant.step(), "{a} vs {b}");
    }
    let names: std::collections::BTreeSet<_> = entry.files.iter().map(|f| f.name.clone()).collect();
    assert_eq!(names.len(), 6);
    assert!(names.contains("h_x2_y1") && !names.contains("h_x1_y2"));
}
