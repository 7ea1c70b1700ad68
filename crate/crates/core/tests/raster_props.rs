mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use worldgen::grid::{GridSpec, RasterGrid, DEFAULT_NODATA};
use worldgen::raster::{self, GaussianParams, ResampleMethod, RoadClassWidths};

fn widths(a: f64) -> RoadClassWidths {
    RoadClassWidths::new(BTreeMap::from([
        ("a".to_string(), a),
        ("b".to_string(), 4.0),
        ("c".to_string(), 6.0),
        ("d".to_string(), 8.0),
    ]))
    .unwrap()
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (-4.0f64..36.0, -4.0f64..36.0).prop_map(|(x, y)| [x, y])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    /// Arbitrary (possibly self-intersecting) rings follow the even-odd rule
    /// at every cell center.
    #[test]
    fn polygon_rasterization_matches_pnpoly(
        rings in prop::collection::vec(prop::collection::vec(point(), 3..12), 1..4),
        w in 1usize..64, h in 1usize..64, spacing in 0.3f64..1.5,
    ) {
        let spec = GridSpec::new([0.0, 0.0], spacing, w, h).unwrap();
        let g = raster::rasterize_polygons_binary(&common::polygon_layer(rings.clone()), &spec).unwrap();
        for row in 0..h {
            for col in 0..w {
                let p = spec.cell_center(col, row);
                let expected = rings.iter().any(|r| common::pnpoly(r, p));
                prop_assert_eq!(g.get(col, row) == 1.0, expected, "cell ({}, {})", col, row);
            }
        }
    }

    #[test]
    fn buffer_is_monotone_in_width(
        pts in prop::collection::vec(point(), 2..6),
        w1 in 0.5f64..6.0, dw in 0.0f64..6.0,
    ) {
        let spec = GridSpec::new([0.0, 0.0], 0.5, 64, 64).unwrap();
        let layer = common::polyline_layer(vec![(pts, "a")]);
        let narrow = raster::rasterize_buffered_polylines(&layer, &widths(w1), &spec).unwrap();
        let wide = raster::rasterize_buffered_polylines(&layer, &widths(w1 + dw), &spec).unwrap();
        for (a, b) in narrow.values.iter().zip(&wide.values) {
            prop_assert!(*a <= *b);
        }
    }

    #[test]
    fn convolution_stays_in_input_range(
        values in prop::collection::vec(-50.0f64..50.0, 1..400),
        sigma in 0.3f64..4.0,
        holes in prop::collection::vec(any::<bool>(), 400),
    ) {
        let n = values.len();
        let w = (n as f64).sqrt().ceil() as usize;
        let h = n.div_ceil(w);
        let mut v = values.clone();
        v.resize(w * h, 0.0);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // Put some nodata in, keeping at least one data cell.
        for (i, x) in v.iter_mut().enumerate().skip(1) {
            if holes[i % holes.len()] && i % 3 == 0 {
                *x = DEFAULT_NODATA;
            }
        }
        let spec = GridSpec::new([0.0, 0.0], 1.0, w, h).unwrap();
        let g = RasterGrid::from_values(spec, v, DEFAULT_NODATA).unwrap();
        let out = raster::gaussian_convolve(&g, GaussianParams::with_sigma(sigma)).unwrap();
        for (i, (&a, &b)) in g.values.iter().zip(&out.values).enumerate() {
            if g.is_data(a) {
                prop_assert!(b >= lo - 1e-9 && b <= hi + 1e-9, "cell {} = {}", i, b);
            } else {
                prop_assert!(!out.is_data(b));
            }
        }
    }

    #[test]
    fn subtract_clamp_is_bounded(a in prop::collection::vec(0.0f64..1.0, 16), b in prop::collection::vec(0.0f64..1.0, 16)) {
        let spec = GridSpec::new([0.0, 0.0], 1.0, 4, 4).unwrap();
        let ga = RasterGrid::from_values(spec, a.clone(), DEFAULT_NODATA).unwrap();
        let gb = RasterGrid::from_values(spec, b, DEFAULT_NODATA).unwrap();
        let max_a = a.iter().cloned().fold(0.0, f64::max);
        for v in raster::subtract_clamp(&ga, &gb).unwrap().values {
            prop_assert!((0.0..=max_a).contains(&v));
        }
    }

    #[test]
    fn resample_at_same_spacing_is_identity(values in prop::collection::vec(-10.0f64..10.0, 30), nearest in any::<bool>()) {
        let spec = GridSpec::new([3.0, -2.0], 2.5, 6, 5).unwrap();
        let g = RasterGrid::from_values(spec, values, DEFAULT_NODATA).unwrap();
        let m = if nearest { ResampleMethod::Nearest } else { ResampleMethod::Bilinear };
        prop_assert_eq!(raster::resample(&g, 2.5, m).unwrap(), g);
    }
}

#[test]
fn square_covering_ten_by_ten_centers() {
    let spec = GridSpec::new([0.0, 0.0], 1.0, 20, 20).unwrap();
    let sq = vec![[4.9, 4.9], [15.0, 4.9], [15.0, 15.0], [4.9, 15.0]];
    let g = raster::rasterize_polygons_binary(&common::polygon_layer(vec![sq]), &spec).unwrap();
    assert_eq!(g.values.iter().filter(|&&v| v == 1.0).count(), 100);
}

#[test]
fn resample_matches_bilinear_oracle() {
    let spec = GridSpec::new([0.0, 0.0], 1.0, 4, 4).unwrap();
    let ramp: Vec<f64> = (0..16).map(|i| (i % 4) as f64 * 2.0 + (i / 4) as f64 * 3.0 + ((i * 7) % 5) as f64).collect();
    let g = RasterGrid::from_values(spec, ramp, DEFAULT_NODATA).unwrap();
    let out = raster::resample(&g, 2.0, ResampleMethod::Bilinear).unwrap();
    assert_eq!((out.width, out.height), (2, 2));
    for row in 0..2 {
        for col in 0..2 {
            // Output center in input cell-center coordinates.
            let (fx, fy) = (2.0 * col as f64 + 0.5, 2.0 * row as f64 + 0.5);
            let want = common::trilinear([4, 4, 1], |x, y, _| g.get(x, y), [fx, fy, 0.0]);
            assert!((out.get(col, row) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn normalize_middle_value() {
    let spec = GridSpec::new([0.0, 0.0], 1.0, 3, 1).unwrap();
    let g = RasterGrid::from_values(spec, vec![40.0, 47.0, 75.0], DEFAULT_NODATA).unwrap();
    let n = raster::normalize_minmax(&g).unwrap();
    assert_eq!(n.grid.values, vec![0.0, (47.0 - 40.0) / 35.0, 1.0]);
    assert_eq!((n.min, n.max, n.degenerate), (40.0, 75.0, false));
}
