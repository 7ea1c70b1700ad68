use proptest::prelude::*;
use worldgen::tubes::{self, Streamline};

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tube_counts_and_topology(p in 2usize..60, c in 3usize..16, seed in any::<u64>()) {
        let line = tubes::synthetic_streamlines(1, p..=p, [100.0; 3], 3.0, seed).remove(0);
        let m = tubes::generate_tube_mesh(&line, c, 0.4).unwrap();
        prop_assert_eq!(m.vertices.len(), p * c);
        prop_assert_eq!(m.triangles.len(), 2 * (c - 2) + 2 * (p - 1) * c);
        prop_assert_eq!(m.euler_characteristic(), 2);
        prop_assert!(m.check_closed_manifold().is_ok());
        prop_assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn instances_reconstruct_segments(p in 2usize..40, seed in any::<u64>()) {
        let line = tubes::synthetic_streamlines(1, p..=p, [50.0; 3], 2.0, seed).remove(0);
        let inst = tubes::generate_segment_instances(&line);
        prop_assert_eq!(inst.len(), p - 1);
        for (k, s) in inst.iter().enumerate() {
            let (a, b) = s.endpoints();
            for axis in 0..3 {
                prop_assert!((a[axis] - line.points[k][axis] as f64).abs() < 1e-4);
                prop_assert!((b[axis] - line.points[k + 1][axis] as f64).abs() < 1e-4);
            }
        }
    }
}

#[test]
fn straight_tube_volume_approaches_prism() {
    let line = Streamline::new((0..11).map(|i| [i as f32, 0.0, 0.0]).collect());
    let c = 64;
    let m = tubes::generate_tube_mesh(&line, c, 1.0).unwrap();
    // A regular C-gon prism of circumradius 1 and length 10.
    let polygon_area = 0.5 * c as f64 * (std::f64::consts::TAU / c as f64).sin();
    assert!((m.signed_volume() - polygon_area * 10.0).abs() < 1e-6);
}

#[test]
fn duplicate_points_are_dropped_before_meshing() {
    let line = Streamline::new(vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
    let m = tubes::generate_tube_mesh(&line, 5, 0.2).unwrap();
    assert_eq!(m.vertices.len(), 15);
}
