use proptest::prelude::*;

use chipguide::dynamics::{Fate, FateCounts};
use chipguide::field::{distance_to_nearest_wire, field_jacobian, field_jacobian_fd, total_field};
use chipguide::geometry::{build_y_splitter, mirror_axial, mirror_point};
use chipguide::io::{format_float, GridFile, LayoutFile};
use chipguide::potential::{classify_two_wire, two_wire_minima, TwoWireCase, FUSED_TOLERANCE};
use chipguide::units::GAUSS;
use chipguide::{AtomSpecies, Vec3, YSplitterParams};

fn y_splitter(fraction: f64, bias_g: (f64, f64, f64)) -> chipguide::Circuit {
    let bias = Vec3::new(bias_g.0, bias_g.1, bias_g.2) * GAUSS;
    build_y_splitter(&YSplitterParams::new(0.8, bias).with_fraction(fraction)).unwrap()
}

fn point() -> impl Strategy<Value = Vec3> {
    (-800e-6..800e-6, -400e-6..400e-6, 5e-6..400e-6).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mirrored_circuit_gives_mirrored_field(
        f in 0.05..0.95f64,
        bx in -5.0..5.0f64,
        by in 1.0..20.0f64,
        p in point(),
    ) {
        let c = y_splitter(f, (bx, by, 0.0));
        let m = c.mirrored_y();
        let a = mirror_axial(&total_field(&c, &p).unwrap());
        let b = total_field(&m, &mirror_point(&p)).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-9));
    }

    #[test]
    fn field_is_divergence_free(p in point(), f in 0.1..0.9f64) {
        let c = y_splitter(f, (3.0, 12.0, 0.0));
        prop_assume!(distance_to_nearest_wire(&c, &p) > 1e-6);
        let j = field_jacobian(&c, &p).unwrap();
        // Not curl-free: the open ends of the arms are current sources.
        prop_assert!(j.trace().abs() <= 1e-9 * j.norm());
    }

    #[test]
    fn analytic_jacobian_matches_differences(p in point()) {
        let c = y_splitter(0.5, (3.0, 6.0, 0.0));
        prop_assume!(distance_to_nearest_wire(&c, &p) > 1e-6);
        let a = field_jacobian(&c, &p).unwrap();
        let n = field_jacobian_fd(&c, &p).unwrap();
        prop_assert!((a - n).norm() <= 1e-6 * a.norm());
    }

    #[test]
    fn two_wire_minima_follow_classification(
        log_ratio in (0.5f64).ln()..(2.0f64).ln(),
        i in 0.3..1.5f64,
        b in 4.0..16.0f64,
    ) {
        let ratio = log_ratio.exp();
        prop_assume!((ratio - 1.0).abs() > 0.05);
        let ds = 2e-7 * i / (b * GAUSS);
        let class = classify_two_wire(ratio * ds, i, b * GAUSS).unwrap();
        let minima = two_wire_minima(ratio * ds, i, b * GAUSS, &AtomSpecies::lithium7(), 61).unwrap();
        prop_assert_eq!(minima.len(), 2);
        let (p, q) = (minima[0].position, minima[1].position);
        match class.case {
            TwoWireCase::StackedPair => prop_assert!((p.y - q.y).abs() < (p.z - q.z).abs()),
            TwoWireCase::SideBySide => prop_assert!((p.y - q.y).abs() > (p.z - q.z).abs()),
            TwoWireCase::Fused => prop_assert!(false, "outside the fused band"),
        }
    }

    #[test]
    fn classification_is_scale_free(ratio in 0.3..3.0f64, i in 0.1..2.0f64, b in 1.0..30.0f64, k in 0.1..10.0f64) {
        let ds = 2e-7 * i / (b * GAUSS);
        let a = classify_two_wire(ratio * ds, i, b * GAUSS).unwrap().case;
        let c = classify_two_wire(ratio * ds, k * i, k * b * GAUSS).unwrap().case;
        prop_assert_eq!(a, c);
        prop_assert_eq!(a == TwoWireCase::Fused, (ratio - 1.0).abs() <= FUSED_TOLERANCE);
    }

    #[test]
    fn floats_survive_text(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = format_float(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn grid_files_round_trip(
        ny in 1usize..6,
        nz in 1usize..6,
        count in 0usize..3,
        h in (-1e-3..1e-3f64, -1e-3..1e-3f64, 1e-9..1e-5f64),
        seed in any::<u64>(),
    ) {
        let grids = (0..count)
            .map(|k| (0..ny * nz).map(|i| (seed.wrapping_mul(31).wrapping_add((k * 977 + i) as u64)) as f64 * 1e-3).collect())
            .collect();
        let g = GridFile { ny, nz, x: h.0, y_min: h.1, z_min: 1e-6, dy: h.2, dz: 2.0 * h.2, grids };
        prop_assert_eq!(GridFile::from_bytes(&g.to_bytes()).unwrap(), g);
    }

    #[test]
    fn layouts_round_trip(f in 0.0..1.0f64, angle in 1.0..30.0f64, bx in -5.0..5.0f64, by in 1.0..20.0f64) {
        let p = YSplitterParams::new(0.8, Vec3::new(bx, by, 0.0) * GAUSS)
            .with_fraction(f)
            .with_half_angle(angle.to_radians());
        let c = build_y_splitter(&p).unwrap();
        let text = LayoutFile::from_circuit(&c).to_json();
        let back = LayoutFile::from_json(&text).unwrap().to_circuit().unwrap();
        prop_assert_eq!(back.segments.len(), c.segments.len());
        for (a, b) in back.segments.iter().zip(&c.segments) {
            // One rounding each way through μm.
            prop_assert!((a.start - b.start).norm() <= 1e-15 * b.start.norm());
            prop_assert!((a.end - b.end).norm() <= 1e-15 * b.end.norm());
            prop_assert_eq!(a.current, b.current);
        }
        prop_assert!((back.bias - c.bias).norm() <= 1e-15 * c.bias.norm());
    }

    #[test]
    fn fates_partition_the_ensemble(fates in prop::collection::vec(0usize..6, 0..200)) {
        let mut c = FateCounts::default();
        for &k in &fates {
            c.add(Fate::ALL[k]);
        }
        prop_assert_eq!(c.total(), fates.len() as u64);
        prop_assert_eq!(c.left + c.right + c.back + c.lost(), c.total());
    }
}
