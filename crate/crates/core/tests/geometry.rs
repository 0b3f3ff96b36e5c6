use proptest::prelude::*;
use tangency::geometry::{
    capture_verdict, estimate_basin, grow_unstable_manifold, manifold_meets_basin, BasinConfig,
    Bounds, CellTag,
};
use tangency::newton::find_sink;
use tangency::renorm::{quadratic_fixed_points, RenormFrame2D};
use tangency::{ModelParams, PlanarFamily, PlanarPoint};

fn family() -> PlanarFamily {
    PlanarFamily::new(ModelParams::new(0.2, 2.0).unwrap())
}

#[test]
fn attracted_cells_converge_under_plain_iteration() {
    let fam = family();
    let n = 6;
    let (s, mu) = fam.closed_form_sink(n).unwrap();
    let frame = RenormFrame2D::new(fam.params, n).unwrap();
    let r = quadratic_fixed_points(0.0).source.unwrap();
    let cfg = BasinConfig::new(Bounds::rescaled_square(&frame, 0.5 * r).unwrap(), 15, 15);
    let basin = estimate_basin(&fam, mu, n, s, &cfg).unwrap();
    assert_eq!(basin.count(CellTag::Attracted), 225);
    for j in 0..15 {
        for i in 0..15 {
            let z = basin.cell_center(i, j);
            let orbit = fam.simulate_orbit(mu, z, 300 * (n as usize + 1));
            assert!(!orbit.escaped);
            // the orbit passes through the sink's phase every n + 1 steps
            let near = orbit.points[orbit.points.len() - 2 * (n as usize + 1)..]
                .iter()
                .map(|p| p.distance(&s))
                .fold(f64::INFINITY, f64::min);
            assert!(near < 1e-9, "cell ({i},{j}) ends {near} from the sink");
        }
    }
}

#[test]
fn basin_is_deterministic() {
    let fam = family();
    let (s, mu) = fam.closed_form_sink(6).unwrap();
    let frame = RenormFrame2D::new(fam.params, 6).unwrap();
    let cfg = BasinConfig::new(Bounds::rescaled_square(&frame, 1.5).unwrap(), 21, 21);
    let a = estimate_basin(&fam, mu, 6, s, &cfg).unwrap();
    let b = estimate_basin(&fam, mu, 6, s, &cfg).unwrap();
    assert_eq!(a.membership, b.membership);
    assert!(a.count(CellTag::Escaped) > 0);
}

#[test]
fn capture_witness_converges() {
    let fam = family();
    let v = capture_verdict(&fam, 10, 0.0).unwrap();
    assert!(v.captured);
    let sink = v.sink.as_ref().unwrap().point;
    let orbit = fam.simulate_orbit(v.mu, PlanarPoint::new(1.0, v.mu), 200 * 11);
    assert!(!orbit.escaped);
    let near = orbit.points[orbit.points.len() - 11..]
        .iter()
        .map(|p| p.distance(&sink))
        .fold(f64::INFINITY, f64::min);
    assert!(near < 1e-6);

    let frame = RenormFrame2D::new(fam.params, 10).unwrap();
    let cfg = BasinConfig::new(Bounds::rescaled_square(&frame, 0.5 * 1.0).unwrap(), 21, 21);
    let basin = estimate_basin(&fam, v.mu, 10, sink, &cfg).unwrap();
    let arc = grow_unstable_manifold(&fam, v.mu, 3.0, 0.01).unwrap();
    let hit = manifold_meets_basin(&arc, &basin);
    assert!(hit.hit);
    // the hit lies near the unscaled image of the entry point (0, ν + (λσ²)ⁿ)
    let entry = frame.h_n_inverse(v.rescaled_entry_point.0, v.rescaled_entry_point.1).unwrap();
    assert!(hit.witness.unwrap().distance(&entry) < 0.1);
}

#[test]
fn capture_offset_monotone_in_n() {
    let extreme = family();
    let mild = PlanarFamily::new(ModelParams::new(0.3, 2.0).unwrap());
    let mut prev_e = f64::INFINITY;
    let mut prev_m = 0.0;
    for n in 2..=12 {
        let e = capture_verdict(&extreme, n, 0.0).unwrap().predicted_offset;
        let m = capture_verdict(&mild, n, 0.0).unwrap().predicted_offset;
        assert!((e - 0.8f64.powi(n as i32)).abs() <= 1e-12 * e);
        assert!(e < prev_e && m > prev_m);
        prev_e = e;
        prev_m = m;
    }
}

#[test]
fn newton_sink_matches_closed_form() {
    let fam = family();
    for n in 3..=10 {
        let (s, mu) = fam.closed_form_sink(n).unwrap();
        let rep = find_sink(&fam, mu, n, PlanarPoint::new(1.01, 1.01 * s.y)).unwrap();
        assert!(rep.residual < 1e-10);
        assert!((rep.point.x - 1.0).abs() < 1e-9);
        assert!((rep.point.y - s.y).abs() < 1e-9 * s.y);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn manifold_spacing_respects_gap(mu in -0.05f64..0.05, gap in 0.005f64..0.05) {
        let fam = family();
        let arc = grow_unstable_manifold(&fam, mu, 2.5, gap).unwrap();
        prop_assert!(arc.max_spacing() <= gap);
        // the first piece lies on the local unstable direction, the y-axis
        let first = arc.samples[0].segment;
        for (p, s) in arc.points.iter().zip(&arc.samples) {
            if s.segment != first { break; }
            prop_assert!(p.x.abs() < 1e-6 * p.y.abs().max(1e-12));
        }
    }

    #[test]
    fn refinement_only_adds_points(mu in -0.02f64..0.02) {
        let fam = family();
        let coarse = grow_unstable_manifold(&fam, mu, 2.0, 0.04).unwrap();
        let fine = grow_unstable_manifold(&fam, mu, 2.0, 0.02).unwrap();
        prop_assert!(fine.len() >= coarse.len());
        prop_assert!(fine.max_spacing() <= 0.02);
    }
}
