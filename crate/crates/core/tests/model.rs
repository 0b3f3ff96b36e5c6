use approx::assert_relative_eq;
use proptest::prelude::*;
use tangency::{ModelParams, PlanarFamily, PlanarPoint, RegionTag};

fn dissipative_params() -> impl Strategy<Value = ModelParams> {
    (1.2f64..4.0, 0.05f64..0.95).prop_map(|(sigma, frac)| {
        // λ ∈ (0, 1/σ) keeps λσ < 1
        ModelParams::new(frac / sigma, sigma).unwrap()
    })
}

#[test]
fn documented_examples() {
    let fam = PlanarFamily::new(ModelParams::new(0.2, 2.0).unwrap());
    let t = fam.transition_map(0.0, PlanarPoint::new(0.0, 1.0)).unwrap();
    assert_eq!((t.x, t.y), (1.0, 0.0));
    let t = fam.transition_map(0.0, PlanarPoint::new(0.1, 1.2)).unwrap();
    assert_relative_eq!(t.x, 1.2);
    assert_relative_eq!(t.y, -0.06, max_relative = 1e-12);

    let img = fam.composite_map(0.0641, 4, PlanarPoint::new(1.001, 0.0625)).unwrap();
    assert_relative_eq!(img.image.x, 1.0, max_relative = 1e-12);
    assert_relative_eq!(img.image.y, 0.0624984, max_relative = 1e-12);

    let j = fam.composite_jacobian(4, PlanarPoint::new(1.0, 0.0625)).unwrap();
    assert_relative_eq!(j[(0, 1)], 16.0);
    assert_relative_eq!(j[(1, 0)], -0.0016, max_relative = 1e-12);
    assert_eq!(j[(0, 0)], 0.0);
    assert!(j[(1, 1)].abs() < 1e-15);

    let (s, mu) = fam.closed_form_sink(10).unwrap();
    assert_eq!((s.x, s.y), (1.0, 2f64.powi(-10)));
    assert_relative_eq!(mu, 2f64.powi(-10) + 0.2f64.powi(10), max_relative = 1e-15);
}

#[test]
fn sink_orbit_is_periodic_in_the_simulator() {
    let fam = PlanarFamily::new(ModelParams::new(0.2, 2.0).unwrap());
    let (s, mu) = fam.closed_form_sink(10).unwrap();
    let orbit = fam.simulate_orbit(mu, s, 11);
    assert!(!orbit.escaped);
    assert!(orbit.points[11].distance(&s) < 1e-12);
    assert_eq!(orbit.region_tags[10], RegionTag::R1Transition);
}

#[test]
fn failure_orbit_hits_two() {
    let fam = PlanarFamily::new(ModelParams::new(1.0 / 64.0, 16.0).unwrap());
    let (_, mu) = fam.closed_form_sink(3).unwrap();
    let orbit = fam.simulate_orbit(mu, PlanarPoint::new(1.0, mu), 20);
    assert!((orbit.points[7].y - 2.0).abs() < 1e-9);
    assert!(orbit.escaped);
    assert_eq!(*orbit.region_tags.last().unwrap(), RegionTag::Escaped);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_sink_is_fixed(p in dissipative_params(), n in 1u32..12) {
        let fam = PlanarFamily::new(p);
        prop_assume!(p.check_precision(n).is_ok());
        let (s, mu) = fam.closed_form_sink(n).unwrap();
        let img = fam.composite_map(mu, n, s).unwrap();
        prop_assert!((img.image.x - s.x).abs() < 1e-12);
        prop_assert!((img.image.y - s.y).abs() < 1e-12 * s.y.max(1.0));
    }

    #[test]
    fn composite_jacobian_determinant(p in dissipative_params(), n in 1u32..10, x in -1.0f64..1.0, y in -0.5f64..0.5) {
        let fam = PlanarFamily::new(p);
        let sn = p.sigma().powi(n as i32);
        let j = fam.composite_jacobian(n, PlanarPoint::new(x, y / sn)).unwrap();
        let det = j.determinant();
        let expected = (p.lambda() * p.sigma()).powi(n as i32);
        prop_assert!((det - expected).abs() <= 1e-12 * expected.max(1e-300) + 1e-15);
    }

    #[test]
    fn sink_eigenvalues_are_imaginary(p in dissipative_params(), n in 1u32..10) {
        let fam = PlanarFamily::new(p);
        let (s, _) = fam.closed_form_sink(n).unwrap();
        let j = fam.composite_jacobian(n, s).unwrap();
        let eig = tangency::spectra::eigenvalues_2x2(&j);
        let m = (p.lambda() * p.sigma()).powf(n as f64 / 2.0);
        // the trace is 2σⁿ(σⁿy − 1), which rounds at the σⁿ·ε scale
        let trace_noise = 8.0 * f64::EPSILON * p.sigma().powi(2 * n as i32);
        for z in eig {
            prop_assert!(z.re.abs() <= trace_noise);
            prop_assert!((z.im.abs() - m).abs() < 1e-9 * m);
        }
    }

    #[test]
    fn simulator_agrees_with_composite(dx in -0.05f64..0.05, dy in -0.2f64..0.2, mu in -0.01f64..0.01) {
        let p = ModelParams::new(0.2, 2.0).unwrap();
        let fam = PlanarFamily::new(p);
        let n = 6;
        let z = PlanarPoint::new(1.0 + dx, (1.0 + dy) * 2f64.powi(-6));
        let orbit = fam.simulate_orbit(mu, z, n as usize + 1);
        let img = fam.composite_map(mu, n, z).unwrap();
        prop_assert!(!orbit.escaped);
        prop_assert!(orbit.points[n as usize + 1].distance(&img.image) < 1e-12);
    }

    #[test]
    fn orbit_tags_align(x in -2.0f64..2.0, y in -2.0f64..2.0, mu in -0.1f64..0.1) {
        let fam = PlanarFamily::new(ModelParams::new(0.3, 2.5).unwrap());
        let orbit = fam.simulate_orbit(mu, PlanarPoint::new(x, y), 40);
        prop_assert_eq!(orbit.points.len(), orbit.region_tags.len());
        if let Some(i) = orbit.region_tags.iter().position(|t| *t == RegionTag::Escaped) {
            prop_assert!(orbit.escaped);
            prop_assert_eq!(i, orbit.points.len() - 1);
        }
    }

    #[test]
    fn tangency_lies_at_q(y in -0.2f64..0.2) {
        // the local unstable manifold {x = 0} maps onto the parabola through q
        let fam = PlanarFamily::new(ModelParams::new(0.2, 2.0).unwrap());
        let t = fam.transition_map(0.0, PlanarPoint::new(0.0, 1.0 + y)).unwrap();
        prop_assert!((t.x - (1.0 + y)).abs() < 1e-15);
        prop_assert!((t.y - y * y).abs() < 1e-15);
        prop_assert!(t.y >= 0.0);
    }
}

#[test]
fn parameter_invariants_rejected() {
    for (l, s) in [(0.0, 2.0), (1.0, 2.0), (0.5, 1.0), (0.6, 2.0), (f64::NAN, 2.0)] {
        assert!(ModelParams::new(l, s).is_err(), "{l} {s}");
    }
    let p = ModelParams::new(0.2, 2.0).unwrap();
    assert!(p.extremely_dissipative());
    assert!(!ModelParams::new(0.3, 2.0).unwrap().extremely_dissipative());
}
