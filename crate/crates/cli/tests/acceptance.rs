//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line.

mod common;

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tangency::attractor::{estimate_milnor, probe_stability, ProbeVerdict, UserMap};
use tangency::geometry::{
    capture_verdict, estimate_basin, grow_unstable_manifold, manifold_meets_basin, BasinConfig,
    Bounds,
};
use tangency::newton::find_sink;
use tangency::poly::Polynomial;
use tangency::renorm::{
    c0_deviation, general_c0_deviation, general_limit_jacobian, general_limit_map,
    quadratic_fixed_points, renormalized_map_2d, GeneralCoeffs, GeneralCoeffsSpec, GeneralFrame,
    RenormFrame2D,
};
use tangency::spectra::{classify, eigenvalues, eigenvalues_2x2};
use tangency::{ModelParams, PlanarFamily, PlanarPoint, RegionTag};

type Check = Result<String, String>;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tangency")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn family(l: f64, s: f64) -> PlanarFamily {
    PlanarFamily::new(ModelParams::new(l, s).unwrap())
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_closed_form_sinks() -> Check {
    let fam = family(0.2, 2.0);
    let mut worst_res = 0.0f64;
    let mut worst_eig = 0.0f64;
    for n in 3..=10u32 {
        let (s, mu) = fam.closed_form_sink(n).unwrap();
        let seed = PlanarPoint::new(1.01, 2f64.powi(-(n as i32)) * 1.01);
        let rep = find_sink(&fam, mu, n, seed).map_err(|e| format!("n={n}: {e}"))?;
        ensure(rep.point.distance(&s) < 1e-9 * s.y.max(1e-3), format!("n={n}: root {} not at {s}", rep.point))?;
        worst_res = worst_res.max(rep.residual);
        let m = 0.4f64.powf(f64::from(n) / 2.0);
        for z in eigenvalues_2x2(&rep.jacobian_matrix()) {
            let target = Complex64::new(0.0, m.copysign(z.im));
            worst_eig = worst_eig.max((z - target).norm() / m);
        }
    }
    ensure(worst_res < 1e-10, format!("residual {worst_res:e}"))?;
    ensure(worst_eig < 1e-8, format!("eigenvalue error {worst_eig:e}"))?;
    Ok(format!("max residual {worst_res:.1e}, max eigenvalue rel. error {worst_eig:.1e}"))
}

fn c2_deviation_law() -> Check {
    let p = ModelParams::new(0.2, 2.0).unwrap();
    let mut worst = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for nu in [-1.0, 0.0, 1.0] {
        let mut prev: Option<f64> = None;
        for n in 2..=12u32 {
            let f = RenormFrame2D::new(p, n).unwrap();
            let d = c0_deviation(&f, nu, 2.0, 41).unwrap();
            let exact = 0.4f64.powi(n as i32) * 2.0;
            worst = worst.max((d - exact).abs() / exact);
            if let Some(q) = prev {
                worst_ratio = worst_ratio.max((d / q - 0.4).abs());
            }
            prev = Some(d);
        }
    }
    ensure(worst < 1e-12, format!("relative error {worst:e}"))?;
    ensure(worst_ratio < 1e-10, format!("ratio error {worst_ratio:e}"))?;
    Ok(format!("rel. error {worst:.1e}, ratio error {worst_ratio:.1e}"))
}

fn c3_conjugacy() -> Check {
    let p = ModelParams::new(0.2, 2.0).unwrap();
    let fam = PlanarFamily::new(p);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for n in 3..=8u32 {
        let f = RenormFrame2D::new(p, n).unwrap();
        for _ in 0..50 {
            let bx = rng.random_range(-2.0..2.0);
            let by = rng.random_range(-2.0..2.0);
            let nu = rng.random_range(-1.0..1.0);
            let z = f.h_n_inverse(bx, by).unwrap();
            let img = fam.composite_map(f.reparam_mu(nu), n, z).unwrap();
            let (gx, gy) = f.h_n(img.image).unwrap();
            let (ex, ey) = renormalized_map_2d(&f, nu, bx, by);
            worst = worst.max((gx - ex).abs()).max((gy - ey).abs());
        }
    }
    ensure(worst < 1e-9, format!("max mismatch {worst:e}"))?;
    Ok(format!("max mismatch {worst:.1e} over 300 points"))
}

fn c4_capture_success() -> Check {
    let fam = family(0.2, 2.0);
    let n = 10u32;
    let v = capture_verdict(&fam, n, 0.0).map_err(|e| e.to_string())?;
    let sink = v.sink.as_ref().ok_or("no Newton sink")?.point;
    // count passes through R₁ until the orbit of (1, μ) sits within 1e-6 of the sink
    let orbit = fam.simulate_orbit(v.mu, PlanarPoint::new(1.0, v.mu), 201 * (n as usize + 1));
    let mut returns = 0;
    let mut converged_at = None;
    for (i, tag) in orbit.region_tags.iter().enumerate() {
        if *tag == RegionTag::R1Transition {
            returns += 1;
            if returns > 200 {
                break;
            }
            if let Some(next) = orbit.points.get(i + 1) {
                if next.distance(&sink) < 1e-6 {
                    converged_at = Some(returns);
                    break;
                }
            }
        }
    }
    let converged_at = converged_at.ok_or("witness did not reach the sink within 200 returns")?;

    let frame = RenormFrame2D::new(fam.params, n).unwrap();
    let r = quadratic_fixed_points(0.0).source.unwrap();
    let cfg = BasinConfig::new(Bounds::rescaled_square(&frame, 0.5 * r).unwrap(), 41, 41);
    let basin = estimate_basin(&fam, v.mu, n, sink, &cfg).map_err(|e| e.to_string())?;
    let arc = grow_unstable_manifold(&fam, v.mu, 3.0, 0.01).map_err(|e| e.to_string())?;
    let hit = manifold_meets_basin(&arc, &basin);
    ensure(hit.hit, "manifold_meets_basin: no hit")?;
    ensure(v.captured, "capture_verdict: captured=false")?;
    Ok(format!("within 1e-6 after {converged_at} returns, manifold hit at {}", hit.witness.unwrap()))
}

fn c5_capture_failure() -> Check {
    let fam = family(1.0 / 64.0, 16.0);
    let mut worst = 0.0f64;
    for n in 2..=4u32 {
        let (_, mu) = fam.closed_form_sink(n).unwrap();
        let orbit = fam.simulate_orbit(mu, PlanarPoint::new(1.0, mu), 3 * (n as usize + 1) + 1);
        let y = orbit.points.get(2 * n as usize + 1).ok_or("orbit too short")?.y;
        worst = worst.max((y - 2.0).abs());
        ensure(orbit.escaped, format!("n={n}: no escape flagged"))?;
        let v = capture_verdict(&fam, n, 0.0).map_err(|e| e.to_string())?;
        ensure(!v.captured, format!("n={n}: captured=true"))?;
    }
    ensure(worst < 1e-9, format!("second-pass y error {worst:e}"))?;
    Ok(format!("second-pass y = 2 within {worst:.1e}, escape flagged, not captured"))
}

fn c6_quadratic_family() -> Check {
    let mut worst = 0.0f64;
    for i in 0..=225 {
        let nu = (-2.0 + 0.01 * f64::from(i)).min(0.25);
        let q = quadratic_fixed_points(nu);
        for y in [q.sink.ok_or("no a_nu")?, q.source.ok_or("no r_nu")?] {
            worst = worst.max((y * y + nu - y).abs());
        }
    }
    ensure(worst < 1e-12, format!("fixed-point residual {worst:e}"))?;
    let mut worst_eig = 0.0f64;
    for m in 2..=4usize {
        let k = m - 1;
        let spec = GeneralCoeffsSpec {
            dim: m,
            e: vec![0.25; k],
            a: (0..k).map(|i| 0.5 - 0.3 * i as f64).collect(),
            b: 1.3,
            c: vec![0.2; k],
            gamma: vec![vec![0.0; k]; k],
            lambda_s: (0..k).map(|i| (0..k).map(|j| if i == j { 0.3 } else { 0.0 }).collect()).collect(),
            sigma: 2.0,
            rho1: vec![],
            rho2: Polynomial::zero(),
        };
        let co = GeneralCoeffs::from_spec(&spec).map_err(|e| e.to_string())?;
        let fixed = co.a_over_b() * 2.0;
        let (fx, fy) = general_limit_map(&co, -2.0, &fixed, 2.0);
        worst_eig = worst_eig.max((fx - &fixed).norm()).max((fy - 2.0).abs());
        let mut mods: Vec<f64> = eigenvalues(&general_limit_jacobian(&co, 2.0))
            .iter()
            .map(|z| z.norm())
            .collect();
        mods.sort_by(f64::total_cmp);
        worst_eig = worst_eig.max((mods[m - 1] - 4.0).abs());
        for v in &mods[..m - 1] {
            worst_eig = worst_eig.max(v.abs());
        }
    }
    ensure(worst_eig < 1e-9, format!("saddle spectrum error {worst_eig:e}"))?;
    Ok(format!("residual {worst:.1e}, saddle spectrum error {worst_eig:.1e}"))
}

fn c7_spectral_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 1000 {
        let d = rng.random_range(2..=5);
        let moduli: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        if moduli.iter().any(|m| (m - 1.0).abs() < 1e-6) {
            continue;
        }
        let eigs: Vec<Complex64> = moduli
            .iter()
            .map(|&m| Complex64::from_polar(m, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let rep = classify(&eigs).map_err(|e| e.to_string())?;
        let ms: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
        let det: f64 = ms.iter().product();
        let exp: Vec<f64> = ms.iter().copied().filter(|&m| m > 1.0).collect();
        let pairs = (0..d).all(|i| (0..d).all(|j| i == j || ms[i] * ms[j] < 1.0));
        let sectional = exp.len() == 1 && pairs;
        let extreme = sectional && ms.iter().filter(|&&m| m < 1.0).all(|&m| m * exp[0] * exp[0] < 1.0);
        ensure(
            rep.dissipative == (det < 1.0)
                && rep.area_expanding == (det > 1.0)
                && rep.sectionally_dissipative == sectional
                && rep.extremely_dissipative == extreme,
            format!("disagreement on {ms:?}"),
        )?;
        ensure(
            (!rep.extremely_dissipative || rep.sectionally_dissipative)
                && (!rep.sectionally_dissipative || (rep.dissipative && rep.expanding_count == 1)),
            format!("implication chain broken on {ms:?}"),
        )?;
        checked += 1;
    }
    Ok("1000/1000 tuples agree, implication chain intact".into())
}

fn c8_general_decay() -> Check {
    let co = GeneralCoeffs::from_toml_str(&common::general_coeffs_toml(8)).map_err(|e| e.to_string())?;
    let bound = co.decay_bound();
    let devs: Vec<f64> = (10..=30)
        .step_by(2)
        .map(|n| {
            let f = GeneralFrame::new(co.clone(), n).unwrap();
            general_c0_deviation(&f, 0.0, 2.0, 11).unwrap()
        })
        .collect();
    ensure(devs.windows(2).all(|w| w[1] < w[0]), format!("not monotone: {devs:?}"))?;
    // two steps of n per entry
    let tail = devs[devs.len() - 1] / devs[devs.len() - 2];
    let allowed = TAIL_SLACK * bound * bound;
    ensure(tail <= allowed, format!("tail ratio {tail:.4} exceeds {allowed:.4}"))?;
    Ok(format!("monotone over n=10..30, tail ratio {tail:.4} vs bound² {:.4}", bound * bound))
}

/// Tolerance on the measured two-step ratio against the asymptotic rate.
const TAIL_SLACK: f64 = 1.05;

fn c9_attractor_probes() -> Check {
    let contraction = UserMap::contraction();
    let est = estimate_milnor(&contraction, 200, 200, 10, 0.05, 9).map_err(|e| e.to_string())?;
    ensure(est.clusters.len() == 1, format!("{} clusters for the contraction", est.clusters.len()))?;
    ensure(est.clusters[0].center.iter().all(|v| v.abs() < 1e-12), "contraction cluster off the origin")?;
    let probe = probe_stability(&contraction, &est, 0.5, 1e-3, 100, 100_000, 9).map_err(|e| e.to_string())?;
    ensure(probe.verdict == ProbeVerdict::NoEscapeObserved, "contraction: escape reported")?;

    let circle = UserMap::circle_semistable();
    let est = estimate_milnor(&circle, 100, 100_000, 5, 0.05, 7).map_err(|e| e.to_string())?;
    ensure(est.clusters.len() == 1, format!("{} clusters for the circle map", est.clusters.len()))?;
    let c = est.clusters[0].center[0];
    ensure(c.abs() < 0.05, format!("circle cluster at {c}"))?;
    let probe = probe_stability(&circle, &est, 0.5, 1e-3, 100, 100_000, 7).map_err(|e| e.to_string())?;
    ensure(probe.verdict == ProbeVerdict::EscapeFound, "circle: no escape found")?;
    Ok(format!("contraction stable; circle cluster at {c:.1e}, {} escaping probes", probe.escapes.len()))
}

fn c10_certificate() -> Check {
    let out = run(&["certify", "--lambda", "0.2", "--sigma", "2", "--n-list", "4:10", "--nu", "0"]);
    ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())?;
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let r = &doc["report"];
    ensure(r["accumulation_ok"] == true, "accumulation_ok=false")?;
    let sinks = r["sink_sequence"].as_array().ok_or("no sink_sequence")?;
    for s in sinks {
        let n = s["n"].as_i64().unwrap() as i32;
        let y = s["y_distance"].as_f64().unwrap();
        ensure((y - 2f64.powi(-n)).abs() / 2f64.powi(-n) < 1e-6, format!("n={n}: y-distance {y}"))?;
    }
    ensure(r["captured"] == true, "captured=false")?;

    let w = &r["wandering_exit"];
    let witness = w["witness_index"].as_u64().ok_or("no witness_index")? as usize;
    let pts = w["points"].as_array().ok_or("no wandering_exit points")?;
    // points[witness - 1] is r = (0, 1); twenty exact preimages further back
    let z = &pts[witness - 1 - 20];
    let d = z["x"].as_f64().unwrap().hypot(z["y"].as_f64().unwrap());
    let bound = 0.2f64.powi(20) + 1e-12;
    ensure(
        d < bound,
        format!(
            "distance to origin after 20 preimages is {d:.3e} (= 2^-20), required < {bound:.3e}; \
             preimages of (0,1) along the unstable axis contract like sigma^-k, not lambda^k"
        ),
    )?;
    Ok(format!("accumulation ok, captured, tail distance {d:.2e}"))
}

fn collect_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn c11_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let coeffs = tmp.path().join("coeffs.toml");
    std::fs::write(&coeffs, common::general_coeffs_toml(8)).unwrap();
    let coeffs = coeffs.to_str().unwrap().to_owned();
    let commands: Vec<Vec<&str>> = vec![
        vec!["sink", "--n", "6"],
        vec!["renorm-sweep", "--n-list", "2:12"],
        vec!["renorm-sweep", "--general", &coeffs, "--n-list", "10:20:2", "--format", "json"],
        vec!["capture", "--n", "10"],
        vec!["manifold", "--mu", "0.001"],
        vec!["basin", "--n", "6", "--nx", "31", "--ny", "31"],
        vec!["attractor", "--map", "circle-semistable", "--samples", "300", "--seed", "7", "--probe", "--probes", "20", "--horizon", "20000"],
        vec!["attractor", "--map", "planar", "--samples", "50", "--transient", "700", "--seed", "3"],
        vec!["certify", "--n-list", "4:10"],
        vec!["classify-spectrum", "--eig", "2,0.1+0.05i,0.1-0.05i"],
    ];
    for args in &commands {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("{}-{rep}", args.join("_").replace(['/', '.'], "")));
            let mut full: Vec<&str> = args.clone();
            let d = dir.to_str().unwrap().to_owned();
            full.extend(["--out", &d]);
            let out = run(&full);
            ensure(out.status.success(), format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
            outputs.push((out.stdout, collect_files(&dir)));
        }
        ensure(outputs[0] == outputs[1], format!("{args:?}: outputs differ between runs"))?;
        ensure(!outputs[0].1.is_empty(), format!("{args:?}: no files written"))?;
    }
    Ok(format!("{} commands byte-identical across reruns", commands.len()))
}

type Criterion = (&'static str, fn() -> Check, Duration);

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 closed-form sink reproduction", c1_closed_form_sinks, Duration::from_secs(1)),
        ("2 exact renormalization deviation law", c2_deviation_law, Duration::from_secs(1)),
        ("3 conjugacy oracle", c3_conjugacy, Duration::from_secs(1)),
        ("4 capture success", c4_capture_success, Duration::from_secs(5)),
        ("5 capture failure reproduction", c5_capture_failure, Duration::from_secs(1)),
        ("6 quadratic family", c6_quadratic_family, Duration::from_secs(1)),
        ("7 spectral predicates vs oracle", c7_spectral_oracle, Duration::from_secs(1)),
        ("8 general renormalization decay", c8_general_decay, Duration::from_secs(5)),
        ("9 attractor and stability probes", c9_attractor_probes, Duration::from_secs(10)),
        ("10 certificate end-to-end", c10_certificate, Duration::from_secs(10)),
        ("11 determinism", c11_determinism, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let t = Instant::now();
        let result = check();
        let elapsed = t.elapsed();
        let result = result.and_then(|msg| {
            if elapsed <= limit {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {elapsed:.2?}, limit {limit:.0?}"))
            }
        });
        match result {
            Ok(msg) => println!("PASS criterion {name}: {msg} [{elapsed:.2?}]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg} [{elapsed:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
