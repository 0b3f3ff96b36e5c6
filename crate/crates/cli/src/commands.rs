use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use tangency::attractor::{
    build_certificate_with, estimate_milnor, probe_stability, CertificateOptions, UserMap,
};
use tangency::geometry::{
    capture_verdict_with, estimate_basin, grow_unstable_manifold, BasinConfig, Bounds,
    CaptureOptions, CellTag,
};
use tangency::newton::{find_sink, SinkReport};
use tangency::renorm::{
    c0_deviation, c1_deviation, general_c0_deviation, general_c1_deviation, quadratic_fixed_points,
    GeneralCoeffs, GeneralFrame, RenormFrame2D, DEFAULT_GRID,
};
use tangency::spectra::{classify, classify_orbit, eigenvalues_2x2};
use tangency::{Error, ModelParams, PlanarFamily, PlanarPoint, RegionSpec};

use crate::config::{pick, FileConfig};
use crate::failure::{Failure, PreExt};
use crate::output::{to_json, Envelope, Sink, SCHEMA};
use crate::parse::{parse_complex, NList};
use crate::{Command, Common, ModelArgs};

const DEFAULT_LAMBDA: f64 = 0.2;
const DEFAULT_SIGMA: f64 = 2.0;
const GENERAL_GRID: usize = 11;

struct Ctx {
    file: FileConfig,
    sink: Sink,
}

impl Ctx {
    fn new(common: &Common) -> Result<Ctx, Failure> {
        let file = FileConfig::load(common.config.as_deref())
            .map_err(|e| Failure::invalid("config", format!("{e:#}")))?;
        let dir: Option<PathBuf> = common
            .out
            .clone()
            .or_else(|| file.output.dir.clone().map(PathBuf::from));
        let sink = Sink::new(dir.as_deref())?;
        Ok(Ctx { file, sink })
    }

    fn family(&self, m: &ModelArgs) -> Result<PlanarFamily, Failure> {
        let p = &self.file.params;
        let params = ModelParams::new(
            pick(m.lambda, p.lambda, DEFAULT_LAMBDA),
            pick(m.sigma, p.sigma, DEFAULT_SIGMA),
        )
        .pre()?;
        match self.file.region.r1_half_extents {
            Some([hx, hy]) => {
                let region = RegionSpec::with_r1_half_extents(hx, hy).pre()?;
                PlanarFamily::with_region(params, region).pre()
            }
            None => Ok(PlanarFamily::new(params)),
        }
    }

    fn n(&self, flag: Option<u32>, default: u32) -> Result<u32, Failure> {
        let n = pick(flag, self.file.run.n, default);
        if n == 0 {
            return Err(Failure::invalid("invalid_parameters", "n must be at least 1"));
        }
        Ok(n)
    }

    fn n_list(&self, flag: Option<NList>, default: &str) -> Vec<u32> {
        flag.or_else(|| self.file.run.n_list.clone())
            .unwrap_or_else(|| default.parse().expect("static n-list"))
            .0
    }

    fn nu(&self, flag: Option<f64>) -> Result<f64, Failure> {
        finite("nu", pick(flag, self.file.run.nu, 0.0))
    }

    fn emit<I: Serialize, R: Serialize>(&self, command: &str, inputs: I, report: R) -> Result<(), Failure> {
        let doc = Envelope {
            schema: SCHEMA,
            command,
            inputs,
            report,
        };
        self.sink.primary(&format!("{}.json", command.replace('-', "_")), &to_json(&doc)?)
    }
}

fn finite(name: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::invalid("invalid_parameters", format!("{name} must be finite")))
    }
}

fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::invalid("invalid_parameters", format!("{name} must be positive (got {v})")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<usize, Failure> {
    if v > 0 {
        Ok(v)
    } else {
        Err(Failure::invalid("invalid_parameters", format!("{name} must be at least 1")))
    }
}

pub fn dispatch(common: &Common, command: Command) -> Result<(), Failure> {
    let ctx = Ctx::new(common)?;
    match command {
        Command::Sink { model, n, mu } => sink(&ctx, &model, n, mu),
        Command::RenormSweep {
            model,
            n_list,
            nu,
            k,
            grid,
            general,
            format,
        } => renorm_sweep(&ctx, &model, n_list, nu, k, grid, general, format),
        Command::Capture { model, n, nu } => capture(&ctx, &model, n, nu),
        Command::Manifold {
            model,
            mu,
            n,
            nu,
            length,
            max_gap,
        } => manifold(&ctx, &model, mu, n, nu, length, max_gap),
        Command::Basin {
            model,
            n,
            nu,
            nx,
            ny,
            delta,
            bounds,
            trap_radius,
            max_iterations,
        } => basin(&ctx, &model, n, nu, nx, ny, delta, bounds, trap_radius, max_iterations),
        Command::Attractor {
            model,
            map,
            samples,
            transient,
            tail,
            epsilon,
            seed,
            n,
            nu,
            probe,
            probes,
            horizon,
            eps_out,
            delta_in,
        } => attractor(
            &ctx,
            &model,
            AttractorArgs {
                map,
                samples,
                transient,
                tail,
                epsilon,
                seed,
                n,
                nu,
                probe,
                probes,
                horizon,
                eps_out,
                delta_in,
            },
        ),
        Command::Certify { model, n_list, nu } => certify(&ctx, &model, n_list, nu),
        Command::ClassifySpectrum { eig, jacobian } => classify_spectrum(&ctx, &eig, &jacobian),
    }
}

#[derive(Serialize)]
struct SinkOutput {
    mu: f64,
    mu_n: f64,
    closed_form_point: PlanarPoint,
    /// `|F^{n+N}(s_n) − s_n|` at `μ_n`.
    closed_form_residual: f64,
    newton: SinkReport,
    /// Distance between the Newton root and the closed-form sink.
    closed_form_vs_newton: f64,
    /// `(λσ)^{n/2}`, the modulus of `±i(λσ)^{n/2}`.
    predicted_modulus: f64,
    eigenvalue_residual: f64,
}

fn sink(ctx: &Ctx, model: &ModelArgs, n: Option<u32>, mu: Option<f64>) -> Result<(), Failure> {
    let fam = ctx.family(model)?;
    let n = ctx.n(n, 6)?;
    fam.params.check_precision(n).pre()?;
    let (s, mu_n) = fam.closed_form_sink(n).pre()?;
    let mu = finite("mu", pick(mu, ctx.file.run.mu, mu_n))?;

    let img = fam.composite_map(mu_n, n, s).run()?;
    let rep = find_sink(&fam, mu, n, PlanarPoint::new(1.01, 1.01 * s.y)).run()?;
    let p = fam.params;
    let predicted = (p.lambda() * p.sigma()).powf(f64::from(n) / 2.0);
    let eig = eigenvalues_2x2(&fam.composite_jacobian(n, s).run()?);
    let eigenvalue_residual = eig
        .iter()
        .map(|z| (z - Complex64::new(0.0, predicted.copysign(z.im))).norm())
        .fold(0.0, f64::max);

    let out = SinkOutput {
        mu,
        mu_n,
        closed_form_point: s,
        closed_form_residual: img.image.distance(&s),
        closed_form_vs_newton: rep.point.distance(&s),
        newton: rep.clone(),
        predicted_modulus: predicted,
        eigenvalue_residual,
    };
    let orbit = fam.simulate_orbit(mu, rep.point, n as usize + 1);
    ctx.sink.file("sink_orbit.csv", |w| orbit.write_csv(w))?;
    ctx.emit(
        "sink",
        json!({"lambda": p.lambda(), "sigma": p.sigma(), "n": n, "mu": mu}),
        out,
    )
}

#[derive(Serialize)]
struct SweepRow {
    n: u32,
    nu: f64,
    c0_dev: f64,
    c1_dev: f64,
}

#[allow(clippy::too_many_arguments)]
fn renorm_sweep(
    ctx: &Ctx,
    model: &ModelArgs,
    n_list: Option<NList>,
    nu: Option<f64>,
    k: Option<f64>,
    grid: Option<usize>,
    general: Option<PathBuf>,
    format: Option<String>,
) -> Result<(), Failure> {
    let f = &ctx.file;
    let nu = ctx.nu(nu)?;
    let k = positive("k", pick(k, f.sweep.k, 2.0))?;
    let format = pick(format, f.output.format.clone(), "csv".into());
    if format != "csv" && format != "json" {
        return Err(Failure::invalid("config", format!("unknown format {format:?} (csv or json)")));
    }
    let general_path = general.or_else(|| f.sweep.general.clone().map(PathBuf::from));
    let general_spec = match (&general_path, &f.general) {
        (Some(path), _) => Some(load_general(path)?),
        (None, Some(spec)) => Some(GeneralCoeffs::from_spec(spec).pre()?),
        (None, None) => None,
    };

    let mut rows = Vec::new();
    let (mode, n_list, grid) = match general_spec {
        Some(co) => {
            let n_list = ctx.n_list(n_list, "10:30:2");
            let grid = nonzero("grid", pick(grid, f.sweep.grid, GENERAL_GRID))?;
            let frames = n_list
                .iter()
                .map(|&n| GeneralFrame::new(co.clone(), n).pre())
                .collect::<Result<Vec<_>, _>>()?;
            for (fr, &n) in frames.iter().zip(&n_list) {
                rows.push(SweepRow {
                    n,
                    nu,
                    c0_dev: general_c0_deviation(fr, nu, k, grid).pre()?,
                    c1_dev: general_c1_deviation(fr, nu, k, grid).pre()?,
                });
            }
            ("general", n_list, grid)
        }
        None => {
            let fam = ctx.family(model)?;
            let n_list = ctx.n_list(n_list, "2:12");
            let grid = nonzero("grid", pick(grid, f.sweep.grid, DEFAULT_GRID))?;
            let frames = n_list
                .iter()
                .map(|&n| RenormFrame2D::new(fam.params, n).pre())
                .collect::<Result<Vec<_>, _>>()?;
            for fr in &frames {
                rows.push(SweepRow {
                    n: fr.n,
                    nu,
                    c0_dev: c0_deviation(fr, nu, k, grid).pre()?,
                    c1_dev: c1_deviation(fr, nu, k, grid).pre()?,
                });
            }
            ("planar", n_list, grid)
        }
    };

    let mut csv = String::from("n,nu,c0_dev,c1_dev\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.n, r.nu, r.c0_dev, r.c1_dev));
    }
    if format == "csv" {
        ctx.sink.primary("renorm_sweep.csv", &csv)
    } else {
        ctx.sink.file("renorm_sweep.csv", |w| w.write_all(csv.as_bytes()))?;
        ctx.emit(
            "renorm-sweep",
            json!({"mode": mode, "n_list": n_list, "nu": nu, "k": k, "grid": grid}),
            rows,
        )
    }
}

fn load_general(path: &Path) -> Result<GeneralCoeffs, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::invalid("config", format!("cannot read {}: {e}", path.display())))?;
    GeneralCoeffs::from_toml_str(&text).pre()
}

fn capture_options(ctx: &Ctx) -> Result<CaptureOptions, Failure> {
    let b = &ctx.file.basin;
    let d = CaptureOptions::default();
    Ok(CaptureOptions {
        trap_radius: positive("trap_radius", b.trap_radius.unwrap_or(d.trap_radius))?,
        max_returns: nonzero("max_iterations", b.max_iterations.unwrap_or(d.max_returns))?,
        confirmations: nonzero("confirmations", b.confirmations.unwrap_or(d.confirmations))?,
        ..d
    })
}

fn capture(ctx: &Ctx, model: &ModelArgs, n: Option<u32>, nu: Option<f64>) -> Result<(), Failure> {
    let fam = ctx.family(model)?;
    let n = ctx.n(n, 10)?;
    let nu = ctx.nu(nu)?;
    fam.params.check_precision(n).pre()?;
    let opts = capture_options(ctx)?;
    let v = capture_verdict_with(&fam, n, nu, &opts).pre()?;
    ctx.sink.file("witness_orbit.csv", |w| v.witness_orbit.write_csv(w))?;
    let p = fam.params;
    ctx.emit(
        "capture",
        json!({"lambda": p.lambda(), "sigma": p.sigma(), "n": n, "nu": nu}),
        v,
    )
}

#[allow(clippy::too_many_arguments)]
fn manifold(
    ctx: &Ctx,
    model: &ModelArgs,
    mu: Option<f64>,
    n: Option<u32>,
    nu: Option<f64>,
    length: Option<f64>,
    max_gap: Option<f64>,
) -> Result<(), Failure> {
    let fam = ctx.family(model)?;
    let m = &ctx.file.manifold;
    let length = positive("length", pick(length, m.length, 3.0))?;
    let max_gap = positive("max_gap", pick(max_gap, m.max_gap, 0.01))?;
    let mu = match (mu.or(ctx.file.run.mu), n.or(ctx.file.run.n)) {
        (Some(mu), _) => finite("mu", mu)?,
        (None, Some(n)) => {
            let n = ctx.n(Some(n), n)?;
            fam.params.check_precision(n).pre()?;
            RenormFrame2D::new(fam.params, n).pre()?.reparam_mu(ctx.nu(nu)?)
        }
        (None, None) => 0.0,
    };
    let arc = grow_unstable_manifold(&fam, mu, length, max_gap).pre()?;
    ctx.sink.file("manifold.csv", |w| arc.write_csv(w))?;

    // lowest point after the first pass through the transition
    let lowest = arc
        .points
        .iter()
        .zip(&arc.samples)
        .filter(|(_, s)| s.transitions > 0)
        .map(|(p, _)| *p)
        .min_by(|a, b| a.y.total_cmp(&b.y));
    let p = fam.params;
    ctx.emit(
        "manifold",
        json!({"lambda": p.lambda(), "sigma": p.sigma(), "mu": mu, "length": length, "max_gap": max_gap}),
        json!({
            "points": arc.len(),
            "segments": arc.segment_count(),
            "total_length": arc.total_length,
            "max_spacing": arc.max_spacing(),
            "stop": arc.stop,
            "lowest_after_transition": lowest,
        }),
    )
}

/// Newton sink of the `n`-th return map at `μ(ν)`, seeded at the attracting
/// fixed point of the limit family.
fn rescaled_sink(fam: &PlanarFamily, frame: &RenormFrame2D, nu: f64) -> Result<SinkReport, Failure> {
    let q = quadratic_fixed_points(nu);
    let a = match (q.sink, q.sink_attracting) {
        (Some(a), true) => a,
        _ => {
            return Err(Failure::runtime(Error::Regime(format!(
                "the limit family has no attracting fixed point at nu = {nu}"
            ))))
        }
    };
    let seed = frame.h_n_inverse(a, a).pre()?;
    find_sink(fam, frame.reparam_mu(nu), frame.n, seed).run()
}

#[allow(clippy::too_many_arguments)]
fn basin(
    ctx: &Ctx,
    model: &ModelArgs,
    n: Option<u32>,
    nu: Option<f64>,
    nx: Option<usize>,
    ny: Option<usize>,
    delta: Option<f64>,
    bounds: Option<Vec<f64>>,
    trap_radius: Option<f64>,
    max_iterations: Option<usize>,
) -> Result<(), Failure> {
    let fam = ctx.family(model)?;
    let b = &ctx.file.basin;
    let n = ctx.n(n, 6)?;
    let nu = ctx.nu(nu)?;
    fam.params.check_precision(n).pre()?;
    let frame = RenormFrame2D::new(fam.params, n).pre()?;
    let nx = nonzero("nx", pick(nx, b.nx, 41))?;
    let ny = nonzero("ny", pick(ny, b.ny, 41))?;
    let bounds = match bounds.map(|v| [v[0], v[1], v[2], v[3]]).or(b.bounds) {
        Some([x_min, x_max, y_min, y_max]) => Bounds {
            x_min,
            x_max,
            y_min,
            y_max,
        },
        None => {
            let r = quadratic_fixed_points(nu).source.unwrap_or(1.0);
            let delta = positive("delta", pick(delta, b.delta, 0.5))?;
            Bounds::rescaled_square(&frame, delta * r).pre()?
        }
    };
    let mut cfg = BasinConfig::new(bounds, nx, ny);
    cfg.trap_radius = positive("trap_radius", pick(trap_radius, b.trap_radius, cfg.trap_radius))?;
    cfg.max_iterations = nonzero("max_iterations", pick(max_iterations, b.max_iterations, cfg.max_iterations))?;
    cfg.confirmations = nonzero("confirmations", b.confirmations.unwrap_or(cfg.confirmations))?;

    let target = rescaled_sink(&fam, &frame, nu)?;
    let mu = frame.reparam_mu(nu);
    // the trap certificate is a precondition on the configuration
    let grid = estimate_basin(&fam, mu, n, target.point, &cfg).pre()?;
    ctx.sink.file("basin.csv", |w| grid.write_csv(w))?;
    let p = fam.params;
    ctx.emit(
        "basin",
        json!({"lambda": p.lambda(), "sigma": p.sigma(), "n": n, "nu": nu, "nx": nx, "ny": ny}),
        json!({
            "mu": mu,
            "bounds": grid.bounds,
            "target_sink": grid.target_sink,
            "sink_rescaled": grid.sink_rescaled,
            "trap": grid.trap,
            "attracted": grid.count(CellTag::Attracted),
            "escaped": grid.count(CellTag::Escaped),
            "undecided": grid.count(CellTag::Undecided),
        }),
    )
}

struct AttractorArgs {
    map: Option<String>,
    samples: Option<usize>,
    transient: Option<usize>,
    tail: Option<usize>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    n: Option<u32>,
    nu: Option<f64>,
    probe: bool,
    probes: Option<usize>,
    horizon: Option<usize>,
    eps_out: Option<f64>,
    delta_in: Option<f64>,
}

fn attractor(ctx: &Ctx, model: &ModelArgs, a: AttractorArgs) -> Result<(), Failure> {
    let c = &ctx.file.attractor;
    let name = pick(a.map, c.map.clone(), "circle-semistable".into());
    let samples = nonzero("samples", pick(a.samples, c.samples, 1000))?;
    let transient = pick(a.transient, c.transient, 10_000);
    let tail = nonzero("tail", pick(a.tail, c.tail, 10))?;
    let epsilon = positive("epsilon", pick(a.epsilon, c.epsilon, 0.05))?;
    let seed = pick(a.seed, ctx.file.run.seed, 0);
    let map = match name.as_str() {
        "contraction" => UserMap::contraction(),
        "circle-semistable" => UserMap::circle_semistable(),
        "planar" => {
            let fam = ctx.family(model)?;
            let n = ctx.n(a.n, 6)?;
            fam.params.check_precision(n).pre()?;
            let frame = RenormFrame2D::new(fam.params, n).pre()?;
            let mu = frame.reparam_mu(ctx.nu(a.nu)?);
            let domain = match c.domain {
                Some([x, y]) => [(x[0], x[1]), (y[0], y[1])],
                None => {
                    let (s, _) = fam.closed_form_sink(n).pre()?;
                    [(s.x - 0.01, s.x + 0.01), (0.5 * s.y, 1.5 * s.y)]
                }
            };
            UserMap::planar(fam, mu, domain).pre()?
        }
        other => {
            return Err(Failure::invalid(
                "config",
                format!("unknown map {other:?} (contraction, circle-semistable, planar)"),
            ))
        }
    };
    let est = estimate_milnor(&map, samples, transient, tail, epsilon, seed).run()?;
    ctx.sink.file("attractor_points.csv", |w| est.write_points_csv(w))?;

    let probe = if a.probe {
        let eps_out = positive("eps_out", pick(a.eps_out, c.eps_out, 0.5))?;
        let delta_in = positive("delta_in", pick(a.delta_in, c.delta_in, 1e-3))?;
        let probes = nonzero("probes", pick(a.probes, c.probes, 100))?;
        let horizon = nonzero("horizon", pick(a.horizon, c.horizon, 100_000))?;
        Some(probe_stability(&map, &est, eps_out, delta_in, probes, horizon, seed).pre()?)
    } else {
        None
    };
    ctx.emit(
        "attractor",
        json!({"map": name, "samples": samples, "transient": transient, "tail": tail, "epsilon": epsilon, "seed": seed}),
        json!({"estimate": est, "probe": probe}),
    )
}

fn certify(ctx: &Ctx, model: &ModelArgs, n_list: Option<NList>, nu: Option<f64>) -> Result<(), Failure> {
    let fam = ctx.family(model)?;
    let n_list = ctx.n_list(n_list, "4:10");
    let nu = ctx.nu(nu)?;
    for &n in &n_list {
        fam.params.check_precision(n).pre()?;
    }
    let mut opts = CertificateOptions {
        capture: capture_options(ctx)?,
        ..CertificateOptions::default()
    };
    if let Some(r) = ctx.file.basin.nx {
        opts.basin_resolution = nonzero("nx", r)?;
    }
    if let Some(d) = ctx.file.basin.delta {
        opts.basin_delta_fraction = positive("delta", d)?;
    }
    if let Some(l) = ctx.file.manifold.length {
        opts.manifold_length = positive("length", l)?;
    }
    if let Some(g) = ctx.file.manifold.max_gap {
        opts.manifold_max_gap = positive("max_gap", g)?;
    }
    let cert = build_certificate_with(&fam, &n_list, nu, &opts).run()?;
    ctx.sink.file("wandering_exit.csv", |w| {
        writeln!(w, "index,x,y")?;
        for (i, z) in cert.wandering_exit.points.iter().enumerate() {
            writeln!(w, "{i},{},{}", z.x, z.y)?;
        }
        Ok(())
    })?;
    ctx.sink.file("sinks.csv", |w| {
        writeln!(w, "n,mu_n,x,y,y_distance,orbit_distance,spectral_radius")?;
        for e in &cert.sink_sequence {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                e.n, e.mu_n, e.point.x, e.point.y, e.y_distance, e.orbit_distance, e.spectral_radius
            )?;
        }
        Ok(())
    })?;
    let p = fam.params;
    ctx.emit(
        "certify",
        json!({"lambda": p.lambda(), "sigma": p.sigma(), "n_list": n_list, "nu": nu}),
        cert,
    )
}

fn parse_matrix(s: &str) -> Result<DMatrix<f64>, Failure> {
    let bad = |msg: String| Failure::invalid("invalid_parameters", msg);
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad(format!("bad matrix entry {v:?}"))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(bad(format!("matrix {s:?} is not square")));
    }
    Ok(DMatrix::from_row_iterator(d, d, rows.into_iter().flatten()))
}

fn classify_spectrum(ctx: &Ctx, eig: &[String], jacobian: &[String]) -> Result<(), Failure> {
    let report = match (eig.is_empty(), jacobian.is_empty()) {
        (false, true) => {
            let eigs = eig
                .iter()
                .map(|s| parse_complex(s).map_err(|m| Failure::invalid("invalid_parameters", m)))
                .collect::<Result<Vec<_>, _>>()?;
            classify(&eigs).pre()?
        }
        (true, false) => {
            let mats = jacobian
                .iter()
                .map(|s| parse_matrix(s))
                .collect::<Result<Vec<_>, _>>()?;
            classify_orbit(&mats).pre()?
        }
        _ => {
            return Err(Failure::invalid(
                "invalid_parameters",
                "give either --eig or --jacobian",
            ))
        }
    };
    ctx.emit(
        "classify-spectrum",
        json!({"eig": eig, "jacobian": jacobian}),
        report,
    )
}
