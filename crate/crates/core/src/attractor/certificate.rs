use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    capture_verdict_with, estimate_basin, grow_unstable_manifold, manifold_meets_basin,
    AttractionReport, BasinConfig, Bounds, CaptureOptions, CaptureVerdict,
};
use crate::model::{powi, ModelParams, PlanarFamily, PlanarPoint, Regime};
use crate::newton::find_sink;
use crate::renorm::{quadratic_fixed_points, RenormFrame2D};
use crate::spectra::{classify, classify_orbit, SpectrumReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateOptions {
    /// Minimum number of exact linear preimages taken below `r = (0, 1)`.
    /// More are taken when needed to start inside the exit neighborhood.
    pub backward_steps: u32,
    pub manifold_length: f64,
    pub manifold_max_gap: f64,
    pub basin_resolution: usize,
    /// Half-width of the basin square in renormalized units, as a fraction of `r_ν`.
    pub basin_delta_fraction: f64,
    pub capture: CaptureOptions,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            backward_steps: 20,
            manifold_length: 3.0,
            manifold_max_gap: 0.01,
            basin_resolution: 41,
            basin_delta_fraction: 0.5,
            capture: CaptureOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleRecord {
    pub point: PlanarPoint,
    pub spectrum: SpectrumReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinkEntry {
    pub n: u32,
    pub mu_n: f64,
    pub point: PlanarPoint,
    /// `|y|`, the distance to the local stable manifold `{y = 0}`.
    pub y_distance: f64,
    /// Relative error of `y_distance` against `σ^{-n}`.
    pub y_relative_error: f64,
    pub saddle_distance: f64,
    /// Closest approach of the sink's periodic orbit to the saddle.
    pub orbit_distance: f64,
    pub spectral_radius: f64,
    pub verified_sink: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaptureWitness {
    pub hit: bool,
    pub manifold_point: Option<PlanarPoint>,
    pub target_sink: Option<PlanarPoint>,
    pub attraction: Option<AttractionReport>,
    pub attracted_cells: usize,
    pub total_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WanderingExit {
    /// Time-ordered: the backward tail `(0, σ^{-k})` up to `r = (0, 1)`,
    /// the witness `(1, μ)`, then its forward orbit.
    pub points: Vec<PlanarPoint>,
    pub backward_steps: u32,
    /// Distance from the first point of the tail to the saddle.
    pub tail_distance_to_saddle: f64,
    pub witness_index: usize,
    /// Distance from the witness to the saddle and the sink's periodic orbit.
    pub separation: f64,
    /// Distance from the first point of the tail to the saddle and the sink orbit.
    pub start_distance: f64,
    /// First index whose point is farther than `separation / 2` from the
    /// saddle and the sink orbit, provided the tail starts inside that
    /// neighborhood.
    pub exit_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstabilityCertificate {
    pub params: ModelParams,
    pub nu: f64,
    pub working_n: u32,
    pub working_mu: f64,
    pub saddle: SaddleRecord,
    pub sink_sequence: Vec<SinkEntry>,
    pub accumulation_ok: bool,
    pub capture: CaptureVerdict,
    pub capture_witness: CaptureWitness,
    pub captured: bool,
    pub wandering_exit: WanderingExit,
    pub complete: bool,
}

pub fn build_certificate(params: ModelParams, n_list: &[u32], nu: f64) -> Result<InstabilityCertificate> {
    build_certificate_with(&PlanarFamily::new(params), n_list, nu, &CertificateOptions::default())
}

fn sink_entry(family: &PlanarFamily, n: u32) -> Result<SinkEntry> {
    let (s_n, mu_n) = family.closed_form_sink(n)?;
    let seed = PlanarPoint::new(1.01, 1.01 * s_n.y);
    let rep = find_sink(family, mu_n, n, seed)?;
    // independent re-check of the spectrum
    let jac = family.composite_jacobian(n, rep.point)?;
    let recheck = classify_orbit(&[nalgebra::DMatrix::from_row_slice(
        2,
        2,
        &[jac[(0, 0)], jac[(0, 1)], jac[(1, 0)], jac[(1, 1)]],
    )])?;
    let p = family.params;
    let orbit_distance = (0..=n)
        .map(|k| {
            let x = powi(p.lambda(), k) * rep.point.x;
            let y = powi(p.sigma(), k) * rep.point.y;
            x.hypot(y)
        })
        .fold(f64::INFINITY, f64::min);
    let y_distance = rep.point.y.abs();
    Ok(SinkEntry {
        n,
        mu_n,
        point: rep.point,
        y_distance,
        y_relative_error: (y_distance - s_n.y).abs() / s_n.y,
        saddle_distance: rep.point.norm(),
        orbit_distance,
        spectral_radius: recheck.spectral_radius(),
        verified_sink: recheck.is_sink() && rep.in_r1,
    })
}

pub fn build_certificate_with(
    family: &PlanarFamily,
    n_list: &[u32],
    nu: f64,
    opts: &CertificateOptions,
) -> Result<InstabilityCertificate> {
    let p = family.params;
    if p.regime() != Regime::Extreme {
        return Err(Error::Regime(format!(
            "certificate needs lambda*sigma^2 < 1 (got {})",
            p.capture_rate()
        )));
    }
    let Some(&working_n) = n_list.last() else {
        return Err(Error::Validation("n_list is empty".into()));
    };
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("n_list must be strictly increasing".into()));
    }
    for &n in n_list {
        if n == 0 {
            return Err(Error::Validation("n must be >= 1".into()));
        }
        p.check_precision(n)?;
    }

    let saddle = SaddleRecord {
        point: PlanarPoint::ORIGIN,
        spectrum: classify(&[Complex64::new(p.lambda(), 0.0), Complex64::new(p.sigma(), 0.0)])?,
    };

    let sink_sequence = n_list
        .iter()
        .map(|&n| sink_entry(family, n))
        .collect::<Result<Vec<_>>>()?;
    let accumulation_ok = sink_sequence.len() >= 2
        && sink_sequence
            .iter()
            .all(|e| e.verified_sink && e.y_relative_error < 1e-6)
        && sink_sequence
            .windows(2)
            .all(|w| w[1].y_distance < w[0].y_distance);

    let capture = capture_verdict_with(family, working_n, nu, &opts.capture)?;
    let working_mu = capture.mu;

    let frame = RenormFrame2D::new(p, working_n)?;
    let capture_witness = match &capture.sink {
        Some(sink) if sink.spectrum.is_sink() => {
            let r_nu = quadratic_fixed_points(nu).source.unwrap_or(1.0);
            let bounds = Bounds::rescaled_square(&frame, opts.basin_delta_fraction * r_nu)?;
            let mut cfg = BasinConfig::new(bounds, opts.basin_resolution, opts.basin_resolution);
            cfg.trap_radius = opts.capture.trap_radius;
            cfg.max_iterations = opts.capture.max_returns;
            cfg.confirmations = opts.capture.confirmations;
            let basin = estimate_basin(family, working_mu, working_n, sink.point, &cfg)?;
            let arc = grow_unstable_manifold(family, working_mu, opts.manifold_length, opts.manifold_max_gap)?;
            let hit = manifold_meets_basin(&arc, &basin);
            CaptureWitness {
                hit: hit.hit,
                manifold_point: hit.witness,
                target_sink: Some(sink.point),
                attraction: hit.attraction,
                attracted_cells: basin.count(crate::geometry::CellTag::Attracted),
                total_cells: basin.membership.len(),
            }
        }
        _ => CaptureWitness {
            hit: false,
            manifold_point: None,
            target_sink: None,
            attraction: None,
            attracted_cells: 0,
            total_cells: 0,
        },
    };
    let captured = capture.captured && capture_witness.hit;

    let wandering_exit = wandering_exit(family, &capture, opts.backward_steps);
    let complete = accumulation_ok && captured && wandering_exit.exit_index.is_some();

    Ok(InstabilityCertificate {
        params: p,
        nu,
        working_n,
        working_mu,
        saddle,
        sink_sequence,
        accumulation_ok,
        capture,
        capture_witness,
        captured,
        wandering_exit,
        complete,
    })
}

fn wandering_exit(family: &PlanarFamily, capture: &CaptureVerdict, min_backward: u32) -> WanderingExit {
    let p = family.params;
    let n = capture.n;
    let sink_orbit: Vec<PlanarPoint> = match &capture.sink {
        Some(s) => (0..=n)
            .map(|k| PlanarPoint::new(powi(p.lambda(), k) * s.point.x, powi(p.sigma(), k) * s.point.y))
            .collect(),
        None => Vec::new(),
    };
    let dist_to_attractor = |z: &PlanarPoint| {
        sink_orbit
            .iter()
            .map(|s| s.distance(z))
            .fold(z.norm(), f64::min)
    };
    let witness = capture
        .witness_orbit
        .points
        .first()
        .copied()
        .unwrap_or(PlanarPoint::new(1.0, capture.mu));
    let separation = dist_to_attractor(&witness);

    // (0, 1) has the exact linear preimages (0, σ^{-k}) along W^u_loc.
    let mut steps = min_backward;
    while steps < 1000 && powi(p.sigma(), steps).recip() >= 0.25 * separation {
        steps += 1;
    }
    let mut points: Vec<PlanarPoint> = (0..=steps)
        .rev()
        .map(|k| PlanarPoint::new(0.0, powi(p.sigma(), k).recip()))
        .collect();
    let witness_index = points.len();
    points.extend(capture.witness_orbit.points.iter().copied());

    let start_distance = dist_to_attractor(&points[0]);
    let exit_index = (separation > 0.0 && start_distance < 0.5 * separation)
        .then(|| points.iter().position(|z| dist_to_attractor(z) > 0.5 * separation))
        .flatten();
    WanderingExit {
        tail_distance_to_saddle: points[0].norm(),
        points,
        backward_steps: steps,
        witness_index,
        separation,
        start_distance,
        exit_index,
    }
}
