use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{powi, ModelParams, OrbitSegment, PlanarFamily, PlanarPoint, Regime};
use crate::newton::{find_sink, SinkReport};
use crate::renorm::{quadratic_fixed_points, RenormFrame2D};

use super::basin::{attraction_test, certify_trap, AttractionReport, CellTag, TrapCertificate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaptureOptions {
    pub nu_bound: f64,
    /// Renormalized trap radius.
    pub trap_radius: f64,
    pub max_returns: usize,
    pub confirmations: usize,
    /// Number of passes through `R₁` recorded in the witness orbit.
    pub witness_passes: usize,
}

impl Default for CaptureOptions {
    fn default() -> Self {
        CaptureOptions {
            nu_bound: 0.1,
            trap_radius: 1e-3,
            max_returns: 500,
            confirmations: 10,
            witness_passes: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaptureVerdict {
    pub params: ModelParams,
    pub n: u32,
    pub nu: f64,
    pub mu: f64,
    pub regime: Regime,
    /// `(0, ν + (λσ²)ⁿ)`, the renormalized image of `T(0, 1) = (1, μ)`.
    pub rescaled_entry_point: (f64, f64),
    /// `H_n(1, μ)` computed from unscaled coordinates, as a cross-check.
    pub entry_from_coordinates: (f64, f64),
    pub predicted_offset: f64,
    /// Whether the entry point lies in `(−r_ν, r_ν)`, the limit family's basin.
    pub entry_in_limit_basin: bool,
    /// `y` after `2n + 1` steps from `(1, μ)`: the arrival for the second
    /// transition.
    pub second_pass_y: Option<f64>,
    pub sink: Option<SinkReport>,
    pub trap: Option<TrapCertificate>,
    pub attraction: Option<AttractionReport>,
    pub captured: bool,
    pub witness_orbit: OrbitSegment,
}

pub fn capture_verdict(family: &PlanarFamily, n: u32, nu: f64) -> Result<CaptureVerdict> {
    capture_verdict_with(family, n, nu, &CaptureOptions::default())
}

/// Follows the point `(1, μ)` of the unstable manifold, the image of
/// `r = (0, 1)` under the transition, and decides whether it falls into the
/// basin of the sink created at `ν`.
pub fn capture_verdict_with(
    family: &PlanarFamily,
    n: u32,
    nu: f64,
    opts: &CaptureOptions,
) -> Result<CaptureVerdict> {
    family.params.check_precision(n)?;
    if !nu.is_finite() || nu.abs() > opts.nu_bound {
        return Err(Error::Validation(format!(
            "|nu| = {} exceeds the capture bound {}",
            nu.abs(),
            opts.nu_bound
        )));
    }
    let p = family.params;
    let frame = RenormFrame2D::new(p, n)?;
    let mu = frame.reparam_mu(nu);
    if mu.abs() > family.mu_bound {
        return Err(Error::Validation(format!("mu = {mu} outside |mu| <= {}", family.mu_bound)));
    }
    let predicted_offset = powi(p.capture_rate(), n);
    let entry = (0.0, nu + predicted_offset);
    let witness = PlanarPoint::new(1.0, mu);
    let entry_from_coordinates = frame.h_n(witness)?;
    let q = quadratic_fixed_points(nu);
    let entry_in_limit_basin = q.sink_attracting && q.source.is_some_and(|r| entry.1.abs() < r);

    let n_us = n as usize;
    let witness_orbit = family.simulate_orbit(mu, witness, opts.witness_passes * (n_us + 1) + 1);
    let second_pass_y = witness_orbit.points.get(2 * n_us + 1).map(|z| z.y);

    let mut sink = None;
    let mut trap = None;
    let mut attraction = None;
    if let Some(a) = q.sink {
        let seed = frame.h_n_inverse(a, a)?;
        if let Ok(rep) = find_sink(family, mu, n, seed) {
            if rep.spectrum.is_sink() {
                let center = frame.h_n(rep.point)?;
                if let Ok(cert) = certify_trap(&frame, nu, center, opts.trap_radius) {
                    attraction = Some(attraction_test(
                        family,
                        mu,
                        &frame,
                        center,
                        opts.trap_radius,
                        opts.max_returns,
                        opts.confirmations,
                        witness,
                    ));
                    trap = Some(cert);
                }
            }
            sink = Some(rep);
        }
    }
    let captured = attraction
        .as_ref()
        .is_some_and(|a| a.outcome == CellTag::Attracted);

    Ok(CaptureVerdict {
        params: p,
        n,
        nu,
        mu,
        regime: p.regime(),
        rescaled_entry_point: entry,
        entry_from_coordinates,
        predicted_offset,
        entry_in_limit_basin,
        second_pass_y,
        sink,
        trap,
        attraction,
        captured,
        witness_orbit,
    })
}
