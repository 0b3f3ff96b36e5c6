use std::io::{self, Write};

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PlanarFamily, PlanarPoint, RegionTag};
use crate::renorm::RenormFrame2D;
use crate::spectra::{classify_orbit, spectral_norm};

use super::manifold::ManifoldArc;

/// Largest return power tried when certifying the trap.
const MAX_TRAP_POWER: u32 = 4;
const TRAP_ANGLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellTag {
    Undecided,
    Attracted,
    Escaped,
}

impl CellTag {
    pub fn code(&self) -> u8 {
        match self {
            CellTag::Undecided => 0,
            CellTag::Attracted => 1,
            CellTag::Escaped => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    /// `H_n⁻¹([-δ, δ]²)`, the square around the renormalized origin.
    pub fn rescaled_square(frame: &RenormFrame2D, delta: f64) -> Result<Bounds> {
        let lo = frame.h_n_inverse(-delta, -delta)?;
        let hi = frame.h_n_inverse(delta, delta)?;
        Ok(Bounds {
            x_min: lo.x,
            x_max: hi.x,
            y_min: lo.y,
            y_max: hi.y,
        })
    }

    pub fn contains(&self, p: &PlanarPoint) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    fn validate(&self) -> Result<()> {
        let all = [self.x_min, self.x_max, self.y_min, self.y_max];
        if all.iter().any(|v| !v.is_finite()) || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::Config(format!("degenerate basin bounds {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasinConfig {
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
    /// Radius of the trap ball, in renormalized units.
    pub trap_radius: f64,
    /// Budget in returns to the neighbourhood of the sink.
    pub max_iterations: usize,
    pub confirmations: usize,
}

impl BasinConfig {
    pub fn new(bounds: Bounds, nx: usize, ny: usize) -> Self {
        BasinConfig {
            bounds,
            nx,
            ny,
            trap_radius: 1e-3,
            max_iterations: 500,
            confirmations: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Config("basin resolution must be positive".into()));
        }
        if !(self.trap_radius > 0.0) || !self.trap_radius.is_finite() {
            return Err(Error::Config("trap radius must be positive".into()));
        }
        if self.max_iterations == 0 || self.confirmations == 0 {
            return Err(Error::Config(
                "max_iterations and confirmations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Evidence that `𝒢^q` contracts the trap ball into itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapCertificate {
    pub power: u32,
    /// `‖D𝒢^q(S)‖ + max sampled ‖D𝒢^q(z) − D𝒢^q(S)‖`.
    pub derivative_bound: f64,
    /// `|𝒢^q(S) − S|`.
    pub center_residual: f64,
    pub radius: f64,
}

fn power_jacobian(frame: &RenormFrame2D, nu: f64, z: (f64, f64), q: u32) -> ((f64, f64), Matrix2<f64>) {
    let mut p = z;
    let mut j = Matrix2::identity();
    for _ in 0..q {
        j = frame.renormalized_jacobian(p.1) * j;
        p = frame.renormalized_map(nu, p.0, p.1);
    }
    (p, j)
}

fn norm2(m: &Matrix2<f64>) -> f64 {
    spectral_norm(&DMatrix::from_row_slice(2, 2, &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]))
}

/// Certifies, by sampling the ball of radius `radius` about `center` in
/// renormalized coordinates, that some power `𝒢^q` (q ≤ 4) maps the ball
/// into itself as a contraction.
pub fn certify_trap(
    frame: &RenormFrame2D,
    nu: f64,
    center: (f64, f64),
    radius: f64,
) -> Result<TrapCertificate> {
    let mut best = f64::INFINITY;
    for q in 1..=MAX_TRAP_POWER {
        let (img, j0) = power_jacobian(frame, nu, center, q);
        let residual = (img.0 - center.0).hypot(img.1 - center.1);
        let mut margin = 0.0f64;
        for ring in [0.5, 1.0] {
            for a in 0..TRAP_ANGLES {
                let th = std::f64::consts::TAU * a as f64 / TRAP_ANGLES as f64;
                let z = (
                    center.0 + ring * radius * th.cos(),
                    center.1 + ring * radius * th.sin(),
                );
                let (_, jz) = power_jacobian(frame, nu, z, q);
                margin = margin.max(norm2(&(jz - j0)));
            }
        }
        let bound = norm2(&j0) + margin;
        best = best.min(bound);
        if bound < 1.0 && residual < (1.0 - bound) * radius {
            return Ok(TrapCertificate {
                power: q,
                derivative_bound: bound,
                center_residual: residual,
                radius,
            });
        }
    }
    Err(Error::Config(format!(
        "trap of radius {radius} is not certified: best derivative bound {best:.6} over powers 1..={MAX_TRAP_POWER}"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractionReport {
    pub outcome: CellTag,
    pub returns: usize,
    pub steps: usize,
    /// Renormalized distances to the sink at the confirming returns.
    pub confirming_distances: Vec<f64>,
    pub final_distance: f64,
}

/// Follows the orbit of `z0`, measuring the renormalized distance to the
/// sink after every transition. Attracted once it is inside the trap for
/// `confirmations` consecutive returns.
#[allow(clippy::too_many_arguments)]
pub fn attraction_test(
    family: &PlanarFamily,
    mu: f64,
    frame: &RenormFrame2D,
    sink_rescaled: (f64, f64),
    trap_radius: f64,
    max_returns: usize,
    confirmations: usize,
    z0: PlanarPoint,
) -> AttractionReport {
    let n = frame.n as usize;
    let step_cap = max_returns * (n + 1) + n + 1;
    let mut z = z0;
    let mut returns = 0;
    let mut inside: Vec<f64> = Vec::new();
    let mut last = f64::INFINITY;
    for steps in 0..step_cap {
        let tag = family.region.tag(&z);
        let Some(next) = family.step(mu, z) else {
            return AttractionReport {
                outcome: CellTag::Escaped,
                returns,
                steps,
                confirming_distances: inside,
                final_distance: last,
            };
        };
        z = next;
        if tag != RegionTag::R1Transition {
            continue;
        }
        returns += 1;
        last = match frame.h_n(z) {
            Ok((bx, by)) => (bx - sink_rescaled.0).hypot(by - sink_rescaled.1),
            Err(_) => f64::INFINITY,
        };
        if last < trap_radius {
            inside.push(last);
            if inside.len() >= confirmations {
                return AttractionReport {
                    outcome: CellTag::Attracted,
                    returns,
                    steps: steps + 1,
                    confirming_distances: inside,
                    final_distance: last,
                };
            }
        } else {
            inside.clear();
        }
        if returns >= max_returns {
            break;
        }
    }
    if family.region.tag(&z) == RegionTag::Escaped {
        return AttractionReport {
            outcome: CellTag::Escaped,
            returns,
            steps: step_cap,
            confirming_distances: inside,
            final_distance: last,
        };
    }
    AttractionReport {
        outcome: CellTag::Undecided,
        returns,
        steps: step_cap,
        confirming_distances: inside,
        final_distance: last,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinGrid {
    pub family: PlanarFamily,
    pub mu: f64,
    pub n: u32,
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `index = j * nx + i` with `j` the `y` index.
    pub membership: Vec<CellTag>,
    pub target_sink: PlanarPoint,
    pub sink_rescaled: (f64, f64),
    pub trap_radius: f64,
    pub max_iterations: usize,
    pub confirmations: usize,
    pub trap: TrapCertificate,
}

impl BasinGrid {
    pub fn cell_center(&self, i: usize, j: usize) -> PlanarPoint {
        let b = &self.bounds;
        PlanarPoint::new(
            b.x_min + (i as f64 + 0.5) * (b.x_max - b.x_min) / self.nx as f64,
            b.y_min + (j as f64 + 0.5) * (b.y_max - b.y_min) / self.ny as f64,
        )
    }

    pub fn cell_of(&self, p: &PlanarPoint) -> Option<(usize, usize)> {
        let b = &self.bounds;
        if !b.contains(p) {
            return None;
        }
        let fx = (p.x - b.x_min) / (b.x_max - b.x_min) * self.nx as f64;
        let fy = (p.y - b.y_min) / (b.y_max - b.y_min) * self.ny as f64;
        Some((
            (fx as usize).min(self.nx - 1),
            (fy as usize).min(self.ny - 1),
        ))
    }

    pub fn tag(&self, i: usize, j: usize) -> CellTag {
        self.membership[j * self.nx + i]
    }

    pub fn count(&self, tag: CellTag) -> usize {
        self.membership.iter().filter(|&&t| t == tag).count()
    }

    pub fn frame(&self) -> RenormFrame2D {
        RenormFrame2D::new(self.family.params, self.n).expect("frame was valid at construction")
    }

    pub fn attraction(&self, z: PlanarPoint) -> AttractionReport {
        attraction_test(
            &self.family,
            self.mu,
            &self.frame(),
            self.sink_rescaled,
            self.trap_radius,
            self.max_iterations,
            self.confirmations,
            z,
        )
    }

    /// CSV with header `i,j,x,y,code` (0 undecided, 1 attracted, 2 escaped).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "i,j,x,y,code")?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.cell_center(i, j);
                writeln!(out, "{i},{j},{},{},{}", c.x, c.y, self.tag(i, j).code())?;
            }
        }
        Ok(())
    }
}

/// Classifies the cell centres of `config.bounds` by forward simulation,
/// relative to the sink of the `n`-th return map at `sink`.
pub fn estimate_basin(
    family: &PlanarFamily,
    mu: f64,
    n: u32,
    sink: PlanarPoint,
    config: &BasinConfig,
) -> Result<BasinGrid> {
    config.validate()?;
    family.params.check_precision(n)?;
    let frame = RenormFrame2D::new(family.params, n)?;
    let jac = family.composite_jacobian(n, sink)?;
    let spectrum = classify_orbit(&[DMatrix::from_row_slice(
        2,
        2,
        &[jac[(0, 0)], jac[(0, 1)], jac[(1, 0)], jac[(1, 1)]],
    )])?;
    if !spectrum.is_sink() {
        return Err(Error::Validation(format!(
            "target {sink} is not attracting (spectral radius {})",
            spectrum.spectral_radius()
        )));
    }
    let center = frame.h_n(sink)?;
    let nu = frame.reparam_nu(mu);
    let trap = certify_trap(&frame, nu, center, config.trap_radius)?;

    let mut grid = BasinGrid {
        family: *family,
        mu,
        n,
        bounds: config.bounds,
        nx: config.nx,
        ny: config.ny,
        membership: Vec::new(),
        target_sink: sink,
        sink_rescaled: center,
        trap_radius: config.trap_radius,
        max_iterations: config.max_iterations,
        confirmations: config.confirmations,
        trap,
    };
    grid.membership = (0..config.nx * config.ny)
        .into_par_iter()
        .map(|idx| {
            let c = grid.cell_center(idx % config.nx, idx / config.nx);
            grid.attraction(c).outcome
        })
        .collect();
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinHit {
    pub hit: bool,
    pub witness: Option<PlanarPoint>,
    pub arc_index: Option<usize>,
    pub attraction: Option<AttractionReport>,
}

/// First arc point lying in an attracted cell whose own orbit also passes
/// the attraction test.
pub fn manifold_meets_basin(arc: &ManifoldArc, basin: &BasinGrid) -> BasinHit {
    for (idx, p) in arc.points.iter().enumerate() {
        let Some((i, j)) = basin.cell_of(p) else { continue };
        if basin.tag(i, j) != CellTag::Attracted {
            continue;
        }
        let report = basin.attraction(*p);
        if report.outcome == CellTag::Attracted {
            return BasinHit {
                hit: true,
                witness: Some(*p),
                arc_index: Some(idx),
                attraction: Some(report),
            };
        }
    }
    BasinHit {
        hit: false,
        witness: None,
        arc_index: None,
        attraction: None,
    }
}
