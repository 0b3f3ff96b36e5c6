//! Renormalization of the return map near the tangency.
//!
//! For the planar family the `n`-th return map, written in the affine
//! coordinates `X = σⁿ(x − 1)`, `Y = σ^{2n}(y − σ^{-n})` and the parameter
//! `ν = σ^{2n}(μ − μ_n)`, is exactly
//!
//! ```text
//! 𝒢_{n,ν}(X, Y) = (Y, Y² − (λσ)ⁿ X + ν)
//! ```
//!
//! which converges to the limit family `(Y, Y² + ν)` at the geometric rate
//! `(λσ)ⁿ`. The general `m`-dimensional version, driven by the coefficients
//! of the transition and its remainder terms, lives in [`general`].

use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;

use crate::compensated::{two_prod, Dd};
use crate::error::{Error, Result};
use crate::model::{powi, ModelParams, PlanarPoint};
use crate::spectra::spectral_norm;

pub mod general;

pub use general::{
    general_c0_deviation, general_c1_deviation, general_limit_jacobian, general_limit_map,
    general_renormalized_map, GeneralCoeffs, GeneralCoeffsSpec, GeneralFrame,
};

/// Default lattice resolution for deviation sweeps.
pub const DEFAULT_GRID: usize = 41;

/// Finite-difference step for C¹ deviations.
pub const FD_STEP: f64 = 1e-6;

/// Largest decimal exponent of `σ^{2n}` allowed in rescaled-frame arithmetic.
const MAX_LOG10_RANGE: f64 = 300.0;

/// Coordinate change and reparametrization for one return time `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenormFrame2D {
    pub params: ModelParams,
    pub n: u32,
    sigma_n: f64,
    lambda_n: f64,
}

impl RenormFrame2D {
    pub fn new(params: ModelParams, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("renormalization index n must be >= 1".into()));
        }
        if 2.0 * f64::from(n) * params.sigma().log10() > MAX_LOG10_RANGE {
            return Err(Error::Precision(format!(
                "sigma^(2n) overflows double precision for n = {n}"
            )));
        }
        Ok(RenormFrame2D {
            params,
            n,
            sigma_n: powi(params.sigma(), n),
            lambda_n: powi(params.lambda(), n),
        })
    }

    pub fn sigma_n(&self) -> f64 {
        self.sigma_n
    }

    /// `(λσ)ⁿ`, the only term separating 𝒢_{n,ν} from the limit map.
    pub fn coupling(&self) -> f64 {
        powi(self.params.lambda() * self.params.sigma(), self.n)
    }

    /// `μ_n = σ^{-n} + λⁿ`.
    pub fn mu_center(&self) -> f64 {
        self.sigma_n.recip() + self.lambda_n
    }

    pub fn h_n(&self, z: PlanarPoint) -> Result<(f64, f64)> {
        let s = self.sigma_n;
        let big_x = s * (z.x - 1.0);
        // σⁿ(σⁿy − 1) keeps the cancellation in the well-scaled product.
        let big_y = s * (s * z.y - 1.0);
        if !big_x.is_finite() || !big_y.is_finite() {
            return Err(Error::Precision(format!(
                "rescaled image of {z} overflows for n = {}",
                self.n
            )));
        }
        Ok((big_x, big_y))
    }

    pub fn h_n_inverse(&self, big_x: f64, big_y: f64) -> Result<PlanarPoint> {
        let inv = self.sigma_n.recip();
        let z = PlanarPoint::new(1.0 + inv * big_x, inv + inv * inv * big_y);
        if !z.is_finite() {
            return Err(Error::Precision("non-finite unscaled point".into()));
        }
        Ok(z)
    }

    pub fn reparam_nu(&self, mu: f64) -> f64 {
        let s = self.sigma_n;
        s * s * (mu - self.mu_center())
    }

    pub fn reparam_mu(&self, nu: f64) -> f64 {
        let inv = self.sigma_n.recip();
        self.mu_center() + inv * inv * nu
    }

    pub fn renormalized_map(&self, nu: f64, big_x: f64, big_y: f64) -> (f64, f64) {
        (big_y, big_y * big_y - self.coupling() * big_x + nu)
    }

    pub fn renormalized_jacobian(&self, big_y: f64) -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, -self.coupling(), 2.0 * big_y)
    }

    /// Second component of `𝒢_{n,ν} − 𝒢_ν` evaluated in double-double.
    fn deviation_dd(&self, nu: f64, big_x: f64, big_y: f64) -> f64 {
        let yy = two_prod(big_y, big_y);
        let cx = two_prod(self.coupling(), big_x);
        let renorm = yy.sub(cx).add(Dd::from(nu));
        let limit = yy.add(Dd::from(nu));
        renorm.sub(limit).to_f64()
    }
}

pub fn renormalized_map_2d(frame: &RenormFrame2D, nu: f64, big_x: f64, big_y: f64) -> (f64, f64) {
    frame.renormalized_map(nu, big_x, big_y)
}

/// The limit family `(X, Y) ↦ (Y, Y² + ν)`.
pub fn limit_map_2d(nu: f64, _big_x: f64, big_y: f64) -> (f64, f64) {
    (big_y, big_y * big_y + nu)
}

pub(crate) fn lattice(k: f64, grid: usize) -> Vec<f64> {
    let step = 2.0 * k / (grid - 1) as f64;
    (0..grid)
        .map(|i| if i + 1 == grid { k } else { -k + step * i as f64 })
        .collect()
}

fn check_lattice(k: f64, grid: usize) -> Result<()> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::Validation(format!("lattice half-width k must be >= 1 (got {k})")));
    }
    if grid < 2 {
        return Err(Error::Validation(format!("lattice needs at least 2 points per axis (got {grid})")));
    }
    Ok(())
}

/// Lattices above this many points are refused.
const MAX_LATTICE_POINTS: usize = 20_000_000;

fn check_lattice_general(k: f64, grid: usize, dim: usize) -> Result<()> {
    check_lattice(k, grid)?;
    match grid.checked_pow(dim as u32) {
        Some(total) if total <= MAX_LATTICE_POINTS => Ok(()),
        _ => Err(Error::Validation(format!(
            "lattice of {grid}^{dim} points is too large"
        ))),
    }
}

/// Sup over a `grid × grid` lattice on `[-k, k]²` of `|𝒢_{n,ν} − 𝒢_ν|`.
pub fn c0_deviation(frame: &RenormFrame2D, nu: f64, k: f64, grid: usize) -> Result<f64> {
    check_lattice(k, grid)?;
    let pts = lattice(k, grid);
    let mut sup = 0.0f64;
    for &bx in &pts {
        for &by in &pts {
            // first components agree identically
            sup = sup.max(frame.deviation_dd(nu, bx, by).abs());
        }
    }
    Ok(sup)
}

/// Sup over the lattice of the spectral norm of the finite-difference
/// Jacobian of `𝒢_{n,ν} − 𝒢_ν`.
pub fn c1_deviation(frame: &RenormFrame2D, nu: f64, k: f64, grid: usize) -> Result<f64> {
    check_lattice(k, grid)?;
    let pts = lattice(k, grid);
    let h = FD_STEP;
    let mut sup = 0.0f64;
    for &bx in &pts {
        for &by in &pts {
            let dx = (frame.deviation_dd(nu, bx + h, by) - frame.deviation_dd(nu, bx - h, by))
                / (2.0 * h);
            let dy = (frame.deviation_dd(nu, bx, by + h) - frame.deviation_dd(nu, bx, by - h))
                / (2.0 * h);
            let jac = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, dx, dy]);
            sup = sup.max(spectral_norm(&jac));
        }
    }
    Ok(sup)
}

/// Fixed points of `Y ↦ Y² + ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticFamilyPoint {
    pub nu: f64,
    /// Smaller fixed point `a_ν` (near `ν`).
    pub sink: Option<f64>,
    /// Larger fixed point `r_ν` (near `1 − ν`).
    pub source: Option<f64>,
    pub exists: bool,
    pub sink_multiplier: Option<f64>,
    pub source_multiplier: Option<f64>,
    /// `|2 a_ν| < 1`.
    pub sink_attracting: bool,
}

pub fn quadratic_fixed_points(nu: f64) -> QuadraticFamilyPoint {
    let disc = 1.0 - 4.0 * nu;
    if !(disc >= 0.0) {
        return QuadraticFamilyPoint {
            nu,
            sink: None,
            source: None,
            exists: false,
            sink_multiplier: None,
            source_multiplier: None,
            sink_attracting: false,
        };
    }
    let r = 0.5 * (1.0 + disc.sqrt());
    // product of roots is ν; avoids cancellation in (1 − √(1−4ν))/2
    let a = nu / r;
    QuadraticFamilyPoint {
        nu,
        sink: Some(a),
        source: Some(r),
        exists: true,
        sink_multiplier: Some(2.0 * a),
        source_multiplier: Some(2.0 * r),
        sink_attracting: (2.0 * a).abs() < 1.0,
    }
}

/// `(−r_ν, r_ν)`, the interval attracted to `a_ν`.
pub fn basin_interval(nu: f64) -> Result<(f64, f64)> {
    let q = quadratic_fixed_points(nu);
    match (q.source, q.sink_attracting) {
        (Some(r), true) => Ok((-r, r)),
        (None, _) => Err(Error::Regime(format!(
            "Y -> Y^2 + {nu} has no fixed points (nu > 1/4)"
        ))),
        (Some(_), false) => Err(Error::Regime(format!(
            "fixed point a_nu = {} is not attracting at nu = {nu}",
            q.sink.unwrap_or(f64::NAN)
        ))),
    }
}
