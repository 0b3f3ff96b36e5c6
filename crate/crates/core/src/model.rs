//! The planar model family.
//!
//! Inside the square `R₀ = [-2, 2]²` the map is the linear saddle
//! `(x, y) ↦ (λx, σy)`. A small rectangle `R₁` around `r = (0, 1)` on the
//! local unstable manifold is carried back near `q = (1, 0)` on the local
//! stable manifold by the quadratic transition
//! `(x, y) ↦ (y, μ − x + (y − 1)²)`. At `μ = 0` the image of the unstable
//! manifold touches the `x`-axis at `q`: a quadratic homoclinic tangency.
//!
//! Outside `R₀ ∪ R₁` the family is not specified; orbits that leave are
//! reported as escaped.

use std::fmt;
use std::io::{self, Write};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `σ^{2n}` accepted by operations that work in unscaled coordinates.
pub const MAX_SIGMA_POW_2N: f64 = 1e12;

/// Default bound on `|μ|` for the checked transition.
pub const DEFAULT_MU_BOUND: f64 = 0.5;

const REGIME_TOL: f64 = 1e-12;

/// Contraction and expansion rates of the saddle at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    lambda: f64,
    sigma: f64,
}

/// Position of `λσ²` relative to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `λσ² < 1`: the unfolded sink captures the unstable manifold.
    Extreme,
    /// `λσ² = 1` (within 1e-12 relative).
    Boundary,
    /// `λσ² > 1`.
    NonExtreme,
}

impl ModelParams {
    pub fn new(lambda: f64, sigma: f64) -> Result<Self> {
        if !lambda.is_finite() || !sigma.is_finite() {
            return Err(Error::Validation(format!(
                "lambda and sigma must be finite (got lambda={lambda}, sigma={sigma})"
            )));
        }
        if !(0.0 < lambda && lambda < 1.0) {
            return Err(Error::Validation(format!(
                "lambda must satisfy 0 < lambda < 1 (got {lambda})"
            )));
        }
        if sigma <= 1.0 {
            return Err(Error::Validation(format!(
                "sigma must satisfy sigma > 1 (got {sigma})"
            )));
        }
        if lambda * sigma >= 1.0 {
            return Err(Error::Validation(format!(
                "saddle must be dissipative: lambda*sigma = {} >= 1",
                lambda * sigma
            )));
        }
        Ok(ModelParams { lambda, sigma })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `λσ²`, the quantity deciding capture.
    pub fn capture_rate(&self) -> f64 {
        self.lambda * self.sigma * self.sigma
    }

    pub fn extremely_dissipative(&self) -> bool {
        self.capture_rate() < 1.0
    }

    pub fn regime(&self) -> Regime {
        let r = self.capture_rate();
        if (r - 1.0).abs() <= REGIME_TOL {
            Regime::Boundary
        } else if r < 1.0 {
            Regime::Extreme
        } else {
            Regime::NonExtreme
        }
    }

    /// Fails when `σ^{2n}` exceeds [`MAX_SIGMA_POW_2N`].
    pub fn check_precision(&self, n: u32) -> Result<()> {
        check_precision(self.sigma, n)
    }
}

pub(crate) fn check_precision(sigma: f64, n: u32) -> Result<()> {
    let log_range = 2.0 * f64::from(n) * sigma.log10();
    if log_range > MAX_SIGMA_POW_2N.log10() + 1e-12 {
        return Err(Error::Precision(format!(
            "sigma^(2n) = 10^{log_range:.3} exceeds 1e12 for n = {n}; use the rescaled frame"
        )));
    }
    Ok(())
}

pub(crate) fn powi(base: f64, n: u32) -> f64 {
    // powi takes i32; every n reaching here has passed a range check.
    base.powi(n as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const ORIGIN: PlanarPoint = PlanarPoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        PlanarPoint { x, y }
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for PlanarPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Geometry of the two regions where the family is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub r0_half_width: f64,
    pub r1_center: PlanarPoint,
    pub r1_half_extents: (f64, f64),
}

impl Default for RegionSpec {
    fn default() -> Self {
        RegionSpec {
            r0_half_width: 2.0,
            r1_center: PlanarPoint::new(0.0, 1.0),
            r1_half_extents: (0.25, 0.25),
        }
    }
}

impl RegionSpec {
    pub fn with_r1_half_extents(hx: f64, hy: f64) -> Result<Self> {
        let spec = RegionSpec {
            r1_half_extents: (hx, hy),
            ..RegionSpec::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (hx, hy) = self.r1_half_extents;
        let w = self.r0_half_width;
        let c = self.r1_center;
        if !(w > 0.0 && hx > 0.0 && hy > 0.0) {
            return Err(Error::Validation(
                "region sizes must be positive".to_string(),
            ));
        }
        if c.x.abs() + hx > w || c.y + hy > w || c.y - hy <= 0.0 {
            return Err(Error::Validation(format!(
                "R1 = {c} ± ({hx}, {hy}) must lie in the upper half of R0 = [-{w}, {w}]²"
            )));
        }
        Ok(())
    }

    pub fn in_r0(&self, z: &PlanarPoint) -> bool {
        z.x.abs() <= self.r0_half_width && z.y.abs() <= self.r0_half_width
    }

    pub fn in_r1(&self, z: &PlanarPoint) -> bool {
        (z.x - self.r1_center.x).abs() <= self.r1_half_extents.0
            && (z.y - self.r1_center.y).abs() <= self.r1_half_extents.1
    }

    /// Region in which `z` sits; `R₁` takes priority because it lies inside `R₀`.
    pub fn tag(&self, z: &PlanarPoint) -> RegionTag {
        if !z.is_finite() {
            RegionTag::Escaped
        } else if self.in_r1(z) {
            RegionTag::R1Transition
        } else if self.in_r0(z) {
            RegionTag::R0
        } else {
            RegionTag::Escaped
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionTag {
    R0,
    R1Transition,
    Escaped,
}

impl RegionTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionTag::R0 => "r0",
            RegionTag::R1Transition => "r1_transition",
            RegionTag::Escaped => "escaped",
        }
    }
}

/// Points visited by the piecewise dynamics, each tagged with the region it
/// was found in (which decides the map applied next).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSegment {
    pub points: Vec<PlanarPoint>,
    pub region_tags: Vec<RegionTag>,
    pub escaped: bool,
}

impl OrbitSegment {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&PlanarPoint> {
        self.points.last()
    }

    /// Indices `i` such that `points[i]` is the image of a transition step,
    /// i.e. the points at which the orbit returns near `q`.
    pub fn return_indices(&self) -> Vec<usize> {
        self.region_tags
            .iter()
            .enumerate()
            .filter(|(i, t)| **t == RegionTag::R1Transition && i + 1 < self.points.len())
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// CSV with header `step,x,y,region_tag`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "step,x,y,region_tag")?;
        for (i, (p, t)) in self.points.iter().zip(&self.region_tags).enumerate() {
            writeln!(out, "{i},{},{},{}", p.x, p.y, t.as_str())?;
        }
        Ok(())
    }
}

/// Image of the return map `F^{n+N}` together with the intermediate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositeImage {
    pub image: PlanarPoint,
    /// `Fⁿ(z)`, which must lie in `R₁` for the formula to describe the dynamics.
    pub intermediate: PlanarPoint,
    pub in_r1: bool,
}

/// The model family for fixed `(λ, σ)` and region geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarFamily {
    pub params: ModelParams,
    pub region: RegionSpec,
    pub mu_bound: f64,
}

impl PlanarFamily {
    pub fn new(params: ModelParams) -> Self {
        PlanarFamily {
            params,
            region: RegionSpec::default(),
            mu_bound: DEFAULT_MU_BOUND,
        }
    }

    pub fn with_region(params: ModelParams, region: RegionSpec) -> Result<Self> {
        region.validate()?;
        Ok(PlanarFamily {
            params,
            region,
            mu_bound: DEFAULT_MU_BOUND,
        })
    }

    fn check_mu(&self, mu: f64) -> Result<()> {
        if !mu.is_finite() || mu.abs() > self.mu_bound {
            return Err(Error::Validation(format!(
                "mu = {mu} outside the admissible range |mu| <= {}",
                self.mu_bound
            )));
        }
        Ok(())
    }

    pub fn local_map(&self, z: PlanarPoint) -> Result<PlanarPoint> {
        if !self.region.in_r0(&z) {
            return Err(Error::Domain {
                region: "R0",
                x: z.x,
                y: z.y,
            });
        }
        Ok(local_map_unchecked(&self.params, z))
    }

    pub fn transition_map(&self, mu: f64, z: PlanarPoint) -> Result<PlanarPoint> {
        self.check_mu(mu)?;
        if !self.region.in_r1(&z) {
            return Err(Error::Domain {
                region: "R1",
                x: z.x,
                y: z.y,
            });
        }
        Ok(transition_map_unchecked(mu, z))
    }

    /// `F^{n+N}` near `q` as the closed-form expression, plus whether the
    /// intermediate point `Fⁿ(z)` actually lies in `R₁`.
    pub fn composite_map(&self, mu: f64, n: u32, z: PlanarPoint) -> Result<CompositeImage> {
        self.params.check_precision(n)?;
        let s = powi(self.params.sigma, n);
        let l = powi(self.params.lambda, n);
        let intermediate = PlanarPoint::new(l * z.x, s * z.y);
        let image = composite_formula(mu, l, s, z);
        Ok(CompositeImage {
            image,
            intermediate,
            in_r1: self.region.in_r1(&intermediate),
        })
    }

    pub fn composite_jacobian(&self, n: u32, z: PlanarPoint) -> Result<Matrix2<f64>> {
        self.params.check_precision(n)?;
        let s = powi(self.params.sigma, n);
        let l = powi(self.params.lambda, n);
        Ok(composite_jacobian_formula(l, s, z))
    }

    /// `s_n = (1, σ^{-n})` and `μ_n = λⁿ + σ^{-n}`.
    pub fn closed_form_sink(&self, n: u32) -> Result<(PlanarPoint, f64)> {
        self.params.check_precision(n)?;
        let s_inv = powi(self.params.sigma, n).recip();
        let mu_n = powi(self.params.lambda, n) + s_inv;
        Ok((PlanarPoint::new(1.0, s_inv), mu_n))
    }

    /// One step of the piecewise dynamics, `None` once the point has left
    /// `R₀ ∪ R₁`.
    pub fn step(&self, mu: f64, z: PlanarPoint) -> Option<PlanarPoint> {
        match self.region.tag(&z) {
            RegionTag::R1Transition => Some(transition_map_unchecked(mu, z)),
            RegionTag::R0 => Some(local_map_unchecked(&self.params, z)),
            RegionTag::Escaped => None,
        }
    }

    pub fn simulate_orbit(&self, mu: f64, z0: PlanarPoint, max_steps: usize) -> OrbitSegment {
        let mut points = Vec::with_capacity(max_steps.min(1 << 16) + 1);
        let mut tags = Vec::with_capacity(points.capacity());
        let mut z = z0;
        let mut escaped = false;
        for step in 0..=max_steps {
            let tag = self.region.tag(&z);
            points.push(z);
            tags.push(tag);
            if tag == RegionTag::Escaped {
                escaped = true;
                break;
            }
            if step == max_steps {
                break;
            }
            z = match tag {
                RegionTag::R1Transition => transition_map_unchecked(mu, z),
                _ => local_map_unchecked(&self.params, z),
            };
        }
        OrbitSegment {
            points,
            region_tags: tags,
            escaped,
        }
    }
}

pub fn local_map_unchecked(p: &ModelParams, z: PlanarPoint) -> PlanarPoint {
    PlanarPoint::new(p.lambda * z.x, p.sigma * z.y)
}

pub fn transition_map_unchecked(mu: f64, z: PlanarPoint) -> PlanarPoint {
    let d = z.y - 1.0;
    PlanarPoint::new(z.y, mu - z.x + d * d)
}

/// Inverse of the transition: `(u, v) ↦ (μ − v + (u − 1)², u)`.
pub fn transition_inverse_unchecked(mu: f64, w: PlanarPoint) -> PlanarPoint {
    let d = w.x - 1.0;
    PlanarPoint::new(mu - w.y + d * d, w.x)
}

pub(crate) fn composite_formula(mu: f64, l: f64, s: f64, z: PlanarPoint) -> PlanarPoint {
    let u = s * z.y;
    let d = u - 1.0;
    PlanarPoint::new(u, mu - l * z.x + d * d)
}

pub(crate) fn composite_jacobian_formula(l: f64, s: f64, z: PlanarPoint) -> Matrix2<f64> {
    Matrix2::new(0.0, s, -l, 2.0 * s * (s * z.y - 1.0))
}
