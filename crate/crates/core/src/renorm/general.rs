//! Renormalization in dimension `m ≥ 2`.
//!
//! The transition near `r = (0, 1)` is
//!
//! ```text
//! (x, y) ↦ (e + a(y − 1) + γx + ρ₁(x, y),  μ − c·x + b(y − 1)² + ρ₂(x, y))
//! ```
//!
//! with `x ∈ ℝ^{m-1}`, and the local dynamics is `(x, y) ↦ (λ_s x, σy)`.
//! In the coordinates `X = σⁿ(x − e)`, `Y = bσ^{2n}(y − σ^{-n})` and the
//! parameter `ν = bσ^{2n}(μ − σ^{-n} − c·λⁿe)` the return map becomes the
//! limit `(AY, Y² + ν)`, `A = a/b`, plus five correction terms that all
//! vanish as `n → ∞`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::poly::{fd_jet, Polynomial};
use crate::spectra::{spectral_norm, spectral_radius};

use super::{check_lattice_general, FD_STEP, MAX_LOG10_RANGE};

/// Tolerance for the finite-difference jet cross-check.
pub const JET_TOL: f64 = 1e-6;

/// File representation: vectors as lists, matrices as row-major lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralCoeffsSpec {
    pub dim: usize,
    pub e: Vec<f64>,
    pub a: Vec<f64>,
    pub b: f64,
    pub c: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub lambda_s: Vec<Vec<f64>>,
    pub sigma: f64,
    #[serde(default)]
    pub rho1: Vec<Polynomial>,
    #[serde(default)]
    pub rho2: Polynomial,
}

/// Validated coefficients of the transition and the local linear part.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralCoeffs {
    dim: usize,
    e: DVector<f64>,
    a: DVector<f64>,
    b: f64,
    c: DVector<f64>,
    gamma: DMatrix<f64>,
    lambda_s: DMatrix<f64>,
    sigma: f64,
    rho1: Vec<Polynomial>,
    rho2: Polynomial,
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>], k: usize) -> Result<DMatrix<f64>> {
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Config(format!("{name} must be a {k}x{k} matrix")));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

fn vector(name: &str, v: &[f64], k: usize) -> Result<DVector<f64>> {
    if v.len() != k {
        return Err(Error::Config(format!(
            "{name} must have {k} entries (got {})",
            v.len()
        )));
    }
    Ok(DVector::from_column_slice(v))
}

impl GeneralCoeffs {
    pub fn from_spec(spec: &GeneralCoeffsSpec) -> Result<Self> {
        let co = Self::assemble(spec)?;
        if co.e.norm() >= 1.0 {
            return Err(Error::Validation(format!(
                "tangency point must satisfy |e| < 1 (got {})",
                co.e.norm()
            )));
        }
        co.validate()?;
        Ok(co)
    }

    fn assemble(spec: &GeneralCoeffsSpec) -> Result<Self> {
        let m = spec.dim;
        if m < 2 {
            return Err(Error::Config(format!("dimension must be >= 2 (got {m})")));
        }
        let k = m - 1;
        let rho1 = if spec.rho1.is_empty() {
            vec![Polynomial::zero(); k]
        } else if spec.rho1.len() == k {
            spec.rho1.clone()
        } else {
            return Err(Error::Config(format!(
                "rho1 must have {k} components (got {})",
                spec.rho1.len()
            )));
        };
        Ok(GeneralCoeffs {
            dim: m,
            e: vector("e", &spec.e, k)?,
            a: vector("a", &spec.a, k)?,
            b: spec.b,
            c: vector("c", &spec.c, k)?,
            gamma: matrix_from_rows("gamma", &spec.gamma, k)?,
            lambda_s: matrix_from_rows("lambda_s", &spec.lambda_s, k)?,
            sigma: spec.sigma,
            rho1,
            rho2: spec.rho2.clone(),
        })
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(self.e.as_slice())
            || !finite(self.a.as_slice())
            || !finite(self.c.as_slice())
            || !finite(self.gamma.as_slice())
            || !finite(self.lambda_s.as_slice())
            || !self.b.is_finite()
            || !self.sigma.is_finite()
        {
            return Err(Error::Validation("coefficients must be finite".into()));
        }
        if self.b == 0.0 {
            return Err(Error::Validation("b must be nonzero (quadratic tangency)".into()));
        }
        if self.sigma <= 1.0 {
            return Err(Error::Validation(format!("sigma must exceed 1 (got {})", self.sigma)));
        }
        let rate = spectral_radius(&self.lambda_s) * self.sigma;
        if rate >= 1.0 {
            return Err(Error::Validation(format!(
                "saddle not sectionally dissipative: rho(lambda_s)*sigma = {rate} >= 1"
            )));
        }
        for p in self.rho1.iter().chain(std::iter::once(&self.rho2)) {
            p.check_arity(self.dim)?;
        }
        self.check_jets()
    }

    /// Exact coefficient inspection plus a finite-difference cross-check.
    fn check_jets(&self) -> Result<()> {
        let m = self.dim;
        for (i, p) in self.rho1.iter().enumerate() {
            if !p.one_jet_vanishes(m) {
                return Err(Error::Jet(format!("rho1[{i}] has a nonzero 1-jet at (0,1)")));
            }
            let (v, g, _) = fd_jet(p, m);
            if v.abs() > JET_TOL || g.iter().any(|d| d.abs() > JET_TOL) {
                return Err(Error::Jet(format!(
                    "rho1[{i}] 1-jet fails the finite-difference check"
                )));
            }
        }
        if !self.rho2.one_jet_vanishes(m) {
            return Err(Error::Jet("rho2 has a nonzero 1-jet at (0,1)".into()));
        }
        if self.rho2.d_tt_at_base(m) != 0.0 {
            return Err(Error::Jet("rho2 has nonzero d_yy at (0,1)".into()));
        }
        let (v, g, d_tt) = fd_jet(&self.rho2, m);
        if v.abs() > JET_TOL || g.iter().any(|d| d.abs() > JET_TOL) || d_tt.abs() > JET_TOL {
            return Err(Error::Jet("rho2 jet fails the finite-difference check".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: GeneralCoeffsSpec =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_spec(&spec)
    }

    /// The planar model written in general form: `e = a = b = c = 1`,
    /// `γ = 0`, no remainders. Here `|e| = 1` sits inside `R₀ = [-2, 2]²`,
    /// so the unit-ball normalization is not imposed.
    pub fn from_planar(p: &ModelParams) -> Self {
        let one = DVector::from_element(1, 1.0);
        GeneralCoeffs {
            dim: 2,
            e: one.clone(),
            a: one.clone(),
            b: 1.0,
            c: one,
            gamma: DMatrix::zeros(1, 1),
            lambda_s: DMatrix::from_element(1, 1, p.lambda()),
            sigma: p.sigma(),
            rho1: vec![Polynomial::zero()],
            rho2: Polynomial::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn e(&self) -> &DVector<f64> {
        &self.e
    }

    pub fn lambda_s(&self) -> &DMatrix<f64> {
        &self.lambda_s
    }

    /// `A = a/b`.
    pub fn a_over_b(&self) -> DVector<f64> {
        &self.a / self.b
    }

    /// `max(ρ(λ_s)σ, σ^{-1})`, the slowest decay among the correction terms.
    pub fn decay_bound(&self) -> f64 {
        (spectral_radius(&self.lambda_s) * self.sigma).max(self.sigma.recip())
    }
}

/// Return time `n` for the general renormalization; `n` must be even.
#[derive(Debug, Clone)]
pub struct GeneralFrame {
    pub coeffs: GeneralCoeffs,
    pub n: u32,
    sigma_n: f64,
    lambda_n: DMatrix<f64>,
}

impl GeneralFrame {
    pub fn new(coeffs: GeneralCoeffs, n: u32) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::Validation(format!(
                "general renormalization needs an even n >= 2 (got {n})"
            )));
        }
        if 2.0 * f64::from(n) * coeffs.sigma.log10() > MAX_LOG10_RANGE {
            return Err(Error::Precision(format!(
                "sigma^(2n) overflows double precision for n = {n}"
            )));
        }
        let lambda_n = coeffs.lambda_s.pow(n);
        let sigma_n = coeffs.sigma.powi(n as i32);
        Ok(GeneralFrame {
            coeffs,
            n,
            sigma_n,
            lambda_n,
        })
    }

    /// Same frame for a planar family, allowing odd `n`.
    pub fn planar(p: &ModelParams, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("n must be >= 1".into()));
        }
        let coeffs = GeneralCoeffs::from_planar(p);
        Ok(GeneralFrame {
            sigma_n: coeffs.sigma.powi(n as i32),
            lambda_n: coeffs.lambda_s.pow(n),
            coeffs,
            n,
        })
    }

    /// `μ_n = σ^{-n} + c·λⁿe`.
    pub fn mu_center(&self) -> f64 {
        self.sigma_n.recip() + self.coeffs.c.dot(&(&self.lambda_n * &self.coeffs.e))
    }

    pub fn reparam_nu(&self, mu: f64) -> f64 {
        self.coeffs.b * self.sigma_n * self.sigma_n * (mu - self.mu_center())
    }

    pub fn reparam_mu(&self, nu: f64) -> f64 {
        let inv = self.sigma_n.recip();
        self.mu_center() + nu * inv * inv / self.coeffs.b
    }

    pub fn h_n(&self, x: &DVector<f64>, y: f64) -> (DVector<f64>, f64) {
        let s = self.sigma_n;
        ((x - &self.coeffs.e) * s, self.coeffs.b * s * (s * y - 1.0))
    }

    pub fn h_n_inverse(&self, big_x: &DVector<f64>, big_y: f64) -> (DVector<f64>, f64) {
        let inv = self.sigma_n.recip();
        (big_x * inv + &self.coeffs.e, inv + inv * inv * big_y / self.coeffs.b)
    }

    /// `𝒢_{n,ν} − 𝒢_ν`, assembled from the correction terms directly.
    pub fn correction(&self, big_x: &DVector<f64>, big_y: f64) -> (DVector<f64>, f64) {
        let co = &self.coeffs;
        let s = self.sigma_n;
        let shifted = big_x / s + &co.e;
        let x_arg = &self.lambda_n * &shifted;
        let t = big_y / (s * co.b);
        let lx = &self.lambda_n * big_x;

        let mut dx = &co.gamma * (&lx + &self.lambda_n * &co.e * s);
        for (i, p) in co.rho1.iter().enumerate() {
            dx[i] += s * p.eval(x_arg.as_slice(), t);
        }
        let dy = -co.c.dot(&lx) * co.b * s + co.b * s * s * co.rho2.eval(x_arg.as_slice(), t);
        (dx, dy)
    }

    pub fn renormalized_map(&self, nu: f64, big_x: &DVector<f64>, big_y: f64) -> (DVector<f64>, f64) {
        let (lx, ly) = general_limit_map(&self.coeffs, nu, big_x, big_y);
        let (dx, dy) = self.correction(big_x, big_y);
        (lx + dx, ly + dy)
    }

    /// The unscaled return map `(x, y) ↦ transition(λⁿx, σⁿy)` at parameter `μ`.
    pub fn unscaled_return(&self, mu: f64, x: &DVector<f64>, y: f64) -> (DVector<f64>, f64) {
        let co = &self.coeffs;
        let xn = &self.lambda_n * x;
        let t = self.sigma_n * y - 1.0;
        let mut x_out = &co.e + &co.a * t + &co.gamma * &xn;
        for (i, p) in co.rho1.iter().enumerate() {
            x_out[i] += p.eval(xn.as_slice(), t);
        }
        let y_out = mu - co.c.dot(&xn) + co.b * t * t + co.rho2.eval(xn.as_slice(), t);
        (x_out, y_out)
    }
}

pub fn general_renormalized_map(
    frame: &GeneralFrame,
    nu: f64,
    big_x: &DVector<f64>,
    big_y: f64,
) -> (DVector<f64>, f64) {
    frame.renormalized_map(nu, big_x, big_y)
}

/// `(X, Y) ↦ (AY, Y² + ν)`.
pub fn general_limit_map(
    co: &GeneralCoeffs,
    nu: f64,
    _big_x: &DVector<f64>,
    big_y: f64,
) -> (DVector<f64>, f64) {
    (co.a_over_b() * big_y, big_y * big_y + nu)
}

/// Jacobian of the limit map in the block order `(X, Y)`.
pub fn general_limit_jacobian(co: &GeneralCoeffs, big_y: f64) -> DMatrix<f64> {
    let m = co.dim;
    let a = co.a_over_b();
    let mut j = DMatrix::zeros(m, m);
    for i in 0..m - 1 {
        j[(i, m - 1)] = a[i];
    }
    j[(m - 1, m - 1)] = 2.0 * big_y;
    j
}

fn lattice_points(m: usize, k: f64, grid: usize) -> Vec<Vec<f64>> {
    let axis = super::lattice(k, grid);
    let total = grid.pow(m as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; m];
            for c in p.iter_mut() {
                *c = axis[idx % grid];
                idx /= grid;
            }
            p
        })
        .collect()
}

fn split(p: &[f64]) -> (DVector<f64>, f64) {
    let m = p.len();
    (DVector::from_column_slice(&p[..m - 1]), p[m - 1])
}

fn correction_norm(frame: &GeneralFrame, p: &[f64]) -> f64 {
    let (x, y) = split(p);
    let (dx, dy) = frame.correction(&x, y);
    (dx.norm_squared() + dy * dy).sqrt()
}

fn correction_jacobian(frame: &GeneralFrame, p: &[f64]) -> DMatrix<f64> {
    let m = p.len();
    let h = FD_STEP;
    let mut jac = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let (xp, yp) = split(&plus);
        let (xm, ym) = split(&minus);
        let (dxp, dyp) = frame.correction(&xp, yp);
        let (dxm, dym) = frame.correction(&xm, ym);
        for i in 0..m - 1 {
            jac[(i, j)] = (dxp[i] - dxm[i]) / (2.0 * h);
        }
        jac[(m - 1, j)] = (dyp - dym) / (2.0 * h);
    }
    jac
}

/// Sup over the lattice on `[-k, k]^m` of `|𝒢_{n,ν} − 𝒢_ν|`. The difference
/// does not depend on `ν`; the argument is kept for symmetry with the maps.
pub fn general_c0_deviation(frame: &GeneralFrame, _nu: f64, k: f64, grid: usize) -> Result<f64> {
    check_lattice_general(k, grid, frame.coeffs.dim)?;
    Ok(lattice_points(frame.coeffs.dim, k, grid)
        .par_iter()
        .map(|p| correction_norm(frame, p))
        .reduce(|| 0.0, f64::max))
}

pub fn general_c1_deviation(frame: &GeneralFrame, _nu: f64, k: f64, grid: usize) -> Result<f64> {
    check_lattice_general(k, grid, frame.coeffs.dim)?;
    Ok(lattice_points(frame.coeffs.dim, k, grid)
        .par_iter()
        .map(|p| spectral_norm(&correction_jacobian(frame, p)))
        .reduce(|| 0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::eigenvalues;

    fn spec3() -> GeneralCoeffsSpec {
        GeneralCoeffsSpec {
            dim: 3,
            e: vec![0.5, 0.2],
            a: vec![0.3, -0.4],
            b: 2.0,
            c: vec![0.7, 0.1],
            gamma: vec![vec![0.1, 0.0], vec![0.2, -0.3]],
            lambda_s: vec![vec![0.3, 0.1], vec![0.0, 0.2]],
            sigma: 1.6,
            rho1: vec![
                Polynomial::from_terms([(0.5, vec![0, 0, 2])]),
                Polynomial::from_terms([(-0.2, vec![1, 0, 1])]),
            ],
            rho2: Polynomial::from_terms([(0.4, vec![0, 0, 3]), (0.3, vec![1, 1, 0])]),
        }
    }

    #[test]
    fn zero_corrections_give_limit_map() {
        let mut s = spec3();
        s.gamma = vec![vec![0.0; 2]; 2];
        s.c = vec![0.0; 2];
        s.rho1.clear();
        s.rho2 = Polynomial::zero();
        let co = GeneralCoeffs::from_spec(&s).unwrap();
        for n in [2, 8, 30] {
            let f = GeneralFrame::new(co.clone(), n).unwrap();
            let x = DVector::from_vec(vec![1.3, -0.7]);
            let (gx, gy) = f.renormalized_map(0.4, &x, 0.9);
            let (lx, ly) = general_limit_map(&co, 0.4, &x, 0.9);
            assert_eq!(gy, ly);
            assert_eq!(gx, lx);
        }
    }

    #[test]
    fn renormalized_map_conjugates_return_map() {
        let co = GeneralCoeffs::from_spec(&spec3()).unwrap();
        let f = GeneralFrame::new(co, 6).unwrap();
        let nu = 0.3;
        let mu = f.reparam_mu(nu);
        let big_x = DVector::from_vec(vec![0.8, -1.1]);
        let big_y = 0.6;
        let (x, y) = f.h_n_inverse(&big_x, big_y);
        let (x1, y1) = f.unscaled_return(mu, &x, y);
        let (cx, cy) = f.h_n(&x1, y1);
        let (gx, gy) = f.renormalized_map(nu, &big_x, big_y);
        assert!((cx - gx).norm() < 1e-8);
        assert!((cy - gy).abs() < 1e-8);
    }

    #[test]
    fn jets_validated() {
        let mut s = spec3();
        s.rho2 = Polynomial::from_terms([(1.0, vec![0, 0, 3])]);
        assert!(GeneralCoeffs::from_spec(&s).is_ok());
        s.rho2 = Polynomial::from_terms([(1.0, vec![0, 0, 2])]);
        assert!(matches!(GeneralCoeffs::from_spec(&s), Err(Error::Jet(_))));
        let mut s = spec3();
        s.rho1[0] = Polynomial::from_terms([(0.1, vec![0, 0, 1])]);
        assert!(matches!(GeneralCoeffs::from_spec(&s), Err(Error::Jet(_))));
    }

    #[test]
    fn coefficient_preconditions() {
        let mut s = spec3();
        s.e = vec![0.9, 0.9];
        assert!(GeneralCoeffs::from_spec(&s).is_err());
        let mut s = spec3();
        s.b = 0.0;
        assert!(GeneralCoeffs::from_spec(&s).is_err());
        let mut s = spec3();
        s.lambda_s = vec![vec![0.7, 0.0], vec![0.0, 0.1]];
        assert!(GeneralCoeffs::from_spec(&s).is_err());
        let mut s = spec3();
        s.gamma = vec![vec![0.0; 3]; 2];
        assert!(matches!(GeneralCoeffs::from_spec(&s), Err(Error::Config(_))));
    }

    #[test]
    fn odd_n_rejected() {
        let co = GeneralCoeffs::from_spec(&spec3()).unwrap();
        assert!(GeneralFrame::new(co.clone(), 5).is_err());
        assert!(GeneralFrame::new(co.clone(), 0).is_err());
        assert!(matches!(GeneralFrame::new(co, 4000), Err(Error::Precision(_))));
    }

    #[test]
    fn saddle_of_limit_map() {
        for m in 2..=4 {
            let k = m - 1;
            let s = GeneralCoeffsSpec {
                dim: m,
                e: vec![0.1; k],
                a: (0..k).map(|i| 0.5 + i as f64).collect(),
                b: -1.5,
                c: vec![0.0; k],
                gamma: vec![vec![0.0; k]; k],
                lambda_s: (0..k)
                    .map(|i| (0..k).map(|j| if i == j { 0.2 } else { 0.0 }).collect())
                    .collect(),
                sigma: 2.0,
                rho1: vec![],
                rho2: Polynomial::zero(),
            };
            let co = GeneralCoeffs::from_spec(&s).unwrap();
            let fixed = co.a_over_b() * 2.0;
            let (gx, gy) = general_limit_map(&co, -2.0, &fixed, 2.0);
            assert_eq!(gy, 2.0);
            assert!((gx - &fixed).norm() < 1e-15);
            let mut eig: Vec<f64> = eigenvalues(&general_limit_jacobian(&co, 2.0))
                .iter()
                .map(|z| z.norm())
                .collect();
            eig.sort_by(f64::total_cmp);
            assert!((eig[m - 1] - 4.0).abs() < 1e-9);
            assert!(eig[..m - 1].iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn toml_round_trip() {
        let text = toml::to_string(&spec3()).unwrap();
        let co = GeneralCoeffs::from_toml_str(&text).unwrap();
        assert_eq!(co, GeneralCoeffs::from_spec(&spec3()).unwrap());
        assert!(GeneralCoeffs::from_toml_str("dim = 3").is_err());
    }
}
