//! Eigenvalue classification of periodic points.
//!
//! Given the spectrum of `dF^{per}` at a periodic point, [`classify`]
//! decides whether the point is dissipative (volume contracting),
//! sectionally dissipative (one expanding direction and every pair of
//! eigenvalues has product of modulus below one) and extremely dissipative
//! (additionally `‖λ_s‖·σ² < 1`, tested in spectral-radius form).

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Eigenvalues with `||λ| − 1|` below this are rejected as non-hyperbolic.
pub const UNIT_CIRCLE_BAND: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub period: usize,
    pub dissipative: bool,
    pub area_expanding: bool,
    pub sectionally_dissipative: bool,
    pub extremely_dissipative: bool,
    pub expanding_count: usize,
    /// Whether the product matrix contracts every 2-plane in the coordinates
    /// it was given in. Sufficient for sectional dissipativity, not necessary.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_volume_contraction_in_given_coordinates: Option<bool>,
}

impl SpectrumReport {
    pub fn moduli(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.norm()).collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// All eigenvalues strictly inside the unit disk.
    pub fn is_sink(&self) -> bool {
        self.expanding_count == 0
    }

    /// `(σ, ρ_s)`: the modulus of the unique expanding eigenvalue and the
    /// largest contracting modulus.
    pub fn sectional_split(&self) -> Result<(f64, f64)> {
        if self.expanding_count != 1 {
            return Err(Error::Shape(format!(
                "sectional split needs exactly one expanding eigenvalue, found {}",
                self.expanding_count
            )));
        }
        let mut m = self.moduli();
        m.sort_by(|a, b| b.total_cmp(a));
        Ok((m[0], m.get(1).copied().unwrap_or(0.0)))
    }
}

pub fn classify(eigs: &[Complex64]) -> Result<SpectrumReport> {
    classify_with_period(eigs, 1)
}

pub fn classify_with_period(eigs: &[Complex64], period: usize) -> Result<SpectrumReport> {
    if eigs.is_empty() {
        return Err(Error::Shape("empty eigenvalue list".into()));
    }
    let mut moduli = Vec::with_capacity(eigs.len());
    for z in eigs {
        let m = z.norm();
        if !m.is_finite() {
            return Err(Error::Validation(format!("non-finite eigenvalue {z}")));
        }
        if (m - 1.0).abs() < UNIT_CIRCLE_BAND {
            return Err(Error::Hyperbolicity {
                modulus: m,
                band: UNIT_CIRCLE_BAND,
            });
        }
        moduli.push(m);
    }
    moduli.sort_by(|a, b| b.total_cmp(a));

    let det: f64 = moduli.iter().product();
    let expanding_count = moduli.iter().filter(|&&m| m > 1.0).count();
    // With moduli sorted, the largest pairwise product is m[0]·m[1].
    let sectionally_dissipative =
        moduli.len() >= 2 && expanding_count == 1 && moduli[0] * moduli[1] < 1.0;
    let extremely_dissipative =
        sectionally_dissipative && moduli[1] * moduli[0] * moduli[0] < 1.0;

    Ok(SpectrumReport {
        eigenvalues: eigs.to_vec(),
        period,
        dissipative: det < 1.0,
        area_expanding: det > 1.0,
        sectionally_dissipative,
        extremely_dissipative,
        expanding_count,
        two_volume_contraction_in_given_coordinates: None,
    })
}

/// `true` iff the product of the two largest singular values is below one.
pub fn contracts_two_volumes(matrix: &DMatrix<f64>) -> Result<bool> {
    if matrix.nrows() != matrix.ncols() || matrix.nrows() < 2 {
        return Err(Error::Shape(format!(
            "need a square matrix of size >= 2, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite matrix entry".into()));
    }
    let s = sorted_singular_values(matrix);
    Ok(s[0] * s[1] < 1.0)
}

/// Multiplies the Jacobians in orbit order (`J_k ⋯ J_1`) and classifies the
/// spectrum of the product.
pub fn classify_orbit(jacobians: &[DMatrix<f64>]) -> Result<SpectrumReport> {
    let first = jacobians
        .first()
        .ok_or_else(|| Error::Shape("empty Jacobian list".into()))?;
    let d = first.nrows();
    if jacobians.iter().any(|j| j.nrows() != d || j.ncols() != d) {
        return Err(Error::Shape("Jacobians must share one square shape".into()));
    }
    let mut product = DMatrix::<f64>::identity(d, d);
    for j in jacobians {
        product = j * product;
    }
    let eigs = eigenvalues(&product);
    let mut report = classify_with_period(&eigs, jacobians.len())?;
    if d >= 2 {
        report.two_volume_contraction_in_given_coordinates =
            Some(contracts_two_volumes(&product)?);
    }
    Ok(report)
}

/// Eigenvalues of a square matrix. Uses the closed form for 2×2 input and a
/// dense Schur decomposition otherwise.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![Complex64::new(m[(0, 0)], 0.0)],
        2 => {
            let e = eigenvalues_2x2(&Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]));
            e.to_vec()
        }
        _ => m.clone().complex_eigenvalues().iter().copied().collect(),
    }
}

pub fn eigenvalues_2x2(m: &Matrix2<f64>) -> [Complex64; 2] {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_trace = 0.5 * (a + d);
    // (a−d)²/4 + bc avoids cancelling a·d against half_trace².
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        // Larger-magnitude root first, the other from the determinant when safe.
        let big = if half_trace >= 0.0 { half_trace + r } else { half_trace - r };
        let det = a * d - b * c;
        let small = if big != 0.0 { det / big } else { half_trace - r };
        [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [
            Complex64::new(half_trace, im),
            Complex64::new(half_trace, -im),
        ]
    }
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Operator 2-norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sorted_singular_values(m)[0]
}

fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}
