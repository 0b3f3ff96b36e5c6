//! Newton iteration with deflation, and the periodic-sink finder built on it.
//!
//! The return map of the model has two fixed points near `(1, σ^{-n})`; for
//! moderate `n` an undamped Newton iteration from a nearby seed tends to land
//! on the non-attracting one. Roots that fail the sink test are deflated
//! (Farrell-style, `η(z) = Π (‖z − r‖_W^{-p} + α)`) and the iteration restarts
//! from the same seed. Distances use the weighted norm of the renormalizing
//! coordinates so that both axes are measured on their natural scale.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{composite_formula, composite_jacobian_formula, powi, PlanarFamily, PlanarPoint};
use crate::spectra::{classify_orbit, SpectrumReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the weighted step norm.
    pub step_tol: f64,
    pub max_deflations: usize,
    pub deflation_power: f64,
    pub deflation_shift: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 100,
            step_tol: 1e-9,
            max_deflations: 4,
            deflation_power: 2.0,
            deflation_shift: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonRoot {
    pub point: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    /// Roots that converged but were rejected, in discovery order.
    pub deflated: Vec<DVector<f64>>,
}

fn weighted_norm2(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    v.iter().zip(w.iter()).map(|(a, b)| b * a * a).sum()
}

/// Solves `f(z) = z` where `eval` returns `(f(z), Df(z))`. A converged root
/// is returned only if `accept(Df)` holds; otherwise it is deflated.
pub fn newton_fixed_point<E, A>(
    eval: E,
    seed: &DVector<f64>,
    weights: &DVector<f64>,
    opts: &NewtonOptions,
    accept: A,
) -> Result<NewtonRoot>
where
    E: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
    A: Fn(&DMatrix<f64>) -> bool,
{
    let d = seed.len();
    let ident = DMatrix::<f64>::identity(d, d);
    let mut deflated: Vec<DVector<f64>> = Vec::new();
    let mut total = 0;
    loop {
        let mut z = seed.clone();
        let mut converged = false;
        for _ in 0..opts.max_iterations {
            total += 1;
            let (fz, jac) = eval(&z);
            let resid = &fz - &z;
            let lu = (&jac - &ident).lu();
            let step = lu
                .solve(&(-&resid))
                .ok_or_else(|| Error::Convergence("singular Newton system".into()))?;
            // η'/η along the step, summed over deflated roots
            let mut g_dot = 0.0;
            for r in &deflated {
                let diff = &z - r;
                let dist2 = weighted_norm2(&diff, weights);
                let dist_p = dist2.powf(0.5 * opts.deflation_power);
                let wd: f64 = diff
                    .iter()
                    .zip(weights.iter())
                    .zip(step.iter())
                    .map(|((a, w), s)| a * w * s)
                    .sum();
                let grad_log = -opts.deflation_power * wd / (dist2 * (1.0 + opts.deflation_shift * dist_p));
                g_dot += grad_log;
            }
            let step = step / (1.0 - g_dot);
            if !step.iter().all(|v| v.is_finite()) {
                return Err(Error::Convergence("Newton step is not finite".into()));
            }
            z += &step;
            if weighted_norm2(&step, weights).sqrt() < opts.step_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence(format!(
                "Newton did not converge within {} iterations",
                opts.max_iterations
            )));
        }
        let (_, jac) = eval(&z);
        if accept(&jac) {
            return Ok(NewtonRoot {
                point: z,
                jacobian: jac,
                iterations: total,
                deflated,
            });
        }
        if deflated.len() >= opts.max_deflations {
            return Err(Error::Convergence(format!(
                "no acceptable root after {} deflations",
                deflated.len()
            )));
        }
        deflated.push(z);
    }
}

/// A sink of the `n`-th return map found by Newton iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinkReport {
    pub n: u32,
    pub mu: f64,
    pub point: PlanarPoint,
    /// `|F^{n+N}(z) − z|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub rejected_roots: Vec<PlanarPoint>,
    pub jacobian: [[f64; 2]; 2],
    pub spectrum: SpectrumReport,
    /// Whether `Fⁿ(z)` lies in `R₁`, i.e. the formula describes real dynamics.
    pub in_r1: bool,
}

impl SinkReport {
    pub fn jacobian_matrix(&self) -> Matrix2<f64> {
        let j = self.jacobian;
        Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1])
    }
}

/// Finds an attracting fixed point of the composite map `F^{n+N}_μ` from `seed`.
pub fn find_sink(family: &PlanarFamily, mu: f64, n: u32, seed: PlanarPoint) -> Result<SinkReport> {
    find_sink_with(family, mu, n, seed, &NewtonOptions::default())
}

pub fn find_sink_with(
    family: &PlanarFamily,
    mu: f64,
    n: u32,
    seed: PlanarPoint,
    opts: &NewtonOptions,
) -> Result<SinkReport> {
    family.params.check_precision(n)?;
    if !seed.is_finite() || !mu.is_finite() {
        return Err(Error::Validation("seed and mu must be finite".into()));
    }
    let s = powi(family.params.sigma(), n);
    let l = powi(family.params.lambda(), n);
    let eval = |z: &DVector<f64>| {
        let p = PlanarPoint::new(z[0], z[1]);
        let img = composite_formula(mu, l, s, p);
        let j = composite_jacobian_formula(l, s, p);
        (
            DVector::from_vec(vec![img.x, img.y]),
            DMatrix::from_row_slice(2, 2, &[j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]]),
        )
    };
    let weights = DVector::from_vec(vec![s * s, s * s * s * s]);
    let accept = |j: &DMatrix<f64>| crate::spectra::spectral_radius(j) < 1.0;
    let root = newton_fixed_point(eval, &DVector::from_vec(vec![seed.x, seed.y]), &weights, opts, accept)?;

    let point = PlanarPoint::new(root.point[0], root.point[1]);
    let img = composite_formula(mu, l, s, point);
    let spectrum = classify_orbit(std::slice::from_ref(&root.jacobian))?;
    let j = &root.jacobian;
    Ok(SinkReport {
        n,
        mu,
        point,
        residual: img.distance(&point),
        iterations: root.iterations,
        rejected_roots: root
            .deflated
            .iter()
            .map(|r| PlanarPoint::new(r[0], r[1]))
            .collect(),
        jacobian: [[j[(0, 0)], j[(0, 1)]], [j[(1, 0)], j[(1, 1)]]],
        spectrum,
        in_r1: family.region.in_r1(&PlanarPoint::new(l * point.x, s * point.y)),
    })
}
