//! Sparse multivariate polynomials used as remainder terms.
//!
//! A polynomial in `m` variables is stored in the shifted coordinates
//! `(x₁, …, x_{m-1}, t)` with `t = y − 1`, so that its jet at the base
//! point `(0, 1)` can be read directly off the coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    /// One exponent per variable, `t` last.
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (f64, Vec<u32>)>) -> Self {
        Polynomial {
            terms: terms
                .into_iter()
                .map(|(coeff, powers)| Monomial { coeff, powers })
                .collect(),
        }
    }

    pub fn check_arity(&self, vars: usize) -> Result<()> {
        for term in &self.terms {
            if term.powers.len() != vars {
                return Err(Error::Config(format!(
                    "monomial {:?} has {} exponents, expected {vars}",
                    term.powers,
                    term.powers.len()
                )));
            }
            if !term.coeff.is_finite() {
                return Err(Error::Config("non-finite polynomial coefficient".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let mut total = 0.0;
        for term in &self.terms {
            let mut v = term.coeff;
            for (xi, &p) in x.iter().zip(&term.powers) {
                if p > 0 {
                    v *= xi.powi(p as i32);
                }
            }
            if let Some(&p) = term.powers.last() {
                if p > 0 {
                    v *= t.powi(p as i32);
                }
            }
            total += v;
        }
        total
    }

    /// Sum of coefficients of the monomial with exactly these powers.
    pub fn coefficient(&self, powers: &[u32]) -> f64 {
        self.terms
            .iter()
            .filter(|m| m.powers == powers)
            .map(|m| m.coeff)
            .sum()
    }

    /// Coefficients of total degree ≤ 1 that do not cancel.
    fn low_order_terms(&self, vars: usize) -> Vec<(Vec<u32>, f64)> {
        let mut out = Vec::new();
        let mut keys: Vec<Vec<u32>> = vec![vec![0; vars]];
        for i in 0..vars {
            let mut k = vec![0; vars];
            k[i] = 1;
            keys.push(k);
        }
        for k in keys {
            let c = self.coefficient(&k);
            if c != 0.0 {
                out.push((k, c));
            }
        }
        out
    }

    /// Exact check that value and gradient vanish at the base point.
    pub fn one_jet_vanishes(&self, vars: usize) -> bool {
        self.low_order_terms(vars).is_empty()
    }

    /// Exact `∂_tt` at the base point (twice the `t²` coefficient).
    pub fn d_tt_at_base(&self, vars: usize) -> f64 {
        let mut k = vec![0; vars];
        k[vars - 1] = 2;
        2.0 * self.coefficient(&k)
    }
}

/// Finite-difference estimate of value, gradient and `∂_tt` at the base point.
pub(crate) fn fd_jet(poly: &Polynomial, vars: usize) -> (f64, Vec<f64>, f64) {
    const H: f64 = 1e-4;
    let nx = vars - 1;
    let eval = |shift: &[f64]| poly.eval(&shift[..nx], shift[nx]);
    let base = vec![0.0; vars];
    let value = eval(&base);
    let mut grad = vec![0.0; vars];
    for (i, g) in grad.iter_mut().enumerate() {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[i] = H;
        minus[i] = -H;
        *g = (eval(&plus) - eval(&minus)) / (2.0 * H);
    }
    let mut plus = base.clone();
    let mut minus = base.clone();
    plus[nx] = H;
    minus[nx] = -H;
    let d_tt = (eval(&plus) - 2.0 * value + eval(&minus)) / (H * H);
    (value, grad, d_tt)
}
