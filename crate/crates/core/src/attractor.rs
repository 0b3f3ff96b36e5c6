//! Empirical Milnor attractors, Lyapunov-stability probes, and the
//! instability certificate for the model family.
//!
//! The attractor estimate samples the domain box uniformly from a seeded
//! ChaCha8 stream, discards a transient, and covers the remaining tail
//! points greedily by `ε`-balls taken in lexicographic order. The
//! stability probe launches orbits near the cluster centres and reports
//! those that leave the `ε_out`-neighbourhood of the point cloud.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PlanarFamily;

mod certificate;

pub use certificate::{
    build_certificate, build_certificate_with, CaptureWitness, CertificateOptions,
    InstabilityCertificate, SaddleRecord, SinkEntry, WanderingExit,
};

/// Fraction of escaped samples above which the estimate carries a warning.
pub const ESCAPE_WARNING_FRACTION: f64 = 0.5;

pub type StepFn = Arc<dyn Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync>;

/// A map of `ℝ^d` with a domain box and optional circle factors.
#[derive(Clone)]
pub struct UserMap {
    pub name: String,
    pub dimension: usize,
    step: StepFn,
    /// Per coordinate, the period interval `[lo, hi)` for circle factors.
    pub wrap: Vec<Option<(f64, f64)>>,
    pub domain: Vec<(f64, f64)>,
    /// Treat leaving the domain box as escape.
    pub confine: bool,
}

impl fmt::Debug for UserMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserMap")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("wrap", &self.wrap)
            .field("domain", &self.domain)
            .field("confine", &self.confine)
            .finish()
    }
}

impl UserMap {
    pub fn new<F>(name: impl Into<String>, domain: Vec<(f64, f64)>, step: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync + 'static,
    {
        if domain.is_empty() {
            return Err(Error::Validation("domain box needs at least one coordinate".into()));
        }
        for &(lo, hi) in &domain {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Validation(format!("bad domain interval [{lo}, {hi}]")));
            }
        }
        Ok(UserMap {
            name: name.into(),
            dimension: domain.len(),
            step: Arc::new(step),
            wrap: vec![None; domain.len()],
            domain,
            confine: false,
        })
    }

    pub fn with_wrap(mut self, coord: usize, lo: f64, hi: f64) -> Result<Self> {
        if coord >= self.dimension || !(lo < hi) {
            return Err(Error::Validation(format!("bad wrap spec for coordinate {coord}")));
        }
        self.wrap[coord] = Some((lo, hi));
        Ok(self)
    }

    pub fn confined(mut self) -> Self {
        self.confine = true;
        self
    }

    /// `(x, y) ↦ (x/2, y/2)` on `[-1, 1]²`.
    pub fn contraction() -> Self {
        UserMap::new("contraction", vec![(-1.0, 1.0); 2], |z| {
            Some(z.iter().map(|v| 0.5 * v).collect())
        })
        .expect("static domain")
    }

    /// `x ↦ x + 0.1(1 − cos x)` on the circle `[-π, π)`: a single
    /// semistable fixed point at 0.
    pub fn circle_semistable() -> Self {
        use std::f64::consts::PI;
        UserMap::new("circle-semistable", vec![(-PI, PI)], |z| {
            Some(vec![z[0] + 0.1 * (1.0 - z[0].cos())])
        })
        .expect("static domain")
        .with_wrap(0, -PI, PI)
        .expect("static wrap")
    }

    /// The piecewise model at parameter `μ`, sampled on `domain`.
    pub fn planar(family: PlanarFamily, mu: f64, domain: [(f64, f64); 2]) -> Result<Self> {
        UserMap::new("planar", domain.to_vec(), move |z| {
            family
                .step(mu, crate::model::PlanarPoint::new(z[0], z[1]))
                .map(|p| vec![p.x, p.y])
        })
    }

    fn normalize(&self, z: &mut [f64]) {
        for (v, w) in z.iter_mut().zip(&self.wrap) {
            if let Some((lo, hi)) = *w {
                let p = hi - lo;
                *v = lo + (*v - lo).rem_euclid(p);
                if *v >= hi {
                    *v = lo;
                }
            }
        }
    }

    /// One step; `None` on escape.
    pub fn step(&self, z: &[f64]) -> Option<Vec<f64>> {
        let mut next = (self.step)(z)?;
        if next.len() != self.dimension || next.iter().any(|v| !v.is_finite()) {
            return None;
        }
        self.normalize(&mut next);
        if self.confine
            && next
                .iter()
                .zip(&self.domain)
                .any(|(v, &(lo, hi))| *v < lo || *v > hi)
        {
            return None;
        }
        Some(next)
    }

    /// Euclidean distance, measured around the circle on wrapped coordinates.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.wrap)
            .map(|((x, y), w)| {
                let mut d = (x - y).abs();
                if let Some((lo, hi)) = *w {
                    d = d.min((hi - lo) - d);
                }
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub center: Vec<f64>,
    pub radius: f64,
    pub weight: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorEstimate {
    pub map: String,
    pub sample_count: usize,
    pub transient: usize,
    pub tail: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub escaped_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub clusters: Vec<Cluster>,
    /// Tail points in sample order; written to CSV rather than JSON.
    #[serde(skip)]
    pub points: Vec<Vec<f64>>,
}

impl AttractorEstimate {
    pub fn max_radius(&self) -> f64 {
        self.clusters.iter().map(|c| c.radius).fold(0.0, f64::max)
    }

    /// CSV with header `x0,x1,...`.
    pub fn write_points_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let d = self.points.first().map_or(0, |p| p.len());
        let header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn draw_point(map: &UserMap, rng: &mut ChaCha8Rng) -> Vec<f64> {
    map.domain
        .iter()
        .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

fn run_orbit(map: &UserMap, z0: Vec<f64>, transient: usize, tail: usize) -> Option<Vec<Vec<f64>>> {
    let mut z = z0;
    for _ in 0..transient {
        z = map.step(&z)?;
    }
    let mut out = Vec::with_capacity(tail);
    for _ in 0..tail {
        z = map.step(&z)?;
        out.push(z.clone());
    }
    Some(out)
}

fn greedy_cover(map: &UserMap, points: &[Vec<f64>], epsilon: f64) -> Vec<Cluster> {
    let mut order: Vec<&Vec<f64>> = points.iter().collect();
    order.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut clusters: Vec<Cluster> = Vec::new();
    for p in order {
        match clusters
            .iter_mut()
            .find(|c| map.distance(&c.center, p) <= epsilon)
        {
            Some(c) => {
                c.count += 1;
                c.radius = c.radius.max(map.distance(&c.center, p));
            }
            None => clusters.push(Cluster {
                center: p.clone(),
                radius: 0.0,
                weight: 0.0,
                count: 1,
            }),
        }
    }
    let total = points.len() as f64;
    for c in &mut clusters {
        c.weight = c.count as f64 / total;
    }
    clusters
}

/// Samples `samples` orbits, keeps `tail` iterates after `transient`, and
/// covers the tail points by `ε`-balls.
pub fn estimate_milnor(
    map: &UserMap,
    samples: usize,
    transient: usize,
    tail: usize,
    epsilon: f64,
    seed: u64,
) -> Result<AttractorEstimate> {
    if samples == 0 || tail == 0 {
        return Err(Error::Validation("samples and tail must be at least 1".into()));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Validation(format!("epsilon must be positive (got {epsilon})")));
    }
    // Draws happen sequentially so a larger sample count extends the same prefix.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..samples).map(|_| draw_point(map, &mut rng)).collect();
    let orbits: Vec<Option<Vec<Vec<f64>>>> = starts
        .into_par_iter()
        .map(|z| run_orbit(map, z, transient, tail))
        .collect();
    let escaped_count = orbits.iter().filter(|o| o.is_none()).count();
    if escaped_count == samples {
        return Err(Error::Degenerate(format!(
            "all {samples} sampled orbits escaped the domain"
        )));
    }
    let points: Vec<Vec<f64>> = orbits.into_iter().flatten().flatten().collect();
    let clusters = greedy_cover(map, &points, epsilon);
    let warning = (escaped_count as f64 > ESCAPE_WARNING_FRACTION * samples as f64).then(|| {
        format!("{escaped_count} of {samples} sampled orbits escaped")
    });
    Ok(AttractorEstimate {
        map: map.name.clone(),
        sample_count: samples,
        transient,
        tail,
        epsilon,
        seed,
        escaped_count,
        warning,
        clusters,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    NoEscapeObserved,
    EscapeFound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeEscape {
    pub start: Vec<f64>,
    pub exit_step: usize,
    /// `None` when the orbit left the map's domain altogether.
    pub exit_point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityProbe {
    pub target_centers: Vec<Vec<f64>>,
    pub eps_out: f64,
    pub delta_in: f64,
    pub probe_count: usize,
    pub horizon: usize,
    pub seed: u64,
    pub escapes: Vec<ProbeEscape>,
    pub verdict: ProbeVerdict,
}

/// Distance from `z` to the estimate's point cloud, exact only when it
/// matters for the `eps_out` test.
fn outside(map: &UserMap, est: &AttractorEstimate, z: &[f64], eps_out: f64, max_radius: f64) -> bool {
    let dc = est
        .clusters
        .iter()
        .map(|c| map.distance(&c.center, z))
        .fold(f64::INFINITY, f64::min);
    if dc <= eps_out {
        return false;
    }
    if dc > eps_out + max_radius {
        return true;
    }
    est.points.iter().all(|p| map.distance(p, z) > eps_out)
}

fn probe_start(map: &UserMap, center: &[f64], delta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut u: Vec<f64> = center.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1.0 {
        u.iter_mut().for_each(|v| *v /= norm);
    }
    // stay strictly inside the δ-ball
    let mut z: Vec<f64> = center
        .iter()
        .zip(&u)
        .map(|(c, v)| c + 0.999_999 * delta * v)
        .collect();
    map.normalize(&mut z);
    z
}

/// Launches `probes` orbits within `delta_in` of the cluster centres and
/// records those that move farther than `eps_out` from the point cloud
/// within `horizon` steps.
#[allow(clippy::too_many_arguments)]
pub fn probe_stability(
    map: &UserMap,
    estimate: &AttractorEstimate,
    eps_out: f64,
    delta_in: f64,
    probes: usize,
    horizon: usize,
    seed: u64,
) -> Result<StabilityProbe> {
    if !(delta_in > 0.0 && delta_in < eps_out) {
        return Err(Error::Validation(format!(
            "need 0 < delta_in < eps_out (got {delta_in}, {eps_out})"
        )));
    }
    if estimate.clusters.is_empty() {
        return Err(Error::Validation("estimate has no clusters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..probes)
        .map(|i| {
            let c = &estimate.clusters[i % estimate.clusters.len()].center;
            probe_start(map, c, delta_in, &mut rng)
        })
        .collect();
    let max_radius = estimate.max_radius();
    let escapes: Vec<ProbeEscape> = starts
        .into_par_iter()
        .filter_map(|start| {
            let mut z = start.clone();
            for step in 1..=horizon {
                match map.step(&z) {
                    None => {
                        return Some(ProbeEscape {
                            start,
                            exit_step: step,
                            exit_point: None,
                        })
                    }
                    Some(next) => z = next,
                }
                if outside(map, estimate, &z, eps_out, max_radius) {
                    return Some(ProbeEscape {
                        start,
                        exit_step: step,
                        exit_point: Some(z),
                    });
                }
            }
            None
        })
        .collect();
    let verdict = if escapes.is_empty() {
        ProbeVerdict::NoEscapeObserved
    } else {
        ProbeVerdict::EscapeFound
    };
    Ok(StabilityProbe {
        target_centers: estimate.clusters.iter().map(|c| c.center.clone()).collect(),
        eps_out,
        delta_in,
        probe_count: probes,
        horizon,
        seed,
        escapes,
        verdict,
    })
}
