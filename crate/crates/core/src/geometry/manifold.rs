use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PlanarFamily, PlanarPoint, RegionTag};

/// Offset `δ₀` of the fundamental segment `[δ₀, σδ₀]` on the `y`-axis.
pub const FUNDAMENTAL_OFFSET: f64 = 1e-4;

/// Largest number of iterates of the fundamental segment.
pub const MAX_ITERATE: u32 = 64;

const INITIAL_SAMPLES: usize = 16;
const MIN_PARAM_GAP: f64 = FUNDAMENTAL_OFFSET * 1e-12;
const MAX_PIECE_SAMPLES: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthStop {
    LengthReached,
    /// Every point of the latest iterate has escaped.
    Exhausted,
    IterateCap,
}

/// Where an arc point came from: `F^iterate(0, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArcSample {
    pub s: f64,
    pub iterate: u32,
    pub transitions: u32,
    /// Consecutive points with equal ids are joined by the polyline.
    pub segment: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldArc {
    pub points: Vec<PlanarPoint>,
    /// Cumulative polyline length, not increasing across segment breaks.
    pub arc_params: Vec<f64>,
    pub samples: Vec<ArcSample>,
    pub source_saddle: PlanarPoint,
    pub mu: f64,
    pub max_gap: f64,
    pub total_length: f64,
    pub stop: GrowthStop,
}

impl ManifoldArc {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.samples.last().map_or(0, |s| s.segment as usize + 1)
    }

    /// Largest distance between consecutive points of the same segment.
    pub fn max_spacing(&self) -> f64 {
        self.points
            .windows(2)
            .zip(self.samples.windows(2))
            .filter(|(_, s)| s[0].segment == s[1].segment)
            .map(|(p, _)| p[0].distance(&p[1]))
            .fold(0.0, f64::max)
    }

    /// CSV with header `index,segment,iterate,s,transitions,x,y,arc`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,segment,iterate,s,transitions,x,y,arc")?;
        for (i, ((p, s), a)) in self
            .points
            .iter()
            .zip(&self.samples)
            .zip(&self.arc_params)
            .enumerate()
        {
            writeln!(
                out,
                "{i},{},{},{},{},{},{},{a}",
                s.segment, s.iterate, s.s, s.transitions, p.x, p.y
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Trace {
    s: f64,
    pos: Option<PlanarPoint>,
    /// Region codes of the steps taken, leading `R₀` steps removed. Two
    /// samples whose codes agree lie on the same smooth piece of the curve.
    canon: Vec<u8>,
    transitions: u32,
}

fn trace(family: &PlanarFamily, mu: f64, s: f64, k: u32) -> Trace {
    let mut z = PlanarPoint::new(0.0, s);
    let mut canon = Vec::new();
    let mut transitions = 0;
    for _ in 0..k {
        let tag = family.region.tag(&z);
        let code = match tag {
            RegionTag::R0 => 0,
            RegionTag::R1Transition => 1,
            RegionTag::Escaped => 2,
        };
        if !(canon.is_empty() && code == 0) {
            canon.push(code);
        }
        match family.step(mu, z) {
            Some(next) => {
                if tag == RegionTag::R1Transition {
                    transitions += 1;
                }
                z = next;
            }
            None => {
                return Trace {
                    s,
                    pos: None,
                    canon,
                    transitions,
                }
            }
        }
    }
    if family.region.tag(&z) == RegionTag::Escaped {
        canon.push(2);
        return Trace {
            s,
            pos: None,
            canon,
            transitions,
        };
    }
    Trace {
        s,
        pos: Some(z),
        canon,
        transitions,
    }
}

fn needs_split(a: &Trace, b: &Trace, max_gap: f64) -> bool {
    if a.canon != b.canon {
        return true;
    }
    match (a.pos, b.pos) {
        (Some(p), Some(q)) => p.distance(&q) > max_gap,
        _ => false,
    }
}

/// Samples of `F^k` on the fundamental segment, refined in the parameter
/// until image spacing is below `max_gap` and itinerary changes are
/// bracketed to within `MIN_PARAM_GAP`.
fn grow_piece(family: &PlanarFamily, mu: f64, k: u32, max_gap: f64) -> Result<Vec<Trace>> {
    let sigma = family.params.sigma();
    let mut samples: Vec<Trace> = (0..=INITIAL_SAMPLES)
        .map(|i| {
            let s = FUNDAMENTAL_OFFSET * sigma.powf(i as f64 / INITIAL_SAMPLES as f64);
            trace(family, mu, s, k)
        })
        .collect();
    loop {
        let mut out = Vec::with_capacity(samples.len() * 2);
        let mut changed = false;
        out.push(samples[0].clone());
        for pair in samples.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.s - a.s > MIN_PARAM_GAP && needs_split(a, b, max_gap) {
                let mid = (a.s * b.s).sqrt();
                if mid > a.s && mid < b.s {
                    out.push(trace(family, mu, mid, k));
                    changed = true;
                }
            }
            out.push(b.clone());
        }
        samples = out;
        if !changed {
            return Ok(samples);
        }
        if samples.len() > MAX_PIECE_SAMPLES {
            return Err(Error::Convergence(format!(
                "manifold refinement exceeded {MAX_PIECE_SAMPLES} samples at iterate {k}"
            )));
        }
    }
}

struct Builder {
    points: Vec<PlanarPoint>,
    samples: Vec<ArcSample>,
    canons: Vec<Vec<u8>>,
    segment: u32,
    broken: bool,
    length: f64,
}

impl Builder {
    fn push(&mut self, t: &Trace, k: u32, max_gap: f64) {
        let Some(p) = t.pos else {
            self.broken = true;
            return;
        };
        if let (Some(prev), Some(prev_canon)) = (self.points.last(), self.canons.last()) {
            let d = prev.distance(&p);
            if self.broken || *prev_canon != t.canon || d > max_gap {
                self.segment += 1;
            } else {
                self.length += d;
            }
        }
        self.broken = false;
        self.points.push(p);
        self.canons.push(t.canon.clone());
        self.samples.push(ArcSample {
            s: t.s,
            iterate: k,
            transitions: t.transitions,
            segment: self.segment,
        });
    }
}

fn arc_params(points: &[PlanarPoint], samples: &[ArcSample]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        if i > 0 && samples[i].segment == samples[i - 1].segment {
            acc += points[i].distance(&points[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Grows the unstable manifold of the saddle at the origin from the
/// fundamental segment `[δ₀, σδ₀]` on the `y`-axis.
pub fn grow_unstable_manifold(
    family: &PlanarFamily,
    mu: f64,
    length: f64,
    max_gap: f64,
) -> Result<ManifoldArc> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Validation(format!("length must be positive (got {length})")));
    }
    if !(max_gap > 0.0) || !max_gap.is_finite() {
        return Err(Error::Validation(format!("max_gap must be positive (got {max_gap})")));
    }
    if !mu.is_finite() || mu.abs() > family.mu_bound {
        return Err(Error::Validation(format!(
            "mu = {mu} outside |mu| <= {}",
            family.mu_bound
        )));
    }
    let mut b = Builder {
        points: Vec::new(),
        samples: Vec::new(),
        canons: Vec::new(),
        segment: 0,
        broken: false,
        length: 0.0,
    };
    let mut stop = GrowthStop::IterateCap;
    'pieces: for k in 0..MAX_ITERATE {
        let piece = grow_piece(family, mu, k, max_gap)?;
        if piece.iter().all(|t| t.pos.is_none()) {
            stop = GrowthStop::Exhausted;
            break;
        }
        // the last sample is the first of the next iterate
        for t in &piece[..piece.len() - 1] {
            b.push(t, k, max_gap);
            if b.length >= length {
                stop = GrowthStop::LengthReached;
                break 'pieces;
            }
        }
    }
    refine_lowest_return(family, mu, max_gap, &mut b);
    let arc = arc_params(&b.points, &b.samples);
    Ok(ManifoldArc {
        total_length: arc.last().copied().unwrap_or(0.0),
        points: b.points,
        arc_params: arc,
        samples: b.samples,
        source_saddle: PlanarPoint::ORIGIN,
        mu,
        max_gap,
        stop,
    })
}

/// Golden-section refinement of the lowest point that has been through the
/// transition, so the tip of the fold is resolved beyond `max_gap`.
fn refine_lowest_return(family: &PlanarFamily, mu: f64, max_gap: f64, b: &mut Builder) {
    let Some(i) = (0..b.points.len())
        .filter(|&i| b.samples[i].transitions > 0)
        .min_by(|&i, &j| b.points[i].y.abs().total_cmp(&b.points[j].y.abs()))
    else {
        return;
    };
    let cur = b.samples[i];
    let k = cur.iterate;
    let same = |j: usize| {
        b.samples[j].iterate == k && b.samples[j].segment == cur.segment
    };
    let lo = if i > 0 && same(i - 1) { b.samples[i - 1].s } else { cur.s };
    let hi = if i + 1 < b.points.len() && same(i + 1) { b.samples[i + 1].s } else { cur.s };
    if hi <= lo {
        return;
    }
    let canon = &b.canons[i];
    let f = |s: f64| {
        let t = trace(family, mu, s, k);
        match t.pos {
            Some(p) if t.canon == *canon => p.y.abs(),
            _ => f64::INFINITY,
        }
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut c) = (lo, hi);
    let mut x1 = c - g * (c - a);
    let mut x2 = a + g * (c - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if c - a <= MIN_PARAM_GAP * 1e-3 {
            break;
        }
        if f1 <= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - g * (c - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (c - a);
            f2 = f(x2);
        }
    }
    let s_best = if f1 <= f2 { x1 } else { x2 };
    let t = trace(family, mu, s_best, k);
    let Some(p) = t.pos else { return };
    if t.canon != *canon || p.y.abs() >= b.points[i].y.abs() || s_best == cur.s {
        return;
    }
    let at = if s_best < cur.s { i } else { i + 1 };
    let neighbours_ok = (at == 0 || b.points[at - 1].distance(&p) <= max_gap)
        && (at >= b.points.len() || b.points[at].distance(&p) <= max_gap);
    if !neighbours_ok {
        return;
    }
    b.points.insert(at, p);
    b.canons.insert(at, t.canon);
    b.samples.insert(
        at,
        ArcSample {
            s: s_best,
            iterate: k,
            transitions: t.transitions,
            segment: cur.segment,
        },
    );
}
