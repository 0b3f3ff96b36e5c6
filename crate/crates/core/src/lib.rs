//! Numerical laboratory for the unfolding of a homoclinic tangency.
//!
//! The crate implements a piecewise planar family with a quadratic
//! homoclinic tangency, its renormalization to the quadratic family
//! `Y ↦ Y² + ν`, the capture of the saddle's unstable manifold by the
//! unfolded sinks, eigenvalue-based dissipativity predicates, and generic
//! Milnor-attractor and Lyapunov-stability probes.
//!
//! ```
//! use tangency::model::{ModelParams, PlanarFamily};
//!
//! let family = PlanarFamily::new(ModelParams::new(0.2, 2.0)?);
//! let (sink, mu) = family.closed_form_sink(4)?;
//! let image = family.composite_map(mu, 4, sink)?;
//! assert!(image.image.distance(&sink) < 1e-12);
//! # Ok::<(), tangency::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
mod compensated;
pub mod error;
pub mod geometry;
pub mod model;
pub mod newton;
pub mod poly;
pub mod renorm;
pub mod spectra;

pub use error::{Error, ErrorClass, Result};
pub use model::{ModelParams, OrbitSegment, PlanarFamily, PlanarPoint, Regime, RegionSpec, RegionTag};
pub use spectra::SpectrumReport;
