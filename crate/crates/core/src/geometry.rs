//! Unstable-manifold growing, basins of the unfolded sinks, and the capture
//! of the unstable manifold by those basins.

mod basin;
mod capture;
mod manifold;

pub use basin::{
    attraction_test, certify_trap, estimate_basin, manifold_meets_basin, AttractionReport,
    BasinConfig, BasinGrid, BasinHit, Bounds, CellTag, TrapCertificate,
};
pub use capture::{capture_verdict, capture_verdict_with, CaptureOptions, CaptureVerdict};
pub use manifold::{
    grow_unstable_manifold, ArcSample, GrowthStop, ManifoldArc, FUNDAMENTAL_OFFSET, MAX_ITERATE,
};
