//! Guide chapters compiled as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/renormalization.md")]
pub mod renormalization {}

#[doc = include_str!("../../../book/src/capture.md")]
pub mod capture {}

#[doc = include_str!("../../../book/src/spectra.md")]
pub mod spectra {}

#[doc = include_str!("../../../book/src/attractors.md")]
pub mod attractors {}

#[doc = include_str!("../../../book/src/certificate.md")]
pub mod certificate {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
