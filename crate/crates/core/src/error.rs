use thiserror::Error;

/// Broad classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input, configuration or violated precondition.
    Validation,
    /// The inputs are well-formed but the numerics cannot deliver
    /// (dynamic range, non-convergence, degenerate sampling).
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Validation(String),

    #[error("point ({x}, {y}) lies outside {region}")]
    Domain { region: &'static str, x: f64, y: f64 },

    #[error("precision guard: {0}")]
    Precision(String),

    #[error("eigenvalue of modulus {modulus} lies within {band} of the unit circle")]
    Hyperbolicity { modulus: f64, band: f64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("jet condition violated: {0}")]
    Jet(String),

    #[error("degenerate sampling: {0}")]
    Degenerate(String),

    #[error("no convergence: {0}")]
    Convergence(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Validation(_)
            | Error::Domain { .. }
            | Error::Shape(_)
            | Error::Config(_)
            | Error::Jet(_) => ErrorClass::Validation,
            Error::Precision(_)
            | Error::Hyperbolicity { .. }
            | Error::Regime(_)
            | Error::Degenerate(_)
            | Error::Convergence(_) => ErrorClass::Numerical,
        }
    }

    /// Stable snake_case reason code for machine consumption.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "invalid_parameters",
            Error::Domain { .. } => "outside_domain",
            Error::Precision(_) => "precision_unsafe",
            Error::Hyperbolicity { .. } => "not_hyperbolic",
            Error::Shape(_) => "shape",
            Error::Regime(_) => "regime",
            Error::Config(_) => "config",
            Error::Jet(_) => "jet_condition",
            Error::Degenerate(_) => "degenerate",
            Error::Convergence(_) => "no_convergence",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
