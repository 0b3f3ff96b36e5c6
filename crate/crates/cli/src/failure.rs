use std::fmt;

use tangency::{Error, ErrorClass};

/// A terminal error with its exit status and reason code.
#[derive(Debug)]
pub struct Failure {
    pub exit_code: i32,
    pub code: &'static str,
    pub class: &'static str,
    pub message: String,
}

impl Failure {
    /// Input rejected before any computation starts.
    pub fn invalid(code: &'static str, message: impl Into<String>) -> Failure {
        Failure {
            exit_code: 2,
            code,
            class: "validation",
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Failure {
        Failure::invalid("io", message)
    }

    /// A library error raised while checking preconditions: always exit 2.
    pub fn precondition(e: Error) -> Failure {
        Failure::invalid(e.code(), e.to_string())
    }

    /// A library error raised during the computation proper.
    pub fn runtime(e: Error) -> Failure {
        match e.class() {
            ErrorClass::Validation => Failure::precondition(e),
            ErrorClass::Numerical => Failure {
                exit_code: 3,
                code: e.code(),
                class: "numerical",
                message: e.to_string(),
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error code={} class={}: {}", self.code, self.class, self.message)
    }
}

pub trait PreExt<T> {
    fn pre(self) -> Result<T, Failure>;
    fn run(self) -> Result<T, Failure>;
}

impl<T> PreExt<T> for Result<T, Error> {
    fn pre(self) -> Result<T, Failure> {
        self.map_err(Failure::precondition)
    }

    fn run(self) -> Result<T, Failure> {
        self.map_err(Failure::runtime)
    }
}
