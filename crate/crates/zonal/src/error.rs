use thiserror::Error;

/// Errors produced by the library.
///
/// Variants fall into three groups that the CLI maps onto exit codes:
/// invalid inputs or configuration, numerical failures, and resource caps.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported space: {kind} with d = {d}; legal dimensions are {legal}")]
    IllegalSpace {
        kind: &'static str,
        d: usize,
        legal: &'static str,
    },

    #[error("point sampling is not supported on {0}")]
    UnsupportedSampling(&'static str),

    #[error("points belong to different spaces ({0} vs {1})")]
    SpaceMismatch(&'static str, &'static str),

    #[error("degree {ell} is not in the eigenvalue index set (stride {stride}, max {max})")]
    InvalidDegree { ell: usize, stride: usize, max: usize },

    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("H_p with p = {p} is not a reproducing kernel Hilbert space on a {d}-dimensional space (requires p > d/2)")]
    NotReproducing { p: f64, d: usize },

    #[error("H_q smoothness order q = {q} must exceed d/2 = {half_d}")]
    Smoothness { q: f64, half_d: f64 },

    #[error("subject {subject} has {count} locations; at least 2 are required to form off-diagonal pairs")]
    Design { subject: usize, count: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("resource cap exceeded: {0}")]
    Resource(String),
}

/// Coarse classification used for process exit codes and error annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid inputs, configuration, or requests outside supported scope.
    Config,
    /// Numerical failures (ill-conditioning, domain violations).
    Numerical,
    /// Configured resource caps.
    Resource,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::IllegalSpace { .. }
            | Error::UnsupportedSampling(_)
            | Error::SpaceMismatch(_, _)
            | Error::InvalidDegree { .. }
            | Error::NotReproducing { .. }
            | Error::Smoothness { .. }
            | Error::Design { .. }
            | Error::Config(_) => ErrorClass::Config,
            Error::Domain { .. } | Error::Numerical(_) => ErrorClass::Numerical,
            Error::Resource(_) => ErrorClass::Resource,
        }
    }

    /// Prepends context (e.g. the design point an error arose at) while
    /// keeping the error class intact.
    pub fn annotate(self, context: impl std::fmt::Display) -> Error {
        let message = format!("{context}: {self}");
        match self.class() {
            ErrorClass::Config => Error::Config(message),
            ErrorClass::Numerical => Error::Numerical(message),
            ErrorClass::Resource => Error::Resource(message),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
