//! Estimation of anisotropic covariance functions of random fields on
//! compact two-point homogeneous spaces (spheres and projective spaces),
//! from noisy, sparsely sampled replicates.
//!
//! The estimator solves a penalized least-squares problem over a tensor
//! Sobolev space: products of noisy measurements from the same replicate
//! regress onto a covariance surface, with a roughness penalty whose
//! reproducing kernel is zonal. The crate provides
//!
//! * the supported spaces, their distances, and uniform sampling
//!   ([`spaces`]),
//! * the Laplace-Beltrami eigenstructure and Jacobi machinery
//!   ([`spectral`]),
//! * truncated zonal kernels with certified tails ([`kernel`]),
//! * the pairwise regression design and penalized solver ([`estimator`]),
//! * closed-form ground-truth models and replicate simulation
//!   ([`simulate`]),
//! * the convergence-rate experiment harness ([`experiments`]),
//! * JSON/CSV schemas shared with the command-line front-end ([`config`]).

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod config;
pub mod kernel;
pub mod quad;
pub mod simulate;
pub mod spaces;
pub mod spectral;

pub use error::{Error, Result};
pub use estimator::{CovEstimate, Dataset, Fitter, PairDesign, Subject};
pub use kernel::{truncation_level, ZonalKernel};
pub use simulate::{CovModel, NoiseSpec};
pub use spaces::{Point, SpaceKind, SpaceParams};
pub use spectral::{SpectralRow, SpectralTable};
