//! Kernel methods and Gaussian processes as two views of one computation.
//!
//! Everything here revolves around a handful of exact identities between the
//! Bayesian (Gaussian process) and the worst-case (kernel / native space)
//! treatment of the same data:
//!
//! * the posterior mean of a noiseless GP equals the minimum-norm kernel
//!   interpolant, and the noisy posterior mean equals kernel ridge regression
//!   with regularization `sigma^2 / n`;
//! * the posterior standard deviation equals the power function, the
//!   worst-case interpolation error over the unit ball of the native space;
//! * the root mean square of a linear functional applied to a centered GP
//!   equals the native-space norm of the functional's representer;
//! * average-case discrepancies between distributions under GP integrands
//!   equal kernel maximum mean discrepancies, and the expected squared
//!   covariance of GP transforms equals the HSIC independence criterion;
//! * the posterior variance of Bayesian quadrature equals the squared
//!   discrepancy between the target measure and the optimally weighted
//!   empirical measure.
//!
//! The `acceptance` module packages these identities (plus empirical rate
//! checks) as a reproducible pass/fail suite; the CLI crate exposes the same
//! computations as batch subcommands.

pub mod acceptance;
pub mod embeddings;
pub mod error;
pub mod functionals;
pub mod gp;
pub mod kernels;
pub mod linalg;
pub mod measure;
pub mod quadrature;
pub mod rkhs;
pub mod sampling;
pub mod spectral;
pub mod util;

pub use error::{Error, Result};
pub use kernels::{Kernel, Point};
pub use measure::Measure;

/// Library version string embedded in CLI output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
