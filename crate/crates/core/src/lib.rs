//! Threshold autoregressive state-space (TASS) models.
//!
//! An observed AR(1) series switches between `m` regimes according to a
//! latent random walk on the unit circle driven by Gamma increments. A
//! change-point happens whenever the walk crosses a regime threshold, so
//! the timing of future change-points is a first-passage problem for the
//! walk. The crate covers simulation, composite-likelihood estimation,
//! regime-count selection, particle-based latent decoding, prediction of
//! future change-points and residual diagnostics.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod inference;
pub mod likelihood;
pub mod model;
pub mod numerics;
pub mod prediction;

pub use error::{Result, TassError};
