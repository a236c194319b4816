//! Count time series with exact Poisson marginal distributions.
//!
//! Generators for discrete and integer autoregressions, superposition
//! schemes and the Gaussian copula transform; the Hermite link calculus and
//! correlation bounds; GHK particle likelihood and linear-prediction
//! estimation; and PIT-based residual diagnostics.

pub mod copula_link;
pub mod diagnose;
pub mod error;
pub mod fit;
pub mod generate;
pub mod latent_ar;
pub mod special;

pub use error::{Error, Result};
