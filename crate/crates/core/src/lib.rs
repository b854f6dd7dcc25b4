//! Ability estimation from per-item acquisition grades.
//!
//! Modules, bottom-up:
//! - [`normal`], [`irt`]: normal numerics and 1PL item models
//! - [`estimator`]: order-statistic test estimate and EMA history blending
//! - [`baselines`]: Newton-Raphson MLE and sequential Bayes modal estimation
//! - [`metrics`]: RMSE and convergence detection
//! - [`simulator`]: seeded Monte-Carlo replications and experiment grids
//! - [`experiments`]: the standard experiment grids and their CSV tables
//! - [`cli`]: the `acquest` command-line front end

pub mod baselines;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod irt;
pub mod metrics;
pub mod normal;
pub mod simulator;

pub use error::{Error, Result};
