//! Transformed-linear regularly-varying time series.
//!
//! Nonnegative heavy-tailed (tail index 2) analogues of ARMA models built
//! from the softplus transformed-linear operations. The crate covers model
//! construction and ψ/π-weights, discrete angular measures and tail pairwise
//! dependence functions (TPDFs), simulation, the semi-parametric marginal
//! transform to the unit Fréchet(α = 2) scale, empirical TPDF estimation,
//! least-squares model fitting and run-length / sum-quantile diagnostics.

pub mod angular;
pub mod arma;
pub mod diagnostics;
mod error;
pub mod estimate;
pub mod fit;
pub mod io;
pub mod marginal;
pub mod optim;
pub mod simulate;
pub mod stats;
pub mod tlops;

pub use error::{Error, Result};
