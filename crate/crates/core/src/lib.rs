//! The modile: a mode-based tail risk measure.
//!
//! Closed-form and numeric theoretical modiles, the empirical breakpoint
//! estimator, companion quantile and expectile measures, Monte Carlo
//! studies and a price-series pipeline.

pub mod cli;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod measures;
pub mod numerics;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod simulation;
pub mod theory_checks;

pub use distributions::{Distribution, Family};
pub use error::{Error, Result};
pub use estimators::{Bandwidths, ModileEstimate, Sample};
pub use measures::{ModileSpec, Variant};
