//! Cross-sectional distribution of long-only portfolio returns.
//!
//! For one period's asset returns `R`, the set of long-only portfolios is the
//! unit simplex. Drawing a portfolio uniformly from the simplex turns the
//! portfolio return into a random variable whose distribution this crate
//! computes exactly and approximately:
//!
//! - [`cdf`]: the score of a portfolio (the fraction of portfolios it
//!   outperforms) by Varsi's recurrence and by a closed form,
//! - [`pdf`]: the density by B-spline recursion, closed form, and a
//!   five-point derivative of the CDF,
//! - [`moments`]: closed forms for orders 1 to 4 and arbitrary order through
//!   integer partitions,
//! - [`scoredist`]: Monte Carlo distributions of a portfolio's score and
//!   score-based performance measures,
//! - [`allocate`]: score-based optimization, a mean-variance baseline and a
//!   rolling-window backtest.

pub mod allocate;
pub mod cdf;
mod error;
pub mod exec;
pub mod io;
pub mod market;
pub mod moments;
pub mod pdf;
pub mod scoredist;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
pub use market::{DistinctReturnGroups, MarketReturns, PortfolioWeights, SimplexGeometry};

/// Crate version, echoed in CLI output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
