//! Combining and backtesting one-day-ahead Value-at-Risk (VaR) and Expected
//! Shortfall (ES) forecasts.
//!
//! The crate covers the full workflow for daily percent log returns at a
//! probability level alpha:
//! - a pool of individual forecasting methods (historical simulation,
//!   Gaussian windows, EWMA, GARCH/GJR-GARCH with Gaussian/t/skew-t
//!   innovations and native/EVT/FHS tails, CAViaR and CARE recursions, with
//!   return, range, or realized-variance drivers),
//! - nineteen combining methods: central-tendency combiners, six trimmed
//!   means, probability averaging over inferred CDFs, halfspace and
//!   simplicial deepest-point selection, performance-based weighting
//!   (relative score, weighted median, minimum score with spacing/ratio/ridge
//!   variants), smooth transition combining, and the mean of all combinations,
//! - five joint (VaR, ES) scoring functions for estimation and evaluation,
//! - a rolling-window backtest with calibration tests (unconditional and
//!   conditional coverage, dynamic quantile, ES bootstrap), skill scores,
//!   average ranks, and model-confidence-set selection.
//!
//! See the `examples/` directory for one runnable example per capability and
//! the `riskcomb` binary for batch runs driven by a TOML config.

pub mod backtest;
pub mod combine;
pub mod config;
pub mod data;
pub mod dist;
pub mod error;
pub mod methods;
pub mod optim;
pub mod score;

pub use data::{describe, load_pool, load_returns, save_pool, save_returns};
pub use data::{Alpha, ForecastPair, ForecastPool, ReturnSeries, ReturnsSchema, Spacing};
pub use error::{Error, Result};
pub use score::{average_score, joint_score, score_matrix, ScoreSpec, ScoreVariant};
