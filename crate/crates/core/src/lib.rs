//! Power-utility consumption and investment in exponential Lévy markets via
//! the opportunity process.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision for common use. Monte Carlo statistics,
//! configuration and experiments work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod config;
pub mod duality;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod market;
pub mod montecarlo;
pub mod objective;
pub mod opportunity;
pub mod quadrature;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Market = market::LevyMarket<f64>;
pub type Market32 = market::LevyMarket<f32>;
pub type Prefs = market::Preferences<f64>;
pub type Prefs32 = market::Preferences<f32>;
pub type Grid = market::TimeGrid<f64>;
pub type Grid32 = market::TimeGrid<f32>;
pub type Paths = market::PathBundle<f64>;
pub type Paths32 = market::PathBundle<f32>;
pub type Curve = opportunity::OpportunityCurve<f64>;
pub type Curve32 = opportunity::OpportunityCurve<f32>;
pub type Maximizer = objective::MaximizerResult<f64>;
pub type Maximizer32 = objective::MaximizerResult<f32>;
