//! Finite-volume laboratory for a two-species tissue growth model with
//! pressure law `p = (n1 + n2)^gamma`, aimed at the incompressible limit
//! `gamma -> infinity`.
//!
//! The numerical core is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the working precision for typical use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod initial_data;
pub mod model;
pub mod oracles;
pub mod output;
pub mod run;
pub mod scalar;
pub mod solver;
pub mod sweep;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Grid64 = grid::Grid<f64>;
pub type Grid32 = grid::Grid<f32>;
pub type Model64 = model::GrowthModel<f64>;
pub type Model32 = model::GrowthModel<f32>;
pub type State64 = fields::SimState<f64>;
pub type State32 = fields::SimState<f32>;
pub type Fields64 = fields::DerivedFields<f64>;
pub type SchemeConfig64 = solver::SchemeConfig<f64>;
pub type Record64 = diagnostics::DiagnosticsRecord<f64>;
