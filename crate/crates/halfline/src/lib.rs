//! Command-line front end, file formats and Monte Carlo cross-checks for
//! the spectral formulas in `halfline-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
pub mod cli;
pub mod io;
pub mod montecarlo;
pub mod parallel;

pub use error::{Error, Result};
pub use halfline_core;
