//! Eigenfunctions of subordinate Brownian motion killed upon leaving the
//! half-line, and the spectral formulas built from them.
//!
//! The crate is `no_std` with `alloc`. Every model is described by a complete
//! Bernstein function `psi`; the process is `B(Z_t)` where `Z` is the
//! subordinator with Laplace exponent `psi` and `B` has variance `2t`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cbf;
pub mod eigenfunction;
mod error;
pub mod numerics;
pub mod spectral;
pub mod wiener_hopf;



pub use error::Error;
pub use numerics::{QuadratureResult, Tolerance};

pub use cbf::{build_model, LaplaceExponent, Model, ModelSpec, RationalTerm};
pub use num_complex::Complex64;
pub use wiener_hopf::WhContext;
pub use eigenfunction::Eigenfunction;
