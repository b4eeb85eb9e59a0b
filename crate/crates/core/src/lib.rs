//! Exact formulas for Bessel processes, SLE, the Dyson model, determinantal
//! kernels, extreme values, characteristic polynomials and loop-erased walks,
//! each paired with an independent Monte Carlo or combinatorial oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod charpoly;
pub mod detkernels;
pub mod dyson;
pub mod error;
pub mod extremes;
pub mod lerw;
pub mod mc;
pub mod numerics;
pub mod path;
pub mod sle;
pub mod stats;

pub use error::{Error, Result};
pub use mc::Sharding;
pub use numerics::rng::RngStream;
pub use path::ProcessPath;
