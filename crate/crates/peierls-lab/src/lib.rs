//! Numerical laboratory for covariant classical field theory on discretized 1+1D
//! globally hyperbolic spacetimes.

pub mod cli;
pub mod error;
pub mod fields;
pub mod functionals;
pub mod geometry;
pub mod hyperbolic;
pub mod lagrangian;
pub mod microcausal;
pub mod peierls;
pub mod tolerances;

pub use error::{LabError, Result};
