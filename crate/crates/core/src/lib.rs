//! Integral delay equations, first-order hyperbolic PDEs with nonlocal boundary
//! conditions, and the conversion between the two.

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod error;
pub mod feedback;
pub mod functionals;
pub mod hyperbolic;
pub mod ide_core;
pub mod rng;
pub mod sampled;
pub mod stability;

pub use error::{Error, Result};
