//! Simulation and numerical validation toolkit for the random connection
//! model over stationary Poisson processes.

pub mod analysis;
pub mod census;
pub mod error;
pub mod experiments;
pub mod model;
pub mod moments;
pub(crate) mod quad;

pub use error::{RcmError, Result};
pub use model::*;
