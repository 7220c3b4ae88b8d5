//! Simulation, likelihood inference and limit laws for the linear stochastic
//! delay equation with uniformly distributed delay
//!
//! ```text
//! dX(t) = a ∫_{-1}^0 X(t+u) du dt + dW(t),   X(u) = X0(u) on [-1, 0].
//! ```

pub mod chareq;
pub mod cli;
pub mod error;
pub mod fundsol;
pub mod grid;
pub mod harness;
pub mod inference;
pub mod limits;
pub mod rng;
pub mod simul;

pub use error::{Error, Result};
