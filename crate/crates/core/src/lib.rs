//! Classically optimized variational eigensolvers built on causal cones and
//! Heisenberg-picture Pauli propagation.

pub mod circuit;
pub mod cli;
pub mod ed;
pub mod error;
pub mod evaluator;
pub mod lightcone;
pub mod models;
pub mod optimizer;
pub mod pauli;
pub mod phase;
pub mod state;
pub mod tableau;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
