//! Belief-state reduction and dynamic programming for finite Markov decision
//! processes with incomplete information.

pub mod error;
pub mod instances;
mod lp;
pub mod measures;
pub mod models;
pub mod reduction;

pub use error::{Error, Result};
pub mod solver;
pub mod diagnostics;
pub mod runtime;
