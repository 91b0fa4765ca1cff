//! Monotone iteration for semilinear evolution equations `u' + A u = F(u)`
//! driven by positive semigroups on ordered spaces of grid functions.

pub mod cli;
pub mod error;
pub mod mild;
pub mod monotone;
pub mod nonlin;
pub mod operators;
pub mod order;
pub mod par;
pub mod scenarios;

pub use error::{Error, Result};
