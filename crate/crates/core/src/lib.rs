//! Truncated Wiener-Hopf operators with matrix-valued symbols and the
//! coefficients of their two-term trace asymptotics.

pub mod coefficients;
pub mod domains;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod operators;
pub mod quadrature;
pub mod spectra;
pub mod symbols;

pub use error::{Error, Result};
