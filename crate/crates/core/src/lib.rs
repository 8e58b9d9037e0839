//! Finite-dimensional laboratory for γ-radonifying norms, sectorial
//! operators and maximal regularity of deterministic and stochastic
//! evolution equations.

pub mod config;
pub mod error;
pub mod gamma;
pub mod heat;
pub mod linalg;
pub mod maxreg;
pub mod rng;
pub mod sectorial;
pub mod see;
pub mod space;
pub mod stochastic;
pub mod suites;
pub mod textio;

pub use error::{Error, Result};
