//! Simulation and bound-evaluation library for Gaussian channels with
//! noiseless output feedback under *expected* (average) power
//! constraints, where a fixed error budget can be spent to boost power
//! and rate: single-user iterative coding with power control, its
//! achievability/converse bound curves, and the two-user
//! multiple-access analogue (correlated iterative scheme, rate region,
//! and converse machinery).

pub mod channel;
pub mod error;
pub mod mac_bounds;
pub mod mac_codes;
pub mod numerics;
pub mod su_bounds;
pub mod su_codes;

pub use error::{Error, Result};
