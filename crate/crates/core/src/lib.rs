//! Numerical core of soliton resolution for the radial energy-critical wave
//! equation with an inverse-square potential.
//!
//! Start from [`params::derive_params`]; everything else takes the resulting
//! [`params::Params`].

pub mod acceptance;
pub mod cli;
pub mod error;
pub mod groundstate;
pub mod nonlinear;
pub mod hankel;
pub mod linprop;
pub mod modulation;
pub mod params;
pub mod projection;
pub mod quad;
pub mod radialgrid;

pub use error::{Error, Result};
