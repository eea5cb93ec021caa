//! Dynamics of a three-dimensional Lotka-Volterra type system on the simplex
//! `T = {x, y, z ≥ 0, x + y + z ≤ 1}`.

pub mod analysis;
pub mod darboux;
pub mod equilibria;
pub mod error;
pub mod flow;
pub mod params;

pub use error::{Error, Result};
pub use params::{classify, ParamVector, Regime};
