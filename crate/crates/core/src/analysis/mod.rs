//! Limit sets, periodic orbits, boundary foliations and the verification
//! harnesses built on them.

pub mod faces;
pub mod limit;
pub mod periodic;
pub mod portrait;
pub mod sampling;
pub mod scan;
pub mod verify;
