//! Reproducible sampling of interior starting points.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::equilibria::{boundary_distance, interior_segment_r, State3};
use crate::error::Result;
use crate::params::ParamVector;

pub const DEFAULT_SEED: u64 = 42;
/// Margin kept from `∂T` and tube radius kept around `R`.
pub const SAMPLE_MARGIN: f64 = 1e-3;

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Uniform point of `T`: gaps of three sorted uniforms.
pub fn uniform_simplex<R: Rng>(rng: &mut R) -> State3 {
    let mut u: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    u.sort_by(f64::total_cmp);
    [u[0], u[1] - u[0], u[2] - u[1]]
}

/// `n` interior points, uniform on `T` conditioned on staying `margin` away
/// from `∂T` and from `R` (when `R` exists for `k`).
pub fn sample_interior(k: &ParamVector, n: usize, seed: u64, margin: f64) -> Result<Vec<State3>> {
    let r = interior_segment_r(k)?;
    let mut g = rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = uniform_simplex(&mut g);
        if boundary_distance(&p) <= margin {
            continue;
        }
        if r.as_ref().is_some_and(|r| r.distance_to(&p) <= margin) {
            continue;
        }
        out.push(p);
    }
    Ok(out)
}
