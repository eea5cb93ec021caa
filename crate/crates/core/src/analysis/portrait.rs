//! Bundles of sampled trajectories for phase portraits.

use rayon::prelude::*;
use serde::Serialize;

use super::sampling::{sample_interior, DEFAULT_SEED, SAMPLE_MARGIN};
use crate::equilibria::{SimplexPoint, State3};
use crate::error::{Error, Result};
use crate::flow::{integrate, IntegrateOptions};
use crate::params::ParamVector;

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitConfig {
    pub n: usize,
    pub seed: u64,
    /// Signed; negative runs backward.
    pub t_end: f64,
    pub dt: f64,
    pub opts: IntegrateOptions,
}

impl Default for PortraitConfig {
    fn default() -> Self {
        Self {
            n: 10,
            seed: DEFAULT_SEED,
            t_end: 50.0,
            dt: 0.05,
            opts: IntegrateOptions {
                keep_dense: true,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortraitTrajectory {
    pub id: usize,
    pub start: State3,
    pub samples: Vec<(f64, State3)>,
}

/// `n` sampled interior starts, each integrated to `t_end` and resampled on
/// a uniform grid of spacing `dt`.
pub fn portrait(k: &ParamVector, cfg: &PortraitConfig) -> Result<Vec<PortraitTrajectory>> {
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {}",
            cfg.dt
        )));
    }
    let starts = sample_interior(k, cfg.n, cfg.seed, SAMPLE_MARGIN)?;
    let opts = IntegrateOptions {
        keep_dense: true,
        ..cfg.opts.clone()
    };
    starts
        .par_iter()
        .enumerate()
        .map(|(id, p)| {
            let traj = integrate(k, &SimplexPoint::from_array(*p)?, cfg.t_end, &opts)?;
            Ok(PortraitTrajectory {
                id,
                start: *p,
                samples: traj.resample(cfg.dt),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_shape() {
        let k = ParamVector::new(2.0, 1.0, 2.0, 1.0);
        let cfg = PortraitConfig {
            n: 3,
            t_end: 2.0,
            dt: 0.5,
            ..Default::default()
        };
        let b = portrait(&k, &cfg).unwrap();
        assert_eq!(b.len(), 3);
        for (i, tr) in b.iter().enumerate() {
            assert_eq!(tr.id, i);
            let ts: Vec<f64> = tr.samples.iter().map(|s| s.0).collect();
            assert_eq!(ts, [0.0, 0.5, 1.0, 1.5, 2.0]);
            assert_eq!(tr.samples[0].1, tr.start);
        }
    }

    #[test]
    fn backward_bundle() {
        let k = ParamVector::new(1.0, 1.0, 1.0, 1.0);
        let cfg = PortraitConfig {
            n: 2,
            t_end: -1.0,
            dt: 0.25,
            ..Default::default()
        };
        let b = portrait(&k, &cfg).unwrap();
        assert_eq!(b[0].samples.last().unwrap().0, -1.0);
        assert_eq!(b[0].samples.len(), 5);
    }

    #[test]
    fn rejects_bad_dt() {
        let k = ParamVector::new(1.0, 1.0, 1.0, 1.0);
        let cfg = PortraitConfig {
            dt: 0.0,
            ..Default::default()
        };
        assert!(portrait(&k, &cfg).is_err());
    }
}
