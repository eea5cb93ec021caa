//! Periodic-orbit detection by returns to the section through `R`, and the
//! period profile along a ray.

use serde::Serialize;

use crate::darboux::{certified_integrals, log_integral_value, IntegralName};
use crate::equilibria::{boundary_distance, dist, interior_segment_r, interior_spectrum, State3};
use crate::error::{Error, Result};
use crate::flow::{
    Crossing, CrossingDetector, CrossingKind, Direction, Flow3, SectionSpec, Tolerances,
};
use crate::params::ParamVector;

/// Starts closer than this to `R` are treated as equilibria.
pub const ON_R_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicConfig {
    pub tol: Tolerances,
    /// Required agreement of consecutive same-direction returns.
    pub closure_tol: f64,
    /// Horizon as a multiple of the first return time.
    pub horizon_factor: f64,
    pub horizon_cap: f64,
    pub max_steps: u64,
}

impl Default for PeriodicConfig {
    fn default() -> Self {
        Self {
            tol: Tolerances {
                rel: 1e-12,
                abs: 1e-15,
            },
            closure_tol: 1e-6,
            horizon_factor: 10.0,
            horizon_cap: 1e4,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralDrift {
    pub name: IntegralName,
    /// Largest `|log F(p(t)) - log F(p0)|` over the accepted steps up to the
    /// last return used.
    pub max_log_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub period: f64,
    /// Largest distance between consecutive returns used.
    pub closure_error: f64,
    /// The three returns `c0, c1, c2`.
    pub crossings: Vec<Crossing>,
    pub drift: Vec<IntegralDrift>,
}

pub fn check_not_on_r(k: &ParamVector, p0: &State3) -> Result<()> {
    if let Some(r) = interior_segment_r(k)? {
        let d = r.distance_to(p0);
        if d <= ON_R_TOL {
            return Err(Error::OnEquilibrium { distance: d });
        }
    }
    Ok(())
}

/// Looks for a periodic orbit through `p0`. `Ok(None)` means the horizon
/// (ten first-return times, capped) ran out without two matching returns.
pub fn detect_periodic(
    k: &ParamVector,
    p0: &State3,
    cfg: &PeriodicConfig,
) -> Result<Option<PeriodicOrbit>> {
    if boundary_distance(p0) <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "start {p0:?} is not interior"
        )));
    }
    check_not_on_r(k, p0)?;
    let monitors = certified_integrals(k);
    let base: Vec<f64> = monitors
        .iter()
        .map(|m| log_integral_value(m, p0))
        .collect::<Result<_>>()?;
    let mut max_drift = vec![0.0_f64; monitors.len()];

    let mut flow = Flow3::new(k, p0, cfg.horizon_cap, cfg.tol)?;
    let mut detector = CrossingDetector::new(SectionSpec::default_for(k, Direction::Both)?);
    let mut direction = 0i8;
    let mut returns: Vec<Crossing> = Vec::new();
    let mut horizon = cfg.horizon_cap;

    while let Some(step) = flow.step()? {
        let p = flow.state();
        for (j, m) in monitors.iter().enumerate() {
            let d = (log_integral_value(m, p)? - base[j]).abs();
            max_drift[j] = max_drift[j].max(d);
        }
        for c in detector.process(&step) {
            if c.kind != CrossingKind::Transversal {
                continue;
            }
            if direction == 0 {
                direction = c.direction;
            }
            if c.direction != direction {
                continue;
            }
            returns.push(c);
            let n = returns.len();
            if n == 2 {
                let first_return = returns[1].t - returns[0].t;
                horizon = (returns[0].t + cfg.horizon_factor * first_return).min(cfg.horizon_cap);
            }
            if n >= 3 {
                let (c0, c1, c2) = (&returns[n - 3], &returns[n - 2], &returns[n - 1]);
                let e1 = dist(&c0.state, &c1.state);
                let e2 = dist(&c1.state, &c2.state);
                if e1 <= cfg.closure_tol && e2 <= cfg.closure_tol {
                    return Ok(Some(PeriodicOrbit {
                        period: c1.t - c0.t,
                        closure_error: e1.max(e2),
                        crossings: vec![*c0, *c1, *c2],
                        drift: monitors
                            .iter()
                            .zip(&max_drift)
                            .map(|(m, &d)| IntegralDrift {
                                name: m.name,
                                max_log_drift: d,
                            })
                            .collect(),
                    }));
                }
            }
        }
        if flow.t() >= horizon || flow.stats().accepted >= cfg.max_steps {
            break;
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSample {
    pub point: State3,
    pub distance_to_boundary: f64,
    pub period: Option<f64>,
    pub closure_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodProfile {
    pub samples: Vec<ProfileSample>,
    /// Periods strictly increase as the samples approach `∂T`.
    pub strictly_increasing: bool,
    /// `2π/√b` at the base point on `R`, if given.
    pub linear_period: Option<f64>,
}

/// Points `base + s·d` for each offset `s`.
pub fn ray_points(base: &State3, direction: &State3, offsets: &[f64]) -> Vec<State3> {
    offsets
        .iter()
        .map(|s| [0, 1, 2].map(|i| base[i] + s * direction[i]))
        .collect()
}

/// Periods along a family of starting points, ordered from `R` outward.
/// `base_on_r` is the z coordinate of the point of `R` the family starts
/// from, used for the linearized period.
pub fn period_profile(
    k: &ParamVector,
    family: &[State3],
    base_on_r: Option<f64>,
    cfg: &PeriodicConfig,
) -> Result<PeriodProfile> {
    if !k.is_ps_and_s() {
        return Err(Error::NotInPSS);
    }
    let linear_period = match base_on_r {
        Some(z) => {
            let b = interior_spectrum(k, z)?.b.expect("interior spectrum has b");
            Some(2.0 * std::f64::consts::PI / b.sqrt())
        }
        None => None,
    };
    use rayon::prelude::*;
    let samples = family
        .par_iter()
        .map(|p| {
            let orbit = detect_periodic(k, p, cfg)?;
            Ok(ProfileSample {
                point: *p,
                distance_to_boundary: boundary_distance(p),
                period: orbit.as_ref().map(|o| o.period),
                closure_error: orbit.as_ref().map(|o| o.closure_error),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let strictly_increasing = samples.len() >= 2
        && samples
            .windows(2)
            .all(|w| match (w[0].period, w[1].period) {
                (Some(a), Some(b)) => b > a,
                _ => false,
            });
    Ok(PeriodProfile {
        samples,
        strictly_increasing,
        linear_period,
    })
}
