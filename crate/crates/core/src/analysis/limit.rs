//! ω- and α-limit classification.

use serde::Serialize;

use super::periodic::{detect_periodic, PeriodicConfig, ON_R_TOL};
use crate::darboux::{factors, log_integral_value, FirstIntegralSpec};
use crate::equilibria::{
    boundary_distance, edge_r_py, edge_r_xz, interior_segment_r, limit_segments, SimplexPoint,
    State3,
};
use crate::error::Result;
use crate::flow::{Flow3, Tolerances};
use crate::params::ParamVector;

/// Tracking of `log F` stops once a factor it depends on drops below this;
/// smaller components carry no controlled relative accuracy.
pub const TRACK_FLOOR: f64 = 1e-6;

fn resolved(spec: &FirstIntegralSpec, p: &State3) -> bool {
    factors(p)
        .iter()
        .zip(&spec.exponents)
        .all(|(f, l)| *l == 0.0 || f.abs() >= TRACK_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LimitKind {
    #[serde(rename = "periodic")]
    Periodic,
    #[serde(rename = "point-on-s_py")]
    PointOnSPy,
    #[serde(rename = "point-on-s_xz")]
    PointOnSXz,
    #[serde(rename = "point-on-R_py")]
    PointOnRPy,
    #[serde(rename = "point-on-R_xz")]
    PointOnRXz,
    #[serde(rename = "boundary-unclassified")]
    BoundaryUnclassified,
    /// The start itself is a singular point off the boundary (on `R`).
    #[serde(rename = "interior-equilibrium")]
    InteriorEquilibrium,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl LimitKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Periodic => "periodic",
            Self::PointOnSPy => "point-on-s_py",
            Self::PointOnSXz => "point-on-s_xz",
            Self::PointOnRPy => "point-on-R_py",
            Self::PointOnRXz => "point-on-R_xz",
            Self::BoundaryUnclassified => "boundary-unclassified",
            Self::InteriorEquilibrium => "interior-equilibrium",
            Self::Inconclusive => "inconclusive",
        }
    }

    pub fn is_conclusive(&self) -> bool {
        *self != Self::Inconclusive
    }

    /// Limit set contained in `∂T`.
    pub fn on_boundary(&self) -> bool {
        matches!(
            self,
            Self::PointOnSPy
                | Self::PointOnSXz
                | Self::PointOnRPy
                | Self::PointOnRXz
                | Self::BoundaryUnclassified
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitConfig {
    pub tol: Tolerances,
    pub horizon: f64,
    pub max_steps: u64,
    /// Terminal speed below which the run counts as converged.
    pub speed_tol: f64,
    /// Distance to a segment for a point-on-* classification.
    pub distance_tol: f64,
    pub periodic: PeriodicConfig,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            horizon: 1e4,
            max_steps: 10_000_000,
            speed_tol: 1e-8,
            distance_tol: 1e-4,
            periodic: PeriodicConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitSetReport {
    pub kind: LimitKind,
    /// Terminal state, or the first return for periodic orbits.
    pub witness: State3,
    /// Returns of a periodic orbit.
    pub orbit: Vec<State3>,
    pub closure_error: Option<f64>,
    pub period: Option<f64>,
    /// Distance from the witness to the segment named by `kind`.
    pub distance_to_segment: Option<f64>,
    pub terminal_speed: f64,
    /// Integration time spent (absolute value).
    pub horizon_used: f64,
    pub steps: u64,
    pub tracked: Option<TrackSummary>,
}

/// Monotonicity of `log F` over the accepted steps of a run, up to the
/// point where a factor falls below [`TRACK_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackSummary {
    pub samples: u64,
    pub first: f64,
    pub last: f64,
    /// Largest drop between consecutive samples (0 if nondecreasing).
    pub max_decrease: f64,
}

impl LimitSetReport {
    fn simple(kind: LimitKind, witness: State3, terminal_speed: f64) -> Self {
        Self {
            kind,
            witness,
            orbit: Vec::new(),
            closure_error: None,
            period: None,
            distance_to_segment: None,
            terminal_speed,
            horizon_used: 0.0,
            steps: 0,
            tracked: None,
        }
    }
}

/// Classifies a converged terminal state against `s_py`, `s_xz`, then the
/// edges `R_py`, `R_xz`.
pub fn classify_terminal(
    k: &ParamVector,
    p: &State3,
    distance_tol: f64,
) -> (LimitKind, Option<f64>) {
    if let Ok((s_py, s_xz)) = limit_segments(k) {
        let d = s_py.distance_to(p);
        if d <= distance_tol {
            return (LimitKind::PointOnSPy, Some(d));
        }
        let d = s_xz.distance_to(p);
        if d <= distance_tol {
            return (LimitKind::PointOnSXz, Some(d));
        }
    }
    let d = edge_r_py().distance_to(p);
    if d <= distance_tol {
        return (LimitKind::PointOnRPy, Some(d));
    }
    let d = edge_r_xz().distance_to(p);
    if d <= distance_tol {
        return (LimitKind::PointOnRXz, Some(d));
    }
    if boundary_distance(p) <= distance_tol {
        (LimitKind::BoundaryUnclassified, None)
    } else {
        (LimitKind::InteriorEquilibrium, None)
    }
}

/// ω-limit of the orbit through `p0`. With `track`, the monotonicity of
/// `log F` along the run is summarized.
pub fn omega_limit_tracked(
    k: &ParamVector,
    p0: &State3,
    cfg: &LimitConfig,
    track: Option<&FirstIntegralSpec>,
) -> Result<LimitSetReport> {
    SimplexPoint::from_array(*p0)?;
    let interior = boundary_distance(p0) > 0.0;
    if let Some(r) = interior_segment_r(k)? {
        if r.distance_to(p0) <= ON_R_TOL {
            let mut rep = LimitSetReport::simple(
                LimitKind::InteriorEquilibrium,
                *p0,
                crate::equilibria::speed(k, p0),
            );
            rep.distance_to_segment = Some(r.distance_to(p0));
            return Ok(rep);
        }
        if interior {
            let pcfg = PeriodicConfig {
                horizon_cap: cfg.horizon,
                max_steps: cfg.max_steps,
                ..cfg.periodic
            };
            return Ok(match detect_periodic(k, p0, &pcfg)? {
                Some(orbit) => {
                    let c = &orbit.crossings;
                    LimitSetReport {
                        kind: LimitKind::Periodic,
                        witness: c[0].state,
                        orbit: c.iter().map(|c| c.state).collect(),
                        closure_error: Some(orbit.closure_error),
                        period: Some(orbit.period),
                        distance_to_segment: None,
                        terminal_speed: crate::equilibria::speed(k, &c[2].state),
                        horizon_used: c[2].t,
                        steps: 0,
                        tracked: None,
                    }
                }
                None => {
                    let mut rep = LimitSetReport::simple(
                        LimitKind::Inconclusive,
                        *p0,
                        crate::equilibria::speed(k, p0),
                    );
                    rep.horizon_used = cfg.horizon;
                    rep
                }
            });
        }
    }

    let mut flow = Flow3::new(k, p0, cfg.horizon, cfg.tol)?;
    let mut tracked = match track {
        Some(spec) => log_integral_value(spec, p0).ok().map(|v| TrackSummary {
            samples: 1,
            first: v,
            last: v,
            max_decrease: 0.0,
        }),
        None => None,
    };
    let mut live = true;
    let mut converged = flow.speed() <= cfg.speed_tol;
    while !converged {
        if flow.step()?.is_none() {
            break;
        }
        if let (Some(t), Some(spec)) = (tracked.as_mut(), track) {
            live = live && resolved(spec, flow.state());
            if let Some(v) = live
                .then(|| log_integral_value(spec, flow.state()).ok())
                .flatten()
            {
                t.max_decrease = t.max_decrease.max(t.last - v);
                t.last = v;
                t.samples += 1;
            }
        }
        converged = flow.speed() <= cfg.speed_tol;
        if flow.stats().accepted >= cfg.max_steps {
            break;
        }
    }
    let p = *flow.state();
    let terminal_speed = flow.speed();
    let (kind, distance) = if converged {
        classify_terminal(k, &p, cfg.distance_tol)
    } else if boundary_distance(&p) <= cfg.distance_tol {
        // still moving, but along the boundary
        (LimitKind::BoundaryUnclassified, None)
    } else {
        (LimitKind::Inconclusive, None)
    };
    Ok(LimitSetReport {
        kind,
        witness: p,
        orbit: Vec::new(),
        closure_error: None,
        period: None,
        distance_to_segment: distance,
        terminal_speed,
        horizon_used: flow.t().abs(),
        steps: flow.stats().accepted,
        tracked,
    })
}

pub fn omega_limit(k: &ParamVector, p0: &State3, cfg: &LimitConfig) -> Result<LimitSetReport> {
    omega_limit_tracked(k, p0, cfg, None)
}

/// α-limit: the ω-limit of the reversed field.
pub fn alpha_limit(k: &ParamVector, p0: &State3, cfg: &LimitConfig) -> Result<LimitSetReport> {
    omega_limit_tracked(&-*k, p0, cfg, None)
}
