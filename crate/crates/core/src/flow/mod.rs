//! Time integration of the 3-D field on `T` and of the 4-D mass-action
//! system, with drift monitoring and plane-crossing detection.

pub mod dopri;
pub mod section;

use serde::Serialize;

use crate::darboux::{log_integral_value, FirstIntegralSpec, IntegralName};
use crate::equilibria::{simplex_violation, vector_field, vector_field4, SimplexPoint, State3};
use crate::error::{Error, Result};
use crate::params::ParamVector;
pub use dopri::{DenseStep, Dopri5, StepStats, System, Tolerances};
pub use section::{
    find_crossings, Crossing, CrossingDetector, CrossingKind, Direction, SectionSpec,
};

/// Largest tolerated excursion outside `T` (or of `Σq - 1` in 4-D).
pub const MAX_VIOLATION: f64 = 1e-9;

pub type State4 = [f64; 4];

#[derive(Debug, Clone, Copy)]
pub struct Field3(pub ParamVector);

impl System<3> for Field3 {
    fn eval(&self, y: &State3) -> State3 {
        vector_field(&self.0, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Field4(pub ParamVector);

impl System<4> for Field4 {
    fn eval(&self, y: &State4) -> State4 {
        vector_field4(&self.0, y)
    }
}

/// Step-by-step integration of the 3-D field over `[0, t_end]` (or
/// `[t_end, 0]` for negative `t_end`). Backward time runs the forward
/// stepper on `-k`.
pub struct Flow3 {
    stepper: Dopri5<Field3, 3>,
    sign: f64,
    max_violation: f64,
}

impl Flow3 {
    pub fn new(k: &ParamVector, p0: &State3, t_end: f64, tol: Tolerances) -> Result<Self> {
        SimplexPoint::from_array(*p0)?;
        if t_end == 0.0 || !t_end.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "t_end must be nonzero and finite, got {t_end}"
            )));
        }
        let sign = t_end.signum();
        let field = Field3(if sign > 0.0 { *k } else { -*k });
        Ok(Self {
            stepper: Dopri5::new(field, *p0, t_end.abs(), tol)?,
            sign,
            max_violation: simplex_violation(p0),
        })
    }

    pub fn t(&self) -> f64 {
        self.sign * self.stepper.t()
    }

    pub fn state(&self) -> &State3 {
        self.stepper.state()
    }

    /// `‖X(p)‖` at the current state.
    pub fn speed(&self) -> f64 {
        let v = self.stepper.derivative();
        v.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn stats(&self) -> StepStats {
        self.stepper.stats()
    }

    pub fn max_violation(&self) -> f64 {
        self.max_violation
    }

    pub fn step(&mut self) -> Result<Option<DenseStep<3>>> {
        let Some(step) = self.stepper.step()? else {
            return Ok(None);
        };
        let violation = simplex_violation(self.stepper.state());
        self.max_violation = self.max_violation.max(violation);
        if violation > MAX_VIOLATION {
            return Err(Error::SimplexViolation {
                t: self.t(),
                violation,
            });
        }
        Ok(Some(if self.sign > 0.0 {
            step
        } else {
            step.time_reversed()
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub tol: Tolerances,
    /// First integrals whose log-drift is recorded at every sample.
    pub monitor: Vec<FirstIntegralSpec>,
    pub max_steps: u64,
    /// Keep dense-output coefficients for crossing location and resampling.
    pub keep_dense: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            monitor: Vec::new(),
            max_steps: 10_000_000,
            keep_dense: true,
        }
    }
}

impl IntegrateOptions {
    pub fn with_tol(tol: Tolerances) -> Self {
        Self {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftRecord {
    pub names: Vec<IntegralName>,
    /// `log F(p0)` per monitored integral.
    pub initial: Vec<f64>,
    /// `log F(p(t)) - log F(p0)` per sample, per integral.
    pub values: Vec<Vec<f64>>,
}

impl DriftRecord {
    pub fn max_abs(&self) -> Vec<f64> {
        (0..self.names.len())
            .map(|j| self.values.iter().fold(0.0_f64, |m, v| m.max(v[j].abs())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<(f64, State3)>,
    pub drift: Option<DriftRecord>,
    pub stats: StepStats,
    pub max_violation: f64,
    /// False if the step cap stopped the run before `t_end`.
    pub completed: bool,
    pub dense: Vec<DenseStep<3>>,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0)
    }

    pub fn last_state(&self) -> State3 {
        self.samples
            .last()
            .expect("trajectory has a first sample")
            .1
    }

    /// State at time `t` by dense interpolation (requires `keep_dense`).
    pub fn state_at(&self, t: f64) -> Option<State3> {
        let first = self.dense.first()?;
        let fwd = first.h > 0.0;
        let key = |s: &DenseStep<3>| if fwd { s.t1() } else { -s.t1() };
        let target = if fwd { t } else { -t };
        let i = self.dense.partition_point(|s| key(s) < target);
        let step = self.dense.get(i)?;
        let th = step.theta(t);
        (-1e-12..=1.0 + 1e-12)
            .contains(&th)
            .then(|| step.eval_theta(th))
    }

    /// Samples on a uniform grid of spacing `|dt|` from 0 to the final time.
    pub fn resample(&self, dt: f64) -> Vec<(f64, State3)> {
        let end = self.t_end();
        let dt = dt.abs() * end.signum();
        let n = (end / dt).floor() as usize;
        (0..=n)
            .filter_map(|i| {
                let t = if i == n && (end - i as f64 * dt).abs() < 1e-12 {
                    end
                } else {
                    i as f64 * dt
                };
                self.state_at(t).map(|p| (t, p))
            })
            .collect()
    }

    pub fn crossings(&self, section: &SectionSpec) -> Vec<Crossing> {
        find_crossings(&self.dense, section)
    }
}

fn log_values(monitor: &[FirstIntegralSpec], p: &State3) -> Result<Vec<f64>> {
    monitor.iter().map(|m| log_integral_value(m, p)).collect()
}

/// Integrates the 3-D field from `p0` to `t_end` (negative for backward time).
pub fn integrate(
    k: &ParamVector,
    p0: &SimplexPoint,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let p0 = p0.as_array();
    let mut flow = Flow3::new(k, &p0, t_end, opts.tol)?;
    let mut drift = if opts.monitor.is_empty() {
        None
    } else {
        let initial = log_values(&opts.monitor, &p0)?;
        Some(DriftRecord {
            names: opts.monitor.iter().map(|m| m.name).collect(),
            values: vec![vec![0.0; initial.len()]],
            initial,
        })
    };
    let mut samples = vec![(0.0, p0)];
    let mut dense = Vec::new();
    let mut completed = true;
    while let Some(step) = flow.step()? {
        let p = *flow.state();
        samples.push((flow.t(), p));
        if let Some(d) = drift.as_mut() {
            let now = log_values(&opts.monitor, &p)?;
            d.values
                .push(now.iter().zip(&d.initial).map(|(a, b)| a - b).collect());
        }
        if opts.keep_dense {
            dense.push(step);
        }
        if flow.stats().accepted >= opts.max_steps {
            completed = false;
            break;
        }
    }
    Ok(Trajectory {
        samples,
        drift,
        stats: flow.stats(),
        max_violation: flow.max_violation(),
        completed,
        dense,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory4 {
    pub samples: Vec<(f64, State4)>,
    pub stats: StepStats,
    /// Largest `|Σq - 1|` seen.
    pub max_mass_error: f64,
    pub dense: Vec<DenseStep<4>>,
}

impl Trajectory4 {
    pub fn state_at(&self, t: f64) -> Option<State4> {
        let fwd = self.dense.first()?.h > 0.0;
        let key = |s: &DenseStep<4>| if fwd { s.t1() } else { -s.t1() };
        let target = if fwd { t } else { -t };
        let i = self.dense.partition_point(|s| key(s) < target);
        let step = self.dense.get(i)?;
        let th = step.theta(t);
        (-1e-12..=1.0 + 1e-12)
            .contains(&th)
            .then(|| step.eval_theta(th))
    }
}

fn mass_error(q: &State4) -> f64 {
    (q[0] + q[1] + q[2] + q[3] - 1.0).abs()
}

/// Integrates the 4-D system. `q0` must be nonnegative with unit sum.
pub fn integrate4(
    k: &ParamVector,
    q0: &State4,
    t_end: f64,
    tol: Tolerances,
) -> Result<Trajectory4> {
    if q0.iter().any(|&v| v < -1e-12) || mass_error(q0) > MAX_VIOLATION {
        return Err(Error::InvalidArgument(format!(
            "initial state {q0:?} is not a probability vector"
        )));
    }
    if t_end == 0.0 || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_end must be nonzero and finite, got {t_end}"
        )));
    }
    let sign = t_end.signum();
    let field = Field4(if sign > 0.0 { *k } else { -*k });
    let mut stepper = Dopri5::new(field, *q0, t_end.abs(), tol)?;
    let mut samples = vec![(0.0, *q0)];
    let mut dense = Vec::new();
    let mut max_mass_error = mass_error(q0);
    while let Some(step) = stepper.step()? {
        let q = *stepper.state();
        let e = mass_error(&q);
        max_mass_error = max_mass_error.max(e);
        let t = sign * stepper.t();
        if e > MAX_VIOLATION {
            return Err(Error::SimplexViolation { t, violation: e });
        }
        samples.push((t, q));
        dense.push(if sign > 0.0 {
            step
        } else {
            step.time_reversed()
        });
    }
    Ok(Trajectory4 {
        samples,
        stats: stepper.stats(),
        max_mass_error,
        dense,
    })
}
