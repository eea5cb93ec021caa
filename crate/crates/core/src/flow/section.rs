//! Plane sections `n·p = offset` and crossing location on dense output.

use serde::Serialize;

use super::dopri::DenseStep;
use crate::equilibria::State3;
use crate::error::{Error, Result};
use crate::params::ParamVector;

/// Tolerance on `|n·p - offset|` for refined crossings.
pub const CROSSING_TOL: f64 = 1e-12;
/// Samples with `|g|` below this are treated as lying on the plane.
pub const DEADBAND: f64 = 1e-14;
/// A crossing is grazing when `|ġ| ≤ GRAZING_RATIO · ‖ṗ‖`.
pub const GRAZING_RATIO: f64 = 1e-6;
/// Extremum of `g` within this distance of the plane counts as a touch.
pub const TOUCH_TOL: f64 = 1e-10;

const THETAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
    Both,
}

impl Direction {
    pub fn accepts(&self, sign: i8) -> bool {
        match self {
            Self::Positive => sign > 0,
            Self::Negative => sign < 0,
            Self::Both => sign != 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionSpec {
    pub normal: State3,
    pub offset: f64,
    pub direction: Direction,
}

impl SectionSpec {
    /// Normalizes `normal` (and `offset` with it).
    pub fn new(normal: State3, offset: f64, direction: Direction) -> Result<Self> {
        let n = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidArgument(
                "section normal must be nonzero".into(),
            ));
        }
        Ok(Self {
            normal: normal.map(|v| v / n),
            offset: offset / n,
            direction,
        })
    }

    /// The plane `k4·x - k3·z = 0`, which contains the segment `R`.
    pub fn default_for(k: &ParamVector, direction: Direction) -> Result<Self> {
        Self::new([k.k4, 0.0, -k.k3], 0.0, direction)
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn g(&self, p: &State3) -> f64 {
        self.normal[0] * p[0] + self.normal[1] * p[1] + self.normal[2] * p[2] - self.offset
    }

    fn g_dot(&self, v: &State3) -> f64 {
        self.normal[0] * v[0] + self.normal[1] * v[1] + self.normal[2] * v[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingKind {
    Transversal,
    Grazing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub t: f64,
    pub state: State3,
    pub kind: CrossingKind,
    /// `+1` if `g` increases through the plane, `-1` if it decreases, `0` for
    /// a touch without sign change.
    pub direction: i8,
    /// `dg/dt` at the crossing.
    pub g_dot: f64,
}

fn sign(g: f64) -> i8 {
    if g > DEADBAND {
        1
    } else if g < -DEADBAND {
        -1
    } else {
        0
    }
}

fn norm(v: &State3) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Streaming detector fed one dense step at a time.
#[derive(Debug, Clone)]
pub struct CrossingDetector {
    pub section: SectionSpec,
    /// Sign of the last sample that was off the plane.
    last_sign: i8,
}

impl CrossingDetector {
    pub fn new(section: SectionSpec) -> Self {
        Self {
            section,
            last_sign: 0,
        }
    }

    /// Crossings inside `step`, in time order, filtered by direction.
    /// Grazing touches are always reported.
    pub fn process(&mut self, step: &DenseStep<3>) -> Vec<Crossing> {
        let sec = self.section;
        let g = |th: f64| sec.g(&step.eval_theta(th));
        let gs = THETAS.map(g);
        let mut found = Vec::new();

        // a sign carried from the previous step brackets from theta = 0
        let mut prev: Option<(f64, i8)> = (self.last_sign != 0).then_some((0.0, self.last_sign));
        for (i, &th) in THETAS.iter().enumerate() {
            let s = sign(gs[i]);
            if s == 0 {
                continue;
            }
            if let Some((th0, s0)) = prev {
                if s0 != s {
                    let theta = self.bisect(step, th0, th, s0);
                    // direction in time, not in theta
                    let dir = if step.h > 0.0 { s } else { -s };
                    found.push(self.crossing_at(step, theta, dir));
                }
            }
            prev = Some((th, s));
        }
        if let Some((_, s)) = prev {
            self.last_sign = s;
        }

        for theta in self.touches(step) {
            if let Some(c) = found
                .iter_mut()
                .find(|c| (step.theta(c.t) - theta).abs() <= 0.25)
            {
                c.kind = CrossingKind::Grazing;
            } else {
                let mut c = self.crossing_at(step, theta, 0);
                c.kind = CrossingKind::Grazing;
                found.push(c);
            }
        }
        found.sort_by(|a, b| step.theta(a.t).total_cmp(&step.theta(b.t)));
        found.retain(|c| c.kind == CrossingKind::Grazing || sec.direction.accepts(c.direction));
        found
    }

    /// Bisection on `theta` between samples of opposite sign.
    fn bisect(&self, step: &DenseStep<3>, mut a: f64, mut b: f64, sign_a: i8) -> f64 {
        let g = |th: f64| self.section.g(&step.eval_theta(th));
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let gm = g(m);
            if gm.abs() <= CROSSING_TOL || m == a || m == b {
                return m;
            }
            if (gm > 0.0) == (sign_a > 0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    fn crossing_at(&self, step: &DenseStep<3>, theta: f64, direction: i8) -> Crossing {
        let state = step.eval_theta(theta);
        let v = step.derivative_theta(theta);
        let g_dot = self.section.g_dot(&v);
        let kind = if g_dot.abs() <= GRAZING_RATIO * norm(&v) {
            CrossingKind::Grazing
        } else {
            CrossingKind::Transversal
        };
        Crossing {
            t: step.t0 + theta * step.h,
            state,
            kind,
            direction,
            g_dot,
        }
    }

    /// Interior critical points of `g` lying within `TOUCH_TOL` of the plane.
    fn touches(&self, step: &DenseStep<3>) -> Vec<f64> {
        let sec = self.section;
        let gd = |th: f64| sec.g_dot(&step.derivative_theta(th)) * step.h.signum();
        let ds = THETAS.map(gd);
        let mut out = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for (i, &th) in THETAS.iter().enumerate() {
            if sign(ds[i]) == 0 {
                continue;
            }
            if let Some((th0, d0)) = prev {
                if (d0 > 0.0) != (ds[i] > 0.0) {
                    let (mut a, mut b) = (th0, th);
                    for _ in 0..100 {
                        let m = 0.5 * (a + b);
                        if (gd(m) > 0.0) == (d0 > 0.0) {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    let theta = 0.5 * (a + b);
                    if sec.g(&step.eval_theta(theta)).abs() <= TOUCH_TOL {
                        out.push(theta);
                    }
                }
            }
            prev = Some((th, ds[i]));
        }
        out
    }
}

/// All crossings along a sequence of dense steps.
pub fn find_crossings<'a, I>(steps: I, section: &SectionSpec) -> Vec<Crossing>
where
    I: IntoIterator<Item = &'a DenseStep<3>>,
{
    let mut det = CrossingDetector::new(*section);
    steps.into_iter().flat_map(|s| det.process(s)).collect()
}
