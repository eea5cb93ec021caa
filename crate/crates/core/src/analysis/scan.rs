//! Parameter-slice scans: classify every grid point and probe one interior
//! orbit.

use rayon::prelude::*;
use serde::Serialize;

use super::limit::{omega_limit, LimitConfig, LimitKind};
use crate::equilibria::State3;
use crate::error::{Error, Result};
use crate::params::{classify, ParamVector};

/// `c + a·t + b·s` for one parameter component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Affine {
    pub c: f64,
    pub t: f64,
    pub s: f64,
}

impl Affine {
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.c + self.t * t + self.s * s
    }

    /// Parses sums like `2`, `t`, `1+s`, `2-0.5*t+s`, `3t`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad slice component {text:?}"));
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad());
        }
        let mut out = Affine::default();
        let mut rest = compact.as_str();
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'+' => (1.0, &rest[1..]),
                b'-' => (-1.0, &rest[1..]),
                _ if rest.len() == compact.len() => (1.0, rest),
                _ => return Err(bad()),
            };
            // a term ends at the next sign that is not an exponent sign
            let end = body
                .char_indices()
                .skip(1)
                .find(|&(i, ch)| {
                    (ch == '+' || ch == '-') && !matches!(body.as_bytes()[i - 1], b'e' | b'E')
                })
                .map_or(body.len(), |(i, _)| i);
            let term = &body[..end];
            rest = &body[end..];
            let (coef, var) = match term.strip_suffix('t').or_else(|| term.strip_suffix('s')) {
                Some(num) => {
                    let var = term.as_bytes()[term.len() - 1];
                    let num = num.strip_suffix('*').unwrap_or(num);
                    let c = if num.is_empty() {
                        1.0
                    } else {
                        num.parse::<f64>().map_err(|_| bad())?
                    };
                    (c, Some(var))
                }
                None => (term.parse::<f64>().map_err(|_| bad())?, None),
            };
            match var {
                Some(b't') => out.t += sign * coef,
                Some(_) => out.s += sign * coef,
                None => out.c += sign * coef,
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slice {
    pub components: [Affine; 4],
}

impl Slice {
    /// `"2,t,2,t"` or `"(2, 1+s, 2, t)"`.
    pub fn parse(text: &str) -> Result<Self> {
        let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "slice needs 4 components, got {}",
                parts.len()
            )));
        }
        let mut components = [Affine::default(); 4];
        for (c, p) in components.iter_mut().zip(parts) {
            *c = Affine::parse(p)?;
        }
        Ok(Self { components })
    }

    pub fn uses_s(&self) -> bool {
        self.components.iter().any(|c| c.s != 0.0)
    }

    pub fn at(&self, t: f64, s: f64) -> ParamVector {
        let [a, b, c, d] = self.components.map(|x| x.eval(t, s));
        ParamVector::new(a, b, c, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || steps == 0 {
            return Err(Error::InvalidArgument("bad scan range".into()));
        }
        Ok(Self { lo, hi, steps })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let n = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / n)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub slice: Slice,
    pub t: Axis,
    pub s: Option<Axis>,
    pub probe_start: State3,
    pub limit: LimitConfig,
}

impl ScanSpec {
    pub fn new(slice: Slice, t: Axis, s: Option<Axis>) -> Self {
        Self {
            slice,
            t,
            s,
            probe_start: [0.2, 0.2, 0.2],
            limit: LimitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub t: f64,
    pub s: Option<f64>,
    pub k: ParamVector,
    /// `None` for the zero vector.
    pub regime: Option<String>,
    pub discriminant: f64,
    pub probe: Option<LimitKind>,
    pub witness: Option<State3>,
    pub period: Option<f64>,
    pub error: Option<String>,
}

/// One row per grid point, `t` varying fastest.
pub fn bifurcation_scan(spec: &ScanSpec) -> Vec<ScanRow> {
    let ts = spec.t.values();
    let ss: Vec<Option<f64>> = match &spec.s {
        Some(ax) => ax.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let grid: Vec<(f64, Option<f64>)> = ss
        .iter()
        .flat_map(|&s| ts.iter().map(move |&t| (t, s)))
        .collect();
    grid.par_iter()
        .map(|&(t, s)| {
            let k = spec.slice.at(t, s.unwrap_or(0.0));
            let mut row = ScanRow {
                t,
                s,
                k,
                regime: None,
                discriminant: k.discriminant(),
                probe: None,
                witness: None,
                period: None,
                error: None,
            };
            match classify(&k) {
                Ok(r) => row.regime = Some(r.label()),
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            }
            match omega_limit(&k, &spec.probe_start, &spec.limit) {
                Ok(rep) => {
                    row.probe = Some(rep.kind);
                    row.witness = Some(rep.witness);
                    row.period = rep.period;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect()
}
