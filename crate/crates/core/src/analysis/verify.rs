//! Sampled verification of the periodic (on `S`) and boundary-limit (off
//! `S`) behaviour.

use rayon::prelude::*;
use serde::Serialize;

use super::faces::{
    face_flow_terminal, heteroclinic_match, heteroclinic_match_xz, Face, HeteroclinicMatch,
};
use super::limit::{
    alpha_limit, omega_limit, omega_limit_tracked, LimitConfig, LimitKind, LimitSetReport,
};
use super::periodic::{detect_periodic, PeriodicOrbit};
use super::sampling::{sample_interior, DEFAULT_SEED, SAMPLE_MARGIN};
use crate::darboux::FirstIntegralSpec;
use crate::equilibria::{
    interior_segment_r, interior_spectrum, limit_segments, point_segment_distance, speed,
    SpectrumClass, State3,
};
use crate::error::Result;
use crate::params::{classify, ParamVector, PsClass, Regime, SSign};

/// Drift allowed in `log F` along a detected orbit. Also the slack for
/// `log H` monotonicity, where the growth rate vanishes near `∂T`.
pub const DRIFT_TOL: f64 = 1e-8;
/// Speed allowed at sampled points of `R`.
pub const R_SPEED_TOL: f64 = 1e-12;
/// Witnesses closer than this to `R_py∖s_py` or `R_xz∖s_xz` are violations.
pub const EXCLUSION_RADIUS: f64 = 1e-3;
/// Agreement required between leaf roots and face-flow endpoints.
pub const FACE_FLOW_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub limit: LimitConfig,
    /// Edge abscissae at which the leaf matching is checked.
    pub match_points: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n_samples: 20,
            seed: DEFAULT_SEED,
            limit: LimitConfig::default(),
            match_points: vec![0.15, 0.35, 0.65, 0.85],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    fn combine(outcomes: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut v = Verdict::Pass;
        for o in outcomes {
            match o {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Inconclusive => v = Verdict::Inconclusive,
                Verdict::Pass => {}
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchCheck {
    #[serde(flatten)]
    pub result: HeteroclinicMatch,
    pub expected_matched: bool,
    /// Largest `|leaf root - face-flow endpoint|` of the two faces.
    pub face_flow_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub start: State3,
    pub verdict: Verdict,
    pub periodic: Option<PeriodicOrbit>,
    pub omega: Option<LimitSetReport>,
    pub alpha: Option<LimitSetReport>,
    /// Distance of the nearest limit witness to `R_py∖s_py ∪ R_xz∖s_xz`.
    pub exclusion_distance: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub theorem: &'static str,
    pub k: ParamVector,
    pub regime: String,
    /// Which statement was checked: `a` when the main hypothesis holds.
    pub part: &'static str,
    pub hypothesis_holds: bool,
    pub n_samples: usize,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
    pub checks: Vec<Check>,
    pub face_matches: Vec<MatchCheck>,
    pub samples: Vec<SampleOutcome>,
    pub verdict: Verdict,
}

impl TheoremReport {
    /// Largest value of a named quantity over the samples.
    pub fn worst(&self, f: impl Fn(&SampleOutcome) -> Option<f64>) -> Option<f64> {
        self.samples.iter().filter_map(f).reduce(f64::max)
    }

    pub fn exclusion_violations(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| s.exclusion_distance.is_some_and(|d| d < EXCLUSION_RADIUS))
            .count()
    }
}

fn face_matches(k: &ParamVector, points: &[f64], expected: bool) -> Vec<MatchCheck> {
    let mut out = Vec::new();
    for &x0 in points {
        for (m, faces) in [
            (heteroclinic_match(k, x0), [Face::Y, Face::Sigma]),
            (heteroclinic_match_xz(k, x0), [Face::X, Face::Z]),
        ] {
            // degenerate leaves are skipped
            let Ok(result) = m else { continue };
            let gap = match (
                face_flow_terminal(faces[0], k, x0),
                face_flow_terminal(faces[1], k, x0),
            ) {
                (Ok(a), Ok(b)) => (a.terminal_abscissa - result.x1)
                    .abs()
                    .max((b.terminal_abscissa - result.x2).abs()),
                _ => f64::INFINITY,
            };
            out.push(MatchCheck {
                result,
                expected_matched: expected,
                face_flow_gap: gap,
                passed: result.matched == expected && gap <= FACE_FLOW_TOL,
            });
        }
    }
    out
}

fn tally(samples: &[SampleOutcome]) -> (usize, usize, usize) {
    let count = |v| samples.iter().filter(|s| s.verdict == v).count();
    (
        count(Verdict::Pass),
        count(Verdict::Fail),
        count(Verdict::Inconclusive),
    )
}

fn finish(
    theorem: &'static str,
    k: &ParamVector,
    regime: &Regime,
    part: &'static str,
    hypothesis_holds: bool,
    checks: Vec<Check>,
    face_matches: Vec<MatchCheck>,
    samples: Vec<SampleOutcome>,
) -> TheoremReport {
    let (passed, failed, inconclusive) = tally(&samples);
    let verdict = Verdict::combine(
        checks
            .iter()
            .map(|c| {
                if c.passed {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            })
            .chain(face_matches.iter().map(|m| {
                if m.passed {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }))
            .chain(samples.iter().map(|s| s.verdict)),
    );
    TheoremReport {
        theorem,
        k: *k,
        regime: regime.label(),
        part,
        hypothesis_holds,
        n_samples: samples.len(),
        passed,
        failed,
        inconclusive,
        checks,
        face_matches,
        samples,
        verdict,
    }
}

fn outcome(index: usize, start: State3) -> SampleOutcome {
    SampleOutcome {
        index,
        start,
        verdict: Verdict::Inconclusive,
        periodic: None,
        omega: None,
        alpha: None,
        exclusion_distance: None,
        note: None,
    }
}

/// Periodic orbits and conserved integrals on `PS ∩ S` (part a); limit sets
/// on `∂T` and no periodic orbits otherwise (part b).
pub fn verify_theorem_a(k: &ParamVector, cfg: &VerifyConfig) -> Result<TheoremReport> {
    let regime = classify(k)?;
    let starts = sample_interior(k, cfg.n_samples, cfg.seed, SAMPLE_MARGIN)?;
    if regime.is_oscillating() {
        let r = interior_segment_r(k)?.expect("R exists on PS ∩ S");
        let r_speed = r
            .sample(100)
            .iter()
            .map(|p| speed(k, p))
            .fold(0.0, f64::max);
        let z_max = k.k4 / (k.k3 + k.k4);
        let mut spectrum_gap = 0.0_f64;
        let mut centers = true;
        for i in 1..=5 {
            let s = interior_spectrum(k, z_max * i as f64 / 6.0)?;
            spectrum_gap = spectrum_gap.max(s.agreement);
            centers &= s.classification == SpectrumClass::CenterType;
        }
        let checks = vec![
            Check::at_most("R_zero_velocity", r_speed, R_SPEED_TOL),
            Check::at_most("R_spectrum_agreement", spectrum_gap, 1e-8),
            Check {
                name: "R_center_type".into(),
                passed: centers,
                value: f64::from(u8::from(centers)),
                threshold: 1.0,
            },
        ];
        let pcfg = cfg.limit.periodic;
        let samples = starts
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let mut o = outcome(i, *p);
                match detect_periodic(k, p, &pcfg) {
                    Ok(Some(orbit)) => {
                        let drift = orbit
                            .drift
                            .iter()
                            .map(|d| d.max_log_drift)
                            .fold(0.0, f64::max);
                        o.verdict = if orbit.closure_error <= pcfg.closure_tol && drift <= DRIFT_TOL
                        {
                            Verdict::Pass
                        } else {
                            o.note = Some(format!("log drift {drift:e}"));
                            Verdict::Fail
                        };
                        o.periodic = Some(orbit);
                    }
                    Ok(None) => o.note = Some("horizon exhausted".into()),
                    Err(e) => {
                        o.verdict = Verdict::Fail;
                        o.note = Some(e.to_string());
                    }
                }
                o
            })
            .collect();
        let matches = face_matches(k, &cfg.match_points, true);
        return Ok(finish("A", k, &regime, "a", true, checks, matches, samples));
    }

    let samples = starts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut o = outcome(i, *p);
            match (omega_limit(k, p, &cfg.limit), alpha_limit(k, p, &cfg.limit)) {
                (Ok(w), Ok(a)) => {
                    o.verdict =
                        if w.kind == LimitKind::Inconclusive || a.kind == LimitKind::Inconclusive {
                            Verdict::Inconclusive
                        } else if w.kind.on_boundary() && a.kind.on_boundary() {
                            Verdict::Pass
                        } else {
                            Verdict::Fail
                        };
                    o.omega = Some(w);
                    o.alpha = Some(a);
                }
                (Err(e), _) | (_, Err(e)) => {
                    o.verdict = Verdict::Fail;
                    o.note = Some(e.to_string());
                }
            }
            o
        })
        .collect();
    let matches = if regime.in_ps() {
        face_matches(k, &cfg.match_points, false)
    } else {
        Vec::new()
    };
    Ok(finish(
        "A",
        k,
        &regime,
        "b",
        false,
        Vec::new(),
        matches,
        samples,
    ))
}

/// Distance from `p` to the parts of the singular edges outside `s_py`, `s_xz`.
pub fn exclusion_distance(k: &ParamVector, p: &State3) -> Result<f64> {
    let (s_py, s_xz) = limit_segments(k)?;
    let (a, b) = (s_py.a.x.min(s_py.b.x), s_py.a.x.max(s_py.b.x));
    let py = |x: f64| [x, 0.0, 1.0 - x];
    let d_py = point_segment_distance(p, &py(0.0), &py(a)).min(point_segment_distance(
        p,
        &py(b),
        &py(1.0),
    ));
    let (c, d) = (s_xz.a.y.min(s_xz.b.y), s_xz.a.y.max(s_xz.b.y));
    let xz = |y: f64| [0.0, y, 0.0];
    let d_xz = point_segment_distance(p, &xz(0.0), &xz(c)).min(point_segment_distance(
        p,
        &xz(d),
        &xz(1.0),
    ));
    Ok(d_py.min(d_xz))
}

/// Expected `(ω, α)` kinds on `PS ∖ S`.
pub fn expected_kinds(regime: &Regime) -> Option<(LimitKind, LimitKind)> {
    let forward = match (regime.ps, regime.s_sign) {
        (PsClass::Positive, SSign::Plus) | (PsClass::Negative, SSign::Minus) => true,
        (PsClass::Positive, SSign::Minus) | (PsClass::Negative, SSign::Plus) => false,
        _ => return None,
    };
    Some(if forward {
        (LimitKind::PointOnSPy, LimitKind::PointOnSXz)
    } else {
        (LimitKind::PointOnSXz, LimitKind::PointOnSPy)
    })
}

/// On `PS ∖ S`: ω- and α-limits are single points of `s_py` and `s_xz`, never
/// of the rest of the singular edges, and `log H` moves monotonically.
pub fn verify_theorem_b(k: &ParamVector, cfg: &VerifyConfig) -> Result<TheoremReport> {
    let regime = classify(k)?;
    let Some((want_omega, want_alpha)) = expected_kinds(&regime) else {
        // nothing was checked
        let mut rep = finish(
            "B",
            k,
            &regime,
            "a",
            false,
            Vec::new(),
            Vec::new(),
            Vec::new(),
        );
        rep.verdict = Verdict::Inconclusive;
        return Ok(rep);
    };
    let starts = sample_interior(k, cfg.n_samples, cfg.seed, SAMPLE_MARGIN)?;
    // H grows along orbits when the discriminant is positive
    let sign = k.discriminant().signum();
    let h = FirstIntegralSpec::h(k);
    let tracked = FirstIntegralSpec::custom(h.exponents.map(|e| e * sign));
    let samples = starts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut o = outcome(i, *p);
            let run = || -> Result<(LimitSetReport, LimitSetReport)> {
                Ok((
                    omega_limit_tracked(k, p, &cfg.limit, Some(&tracked))?,
                    alpha_limit(k, p, &cfg.limit)?,
                ))
            };
            match run() {
                Ok((w, a)) => {
                    let excl = exclusion_distance(k, &w.witness)
                        .and_then(|d| Ok(d.min(exclusion_distance(k, &a.witness)?)))
                        .unwrap_or(f64::INFINITY);
                    let monotone = w.tracked.is_none_or(|t| t.max_decrease <= DRIFT_TOL);
                    o.verdict =
                        if w.kind == LimitKind::Inconclusive || a.kind == LimitKind::Inconclusive {
                            Verdict::Inconclusive
                        } else if w.kind == want_omega
                            && a.kind == want_alpha
                            && monotone
                            && excl >= EXCLUSION_RADIUS
                        {
                            Verdict::Pass
                        } else {
                            o.note = Some(format!(
                                "omega {}, alpha {}, log H monotone {monotone}",
                                w.kind.as_str(),
                                a.kind.as_str()
                            ));
                            Verdict::Fail
                        };
                    o.exclusion_distance = Some(excl);
                    o.omega = Some(w);
                    o.alpha = Some(a);
                }
                Err(e) => {
                    o.verdict = Verdict::Fail;
                    o.note = Some(e.to_string());
                }
            }
            o
        })
        .collect();
    let matches = face_matches(k, &cfg.match_points, false);
    Ok(finish(
        "B",
        k,
        &regime,
        "a",
        true,
        Vec::new(),
        matches,
        samples,
    ))
}
