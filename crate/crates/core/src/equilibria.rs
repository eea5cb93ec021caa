//! Vector field, singular sets and local spectra.
//!
//! The reduced system on the simplex `T = {x, y, z >= 0, x + y + z <= 1}` is
//!
//! ```text
//! x' = x (k1 y - k4 w)
//! y' = y (k2 z - k1 x)          w = 1 - x - y - z
//! z' = z (k3 w - k2 y)
//! ```
//!
//! The edges `R_py = {(x, 0, 1-x)}` and `R_xz = {(0, y, 0)}` consist of
//! singular points for every `k`. For `k` in PS ∩ S there is additionally an
//! open segment `R` of interior singular points whose Jacobian spectrum is
//! `{0, ±i sqrt(b)}`.

use std::ops::{Add, Mul, Sub};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamVector;

/// Geometric slack accepted when constructing simplex points.
pub const TOL_GEOM: f64 = 1e-12;
/// Residual below which a point is treated as singular.
pub const EQUILIBRIUM_TOL: f64 = 1e-12;
/// Relative margin used to keep samples away from the ends of open segments.
pub const OPEN_MARGIN: f64 = 1e-9;

pub type State3 = [f64; 3];

/// Amount by which a raw state leaves the simplex (0 inside).
pub fn simplex_violation(p: &State3) -> f64 {
    let s = p[0] + p[1] + p[2];
    0.0_f64.max(-p[0]).max(-p[1]).max(-p[2]).max(s - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SimplexPoint {
    /// Validates membership in `T`. Violations up to [`TOL_GEOM`] are clamped
    /// onto the boundary; larger ones are rejected.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let raw = [x, y, z];
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        let violation = simplex_violation(&raw);
        if violation > TOL_GEOM {
            return Err(Error::OutsideSimplex { x, y, z, violation });
        }
        let (mut x, mut y, mut z) = (x.max(0.0), y.max(0.0), z.max(0.0));
        let s = x + y + z;
        if s > 1.0 {
            x /= s;
            y /= s;
            z /= s;
        }
        Ok(Self { x, y, z })
    }

    pub fn from_array(p: State3) -> Result<Self> {
        Self::new(p[0], p[1], p[2])
    }

    pub fn as_array(&self) -> State3 {
        [self.x, self.y, self.z]
    }

    /// The eliminated fourth concentration `1 - x - y - z`.
    pub fn w(&self) -> f64 {
        1.0 - self.x - self.y - self.z
    }

    /// Distance to the boundary of `T` (smallest of x, y, z, w).
    pub fn boundary_distance(&self) -> f64 {
        boundary_distance(&self.as_array())
    }
}

pub fn boundary_distance(p: &State3) -> f64 {
    let w = 1.0 - p[0] - p[1] - p[2];
    p[0].min(p[1]).min(p[2]).min(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentLabel {
    #[serde(rename = "R_interior")]
    RInterior,
    #[serde(rename = "s_py")]
    SPy,
    #[serde(rename = "s_xz")]
    SXz,
    #[serde(rename = "R_py_edge")]
    RPyEdge,
    #[serde(rename = "R_xz_edge")]
    RXzEdge,
}

/// Segment `a + r (b - a)`, `r ∈ [0, 1]`. Open segments are stored by their
/// closure endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: SimplexPoint,
    pub b: SimplexPoint,
    pub label: SegmentLabel,
    pub open: bool,
}

impl Segment {
    pub fn point_at(&self, r: f64) -> State3 {
        let (a, b) = (self.a.as_array(), self.b.as_array());
        [0, 1, 2].map(|i| a[i] + r * (b[i] - a[i]))
    }

    pub fn is_degenerate(&self) -> bool {
        dist(&self.a.as_array(), &self.b.as_array()) == 0.0
    }

    /// `n` evenly spaced samples; for open segments the endpoints are pulled
    /// in by [`OPEN_MARGIN`].
    pub fn sample(&self, n: usize) -> Vec<State3> {
        let (lo, hi) = if self.open {
            (OPEN_MARGIN, 1.0 - OPEN_MARGIN)
        } else {
            (0.0, 1.0)
        };
        match n {
            0 => Vec::new(),
            1 => vec![self.point_at(0.5 * (lo + hi))],
            _ => (0..n)
                .map(|i| self.point_at(lo + (hi - lo) * i as f64 / (n - 1) as f64))
                .collect(),
        }
    }

    pub fn distance_to(&self, p: &State3) -> f64 {
        point_segment_distance(p, &self.a.as_array(), &self.b.as_array())
    }
}

pub fn dist(a: &State3, b: &State3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn point_segment_distance(p: &State3, a: &State3, b: &State3) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let r = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1] + (p[2] - a[2]) * d[2]) / len2;
    let r = r.clamp(0.0, 1.0);
    dist(p, &[a[0] + r * d[0], a[1] + r * d[1], a[2] + r * d[2]])
}

/// The reduced field written over any commutative ring. `one` is the unit of
/// the ring; used with `f64`, exact rationals and symbolic polynomials.
pub fn field_components<T>(k: [T; 4], p: [T; 3], one: T) -> [T; 3]
where
    T: Clone + Add<Output = T> + Sub<Output = T> + Mul<Output = T>,
{
    let [k1, k2, k3, k4] = k;
    let [x, y, z] = p;
    let w = one - x.clone() - y.clone() - z.clone();
    [
        x.clone() * (k1.clone() * y.clone() - k4 * w.clone()),
        y.clone() * (k2.clone() * z.clone() - k1 * x),
        z * (k3 * w - k2 * y),
    ]
}

/// Four-species field with `v` kept explicit.
pub fn field4_components<T>(k: [T; 4], q: [T; 4]) -> [T; 4]
where
    T: Clone + Sub<Output = T> + Mul<Output = T>,
{
    let [k1, k2, k3, k4] = k;
    let [x, y, z, v] = q;
    [
        x.clone() * (k1.clone() * y.clone() - k4.clone() * v.clone()),
        y.clone() * (k2.clone() * z.clone() - k1 * x.clone()),
        z.clone() * (k3.clone() * v.clone() - k2 * y),
        v * (k4 * x - k3 * z),
    ]
}

pub fn vector_field(k: &ParamVector, p: &State3) -> State3 {
    let w = 1.0 - p[0] - p[1] - p[2];
    [
        p[0] * (k.k1 * p[1] - k.k4 * w),
        p[1] * (k.k2 * p[2] - k.k1 * p[0]),
        p[2] * (-k.k2 * p[1] + k.k3 * w),
    ]
}

pub fn vector_field4(k: &ParamVector, q: &[f64; 4]) -> [f64; 4] {
    field4_components(k.as_array(), *q)
}

pub fn speed(k: &ParamVector, p: &State3) -> f64 {
    let v = vector_field(k, p);
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub type Mat3 = [[f64; 3]; 3];

pub fn jacobian(k: &ParamVector, p: &State3) -> Mat3 {
    let [x, y, z] = *p;
    let w = 1.0 - x - y - z;
    let (k1, k2, k3, k4) = (k.k1, k.k2, k.k3, k.k4);
    [
        [k1 * y - k4 * w + k4 * x, (k1 + k4) * x, k4 * x],
        [-k1 * y, k2 * z - k1 * x, k2 * y],
        [-k3 * z, -(k2 + k3) * z, k3 * w - k2 * y - k3 * z],
    ]
}

/// Open segment `R` of interior singular points, present only for k ∈ PS ∩ S.
pub fn interior_segment_r(k: &ParamVector) -> Result<Option<Segment>> {
    if k.is_zero() {
        return Err(Error::ZeroParameter);
    }
    if !k.is_ps_and_s() {
        return Ok(None);
    }
    // z -> 0 gives (0, k4/(k1+k4), 0); z -> k4/(k3+k4) gives (k3/(k3+k4), 0, k4/(k3+k4)).
    let a = SimplexPoint::new(0.0, k.k4 / (k.k4 + k.k1), 0.0)?;
    let b = SimplexPoint::new(k.k3 / (k.k3 + k.k4), 0.0, k.k4 / (k.k3 + k.k4))?;
    Ok(Some(Segment {
        a,
        b,
        label: SegmentLabel::RInterior,
        open: true,
    }))
}

/// Point of `R` at height `z`, without range checks.
pub fn r_point(k: &ParamVector, z: f64) -> State3 {
    [
        k.k3 / k.k4 * z,
        (k.k4 - (k.k4 + k.k3) * z) / (k.k4 + k.k1),
        z,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitEndpoints {
    pub p_py: SimplexPoint,
    pub q_py: SimplexPoint,
    pub p_xz: SimplexPoint,
    pub q_xz: SimplexPoint,
}

pub fn limit_endpoints(k: &ParamVector) -> Result<LimitEndpoints> {
    if !k.is_ps() {
        return Err(Error::NotInPS);
    }
    let (k1, k2, k3, k4) = (k.k1, k.k2, k.k3, k.k4);
    Ok(LimitEndpoints {
        p_py: SimplexPoint::new(k2 / (k1 + k2), 0.0, k1 / (k1 + k2))?,
        q_py: SimplexPoint::new(k3 / (k3 + k4), 0.0, k4 / (k3 + k4))?,
        p_xz: SimplexPoint::new(0.0, k4 / (k1 + k4), 0.0)?,
        q_xz: SimplexPoint::new(0.0, k3 / (k3 + k2), 0.0)?,
    })
}

/// Closed segments `s_py` and `s_xz`; both degenerate to points when k ∈ S.
pub fn limit_segments(k: &ParamVector) -> Result<(Segment, Segment)> {
    let e = limit_endpoints(k)?;
    Ok((
        Segment {
            a: e.p_py,
            b: e.q_py,
            label: SegmentLabel::SPy,
            open: false,
        },
        Segment {
            a: e.p_xz,
            b: e.q_xz,
            label: SegmentLabel::SXz,
            open: false,
        },
    ))
}

pub fn edge_r_py() -> Segment {
    Segment {
        a: SimplexPoint {
            x: 0.0,
            y: 0.0,
            z: 1.0,
        },
        b: SimplexPoint {
            x: 1.0,
            y: 0.0,
            z: 0.0,
        },
        label: SegmentLabel::RPyEdge,
        open: false,
    }
}

pub fn edge_r_xz() -> Segment {
    Segment {
        a: SimplexPoint {
            x: 0.0,
            y: 0.0,
            z: 0.0,
        },
        b: SimplexPoint {
            x: 0.0,
            y: 1.0,
            z: 0.0,
        },
        label: SegmentLabel::RXzEdge,
        open: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumClass {
    /// `{0, ±iβ}` with β > 0.
    CenterType,
    /// `{0, λ2, λ3}` with `λ2 λ3 < 0`.
    SaddleTypeOnEdge,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigen {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Eigen {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

impl From<Eigen> for Complex64 {
    fn from(e: Eigen) -> Self {
        Complex64::new(e.re, e.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub point: State3,
    /// Closed-form eigenvalues.
    pub eigenvalues: [Eigen; 3],
    /// Eigenvalues of the numerically evaluated Jacobian, matched to
    /// `eigenvalues` in order.
    pub numeric: [Eigen; 3],
    /// Largest `|analytic - numeric|` over the matched pairs.
    pub agreement: f64,
    /// Largest `‖Jv - λv‖` over unit eigenvectors of the numeric eigenvalues.
    pub residual: f64,
    pub classification: SpectrumClass,
    /// Coefficient `b` of `λ(λ² + b)` (interior points only).
    pub b: Option<f64>,
    /// Whether the edge point lies outside the limit segment (edge points only).
    pub outside_limit_segment: Option<bool>,
}

/// Eigenvalues of a general real 3×3 matrix.
pub fn matrix_eigenvalues(m: &Mat3) -> [Complex64; 3] {
    let a = Matrix3::from_fn(|i, j| m[i][j]);
    let ev = a.complex_eigenvalues();
    [ev[0], ev[1], ev[2]]
}

/// `‖(M - λI) v‖` for a unit vector `v` spanning (approximately) the kernel
/// of `M - λI`.
pub fn eigen_residual(m: &Mat3, lambda: Complex64) -> f64 {
    let rows: [[Complex64; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let d = if i == j {
                lambda
            } else {
                Complex64::new(0.0, 0.0)
            };
            Complex64::new(m[i][j], 0.0) - d
        })
    });
    let norm = |v: &[Complex64; 3]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let cross = |a: &[Complex64; 3], b: &[Complex64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let mut v = [0, 1, 2]
        .iter()
        .map(|&i| cross(&rows[i], &rows[(i + 1) % 3]))
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .unwrap();
    let scale = rows.iter().map(norm).fold(0.0, f64::max);
    if norm(&v) <= 1e-14 * scale.max(1.0).powi(2) {
        // rank <= 1: any vector orthogonal to the dominant row
        let r = rows
            .iter()
            .max_by(|a, b| norm(a).total_cmp(&norm(b)))
            .copied()
            .unwrap();
        let zero = Complex64::new(0.0, 0.0);
        let c1 = [r[1], -r[0], zero];
        let c2 = [zero, r[2], -r[1]];
        v = if norm(&c1) >= norm(&c2) { c1 } else { c2 };
        if norm(&v) == 0.0 {
            v = [Complex64::new(1.0, 0.0), zero, zero];
        }
    }
    let n = norm(&v);
    let v = v.map(|c| c / n);
    let res: [Complex64; 3] =
        std::array::from_fn(|i| rows[i][0] * v[0] + rows[i][1] * v[1] + rows[i][2] * v[2]);
    norm(&res)
}

/// Pairs each analytic eigenvalue with the nearest unused numeric one.
fn match_eigenvalues(analytic: &[Complex64; 3], numeric: &[Complex64; 3]) -> ([Complex64; 3], f64) {
    let mut used = [false; 3];
    let mut out = [Complex64::new(0.0, 0.0); 3];
    let mut worst = 0.0_f64;
    for (i, a) in analytic.iter().enumerate() {
        let (j, d) = (0..3)
            .filter(|&j| !used[j])
            .map(|j| (j, (numeric[j] - a).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        used[j] = true;
        out[i] = numeric[j];
        worst = worst.max(d);
    }
    (out, worst)
}

fn build_report(
    k: &ParamVector,
    point: State3,
    analytic: [Complex64; 3],
    classification: SpectrumClass,
) -> SpectrumReport {
    let jac = jacobian(k, &point);
    let numeric = matrix_eigenvalues(&jac);
    let (matched, agreement) = match_eigenvalues(&analytic, &numeric);
    let residual = matched
        .iter()
        .map(|&l| eigen_residual(&jac, l))
        .fold(0.0, f64::max);
    SpectrumReport {
        point,
        eigenvalues: analytic.map(Eigen::from),
        numeric: matched.map(Eigen::from),
        agreement,
        residual,
        classification,
        b: None,
        outside_limit_segment: None,
    }
}

/// Spectrum of the Jacobian at the point of `R` with height `z`.
pub fn interior_spectrum(k: &ParamVector, z: f64) -> Result<SpectrumReport> {
    if !k.is_ps_and_s() {
        return Err(Error::NotInPSS);
    }
    let z_max = k.k4 / (k.k3 + k.k4);
    if !(z > 0.0 && z < z_max) {
        return Err(Error::OutOfRange {
            what: "z",
            value: z,
            range: format!("(0, {z_max})"),
        });
    }
    let p = r_point(k, z);
    let b = z * p[1] * (k.k1 + k.k2) * (k.k2 + k.k3);
    let beta = b.sqrt();
    let analytic = [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, beta),
        Complex64::new(0.0, -beta),
    ];
    let mut report = build_report(k, p, analytic, SpectrumClass::CenterType);
    report.b = Some(b);
    if report.agreement > 1e-8 {
        return Err(Error::RouteMismatch(format!(
            "interior spectrum at z = {z}: analytic vs numeric gap {:e}",
            report.agreement
        )));
    }
    Ok(report)
}

fn edge_report(
    k: &ParamVector,
    point: State3,
    l2: f64,
    l3: f64,
    thresholds: (f64, f64),
    coordinate: f64,
) -> SpectrumReport {
    let analytic = [
        Complex64::new(0.0, 0.0),
        Complex64::new(l2, 0.0),
        Complex64::new(l3, 0.0),
    ];
    let class = if l2 * l3 < 0.0 {
        SpectrumClass::SaddleTypeOnEdge
    } else {
        SpectrumClass::Other
    };
    let mut report = build_report(k, point, analytic, class);
    let (t1, t2) = thresholds;
    if t1.is_finite() && t2.is_finite() {
        report.outside_limit_segment = Some(coordinate < t1.min(t2) || coordinate > t1.max(t2));
    }
    report
}

/// Spectrum at `(x0, 0, 1 - x0)` on the edge `R_py`:
/// `{0, (k3 + k4) x0 - k3, k2 - x0 (k1 + k2)}`.
pub fn edge_spectrum_py(k: &ParamVector, x0: f64) -> Result<SpectrumReport> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::OutOfRange {
            what: "x0",
            value: x0,
            range: "[0, 1]".into(),
        });
    }
    let l2 = (k.k3 + k.k4) * x0 - k.k3;
    let l3 = k.k2 - x0 * (k.k1 + k.k2);
    let thresholds = (k.k2 / (k.k1 + k.k2), k.k3 / (k.k3 + k.k4));
    Ok(edge_report(k, [x0, 0.0, 1.0 - x0], l2, l3, thresholds, x0))
}

/// Spectrum at `(0, y0, 0)` on the edge `R_xz`:
/// `{0, k1 y0 - k4 (1 - y0), k3 (1 - y0) - k2 y0}`.
pub fn edge_spectrum_xz(k: &ParamVector, y0: f64) -> Result<SpectrumReport> {
    if !(0.0..=1.0).contains(&y0) {
        return Err(Error::OutOfRange {
            what: "y0",
            value: y0,
            range: "[0, 1]".into(),
        });
    }
    let l2 = k.k1 * y0 - k.k4 * (1.0 - y0);
    let l3 = k.k3 * (1.0 - y0) - k.k2 * y0;
    let thresholds = (k.k4 / (k.k1 + k.k4), k.k3 / (k.k3 + k.k2));
    Ok(edge_report(k, [0.0, y0, 0.0], l2, l3, thresholds, y0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    Edge,
    Face,
    InteriorSegment,
    LimitSegment,
}

/// One set of singular points, described by its closure vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSet {
    pub label: String,
    pub kind: SetKind,
    pub vertices: Vec<State3>,
}

const O: State3 = [0.0, 0.0, 0.0];
const EX: State3 = [1.0, 0.0, 0.0];
const EY: State3 = [0.0, 1.0, 0.0];
const EZ: State3 = [0.0, 0.0, 1.0];

/// All singular sets in `T`, from closed-form conditions on which `k_i`
/// vanish. No numeric search is performed.
pub fn singular_sets(k: &ParamVector) -> Result<Vec<SingularSet>> {
    if k.is_zero() {
        return Err(Error::ZeroParameter);
    }
    let edge = |label: &str, a: State3, b: State3| SingularSet {
        label: label.into(),
        kind: SetKind::Edge,
        vertices: vec![a, b],
    };
    let face = |label: &str, v: [State3; 3]| SingularSet {
        label: label.into(),
        kind: SetKind::Face,
        vertices: v.to_vec(),
    };
    let mut sets = vec![edge("R_py", EZ, EX), edge("R_xz", O, EY)];
    let (k1, k2, k3, k4) = (k.k1, k.k2, k.k3, k.k4);
    if k4 == 0.0 {
        sets.push(edge("R_yz", O, EX));
    }
    if k3 == 0.0 {
        sets.push(edge("R_xy", O, EZ));
    }
    if k2 == 0.0 {
        sets.push(edge("R_px", EY, EZ));
    }
    if k1 == 0.0 {
        sets.push(edge("R_pz", EX, EY));
    }
    if k2 == 0.0 && k3 == 0.0 {
        sets.push(face("X", [O, EY, EZ]));
    }
    if k3 == 0.0 && k4 == 0.0 {
        sets.push(face("Y", [O, EX, EZ]));
    }
    if k1 == 0.0 && k4 == 0.0 {
        sets.push(face("Z", [O, EX, EY]));
    }
    if k1 == 0.0 && k2 == 0.0 {
        sets.push(face("Sigma", [EX, EY, EZ]));
    }
    if let Some(r) = interior_segment_r(k)? {
        sets.push(SingularSet {
            label: "R".into(),
            kind: SetKind::InteriorSegment,
            vertices: vec![r.a.as_array(), r.b.as_array()],
        });
    }
    if k.is_ps() && !k.is_ps_and_s() {
        let (spy, sxz) = limit_segments(k)?;
        for (label, s) in [("s_py", spy), ("s_xz", sxz)] {
            sets.push(SingularSet {
                label: label.into(),
                kind: SetKind::LimitSegment,
                vertices: vec![s.a.as_array(), s.b.as_array()],
            });
        }
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_rational::BigRational;
    use num_traits::{FromPrimitive, One, Zero};
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::SplitMix64;

    fn k(a: f64, b: f64, c: f64, d: f64) -> ParamVector {
        ParamVector::new(a, b, c, d)
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn field_examples() {
        let v = vector_field(&k(1.0, 1.0, 1.0, 1.0), &[0.25, 0.25, 0.25]);
        assert_eq!(v, [0.0, 0.0, 0.0]);

        let v = vector_field(&k(2.0, 1.0, 2.0, 1.0), &[0.2, 0.2, 0.2]);
        let expected = [0.0, -0.04, 0.12];
        for i in 0..3 {
            assert_abs_diff_eq!(v[i], expected[i], epsilon = 1e-15);
        }
        // independent route: exact rational evaluation of the same formula
        let q = |v: f64| BigRational::from_f64(v).unwrap();
        let exact = field_components(
            [q(2.0), q(1.0), q(2.0), q(1.0)],
            [q(0.2), q(0.2), q(0.2)],
            BigRational::one(),
        );
        for i in 0..3 {
            let e: f64 = num_traits::ToPrimitive::to_f64(&exact[i]).unwrap();
            assert_abs_diff_eq!(v[i], e, epsilon = 1e-16);
        }
    }

    #[test]
    fn edges_are_exactly_singular() {
        let mut rng = SplitMix64::seed_from_u64(7);
        for _ in 0..500 {
            let kk = k(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            let x: f64 = rng.gen_range(0.0..=1.0);
            assert_eq!(vector_field(&kk, &[x, 0.0, 1.0 - x]), [0.0; 3]);
            assert_eq!(vector_field(&kk, &[0.0, x, 0.0]), [0.0; 3]);
        }
    }

    #[test]
    fn simplex_point_clamps_and_rejects() {
        let p = SimplexPoint::new(-1e-13, 0.5, 0.5).unwrap();
        assert_eq!(p.x, 0.0);
        assert!(p.x + p.y + p.z <= 1.0);
        assert!(matches!(
            SimplexPoint::new(-1e-6, 0.5, 0.5),
            Err(Error::OutsideSimplex { .. })
        ));
        assert!(SimplexPoint::new(0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn interior_segment_examples() {
        let r = interior_segment_r(&k(1.0, 1.0, 1.0, 1.0)).unwrap().unwrap();
        assert_eq!(r.a.as_array(), [0.0, 0.5, 0.0]);
        assert_eq!(r.b.as_array(), [0.5, 0.0, 0.5]);
        assert!(r.open);
        assert!(interior_segment_r(&k(2.0, 1.0, 2.0, 1.0))
            .unwrap()
            .is_none());

        let kk = k(2.0, 3.0, 3.0, 2.0);
        let r = interior_segment_r(&kk).unwrap().unwrap();
        for p in r.sample(100) {
            let z = p[2];
            assert!(z > 0.0 && z < 0.4);
            assert_abs_diff_eq!(p[0], 1.5 * z, epsilon = 1e-15);
            assert_abs_diff_eq!(p[1], (2.0 - 5.0 * z) / 4.0, epsilon = 1e-15);
            assert!(max_abs(&vector_field(&kk, &p)) < EQUILIBRIUM_TOL);
        }
        assert_eq!(
            interior_segment_r(&k(0.0, 0.0, 0.0, 0.0)),
            Err(Error::ZeroParameter)
        );
    }

    #[test]
    fn limit_endpoint_examples() {
        let e = limit_endpoints(&k(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(e.p_py.as_array(), [0.5, 0.0, 0.5]);
        assert_eq!(e.q_py.as_array(), [0.5, 0.0, 0.5]);
        assert_eq!(e.p_xz.as_array(), [0.0, 0.5, 0.0]);
        assert_eq!(e.q_xz.as_array(), [0.0, 0.5, 0.0]);

        let e = limit_endpoints(&k(2.0, 1.0, 2.0, 1.0)).unwrap();
        let third = 1.0 / 3.0;
        let close = |a: State3, b: State3| dist(&a, &b) < 1e-15;
        assert!(close(e.p_py.as_array(), [third, 0.0, 2.0 * third]));
        assert!(close(e.q_py.as_array(), [2.0 * third, 0.0, third]));
        assert!(close(e.p_xz.as_array(), [0.0, third, 0.0]));
        assert!(close(e.q_xz.as_array(), [0.0, 2.0 * third, 0.0]));

        let neg = limit_endpoints(&k(-2.0, -1.0, -2.0, -1.0)).unwrap();
        assert_eq!(neg, e);
        assert_eq!(
            limit_endpoints(&k(1.0, -1.0, 1.0, 1.0)),
            Err(Error::NotInPS)
        );
    }

    #[test]
    fn limit_segment_examples() {
        let (spy, _) = limit_segments(&k(2.0, 1.0, 2.0, 1.0)).unwrap();
        assert!(!spy.is_degenerate());
        let (spy, sxz) = limit_segments(&k(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert!(spy.is_degenerate() && sxz.is_degenerate());
        let (spy, _) = limit_segments(&k(2.0, 3.0, 3.0, 2.0)).unwrap();
        assert!(spy.is_degenerate());
        assert!(dist(&spy.a.as_array(), &[0.6, 0.0, 0.4]) < 1e-15);
    }

    #[test]
    fn on_s_limit_points_close_segment_r() {
        let mut rng = SplitMix64::seed_from_u64(11);
        for _ in 0..100 {
            let (k1, k2, k3): (f64, f64, f64) = (
                rng.gen_range(0.1..5.0),
                rng.gen_range(0.1..5.0),
                rng.gen_range(0.1..5.0),
            );
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let kk = k(sign * k1, sign * k2, sign * k3, sign * k1 * k3 / k2);
            if !kk.is_ps_and_s() {
                continue; // rounding moved it off S
            }
            let e = limit_endpoints(&kk).unwrap();
            assert!(dist(&e.p_py.as_array(), &e.q_py.as_array()) <= 1e-14);
            assert!(dist(&e.p_xz.as_array(), &e.q_xz.as_array()) <= 1e-14);
            let r = interior_segment_r(&kk).unwrap().unwrap();
            assert!(dist(&r.a.as_array(), &e.p_xz.as_array()) <= 1e-14);
            assert!(dist(&r.b.as_array(), &e.q_py.as_array()) <= 1e-14);
        }
    }

    #[test]
    fn jacobian_example_and_trace() {
        let j = jacobian(&k(1.0, 1.0, 1.0, 1.0), &[0.25, 0.25, 0.25]);
        let expected = [[0.25, 0.5, 0.25], [-0.25, 0.0, 0.25], [-0.25, -0.5, -0.25]];
        for i in 0..3 {
            for c in 0..3 {
                assert_abs_diff_eq!(j[i][c], expected[i][c], epsilon = 1e-15);
            }
        }
        let kk = k(2.0, 3.0, 3.0, 2.0);
        for p in interior_segment_r(&kk).unwrap().unwrap().sample(20) {
            let j = jacobian(&kk, &p);
            assert_abs_diff_eq!(j[0][0] + j[1][1] + j[2][2], 0.0, epsilon = 1e-14);
        }
    }

    fn fd_jacobian(kk: &ParamVector, p: &State3, h: f64) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for c in 0..3 {
            let (mut a, mut b) = (*p, *p);
            a[c] += h;
            b[c] -= h;
            let (fa, fb) = (vector_field(kk, &a), vector_field(kk, &b));
            for r in 0..3 {
                out[r][c] = (fa[r] - fb[r]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = SplitMix64::seed_from_u64(3);
        // origin included
        let mut points = vec![(k(1.5, -2.0, 0.5, 3.0), [0.0, 0.0, 0.0])];
        for _ in 0..100 {
            let kk = k(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            let mut u: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            u.sort_by(f64::total_cmp);
            points.push((kk, [u[0], u[1] - u[0], u[2] - u[1]]));
        }
        for (kk, p) in points {
            let j = jacobian(&kk, &p);
            let fd = fd_jacobian(&kk, &p, 1e-6);
            let scale = j.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
            let err = (0..9).fold(0.0_f64, |m, i| {
                m.max((j[i / 3][i % 3] - fd[i / 3][i % 3]).abs())
            });
            assert!(err / scale <= 1e-6, "k={kk} p={p:?} err={err}");
        }
        let j0 = jacobian(&k(1.5, -2.0, 0.5, 3.0), &[0.0; 3]);
        assert_eq!(j0, [[-3.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.5]]);
    }

    #[test]
    fn interior_spectrum_examples() {
        let s = interior_spectrum(&k(1.0, 1.0, 1.0, 1.0), 0.25).unwrap();
        assert_abs_diff_eq!(s.b.unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eigenvalues[1].im, 0.5, epsilon = 1e-15);
        assert!(s.agreement <= 1e-8);
        assert!(s.residual <= 1e-10);
        assert_eq!(s.classification, SpectrumClass::CenterType);

        let s = interior_spectrum(&k(2.0, 3.0, 3.0, 2.0), 0.2).unwrap();
        assert_abs_diff_eq!(s.b.unwrap(), 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvalues[1].im, 1.5_f64.sqrt(), epsilon = 1e-14);
        assert!(s.agreement <= 1e-8);

        assert!(matches!(
            interior_spectrum(&k(1.0, 1.0, 1.0, 1.0), 0.5),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            interior_spectrum(&k(1.0, 1.0, 1.0, 1.0), 0.0),
            Err(Error::OutOfRange { .. })
        ));
        assert_eq!(
            interior_spectrum(&k(2.0, 1.0, 2.0, 1.0), 0.2),
            Err(Error::NotInPSS)
        );
    }

    #[test]
    fn interior_spectrum_b_positive_along_r() {
        let kk = k(-2.0, -3.0, -3.0, -2.0);
        for i in 1..100 {
            let z = 0.4 * i as f64 / 100.0;
            let s = interior_spectrum(&kk, z).unwrap();
            assert!(s.b.unwrap() > 0.0);
            assert!(s.residual <= 1e-10, "z={z} residual={}", s.residual);
        }
    }

    #[test]
    fn edge_spectrum_examples() {
        let s = edge_spectrum_py(&k(1.0, 1.0, 1.0, 1.0), 0.9).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[1].re, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eigenvalues[2].re, -0.8, epsilon = 1e-15);
        assert_eq!(s.classification, SpectrumClass::SaddleTypeOnEdge);
        assert_eq!(s.outside_limit_segment, Some(true));
        assert!(s.agreement < 1e-12);

        let s = edge_spectrum_py(&k(2.0, 1.0, 2.0, 1.0), 1.0 / 3.0).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[1].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eigenvalues[2].re, 0.0, epsilon = 1e-15);
        assert_eq!(s.outside_limit_segment, Some(false));

        let s = edge_spectrum_py(&k(1.0, 1.0, 1.0, 1.0), 0.5).unwrap();
        assert_eq!(s.eigenvalues[1].re, 0.0);
        assert_eq!(s.eigenvalues[2].re, 0.0);

        assert!(edge_spectrum_py(&k(1.0, 1.0, 1.0, 1.0), 1.5).is_err());
    }

    #[test]
    fn edge_points_outside_limit_segment_are_saddles() {
        let kk = k(2.0, 1.0, 2.0, 1.0);
        for i in 0..=100 {
            let x0 = i as f64 / 100.0;
            let s = edge_spectrum_py(&kk, x0).unwrap();
            if s.outside_limit_segment == Some(true) {
                assert_eq!(s.classification, SpectrumClass::SaddleTypeOnEdge, "x0={x0}");
            }
            let s = edge_spectrum_xz(&kk, x0).unwrap();
            if s.outside_limit_segment == Some(true) {
                assert_eq!(s.classification, SpectrumClass::SaddleTypeOnEdge, "y0={x0}");
            }
            assert!(s.agreement < 1e-10);
        }
    }

    #[test]
    fn singular_sets_for_non_nz_parameters() {
        let sets = singular_sets(&k(0.0, 0.0, 1.0, 1.0)).unwrap();
        let labels: Vec<_> = sets.iter().map(|s| s.label.as_str()).collect();
        assert!(labels.contains(&"Sigma"));
        assert!(labels.contains(&"R_pz") && labels.contains(&"R_px"));
        assert!(!labels.contains(&"R"));

        let mut rng = SplitMix64::seed_from_u64(5);
        for kk in [
            k(0.0, 0.0, 1.0, 1.0),
            k(1.0, 0.0, 0.0, 2.0),
            k(0.0, 1.0, 1.0, 0.0),
            k(1.0, 1.0, 0.0, 0.0),
            k(1.0, 0.0, 1.0, 1.0),
        ] {
            for set in singular_sets(&kk).unwrap() {
                for _ in 0..50 {
                    let mut wts: Vec<f64> = (0..set.vertices.len()).map(|_| rng.gen()).collect();
                    let s: f64 = wts.iter().sum();
                    wts.iter_mut().for_each(|w| *w /= s);
                    let p: State3 = std::array::from_fn(|i| {
                        set.vertices.iter().zip(&wts).map(|(v, w)| v[i] * w).sum()
                    });
                    let v = vector_field(&kk, &p);
                    assert!(max_abs(&v) < 1e-15, "{} not singular for k={kk}", set.label);
                }
            }
        }
    }

    #[test]
    fn field4_sum_cancels_exactly_in_rationals() {
        let mut rng = SplitMix64::seed_from_u64(9);
        let q = |v: f64| BigRational::from_f64(v).unwrap();
        for _ in 0..200 {
            let kk: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-5.0..5.0));
            let st: [f64; 4] = std::array::from_fn(|_| rng.gen());
            let v = field4_components(kk.map(q), st.map(q));
            let sum = v.iter().fold(BigRational::zero(), |a, b| a + b);
            assert!(sum.is_zero());
        }
    }
}
