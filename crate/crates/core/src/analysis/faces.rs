//! Foliations of the boundary faces and the matching of leaves across the
//! edges `R_py` and `R_xz`.
//!
//! On each face the flow has a first integral whose leaves meet the singular
//! edge where `u^{β/α} (1 - u) = C`:
//!
//! | face | α | β | u | edge point |
//! |------|---|---|---|------------|
//! | Y (`y = 0`) | k4 | k3 | x | `(u, 0, 1-u)` |
//! | Σ (`x+y+z = 1`) | k1 | k2 | x | `(u, 0, 1-u)` |
//! | X (`x = 0`) | k2 | k3 | y | `(0, u, 0)` |
//! | Z (`z = 0`) | k1 | k4 | y | `(0, u, 0)` |

use serde::Serialize;

use crate::darboux::c_star;
use crate::equilibria::State3;
use crate::error::{Error, Result};
use crate::flow::{Dopri5, Tolerances};
use crate::params::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Face {
    X,
    Y,
    Z,
    #[serde(rename = "Sigma")]
    Sigma,
}

impl Face {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "X" | "x" => Some(Self::X),
            "Y" | "y" => Some(Self::Y),
            "Z" | "z" => Some(Self::Z),
            "Sigma" | "sigma" | "S" | "Σ" => Some(Self::Sigma),
            _ => None,
        }
    }

    /// `(α, β)` for this face.
    pub fn exponents(&self, k: &ParamVector) -> (f64, f64) {
        match self {
            Self::Y => (k.k4, k.k3),
            Self::Sigma => (k.k1, k.k2),
            Self::X => (k.k2, k.k3),
            Self::Z => (k.k1, k.k4),
        }
    }

    /// Edge point with abscissa `u`.
    pub fn edge_point(&self, u: f64) -> State3 {
        match self {
            Self::Y | Self::Sigma => [u, 0.0, 1.0 - u],
            Self::X | Self::Z => [0.0, u, 0.0],
        }
    }
}

/// Leaf profile `u^r (1 - u)` with `r = β/α`.
fn profile(u: f64, r: f64) -> f64 {
    u.powf(r) * (1.0 - u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceLeaf {
    pub face: Face,
    pub c: f64,
    pub c_star: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Abscissa of the leaf's apex `β/(α+β)`.
    pub u_star: f64,
    /// Edge abscissae of the intersections, ascending (one when `C = C*`).
    pub abscissae: Vec<f64>,
    pub intersections: Vec<State3>,
    /// Largest `|u^{β/α}(1-u) - C|` at the intersections.
    pub residual: f64,
}

impl FaceLeaf {
    /// Point of the leaf over abscissa `u` (between the intersections).
    pub fn point(&self, u: f64) -> State3 {
        let v = self.c * u.powf(-self.beta / self.alpha);
        match self.face {
            Face::Y => [u, 0.0, v],
            Face::Sigma => [u, 1.0 - u - v, v],
            Face::X => [0.0, u, 1.0 - u - v],
            Face::Z => [1.0 - u - v, u, 0.0],
        }
    }
}

/// Root of `u^r (1-u) = c` on `[lo, hi]` where the profile is monotone.
fn bisect_profile(r: f64, c: f64, mut lo: f64, mut hi: f64, increasing: bool) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m == lo || m == hi {
            break;
        }
        let below = profile(m, r) < c;
        if below == increasing {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Edge abscissae of the leaf at level `c`: the solutions of
/// `u^r (1-u) = c` on either side of the apex.
fn leaf_roots(r: f64, c: f64, u_star: f64, c_max: f64) -> Vec<f64> {
    if (c - c_max).abs() <= 1e-15 * c_max {
        return vec![u_star];
    }
    vec![
        bisect_profile(r, c, 0.0, u_star, true),
        bisect_profile(r, c, u_star, 1.0, false),
    ]
}

pub fn face_leaf(face: Face, k: &ParamVector, c: f64) -> Result<FaceLeaf> {
    let (alpha, beta) = face.exponents(k);
    let cs = c_star(alpha, beta)?;
    if !(c > 0.0) {
        return Err(Error::OutOfRange {
            what: "C",
            value: c,
            range: format!("(0, {cs}]"),
        });
    }
    if c > cs * (1.0 + 1e-15) {
        return Err(Error::LevelOutOfRange { c, c_star: cs });
    }
    let r = beta / alpha;
    let u_star = beta / (alpha + beta);
    let abscissae = leaf_roots(r, c.min(cs), u_star, cs);
    let residual = abscissae
        .iter()
        .map(|&u| (profile(u, r) - c).abs())
        .fold(0.0, f64::max);
    Ok(FaceLeaf {
        face,
        c,
        c_star: cs,
        alpha,
        beta,
        u_star,
        intersections: abscissae.iter().map(|&u| face.edge_point(u)).collect(),
        abscissae,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EdgeName {
    #[serde(rename = "R_py")]
    Py,
    #[serde(rename = "R_xz")]
    Xz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeteroclinicMatch {
    pub edge: EdgeName,
    pub x0: f64,
    /// Level of the first face's leaf (Y, resp. X) through the edge point.
    pub c1: f64,
    /// Level of the second face's leaf (Σ, resp. Z).
    pub c2: f64,
    pub x1: f64,
    pub x2: f64,
    pub matched: bool,
}

/// Leaves must agree this closely for a closed connection.
pub const MATCH_TOL: f64 = 1e-9;

fn other_root(face: Face, k: &ParamVector, u0: f64) -> Result<(f64, f64)> {
    let (alpha, beta) = face.exponents(k);
    let r = beta / alpha;
    let u_star = beta / (alpha + beta);
    if (u0 - u_star).abs() <= 1e-12 {
        return Err(Error::DegenerateLeaf(u0));
    }
    let c = profile(u0, r);
    let root = if u0 < u_star {
        bisect_profile(r, c, u_star, 1.0, false)
    } else {
        bisect_profile(r, c, 0.0, u_star, true)
    };
    Ok((c, root))
}

fn match_on(edge: EdgeName, k: &ParamVector, x0: f64) -> Result<HeteroclinicMatch> {
    if !k.is_ps() {
        return Err(Error::NotInPS);
    }
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(Error::OutOfRange {
            what: "x0",
            value: x0,
            range: "(0, 1)".into(),
        });
    }
    let (f1, f2) = match edge {
        EdgeName::Py => (Face::Y, Face::Sigma),
        EdgeName::Xz => (Face::X, Face::Z),
    };
    let (c1, x1) = other_root(f1, k, x0)?;
    let (c2, x2) = other_root(f2, k, x0)?;
    Ok(HeteroclinicMatch {
        edge,
        x0,
        c1,
        c2,
        x1,
        x2,
        matched: (x1 - x2).abs() <= MATCH_TOL,
    })
}

/// Follows the Y-leaf and the Σ-leaf through `(x0, 0, 1-x0)` to their
/// second intersection with `R_py`.
pub fn heteroclinic_match(k: &ParamVector, x0: f64) -> Result<HeteroclinicMatch> {
    match_on(EdgeName::Py, k, x0)
}

/// Same construction on `R_xz` with faces X and Z; `y0` is the abscissa.
pub fn heteroclinic_match_xz(k: &ParamVector, y0: f64) -> Result<HeteroclinicMatch> {
    match_on(EdgeName::Xz, k, y0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaceFlowResult {
    pub face: Face,
    /// Edge abscissa reached farther from the start.
    pub terminal_abscissa: f64,
    /// Largest deviation of the face integral (log form) along the run.
    pub leaf_residual: f64,
}

/// Planar field of a face in its own coordinates `(u, n)`, where `n` is the
/// coordinate that vanishes on the edge.
fn face_field(face: Face, k: ParamVector) -> impl Fn(&[f64; 2]) -> [f64; 2] {
    move |s: &[f64; 2]| {
        let (u, n) = (s[0], s[1]);
        match face {
            // (x, w) with z = 1 - x - w: x' = -k4 x w, w' = w (k4 x - k3 z)
            Face::Y => {
                let z = 1.0 - u - n;
                [-k.k4 * u * n, n * (k.k4 * u - k.k3 * z)]
            }
            // (x, y) with z = 1 - x - y
            Face::Sigma => {
                let z = 1.0 - u - n;
                [k.k1 * u * n, n * (k.k2 * z - k.k1 * u)]
            }
            // (y, z) with w = 1 - y - z
            Face::X => {
                let w = 1.0 - u - n;
                [k.k2 * u * n, n * (k.k3 * w - k.k2 * u)]
            }
            // (y, x) with w = 1 - x - y
            Face::Z => {
                let w = 1.0 - u - n;
                [-k.k1 * n * u, n * (k.k1 * u - k.k4 * w)]
            }
        }
    }
}

/// `log` of the face integral at `(u, n)`; constant along the planar flow.
fn face_log_integral(face: Face, k: &ParamVector, s: &[f64; 2]) -> f64 {
    let (alpha, beta) = face.exponents(k);
    let (u, n) = (s[0], s[1]);
    // the leaf is v = C u^{-β/α}, v = 1 - u - n in every face's coordinates
    (1.0 - u - n).ln() + beta / alpha * u.ln()
}

/// Integrates the planar flow of `face` from a point on the leaf through
/// the edge abscissa `u0`, both forward and backward, until the orbit is back
/// within `1e-12` of the edge; returns the terminal abscissa farther from `u0`.
pub fn face_flow_terminal(face: Face, k: &ParamVector, u0: f64) -> Result<FaceFlowResult> {
    let (alpha, beta) = face.exponents(k);
    c_star(alpha, beta)?;
    let r = beta / alpha;
    let u_star = beta / (alpha + beta);
    if (u0 - u_star).abs() <= 1e-12 {
        return Err(Error::DegenerateLeaf(u0));
    }
    let c = profile(u0, r);
    // step into the face along the leaf, toward the apex
    let u = u0 + 1e-3 * (u_star - u0);
    let n = 1.0 - u - c * u.powf(-r);
    let start = [u, n];
    let log_c = face_log_integral(face, k, &start);

    let tol = Tolerances::new(1e-12, 1e-15)?;
    let mut best = u0;
    let mut leaf_residual = 0.0_f64;
    for sign in [1.0, -1.0] {
        let kk = if sign > 0.0 { *k } else { -*k };
        let mut stepper = Dopri5::new(face_field(face, kk), start, 1e4, tol)?;
        while stepper.step()?.is_some() {
            let s = stepper.state();
            if s[1] > 0.0 {
                leaf_residual = leaf_residual.max((face_log_integral(face, k, s) - log_c).abs());
            }
            if s[1] <= 1e-12 {
                break;
            }
        }
        let end = stepper.state()[0];
        if (end - u0).abs() > (best - u0).abs() {
            best = end;
        }
    }
    Ok(FaceFlowResult {
        face,
        terminal_abscissa: best,
        leaf_residual,
    })
}
