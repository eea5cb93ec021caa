//! Invariant algebraic surfaces, Darboux first integrals and their
//! evaluation.
//!
//! The planes `x = 0`, `y = 0`, `z = 0` and `x + y + z = 1` are invariant
//! with linear cofactors `K1..K4`. A product `Π f_i^{λ_i}` is a first integral
//! whenever `Σ λ_i K_i ≡ 0`; [`solve_darboux`] computes all such exponent
//! vectors and the named integrals `H`, `V`, `H̃`, `Ṽ` are the ones that
//! appear on the manifold `k1 k3 = k2 k4`.

pub mod kernel;
pub mod poly;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::equilibria::{field_components, vector_field, State3};
use crate::error::{Error, Result};
use crate::params::ParamVector;
pub use poly::{Coeff, Poly};

/// Relative threshold for coefficient comparison and pivoting.
pub const COEFF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PolySurface<T: Coeff = f64> {
    pub name: String,
    pub f: Poly<T>,
    pub cofactor: Poly<T>,
}

/// Components of the field as polynomials over `T`.
pub fn field_polys_over<T: Coeff>(k: &[T; 4]) -> [Poly<T>; 3] {
    field_components(
        k.clone().map(Poly::constant),
        Poly::xyz(),
        Poly::constant(T::one()),
    )
}

pub fn field_polys(k: &ParamVector) -> [Poly<f64>; 3] {
    field_polys_over(&k.as_array())
}

/// The four invariant planes with their cofactors, over any coefficient ring.
pub fn builtin_surfaces_over<T: Coeff>(k: &[T; 4]) -> [PolySurface<T>; 4] {
    let [k1, k2, k3, k4] = k.clone();
    let c = Poly::constant;
    let [x, y, z] = Poly::<T>::xyz();
    let one = c(T::one());
    [
        PolySurface {
            name: "f1 = x".into(),
            f: x.clone(),
            cofactor: c(k4.clone()) * x.clone()
                + c(k1.clone() + k4.clone()) * y.clone()
                + c(k4.clone()) * z.clone()
                - c(k4.clone()),
        },
        PolySurface {
            name: "f2 = y".into(),
            f: y.clone(),
            cofactor: c(-k1) * x.clone() + c(k2.clone()) * z.clone(),
        },
        PolySurface {
            name: "f3 = z".into(),
            f: z.clone(),
            cofactor: c(-k3.clone()) * x.clone()
                - c(k2 + k3.clone()) * y.clone()
                - c(k3.clone()) * z.clone()
                + c(k3.clone()),
        },
        PolySurface {
            name: "f4 = x + y + z - 1".into(),
            f: x.clone() + y + z.clone() - one,
            cofactor: c(k4) * x - c(k3) * z,
        },
    ]
}

pub fn builtin_surfaces(k: &ParamVector) -> [PolySurface; 4] {
    builtin_surfaces_over(&k.as_array())
}

/// Exact dyadic value of an `f64`.
pub fn to_rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

pub fn builtin_surfaces_exact(k: &ParamVector) -> [PolySurface<BigRational>; 4] {
    builtin_surfaces_over(&k.as_array().map(to_rational))
}

/// `X f - K f`, expanded in the monomial basis.
pub fn invariance_residual<T: Coeff>(surface: &PolySurface<T>, k: &[T; 4]) -> Poly<T> {
    let field = field_polys_over(k);
    surface.f.lie_derivative(&field) - surface.cofactor.clone() * surface.f.clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceCheck {
    pub invariant: bool,
    pub residual: Poly<f64>,
    pub max_residual: f64,
    pub tolerance: f64,
}

/// Floating-point check: every residual coefficient must be at most
/// `1e-12` times the scale of the inputs.
pub fn verify_invariance(surface: &PolySurface, k: &ParamVector) -> InvarianceCheck {
    let residual = invariance_residual(surface, &k.as_array());
    let scale = k.max_abs().max(1.0)
        * surface.f.max_abs_coeff().max(1.0)
        * surface.cofactor.max_abs_coeff().max(1.0);
    let tolerance = COEFF_TOL * scale;
    let max_residual = residual.max_abs_coeff();
    InvarianceCheck {
        invariant: max_residual <= tolerance,
        residual,
        max_residual,
        tolerance,
    }
}

/// Exact check in rational arithmetic; the residual is identically zero for
/// genuine invariant surfaces.
pub fn verify_invariance_exact(surface: &PolySurface<BigRational>, k: &ParamVector) -> bool {
    invariance_residual(surface, &k.as_array().map(to_rational)).is_zero()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntegralName {
    H,
    V,
    #[serde(rename = "H~")]
    HTilde,
    #[serde(rename = "V~")]
    VTilde,
    #[serde(rename = "custom")]
    Custom,
}

impl IntegralName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::H => "H",
            Self::V => "V",
            Self::HTilde => "H~",
            Self::VTilde => "V~",
            Self::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "H" => Some(Self::H),
            "V" => Some(Self::V),
            "H~" | "Ht" | "Htilde" => Some(Self::HTilde),
            "V~" | "Vt" | "Vtilde" => Some(Self::VTilde),
            _ => None,
        }
    }
}

/// Exponents `λ` applied to `(x, y, z, x + y + z - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstIntegralSpec {
    pub name: IntegralName,
    pub exponents: [f64; 4],
}

impl FirstIntegralSpec {
    /// `H = x^k2 z^k1`
    pub fn h(k: &ParamVector) -> Self {
        Self {
            name: IntegralName::H,
            exponents: [k.k2, 0.0, k.k1, 0.0],
        }
    }

    /// `V = y^k3 (1 - x - y - z)^k2`
    pub fn v(k: &ParamVector) -> Self {
        Self {
            name: IntegralName::V,
            exponents: [0.0, k.k3, 0.0, k.k2],
        }
    }

    /// `H̃ = x^k3 z^k4`
    pub fn h_tilde(k: &ParamVector) -> Self {
        Self {
            name: IntegralName::HTilde,
            exponents: [k.k3, 0.0, k.k4, 0.0],
        }
    }

    /// `Ṽ = y^k4 (1 - x - y - z)^k1`
    pub fn v_tilde(k: &ParamVector) -> Self {
        Self {
            name: IntegralName::VTilde,
            exponents: [0.0, k.k4, 0.0, k.k1],
        }
    }

    pub fn custom(exponents: [f64; 4]) -> Self {
        Self {
            name: IntegralName::Custom,
            exponents,
        }
    }

    pub fn named(name: IntegralName, k: &ParamVector) -> Option<Self> {
        match name {
            IntegralName::H => Some(Self::h(k)),
            IntegralName::V => Some(Self::v(k)),
            IntegralName::HTilde => Some(Self::h_tilde(k)),
            IntegralName::VTilde => Some(Self::v_tilde(k)),
            IntegralName::Custom => None,
        }
    }

    pub fn all_named(k: &ParamVector) -> [Self; 4] {
        [Self::h(k), Self::v(k), Self::h_tilde(k), Self::v_tilde(k)]
    }
}

/// Values of `x, y, z, x + y + z - 1` at `p`.
pub fn factors(p: &State3) -> [f64; 4] {
    [p[0], p[1], p[2], p[0] + p[1] + p[2] - 1.0]
}

fn factor_gradient(i: usize) -> State3 {
    match i {
        0 => [1.0, 0.0, 0.0],
        1 => [0.0, 1.0, 0.0],
        2 => [0.0, 0.0, 1.0],
        _ => [1.0, 1.0, 1.0],
    }
}

fn check_domain(spec: &FirstIntegralSpec, f: &[f64; 4], allow_positive_zero: bool) -> Result<()> {
    for (i, (&lam, &fi)) in spec.exponents.iter().zip(f).enumerate() {
        if lam != 0.0 && fi == 0.0 && !(allow_positive_zero && lam > 0.0) {
            return Err(Error::Domain(format!(
                "factor f{} vanishes with exponent {lam}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// `Π |f_i(p)|^{λ_i}`. Factors with zero exponent are omitted; a vanishing
/// factor with positive exponent gives 0, with negative exponent an error.
pub fn integral_value(spec: &FirstIntegralSpec, p: &State3) -> Result<f64> {
    let f = factors(p);
    check_domain(spec, &f, true)?;
    Ok(spec
        .exponents
        .iter()
        .zip(f)
        .filter(|(&lam, _)| lam != 0.0)
        .map(|(&lam, fi)| fi.abs().powf(lam))
        .product())
}

/// `Σ λ_i log|f_i(p)|`; the representation used for drift monitoring.
pub fn log_integral_value(spec: &FirstIntegralSpec, p: &State3) -> Result<f64> {
    let f = factors(p);
    check_domain(spec, &f, false)?;
    Ok(spec
        .exponents
        .iter()
        .zip(f)
        .filter(|(&lam, _)| lam != 0.0)
        .map(|(&lam, fi)| lam * fi.abs().ln())
        .sum())
}

/// Analytic gradient `∇F = F Σ λ_i ∇f_i / f_i`.
pub fn integral_gradient(spec: &FirstIntegralSpec, p: &State3) -> Result<State3> {
    let f = factors(p);
    check_domain(spec, &f, false)?;
    let value = integral_value(spec, p)?;
    let mut g = [0.0; 3];
    for (i, (&lam, fi)) in spec.exponents.iter().zip(f).enumerate() {
        if lam == 0.0 {
            continue;
        }
        let gi = factor_gradient(i);
        for j in 0..3 {
            g[j] += value * lam * gi[j] / fi;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LieDerivative {
    /// Closed-form `XF` (factored expressions for the named integrals,
    /// `F · Σ λ_i K_i` otherwise).
    pub closed_form: f64,
    /// `∇F · X` with the analytic gradient.
    pub gradient_route: f64,
}

/// `XF` at an interior point, computed two independent ways. Fails with
/// [`Error::RouteMismatch`] if they differ by more than `1e-9` relative.
pub fn lie_derivative(
    spec: &FirstIntegralSpec,
    k: &ParamVector,
    p: &State3,
) -> Result<LieDerivative> {
    let f = factors(p);
    check_domain(spec, &f, false)?;
    let value = integral_value(spec, p)?;
    let [x, y, z] = *p;
    let w = 1.0 - x - y - z;
    let d = k.discriminant();
    let named = FirstIntegralSpec::named(spec.name, k).filter(|n| n.exponents == spec.exponents);
    let closed_form = match named.map(|n| n.name) {
        Some(IntegralName::H) => value * w * d,
        Some(IntegralName::V) => value * x * (-d),
        Some(IntegralName::HTilde) => value * d * y,
        Some(IntegralName::VTilde) => value * (-d) * z,
        _ => {
            let combo = cofactor_combination(spec, k);
            value * combo.eval(p)
        }
    };
    let grad = integral_gradient(spec, p)?;
    let field = vector_field(k, p);
    let gradient_route = grad[0] * field[0] + grad[1] * field[1] + grad[2] * field[2];

    // Magnitude of the individual terms bounds the cancellation error.
    let surfaces = builtin_surfaces(k);
    let term_scale: f64 = spec
        .exponents
        .iter()
        .zip(&surfaces)
        .map(|(lam, s)| (lam * s.cofactor.eval(p)).abs())
        .sum::<f64>()
        * value.abs();
    let gap = (closed_form - gradient_route).abs();
    if gap > 1e-9 * term_scale.max(closed_form.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::RouteMismatch(format!(
            "XF closed form {closed_form:e} vs gradient route {gradient_route:e}"
        )));
    }
    Ok(LieDerivative {
        closed_form,
        gradient_route,
    })
}

/// `Σ λ_i K_i` as a polynomial.
pub fn cofactor_combination(spec: &FirstIntegralSpec, k: &ParamVector) -> Poly<f64> {
    builtin_surfaces(k)
        .iter()
        .zip(spec.exponents)
        .fold(Poly::zero(), |acc, (s, lam)| acc + s.cofactor.scale(&lam))
}

const MONOMIALS: [[u32; 3]; 4] = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]];

/// Coefficient-matching matrix: row = monomial of `{1, x, y, z}`, column = `K_i`.
pub fn darboux_matrix(k: &ParamVector) -> Vec<Vec<f64>> {
    let surfaces = builtin_surfaces(k);
    MONOMIALS
        .iter()
        .map(|&e| surfaces.iter().map(|s| s.cofactor.coeff(e)).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarbouxSolution {
    pub matrix: Vec<Vec<f64>>,
    pub rank: usize,
    /// Basis of `{λ : Σ λ_i K_i ≡ 0}`, unit max-norm, first nonzero positive.
    pub kernel: Vec<[f64; 4]>,
    /// Determinants of the decoupled systems in `(λ1, λ3)` and `(λ2, λ4)`.
    pub subsystem_determinants: [f64; 2],
    pub discriminant: f64,
}

impl DarbouxSolution {
    /// Distance from `v / ‖v‖` to the span of the kernel basis.
    pub fn span_residual(&self, v: &[f64; 4]) -> f64 {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        let mut r: Vec<f64> = v.iter().map(|a| a / n).collect();
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        for b in &self.kernel {
            let mut q = b.to_vec();
            for o in &ortho {
                let d: f64 = q.iter().zip(o).map(|(a, b)| a * b).sum();
                q.iter_mut().zip(o).for_each(|(a, b)| *a -= d * b);
            }
            let qn = q.iter().map(|a| a * a).sum::<f64>().sqrt();
            if qn > 1e-14 {
                q.iter_mut().for_each(|a| *a /= qn);
                ortho.push(q);
            }
        }
        for o in &ortho {
            let d: f64 = r.iter().zip(o).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(o).for_each(|(a, b)| *a -= d * b);
        }
        r.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

pub fn solve_darboux(k: &ParamVector) -> DarbouxSolution {
    let matrix = darboux_matrix(k);
    let mut reduced = matrix.clone();
    let rank = kernel::rref(&mut reduced, COEFF_TOL).len();
    let kernel = kernel::kernel_basis(&matrix, COEFF_TOL)
        .into_iter()
        .map(|v| [v[0], v[1], v[2], v[3]])
        .collect();
    let (k1, k2, k3, k4) = (k.k1, k.k2, k.k3, k.k4);
    DarbouxSolution {
        matrix,
        rank,
        kernel,
        subsystem_determinants: [k1 * k3 - k2 * k4, k2 * k4 - k3 * k1],
        discriminant: k.discriminant(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub name: IntegralName,
    pub exponents: [f64; 4],
    /// `Σ λ_i K_i ≡ 0` within tolerance.
    pub cofactors_cancel: bool,
    /// Some exponent is nonzero, so the product is non-constant on `T`.
    pub nonconstant: bool,
    pub max_residual: f64,
    pub certified: bool,
}

pub fn certify(spec: &FirstIntegralSpec, k: &ParamVector) -> Certification {
    let combo = cofactor_combination(spec, k);
    let lam_scale = spec.exponents.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = COEFF_TOL * (lam_scale * k.max_abs()).max(1.0);
    let max_residual = combo.max_abs_coeff();
    let cofactors_cancel = max_residual <= tol;
    let nonconstant = lam_scale > 0.0;
    Certification {
        name: spec.name,
        exponents: spec.exponents,
        cofactors_cancel,
        nonconstant,
        max_residual,
        certified: cofactors_cancel && nonconstant,
    }
}

/// Named integrals that are certified first integrals for `k`.
pub fn certified_integrals(k: &ParamVector) -> Vec<FirstIntegralSpec> {
    FirstIntegralSpec::all_named(k)
        .into_iter()
        .filter(|s| certify(s, k).certified)
        .collect()
}

/// `C* = α/(α+β) · (β/(α+β))^{β/α}`, the maximal level of a face leaf.
pub fn c_star(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha * beta > 0.0) {
        return Err(Error::Sign(format!(
            "alpha*beta = {} must be positive",
            alpha * beta
        )));
    }
    let s = alpha + beta;
    Ok(alpha / s * (beta / s).powf(beta / alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_traits::{FromPrimitive, One, Signed, Zero};
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::SplitMix64;

    fn k(a: f64, b: f64, c: f64, d: f64) -> ParamVector {
        ParamVector::new(a, b, c, d)
    }

    fn random_k(rng: &mut SplitMix64) -> ParamVector {
        k(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        )
    }

    fn interior(rng: &mut SplitMix64) -> State3 {
        let mut u: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
        u.sort_by(f64::total_cmp);
        [u[0], u[1] - u[0], u[2] - u[1]]
    }

    #[test]
    fn builtin_surfaces_are_invariant() {
        let mut rng = SplitMix64::seed_from_u64(1);
        for _ in 0..50 {
            let kk = random_k(&mut rng);
            for s in builtin_surfaces(&kk) {
                assert!(verify_invariance(&s, &kk).invariant, "{} k={kk}", s.name);
            }
            for s in builtin_surfaces_exact(&kk) {
                assert!(verify_invariance_exact(&s, &kk), "{} k={kk}", s.name);
            }
        }
    }

    #[test]
    fn cofactor_examples() {
        let kk = k(1.0, 1.0, 1.0, 1.0);
        let s = builtin_surfaces(&kk);
        let [x, _, z] = Poly::<f64>::xyz();
        assert_eq!(s[3].cofactor, x - z);
        for s in builtin_surfaces(&k(0.0, 0.0, 0.0, 0.0)) {
            assert!(s.cofactor.is_zero());
        }
    }

    #[test]
    fn wrong_cofactor_is_detected() {
        let kk = k(2.0, 1.0, 2.0, 1.0);
        let s = builtin_surfaces(&kk);
        let check = verify_invariance(&s[0], &kk);
        assert!(check.invariant);
        assert!(check.residual.is_zero());
        let wrong = PolySurface {
            name: "x with K2".into(),
            f: s[0].f.clone(),
            cofactor: s[1].cofactor.clone(),
        };
        let check = verify_invariance(&wrong, &kk);
        assert!(!check.invariant);
        assert!(check.max_residual > 0.1);
    }

    #[test]
    fn custom_surface_goes_through_same_check() {
        // xz is invariant with cofactor K1 + K3
        let kk = k(1.5, -0.5, 2.0, 3.0);
        let s = builtin_surfaces(&kk);
        let surface = PolySurface {
            name: "xz".into(),
            f: s[0].f.clone() * s[2].f.clone(),
            cofactor: s[0].cofactor.clone() + s[2].cofactor.clone(),
        };
        assert!(verify_invariance(&surface, &kk).invariant);
        let bogus = PolySurface {
            name: "x + z".into(),
            f: s[0].f.clone() + s[2].f.clone(),
            cofactor: s[0].cofactor.clone(),
        };
        assert!(!verify_invariance(&bogus, &kk).invariant);
    }

    /// Exact rank of the coefficient matrix in rational arithmetic.
    fn exact_rank(kk: &ParamVector) -> usize {
        let surfaces = builtin_surfaces_exact(kk);
        let mut m: Vec<Vec<BigRational>> = MONOMIALS
            .iter()
            .map(|&e| surfaces.iter().map(|s| s.cofactor.coeff(e)).collect())
            .collect();
        let mut rank = 0;
        for c in 0..4 {
            let Some(p) = (rank..4).find(|&r| !m[r][c].is_zero()) else {
                continue;
            };
            m.swap(rank, p);
            for r in 0..4 {
                if r != rank && !m[r][c].is_zero() {
                    let f = m[r][c].clone() / m[rank][c].clone();
                    for j in 0..4 {
                        let v = m[rank][j].clone() * f.clone();
                        m[r][j] = m[r][j].clone() - v;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn darboux_kernel_examples() {
        let kk = k(2.0, 3.0, 3.0, 2.0);
        let sol = solve_darboux(&kk);
        assert_eq!(sol.kernel.len(), 2);
        assert!(sol.span_residual(&[3.0, 0.0, 2.0, 0.0]) < 1e-12);
        assert!(sol.span_residual(&[0.0, 3.0, 0.0, 3.0]) < 1e-12);
        assert!(sol.span_residual(&[1.0, 0.0, 0.0, 0.0]) > 0.1);
        assert_eq!(sol.subsystem_determinants, [0.0, 0.0]);

        let kk = k(2.0, 1.0, 2.0, 1.0);
        let sol = solve_darboux(&kk);
        assert!(sol.kernel.is_empty());
        assert_eq!(sol.subsystem_determinants[0], 3.0);
        assert_eq!(sol.subsystem_determinants[1], -3.0);

        // oracle: exact rank of the assembled matrix
        for kk in [
            k(1.0, 0.0, 1.0, 0.0),
            k(0.0, 1.0, 0.0, 1.0),
            k(1.0, 0.0, 0.0, 0.0),
        ] {
            let sol = solve_darboux(&kk);
            assert_eq!(sol.rank, exact_rank(&kk), "k={kk}");
            assert_eq!(sol.kernel.len(), 4 - exact_rank(&kk));
        }
        assert!(solve_darboux(&k(1.0, 0.0, 1.0, 0.0)).kernel.is_empty());
        assert!(solve_darboux(&k(0.0, 1.0, 0.0, 1.0)).kernel.is_empty());
        let sol = solve_darboux(&k(1.0, 0.0, 0.0, 0.0));
        assert_eq!(sol.kernel.len(), 2);
        assert!(sol.span_residual(&[0.0, 0.0, 0.0, 1.0]) < 1e-12);
        assert!(sol.span_residual(&[0.0, 0.0, 1.0, 0.0]) < 1e-12);
    }

    #[test]
    fn kernel_dimension_tracks_discriminant() {
        let mut rng = SplitMix64::seed_from_u64(2);
        for _ in 0..200 {
            let mut kk = random_k(&mut rng);
            if rng.gen_bool(0.5) {
                kk.k4 = kk.k1 * kk.k3 / kk.k2;
            }
            let sol = solve_darboux(&kk);
            let on_s = kk.discriminant().abs() <= 1e-12 * kk.max_abs().powi(2);
            assert_eq!(sol.kernel.len() >= 2, on_s, "k={kk}");
            assert_eq!(sol.rank, 4 - sol.kernel.len());
            for v in &sol.kernel {
                let combo = cofactor_combination(&FirstIntegralSpec::custom(*v), &kk);
                assert!(combo.max_abs_coeff() < 1e-10);
            }
        }
    }

    #[test]
    fn named_values() {
        let h = FirstIntegralSpec::h(&k(1.0, 1.0, 1.0, 1.0));
        assert_abs_diff_eq!(integral_value(&h, &[0.25, 0.25, 0.25]).unwrap(), 1.0 / 16.0);
        let v = FirstIntegralSpec::v(&k(2.0, 1.0, 2.0, 1.0));
        assert_abs_diff_eq!(
            integral_value(&v, &[0.2, 0.2, 0.2]).unwrap(),
            0.016,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            log_integral_value(&v, &[0.2, 0.2, 0.2]).unwrap(),
            0.016_f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn domain_rules_at_the_boundary() {
        let kk = k(1.0, 1.0, 1.0, 1.0);
        let h = FirstIntegralSpec::h(&kk);
        // y = 0 does not enter H
        assert!(integral_value(&h, &[0.3, 0.0, 0.3]).is_ok());
        assert_eq!(integral_value(&h, &[0.0, 0.3, 0.3]).unwrap(), 0.0);
        assert!(log_integral_value(&h, &[0.0, 0.3, 0.3]).is_err());
        let neg = FirstIntegralSpec::h(&-kk);
        assert!(matches!(
            integral_value(&neg, &[0.0, 0.3, 0.3]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn tilde_power_identities_hold() {
        let mut rng = SplitMix64::seed_from_u64(4);
        for _ in 0..100 {
            let (k1, k2, k3) = (
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
            );
            let kk = k(k1, k2, k3, k1 * k3 / k2);
            let p = interior(&mut rng);
            let lh = log_integral_value(&FirstIntegralSpec::h(&kk), &p).unwrap();
            let lht = log_integral_value(&FirstIntegralSpec::h_tilde(&kk), &p).unwrap();
            let lv = log_integral_value(&FirstIntegralSpec::v(&kk), &p).unwrap();
            let lvt = log_integral_value(&FirstIntegralSpec::v_tilde(&kk), &p).unwrap();
            let tol = 1e-12 * (1.0 + lh.abs() + lht.abs()) * kk.max_abs();
            assert!((kk.k1 * lht - kk.k4 * lh).abs() <= tol);
            let tol = 1e-12 * (1.0 + lv.abs() + lvt.abs()) * kk.max_abs();
            assert!((kk.k3 * lvt - kk.k4 * lv).abs() <= tol);
        }
    }

    #[test]
    fn lie_derivative_examples() {
        let kk = k(2.0, 1.0, 2.0, 1.0);
        let p = [0.2, 0.2, 0.2];
        let xh = lie_derivative(&FirstIntegralSpec::h(&kk), &kk, &p).unwrap();
        assert_abs_diff_eq!(xh.closed_form, 0.0096, epsilon = 1e-15);
        assert_abs_diff_eq!(xh.gradient_route, 0.0096, epsilon = 1e-14);

        let mut rng = SplitMix64::seed_from_u64(8);
        let on_s = k(2.0, 3.0, 3.0, 2.0);
        for _ in 0..100 {
            let p = interior(&mut rng);
            for spec in FirstIntegralSpec::all_named(&on_s) {
                let d = lie_derivative(&spec, &on_s, &p).unwrap();
                assert_eq!(d.closed_form, 0.0);
                let scale = integral_value(&spec, &p).unwrap();
                assert!(d.gradient_route.abs() <= 1e-12 * scale.max(1.0));
            }
            // XH has the sign of the discriminant in PS+
            let plus = k(2.0, 1.0, 2.0, 1.0);
            let minus = k(1.0, 2.0, 1.0, 2.0);
            assert!(
                lie_derivative(&FirstIntegralSpec::h(&plus), &plus, &p)
                    .unwrap()
                    .closed_form
                    > 0.0
            );
            assert!(
                lie_derivative(&FirstIntegralSpec::h(&minus), &minus, &p)
                    .unwrap()
                    .closed_form
                    < 0.0
            );
        }
    }

    #[test]
    fn lie_derivative_custom_routes_agree() {
        let mut rng = SplitMix64::seed_from_u64(12);
        for _ in 0..100 {
            let kk = random_k(&mut rng);
            let spec = FirstIntegralSpec::custom(std::array::from_fn(|_| rng.gen_range(-3.0..3.0)));
            let p = interior(&mut rng);
            lie_derivative(&spec, &kk, &p).unwrap();
        }
    }

    #[test]
    fn h_and_v_gradients_are_independent() {
        let mut rng = SplitMix64::seed_from_u64(6);
        let kk = k(2.0, 3.0, 3.0, 2.0);
        for _ in 0..100 {
            let p = interior(&mut rng);
            let gh = integral_gradient(&FirstIntegralSpec::h(&kk), &p).unwrap();
            let gv = integral_gradient(&FirstIntegralSpec::v(&kk), &p).unwrap();
            let cross = [
                gh[1] * gv[2] - gh[2] * gv[1],
                gh[2] * gv[0] - gh[0] * gv[2],
                gh[0] * gv[1] - gh[1] * gv[0],
            ];
            let n = |v: &[f64; 3]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let w = 1.0 - p[0] - p[1] - p[2];
            let on_dependent_set = (kk.k3 * w - kk.k2 * p[1]).abs() < 1e-9
                && (kk.k2 * p[2] - kk.k1 * p[0]).abs() < 1e-9;
            if !on_dependent_set {
                assert!(n(&cross) > 1e-10 * n(&gh) * n(&gv));
            }
        }
    }

    #[test]
    fn certification_follows_the_manifold() {
        let on = k(2.0, 3.0, 3.0, 2.0);
        assert_eq!(certified_integrals(&on).len(), 4);
        assert!(certified_integrals(&k(2.0, 1.0, 2.0, 1.0)).is_empty());
        // S without NZ: H and V~ survive when only k1 != 0
        let names: Vec<_> = certified_integrals(&k(1.0, 0.0, 0.0, 0.0))
            .iter()
            .map(|s| s.name)
            .collect();
        assert_eq!(names, vec![IntegralName::H, IntegralName::VTilde]);
    }

    #[test]
    fn c_star_examples() {
        assert_abs_diff_eq!(c_star(1.0, 1.0).unwrap(), 0.25, epsilon = 1e-16);
        assert_abs_diff_eq!(c_star(1.0, 2.0).unwrap(), 4.0 / 27.0, epsilon = 1e-16);
        for c in [0.1, 3.0, 17.0] {
            assert_abs_diff_eq!(
                c_star(c * 1.3, c * 0.4).unwrap(),
                c_star(1.3, 0.4).unwrap(),
                epsilon = 1e-15
            );
        }
        assert!(matches!(c_star(1.0, -1.0), Err(Error::Sign(_))));
        assert!(c_star(0.0, 1.0).is_err());
        assert!(c_star(-1.0, -2.0).is_ok());
    }

    #[test]
    fn exact_residual_is_zero_even_with_awkward_floats() {
        let kk = k(0.1, 0.7, 0.3, 0.2);
        for s in builtin_surfaces_exact(&kk) {
            let r = invariance_residual(&s, &kk.as_array().map(to_rational));
            assert!(r.is_zero());
        }
        let _ = (
            BigRational::one(),
            BigRational::from_f64(0.5).unwrap().abs(),
        );
    }
}
