//! Dormand-Prince 5(4) with PI step-size control and 4th-order dense output.
//!
//! The stepper integrates autonomous systems `y' = f(y)` forward in its own
//! time variable. Backward runs are obtained by the caller negating the field.

use crate::error::{Error, Result};

pub trait System<const N: usize> {
    fn eval(&self, y: &[f64; N]) -> [f64; N];
}

impl<F, const N: usize> System<N> for F
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    fn eval(&self, y: &[f64; N]) -> [f64; N] {
        self(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Result<Self> {
        if !(rel > 0.0 && abs > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be positive (rel = {rel}, abs = {abs})"
            )));
        }
        Ok(Self { rel, abs })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// c6 = c7 = 1 are implicit in the autonomous form.
const _: () = assert!(C2 < C3 && C3 < C4 && C4 < C5);

/// One accepted step with its interpolation coefficients. `t0` and `h` are
/// in the caller's time, so `h` is negative for backward runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> [f64; N] {
        self.r[0]
    }

    pub fn end(&self) -> [f64; N] {
        std::array::from_fn(|i| self.r[0][i] + self.r[1][i])
    }

    pub fn theta(&self, t: f64) -> f64 {
        (t - self.t0) / self.h
    }

    /// State at fraction `theta` of the step.
    pub fn eval_theta(&self, theta: f64) -> [f64; N] {
        let t1 = 1.0 - theta;
        let r = &self.r;
        std::array::from_fn(|i| {
            r[0][i] + theta * (r[1][i] + t1 * (r[2][i] + theta * (r[3][i] + t1 * r[4][i])))
        })
    }

    /// Time derivative of the interpolant at fraction `theta`.
    pub fn derivative_theta(&self, theta: f64) -> [f64; N] {
        let t1 = 1.0 - theta;
        let r = &self.r;
        std::array::from_fn(|i| {
            let s = r[3][i] + t1 * r[4][i];
            let q = r[2][i] + theta * s;
            let p = r[1][i] + t1 * q;
            let ds = -r[4][i];
            let dq = s + theta * ds;
            let dp = -q + t1 * dq;
            (p + theta * dp) / self.h
        })
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        self.eval_theta(self.theta(t))
    }

    /// Same step seen in reversed time: `t ↦ -t`.
    pub fn time_reversed(mut self) -> Self {
        self.t0 = -self.t0;
        self.h = -self.h;
        self
    }
}

struct Attempt<const N: usize> {
    y1: [f64; N],
    f1: [f64; N],
    err: f64,
    r: [[f64; N]; 5],
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
}

fn attempt<S: System<N>, const N: usize>(
    sys: &S,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    tol: Tolerances,
) -> Attempt<N> {
    let k2 = sys.eval(&axpy(y, h, &[(A21, k1)]));
    let k3 = sys.eval(&axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = sys.eval(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = sys.eval(&axpy(
        y,
        h,
        &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)],
    ));
    let k6 = sys.eval(&axpy(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y1 = axpy(
        y,
        h,
        &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = sys.eval(&y1);

    let mut sq = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = tol.abs + tol.rel * y[i].abs().max(y1[i].abs());
        sq += (e / sc).powi(2);
    }
    let err = (sq / N as f64).sqrt();

    let mut r = [[0.0; N]; 5];
    for i in 0..N {
        let dy = y1[i] - y[i];
        let bspl = h * k1[i] - dy;
        r[0][i] = y[i];
        r[1][i] = dy;
        r[2][i] = bspl;
        r[3][i] = dy - h * k7[i] - bspl;
        r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Attempt { y1, f1: k7, err, r }
}

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Adaptive stepper over `[0, t_end]`.
pub struct Dopri5<S, const N: usize> {
    sys: S,
    tol: Tolerances,
    t: f64,
    t_end: f64,
    y: [f64; N],
    f: [f64; N],
    h: f64,
    h_max: f64,
    facold: f64,
    stats: StepStats,
}

impl<S: System<N>, const N: usize> Dopri5<S, N> {
    pub fn new(sys: S, y0: [f64; N], t_end: f64, tol: Tolerances) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "integration length must be positive and finite, got {t_end}"
            )));
        }
        let f = sys.eval(&y0);
        let mut s = Self {
            sys,
            tol,
            t: 0.0,
            t_end,
            y: y0,
            f,
            h: 0.0,
            h_max: t_end,
            facold: 1e-4,
            stats: StepStats {
                evaluations: 1,
                ..Default::default()
            },
        };
        s.h = s.initial_step();
        Ok(s)
    }

    fn initial_step(&mut self) -> f64 {
        let (y0, f0) = (&self.y, &self.f);
        let sk: [f64; N] = std::array::from_fn(|i| self.tol.abs + self.tol.rel * y0[i].abs());
        let dnf: f64 = (0..N).map(|i| (f0[i] / sk[i]).powi(2)).sum();
        let dny: f64 = (0..N).map(|i| (y0[i] / sk[i]).powi(2)).sum();
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.h_max);
        let y1 = axpy(y0, h, &[(1.0, f0)]);
        let f1 = self.sys.eval(&y1);
        self.stats.evaluations += 1;
        let der2 = (0..N)
            .map(|i| ((f1[i] - f0[i]) / sk[i]).powi(2))
            .sum::<f64>()
            .sqrt()
            / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(1.0 / 5.0)
        };
        (100.0 * h).min(h1).min(self.h_max)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64; N] {
        &self.y
    }

    /// Field value at the current state.
    pub fn derivative(&self) -> &[f64; N] {
        &self.f
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    pub fn finished(&self) -> bool {
        self.t >= self.t_end
    }

    /// Advances by one accepted step. Returns `None` once `t_end` is reached.
    pub fn step(&mut self) -> Result<Option<DenseStep<N>>> {
        if self.finished() {
            return Ok(None);
        }
        let mut rejected_last = false;
        loop {
            let mut h = self.h;
            let last = self.t + 1.01 * h >= self.t_end;
            if last {
                h = self.t_end - self.t;
            }
            if !(h >= 1e-14 * self.t_end) {
                return Err(Error::StepSizeUnderflow { t: self.t, h });
            }
            let a = attempt(&self.sys, &self.y, &self.f, h, self.tol);
            self.stats.evaluations += 6;
            // non-finite error estimates are rejected with maximal shrink
            let fac11 = if a.err.is_finite() {
                a.err.powf(EXPO1)
            } else {
                1e3
            };
            if a.err <= 1.0 {
                let fac =
                    (fac11 / self.facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut hnew = h / fac;
                if rejected_last {
                    hnew = hnew.min(h);
                }
                self.facold = a.err.max(1e-4);
                self.stats.accepted += 1;
                let t0 = self.t;
                self.t = if last { self.t_end } else { self.t + h };
                self.y = a.y1;
                self.f = a.f1;
                self.h = hnew.min(self.h_max);
                return Ok(Some(DenseStep { t0, h, r: a.r }));
            }
            self.stats.rejected += 1;
            rejected_last = true;
            self.h = h / (fac11 / SAFE).min(1.0 / FAC_MIN);
        }
    }
}

/// Classical fixed-step integration with the 5th-order solution, used for
/// convergence-order checks.
pub fn fixed_step<S: System<N>, const N: usize>(
    sys: &S,
    y0: [f64; N],
    h: f64,
    n: usize,
) -> [f64; N] {
    let tol = Tolerances::default();
    let mut y = y0;
    let mut f = sys.eval(&y);
    for _ in 0..n {
        let a = attempt(sys, &y, &f, h, tol);
        y = a.y1;
        f = a.f1;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn decay(y: &[f64; 1]) -> [f64; 1] {
        [-y[0]]
    }

    fn rotation(y: &[f64; 2]) -> [f64; 2] {
        [-y[1], y[0]]
    }

    #[test]
    fn tableau_rows_sum_to_nodes() {
        assert_abs_diff_eq!(A31 + A32, C3, epsilon = 1e-15);
        assert_abs_diff_eq!(A41 + A42 + A43, C4, epsilon = 1e-15);
        assert_abs_diff_eq!(A51 + A52 + A53 + A54, C5, epsilon = 1e-14);
        assert_abs_diff_eq!(A61 + A62 + A63 + A64 + A65, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(A71 + A73 + A74 + A75 + A76, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(E1 + E3 + E4 + E5 + E6 + E7, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn observed_order_on_linear_problems() {
        let hs = [0.2, 0.1, 0.05];
        let err = |h: f64| {
            let n = (2.0 / h).round() as usize;
            let y = fixed_step(&decay, [1.0], h, n);
            (y[0] - (-2.0_f64).exp()).abs()
        };
        for w in hs.windows(2) {
            let order = (err(w[0]) / err(w[1])).log2();
            assert!(order >= 4.8, "order {order}");
        }
        let err = |h: f64| {
            let n = (2.0 / h).round() as usize;
            let y = fixed_step(&rotation, [1.0, 0.0], h, n);
            ((y[0] - 2.0_f64.cos()).powi(2) + (y[1] - 2.0_f64.sin()).powi(2)).sqrt()
        };
        for w in hs.windows(2) {
            let order = (err(w[0]) / err(w[1])).log2();
            assert!(order >= 4.8, "order {order}");
        }
    }

    #[test]
    fn adaptive_run_meets_tolerance() {
        let mut s = Dopri5::new(rotation, [1.0, 0.0], 20.0, Tolerances::default()).unwrap();
        let mut last = None;
        while let Some(step) = s.step().unwrap() {
            last = Some(step);
        }
        assert_eq!(s.t(), 20.0);
        let y = s.state();
        assert_abs_diff_eq!(y[0], 20.0_f64.cos(), epsilon = 1e-8);
        assert_abs_diff_eq!(y[1], 20.0_f64.sin(), epsilon = 1e-8);
        assert_eq!(last.unwrap().t1(), 20.0);
        assert!(s.stats().accepted > 10);
    }

    #[test]
    fn dense_output_matches_solution_and_derivative() {
        let mut s = Dopri5::new(
            rotation,
            [1.0, 0.0],
            5.0,
            Tolerances::new(1e-12, 1e-14).unwrap(),
        )
        .unwrap();
        while let Some(step) = s.step().unwrap() {
            for th in [0.0, 0.3, 0.5, 0.9, 1.0] {
                let t = step.t0 + th * step.h;
                let y = step.eval_theta(th);
                assert_abs_diff_eq!(y[0], t.cos(), epsilon = 1e-9);
                assert_abs_diff_eq!(y[1], t.sin(), epsilon = 1e-9);
                let d = step.derivative_theta(th);
                assert_abs_diff_eq!(d[0], -t.sin(), epsilon = 1e-7);
                assert_abs_diff_eq!(d[1], t.cos(), epsilon = 1e-7);
            }
            assert_eq!(step.eval_theta(0.0), step.start());
        }
    }

    #[test]
    fn equilibrium_start_grows_the_step() {
        let zero = |_: &[f64; 2]| [0.0, 0.0];
        let mut s = Dopri5::new(zero, [0.3, 0.4], 100.0, Tolerances::default()).unwrap();
        while s.step().unwrap().is_some() {}
        assert_eq!(s.state(), &[0.3, 0.4]);
        assert!(s.stats().accepted < 30);
    }

    #[test]
    fn blow_up_underflows() {
        let blow = |y: &[f64; 1]| [y[0] * y[0]];
        let mut s = Dopri5::new(blow, [1.0], 2.0, Tolerances::default()).unwrap();
        let err = loop {
            match s.step() {
                Ok(Some(_)) => continue,
                Ok(None) => panic!("passed the singularity"),
                Err(e) => break e,
            }
        };
        assert!(matches!(err, Error::StepSizeUnderflow { .. }));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(Tolerances::new(0.0, 1e-12).is_err());
        assert!(Dopri5::new(decay, [1.0], 0.0, Tolerances::default()).is_err());
        assert!(Dopri5::new(decay, [1.0], f64::INFINITY, Tolerances::default()).is_err());
    }
}
