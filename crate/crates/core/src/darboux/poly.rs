//! Sparse polynomials in `(x, y, z)`.
//!
//! Terms are kept in a `BTreeMap` keyed by exponent triples, so iteration
//! order (and therefore printing and comparison) is deterministic. Zero
//! coefficients are never stored.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

pub type Exponent = [u32; 3];

pub trait Coeff:
    Clone
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
}

impl<T> Coeff for T where
    T: Clone
        + PartialEq
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Neg<Output = T>
{
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T: Coeff> {
    terms: BTreeMap<Exponent, T>,
}

impl<T: Coeff> Default for Poly<T> {
    fn default() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }
}

impl<T: Coeff> Poly<T> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: T) -> Self {
        Self::monomial(c, [0, 0, 0])
    }

    pub fn monomial(c: T, e: Exponent) -> Self {
        let mut p = Self::zero();
        p.add_term(e, c);
        p
    }

    /// The coordinate `x`, `y` or `z` for `i = 0, 1, 2`.
    pub fn var(i: usize) -> Self {
        let mut e = [0; 3];
        e[i] = 1;
        Self::monomial(T::one(), e)
    }

    pub fn xyz() -> [Self; 3] {
        [Self::var(0), Self::var(1), Self::var(2)]
    }

    /// Builds a polynomial from `(coefficient, exponent)` pairs.
    pub fn from_terms<I: IntoIterator<Item = (T, Exponent)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (c, e) in terms {
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, e: Exponent, c: T) {
        if c.is_zero() {
            return;
        }
        let sum = match self.terms.remove(&e) {
            Some(old) => old + c,
            None => c,
        };
        if !sum.is_zero() {
            self.terms.insert(e, sum);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: Exponent) -> T {
        self.terms.get(&e).cloned().unwrap_or_else(T::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &T)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &T) -> Self {
        Self::from_terms(self.terms.iter().map(|(e, v)| (v.clone() * c.clone(), *e)))
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut mult = T::zero();
            for _ in 0..e[var] {
                mult = mult + T::one();
            }
            let mut ne = *e;
            ne[var] -= 1;
            out.add_term(ne, c.clone() * mult);
        }
        out
    }

    pub fn map_coeffs<U: Coeff>(&self, f: impl Fn(&T) -> U) -> Poly<U> {
        Poly::from_terms(self.terms.iter().map(|(e, c)| (f(c), *e)))
    }

    pub fn eval(&self, p: &[T; 3]) -> T {
        self.terms.iter().fold(T::zero(), |acc, (e, c)| {
            let mut term = c.clone();
            for (i, &n) in e.iter().enumerate() {
                for _ in 0..n {
                    term = term * p[i].clone();
                }
            }
            acc + term
        })
    }

    /// Lie derivative `X f = Σ (∂f/∂x_i) X_i` along the field `X`.
    pub fn lie_derivative(&self, field: &[Self; 3]) -> Self {
        (0..3).fold(Self::zero(), |acc, i| {
            acc + self.derivative(i) * field[i].clone()
        })
    }
}

impl Poly<f64> {
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl<T: Coeff> Add for Poly<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (e, c) in rhs.terms {
            self.add_term(e, c);
        }
        self
    }
}

impl<T: Coeff> Neg for Poly<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_terms(self.terms.into_iter().map(|(e, c)| (-c, e)))
    }
}

impl<T: Coeff> Sub for Poly<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Coeff> Mul for Poly<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                out.add_term(e, ca.clone() * cb.clone());
            }
        }
        out
    }
}

impl fmt::Display for Poly<f64> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        // highest degree first, then x before y before z
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|a, b| {
            let da: u32 = a.0.iter().sum();
            let db: u32 = b.0.iter().sum();
            db.cmp(&da).then(b.0.cmp(a.0))
        });
        for (i, (e, c)) in terms.into_iter().enumerate() {
            let mono: Vec<String> = ["x", "y", "z"]
                .iter()
                .zip(e.iter())
                .filter(|(_, &n)| n > 0)
                .map(|(v, &n)| {
                    if n == 1 {
                        v.to_string()
                    } else {
                        format!("{v}^{n}")
                    }
                })
                .collect();
            let mag = c.abs();
            let sign = if *c < 0.0 { "-" } else { "+" };
            match (i, sign) {
                (0, "-") => f.write_str("-")?,
                (0, _) => {}
                (_, s) => write!(f, " {s} ")?,
            }
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag == 1.0 {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{mag}*{}", mono.join("*"))?;
            }
        }
        Ok(())
    }
}
