//! Rate-difference parameters and the partition of parameter space.
//!
//! The family is indexed by `k = (k1, k2, k3, k4)`. Parameter space splits
//! three ways by the sign of `k1*k3 - k2*k4` (S⁻, S, S⁺), and independently
//! by whether all components are nonzero (NZ) and share a sign (PS₊/PS₋).
//! All tests here are exact comparisons on the given floats.

use std::fmt;
use std::ops::Neg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl ParamVector {
    pub const fn new(k1: f64, k2: f64, k3: f64, k4: f64) -> Self {
        Self { k1, k2, k3, k4 }
    }

    pub fn from_slice(k: &[f64]) -> Result<Self> {
        match *k {
            [k1, k2, k3, k4] if k.iter().all(|v| v.is_finite()) => Ok(Self::new(k1, k2, k3, k4)),
            [_, _, _, _] => Err(Error::InvalidArgument("parameters must be finite".into())),
            _ => Err(Error::InvalidArgument(format!(
                "expected 4 parameters, got {}",
                k.len()
            ))),
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.k1, self.k2, self.k3, self.k4]
    }

    pub fn is_zero(&self) -> bool {
        self.as_array().iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `k1*k3 - k2*k4`, evaluated exactly as written.
    pub fn discriminant(&self) -> f64 {
        self.k1 * self.k3 - self.k2 * self.k4
    }

    pub fn is_ps(&self) -> bool {
        let k = self.as_array();
        k.iter().all(|&v| v > 0.0) || k.iter().all(|&v| v < 0.0)
    }

    pub fn is_ps_and_s(&self) -> bool {
        self.is_ps() && self.discriminant() == 0.0
    }
}

impl Neg for ParamVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.k1, -self.k2, -self.k3, -self.k4)
    }
}

impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.k1, self.k2, self.k3, self.k4)
    }
}

pub fn discriminant(k: &ParamVector) -> f64 {
    k.discriminant()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SSign {
    #[serde(rename = "S-")]
    Minus,
    #[serde(rename = "S")]
    Zero,
    #[serde(rename = "S+")]
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PsClass {
    #[serde(rename = "PS+")]
    Positive,
    #[serde(rename = "PS-")]
    Negative,
    #[serde(rename = "not-PS")]
    NotPs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Regime {
    pub s_sign: SSign,
    pub in_nz: bool,
    pub ps: PsClass,
}

impl Regime {
    pub fn in_ps(&self) -> bool {
        self.ps != PsClass::NotPs
    }

    pub fn in_s(&self) -> bool {
        self.s_sign == SSign::Zero
    }

    pub fn is_oscillating(&self) -> bool {
        self.in_ps() && self.in_s()
    }

    /// Short label such as `PS+ ∩ S+` or `not-PS ∩ S- (not NZ)`.
    pub fn label(&self) -> String {
        let ps = match self.ps {
            PsClass::Positive => "PS+",
            PsClass::Negative => "PS-",
            PsClass::NotPs => "not-PS",
        };
        let s = match self.s_sign {
            SSign::Minus => "S-",
            SSign::Zero => "S",
            SSign::Plus => "S+",
        };
        if self.in_nz {
            format!("{ps} ∩ {s}")
        } else {
            format!("{ps} ∩ {s} (not NZ)")
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn classify(k: &ParamVector) -> Result<Regime> {
    if k.is_zero() {
        return Err(Error::ZeroParameter);
    }
    let d = k.discriminant();
    let s_sign = if d > 0.0 {
        SSign::Plus
    } else if d < 0.0 {
        SSign::Minus
    } else {
        SSign::Zero
    };
    let arr = k.as_array();
    let in_nz = arr.iter().all(|&v| v != 0.0);
    let ps = if arr.iter().all(|&v| v > 0.0) {
        PsClass::Positive
    } else if arr.iter().all(|&v| v < 0.0) {
        PsClass::Negative
    } else {
        PsClass::NotPs
    };
    Ok(Regime { s_sign, in_nz, ps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(a: f64, b: f64, c: f64, d: f64) -> ParamVector {
        ParamVector::new(a, b, c, d)
    }

    #[test]
    fn discriminant_examples() {
        assert_eq!(discriminant(&k(1.0, 1.0, 1.0, 1.0)), 0.0);
        assert_eq!(discriminant(&k(2.0, 1.0, 2.0, 1.0)), 3.0);
        assert_eq!(discriminant(&k(2.0, 3.0, 3.0, 2.0)), 0.0);
    }

    #[test]
    fn classify_examples() {
        let r = classify(&k(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(
            (r.s_sign, r.in_nz, r.ps),
            (SSign::Zero, true, PsClass::Positive)
        );

        let r = classify(&k(2.0, 1.0, 2.0, 1.0)).unwrap();
        assert_eq!(
            (r.s_sign, r.in_nz, r.ps),
            (SSign::Plus, true, PsClass::Positive)
        );
        assert_eq!(r.label(), "PS+ ∩ S+");

        let r = classify(&k(1.0, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!(
            (r.s_sign, r.in_nz, r.ps),
            (SSign::Plus, false, PsClass::NotPs)
        );

        let r = classify(&k(-1.0, -1.0, -1.0, -1.0)).unwrap();
        assert_eq!(
            (r.s_sign, r.in_nz, r.ps),
            (SSign::Zero, true, PsClass::Negative)
        );
    }

    #[test]
    fn zero_vector_is_rejected() {
        assert_eq!(classify(&k(0.0, 0.0, 0.0, 0.0)), Err(Error::ZeroParameter));
        // negative zero is still zero
        assert_eq!(
            classify(&k(-0.0, 0.0, -0.0, 0.0)),
            Err(Error::ZeroParameter)
        );
    }

    #[test]
    fn from_slice_validates() {
        assert!(ParamVector::from_slice(&[1.0, 2.0, 3.0]).is_err());
        assert!(ParamVector::from_slice(&[1.0, f64::NAN, 3.0, 4.0]).is_err());
        assert_eq!(
            ParamVector::from_slice(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            k(1.0, 2.0, 3.0, 4.0)
        );
    }

    fn any_k() -> impl Strategy<Value = ParamVector> {
        let comp =
            prop_oneof![3 => -5.0f64..5.0, 1 => Just(0.0), 1 => (-3i32..=3).prop_map(f64::from)];
        (comp.clone(), comp.clone(), comp.clone(), comp)
            .prop_map(|(a, b, c, d)| k(a, b, c, d))
            .prop_filter("nonzero", |k| !k.is_zero())
    }

    proptest! {
        #[test]
        fn sign_flip_preserves_s_and_swaps_ps(k in any_k()) {
            let r = classify(&k).unwrap();
            let m = classify(&-k).unwrap();
            prop_assert_eq!(r.s_sign, m.s_sign);
            prop_assert_eq!(r.in_nz, m.in_nz);
            let swapped = match r.ps {
                PsClass::Positive => PsClass::Negative,
                PsClass::Negative => PsClass::Positive,
                PsClass::NotPs => PsClass::NotPs,
            };
            prop_assert_eq!(m.ps, swapped);
        }

        #[test]
        fn zero_component_excludes_nz_and_ps(k in any_k()) {
            let r = classify(&k).unwrap();
            if k.as_array().contains(&0.0) {
                prop_assert!(!r.in_nz);
                prop_assert_eq!(r.ps, PsClass::NotPs);
            }
            if r.in_ps() {
                prop_assert!(r.in_nz);
            }
        }
    }
}
