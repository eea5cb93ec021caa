use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter vector k is zero")]
    ZeroParameter,
    #[error("parameter vector is not in PS (components must share one strict sign)")]
    NotInPS,
    #[error("parameter vector is not in PS ∩ S")]
    NotInPSS,
    #[error("{what} = {value} outside admissible range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },
    #[error("point ({x}, {y}, {z}) lies outside the simplex by {violation:e}")]
    OutsideSimplex {
        x: f64,
        y: f64,
        z: f64,
        violation: f64,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sign condition violated: {0}")]
    Sign(String),
    #[error("level C = {c} exceeds the maximal level C* = {c_star}")]
    LevelOutOfRange { c: f64, c_star: f64 },
    #[error("leaf through x0 = {0} is degenerate (tangent to the edge)")]
    DegenerateLeaf(f64),
    #[error("step size {h:e} underflowed at t = {t}")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("simplex violation {violation:e} at t = {t}")]
    SimplexViolation { t: f64, violation: f64 },
    #[error("initial point lies within {distance:e} of the singular segment R")]
    OnEquilibrium { distance: f64 },
    #[error("analytic and numeric routes disagree: {0}")]
    RouteMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
