use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a cubic spline needs at least 4 knots, got {0}")]
    InsufficientKnots(usize),
    #[error("knots must be finite and strictly increasing (violated at index {0})")]
    InvalidKnots(usize),
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
    #[error("{x} lies outside the spline domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("target knot count {target} does not exceed the current count {current}")]
    NoRefinementNeeded { current: usize, target: usize },
    #[error("spline domains differ: [{0}, {1}] vs [{2}, {3}]")]
    DomainMismatch(f64, f64, f64, f64),
    #[error("c_l and c_g are both zero; H is a point mass")]
    DegenerateCoefficients,
    #[error("successor map is singular (1 + chi*m - h = 0)")]
    SingularMap,
    #[error("inverse map undefined for chi = 0 or m = 1")]
    SingularInverse,
    #[error("fixed-point iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no sign change of omega on [{c_lo}, {c_hi}] (omega = {omega_lo}, {omega_hi})")]
    NoBracket {
        c_lo: f64,
        c_hi: f64,
        omega_lo: f64,
        omega_hi: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
