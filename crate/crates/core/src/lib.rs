//! Stationary-drift analysis of particle swarm optimisation: the angle
//! between position and velocity of a single particle settles into a
//! stationary law, and the mean per-step change of `ln(x^2 + v^2)` under that
//! law decides whether the particle converges or diverges.

pub mod angle;
pub mod boundary;
pub mod error;
pub mod hdensity;
pub mod montecarlo;
pub mod omega;
pub mod spline;

pub use boundary::{boundary_curve, trace_boundary, trelea_bound, variance_bound, BoundaryPoint};
pub use montecarlo::{angle_increments, histogram_distance, simulate_drift, simulate_xv_direct, SimConfig, SimStats};
pub use angle::{stationary_cdf, AngleCdf, FixedPointConfig, StationaryCdf};
pub use error::{Error, Result};
pub use hdensity::{make_h_density, HDensity};
pub use omega::{classify, omega, omega_chi_zero, OmegaConfig, OmegaResult, SwarmParams, Verdict, VerdictKind};
pub use spline::{BoundaryKind, CubicSpline, KnotVector};
