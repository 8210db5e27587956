//! Convergence frontier on the diagonal `c_l = c_g = c` and the two classical
//! bounds it is compared with.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::omega::{omega, OmegaConfig, SwarmParams};

/// Lower end of the default bisection bracket; `omega < 0` for tiny `c > 0`
/// throughout `chi in (-1, 1)`.
pub const DEFAULT_C_LO: f64 = 1e-3;
/// Upper end of the default bisection bracket.
pub const DEFAULT_C_HI: f64 = 4.5;

/// Largest `c` for which the expected position converges:
/// `c_l + c_g < 4 (chi + 1)` with `c_l = c_g = c`.
pub fn trelea_bound(chi: f64) -> f64 {
    2.0 * (chi + 1.0)
}

/// Largest `c` for which the variance of the position converges:
/// `2c <= 24 (1 - chi^2) / (7 - 5 chi)`.
pub fn variance_bound(chi: f64) -> f64 {
    12.0 * (1.0 - chi * chi) / (7.0 - 5.0 * chi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub chi: f64,
    /// Midpoint of the final bracket.
    pub c_star: f64,
    pub bracket: (f64, f64),
    pub bracket_width: f64,
    pub omega_at_bracket_ends: (f64, f64),
}

fn diagonal_omega(chi: f64, c: f64, cfg: &OmegaConfig) -> Result<f64> {
    Ok(omega(&SwarmParams::new(chi, c, c)?, cfg)?.omega)
}

/// Bisects `c -> omega(chi, c, c)` on `[DEFAULT_C_LO, c_hi]` until the bracket
/// is no wider than `tol`.
pub fn trace_boundary(chi: f64, c_hi: f64, tol: f64, cfg: &OmegaConfig) -> Result<BoundaryPoint> {
    trace_boundary_in(chi, DEFAULT_C_LO, c_hi, tol, cfg)
}

/// As [`trace_boundary`] with an explicit lower bracket end. The bracket must
/// have `omega < 0` at `c_lo` and `omega > 0` at `c_hi`.
pub fn trace_boundary_in(chi: f64, c_lo: f64, c_hi: f64, tol: f64, cfg: &OmegaConfig) -> Result<BoundaryPoint> {
    if !(c_lo.is_finite() && c_hi.is_finite() && tol.is_finite()) {
        return Err(Error::NonFiniteInput("bracket"));
    }
    if !(tol > 0.0 && c_lo < c_hi) {
        return Err(Error::InvalidConfig(format!(
            "need c_lo < c_hi and tol > 0, got [{c_lo}, {c_hi}] with tol {tol}"
        )));
    }
    let (mut lo, mut hi) = (c_lo, c_hi);
    let mut w_lo = diagonal_omega(chi, lo, cfg)?;
    let mut w_hi = diagonal_omega(chi, hi, cfg)?;
    if !(w_lo < 0.0 && w_hi > 0.0) {
        return Err(Error::NoBracket {
            c_lo,
            c_hi,
            omega_lo: w_lo,
            omega_hi: w_hi,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let w = diagonal_omega(chi, mid, cfg)?;
        if w < 0.0 {
            lo = mid;
            w_lo = w;
        } else {
            hi = mid;
            w_hi = w;
        }
    }
    Ok(BoundaryPoint {
        chi,
        c_star: 0.5 * (lo + hi),
        bracket: (lo, hi),
        bracket_width: hi - lo,
        omega_at_bracket_ends: (w_lo, w_hi),
    })
}

/// Traces each `chi` independently with the default bracket; the output
/// order matches the input order and failures stay inline.
pub fn boundary_curve(chi_values: &[f64], tol: f64, cfg: &OmegaConfig) -> Vec<Result<BoundaryPoint>> {
    chi_values
        .par_iter()
        .map(|&chi| trace_boundary(chi, DEFAULT_C_HI, tol, cfg))
        .collect()
}
