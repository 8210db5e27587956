//! Stationary drift `omega = lim E[Phi_{t+1} - Phi_t]` of the convergence
//! indicator `Phi_t = ln(x_t^2 + v_t^2)` and the resulting classification.
//!
//! The per-step change of `Phi` only depends on the current angle and the
//! fresh coefficient `h`:
//!
//! ```text
//! g(alpha, h) = ln(((chi tan a - h)^2 + (chi tan a - h + 1)^2) / (1 + tan^2 a))
//! ```
//!
//! so `omega` is the integral of `f_in(alpha) = E_h[g(alpha, h)]` against the
//! stationary angle density.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::{self, piece_grids, stationary_cdf, AngleCdf, FixedPointConfig};
use crate::error::{Error, Result};
use crate::hdensity::{make_h_density, HDensity};
use crate::spline::{build_spline, natural_quadrature_weights, BoundaryKind, KnotVector};

/// Inertia weight `chi` and the local/global acceleration coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarmParams {
    pub chi: f64,
    pub c_l: f64,
    pub c_g: f64,
}

impl SwarmParams {
    pub fn new(chi: f64, c_l: f64, c_g: f64) -> Result<Self> {
        if !(chi.is_finite() && c_l.is_finite() && c_g.is_finite()) {
            return Err(Error::NonFiniteInput("swarm parameter"));
        }
        Ok(Self { chi, c_l, c_g })
    }

    /// `c_l = c_g = 0`: the velocity evolves deterministically as `v_0 chi^t`.
    pub fn is_deterministic(&self) -> bool {
        self.c_l == 0.0 && self.c_g == 0.0
    }

    pub fn h_density(&self) -> Result<HDensity> {
        make_h_density(self.c_l, self.c_g)
    }

    pub fn swapped(&self) -> Self {
        Self {
            chi: self.chi,
            c_l: self.c_g,
            c_g: self.c_l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OmegaMethod {
    GeneralSpline,
    ChiZeroClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaResult {
    /// Drift of `Phi` in nats per iteration.
    pub omega: f64,
    pub abs_error_estimate: f64,
    pub fixed_point_iterations: usize,
    pub method: OmegaMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaConfig {
    pub fixed_point: FixedPointConfig,
    /// Knots for both the inner (h) and outer (angle) quadrature splines.
    pub quadrature_knots: usize,
    /// Distance kept from `+-pi/2` when `chi = 0`, where `f_in` diverges.
    pub boundary_clip: f64,
}

impl Default for OmegaConfig {
    fn default() -> Self {
        Self {
            fixed_point: FixedPointConfig::default(),
            quadrature_knots: 8192,
            boundary_clip: 1e-15,
        }
    }
}

impl OmegaConfig {
    pub fn validate(&self) -> Result<()> {
        self.fixed_point.validate()?;
        if self.quadrature_knots < 16 {
            return Err(Error::InvalidConfig("at least 16 quadrature knots are required".into()));
        }
        if !(self.boundary_clip > 0.0 && self.boundary_clip < 1e-3) {
            return Err(Error::InvalidConfig("boundary clip must lie in (0, 1e-3)".into()));
        }
        Ok(())
    }
}

/// Log growth of `x^2 + v^2` over one step from angle `alpha` with
/// coefficient `h`. Written with `sin`/`cos` so `alpha -> +-pi/2` is benign;
/// at exactly `+-pi/2` the limit `ln(2 chi^2)` is returned (`-inf` if
/// `chi = 0`).
#[inline]
pub fn g_integrand(alpha: f64, h: f64, chi: f64) -> f64 {
    if alpha.abs() >= FRAC_PI_2 {
        return (2.0 * chi * chi).ln();
    }
    let (s, c) = alpha.sin_cos();
    log_growth(chi * s, c, h)
}

#[inline]
fn log_growth(chi_sin: f64, cos: f64, h: f64) -> f64 {
    let dv = chi_sin - h * cos;
    let dx = dv + cos;
    (dv * dv + dx * dx).ln()
}

/// Density-weighted quadrature rule over the support of `H`, split at the
/// kinks of the density.
struct HRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl HRule {
    fn new(d: &HDensity, knot_count: usize) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for grid in piece_grids(&d.breakpoints(), knot_count) {
            let w = natural_quadrature_weights(&grid);
            for (wj, &h) in w.iter().zip(grid.as_slice()) {
                nodes.push(h);
                weights.push(wj * d.eval(h));
            }
        }
        Self { nodes, weights }
    }

    fn f_inner(&self, alpha: f64, chi: f64) -> f64 {
        if alpha.abs() >= FRAC_PI_2 {
            return (2.0 * chi * chi).ln();
        }
        let (s, c) = alpha.sin_cos();
        let cs = chi * s;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&h, &w)| w * log_growth(cs, c, h))
            .sum()
    }
}

/// `E_h[g(alpha, h)]`, integrated with natural splines on the pieces between
/// the density kinks.
pub fn f_inner(alpha: f64, d: &HDensity, chi: f64, h_knot_count: usize) -> f64 {
    HRule::new(d, h_knot_count.max(8)).f_inner(alpha, chi)
}

/// Outer knots on `[-pi/2, pi/2]`: `count` uniform knots merged with the
/// knots of the CDF spline, so the kinks of its derivative fall on knots.
/// For `chi = 0` the ends are pulled in by `clip` and the first and last
/// intervals are graded geometrically down to the clip so the logarithmic
/// singularity of `f_in` is resolved.
fn outer_knots(count: usize, chi: f64, clip: f64, cdf_knots: &[f64]) -> Result<KnotVector> {
    let (lo, hi) = if chi == 0.0 {
        (-FRAC_PI_2 + clip, FRAC_PI_2 - clip)
    } else {
        (-FRAC_PI_2, FRAC_PI_2)
    };
    let base = KnotVector::uniform(lo, hi, count)?;
    let spacing = base.as_slice()[1] - lo;
    let mut pts: Vec<f64> = base.into_vec();
    if chi == 0.0 {
        let mut delta = spacing / 2.0;
        while delta > 4.0 * clip {
            pts.push(lo + delta);
            pts.push(hi - delta);
            delta /= 2.0;
        }
    }
    pts.sort_by(f64::total_cmp);
    // CDF knots closer than this to a kept knot would only add roundoff.
    let min_gap = 1e-3 * spacing;
    let mut extra: Vec<f64> = Vec::with_capacity(cdf_knots.len());
    for &x in cdf_knots.iter().filter(|&&x| x > lo && x < hi) {
        let i = pts.partition_point(|&p| p < x);
        let near_base = pts.get(i).is_some_and(|&p| p - x < min_gap) || (i > 0 && x - pts[i - 1] < min_gap);
        let near_extra = extra.last().is_some_and(|&e| x - e < min_gap);
        if !near_base && !near_extra {
            extra.push(x);
        }
    }
    let mut merged = pts;
    merged.extend(extra);
    merged.sort_by(f64::total_cmp);
    KnotVector::new(merged)
}

fn omega_from_cdf(cdf: &AngleCdf, d: &HDensity, chi: f64, knot_count: usize, clip: f64) -> Result<f64> {
    let rule = HRule::new(d, knot_count);
    let knots = outer_knots(knot_count, chi, clip, cdf.knots().as_slice())?;
    let values: Vec<f64> = knots
        .as_slice()
        .par_iter()
        .map(|&a| rule.f_inner(a, chi) * cdf.density(a))
        .collect();
    let spline = build_spline(knots, values, BoundaryKind::Natural)?;
    Ok(spline.total_integral())
}

/// Drift against the stationary angle law computed by fixed-point iteration.
/// The error estimate compares the quadrature at `quadrature_knots` with the
/// same quadrature at half as many knots.
pub fn omega_general(params: &SwarmParams, cfg: &OmegaConfig) -> Result<OmegaResult> {
    cfg.validate()?;
    let d = params.h_density()?;
    let fixed = stationary_cdf(params, &cfg.fixed_point)?;
    omega_for_stationary(params, &d, &fixed.cdf, fixed.iterations, cfg)
}

pub(crate) fn omega_for_stationary(
    params: &SwarmParams,
    d: &HDensity,
    cdf: &AngleCdf,
    iterations: usize,
    cfg: &OmegaConfig,
) -> Result<OmegaResult> {
    let fine = omega_from_cdf(cdf, d, params.chi, cfg.quadrature_knots, cfg.boundary_clip)?;
    let coarse = omega_from_cdf(cdf, d, params.chi, cfg.quadrature_knots / 2, cfg.boundary_clip)?;
    Ok(OmegaResult {
        omega: fine,
        abs_error_estimate: (fine - coarse).abs(),
        fixed_point_iterations: iterations,
        method: OmegaMethod::GeneralSpline,
    })
}

/// `u^2 ln(u^2)` with the removable singularity at `u = 0` filled in.
fn sq_log_sq(u: f64) -> f64 {
    let sq = u * u;
    if sq == 0.0 {
        0.0
    } else {
        sq * sq.ln()
    }
}

/// Closed-form drift for `chi = 0`, where `omega = E[ln((1 - H)^2)]`.
pub fn omega_chi_zero(c_l: f64, c_g: f64) -> Result<f64> {
    if !c_l.is_finite() || !c_g.is_finite() {
        return Err(Error::NonFiniteInput("acceleration coefficient"));
    }
    if c_l == 0.0 && c_g == 0.0 {
        return Err(Error::DegenerateCoefficients);
    }
    if c_l == 0.0 || c_g == 0.0 {
        let c = c_l + c_g;
        let u = 1.0 - c;
        let term = if u == 0.0 { 0.0 } else { u * (u * u).ln() };
        return Ok(-term / c - 2.0);
    }
    if c_l == c_g {
        let c = c_l;
        return Ok((sq_log_sq(1.0 - 2.0 * c) - 2.0 * sq_log_sq(1.0 - c)) / (2.0 * c * c) - 3.0);
    }
    Ok((sq_log_sq(1.0 - c_l - c_g) - sq_log_sq(1.0 - c_g) - sq_log_sq(1.0 - c_l)) / (2.0 * c_l * c_g) - 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    Converges,
    Diverges,
    Indeterminate,
    DeterministicConverges,
    DeterministicDiverges,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub omega: Option<OmegaResult>,
    /// Set when the numerics failed (e.g. the fixed point did not converge).
    pub diagnostic: Option<String>,
}

impl Verdict {
    fn from_omega(result: OmegaResult) -> Self {
        let kind = if result.omega.abs() <= result.abs_error_estimate {
            VerdictKind::Indeterminate
        } else if result.omega < 0.0 {
            VerdictKind::Converges
        } else {
            VerdictKind::Diverges
        };
        Self {
            kind,
            omega: Some(result),
            diagnostic: None,
        }
    }

    /// Verdict for a computed drift; numerical failures become
    /// `Indeterminate` with the error as diagnostic.
    pub fn from_outcome(outcome: Result<OmegaResult>) -> Self {
        match outcome {
            Ok(result) => Self::from_omega(result),
            Err(e) => Self {
                kind: VerdictKind::Indeterminate,
                omega: None,
                diagnostic: Some(e.to_string()),
            },
        }
    }

    pub fn is_failure(&self) -> bool {
        self.diagnostic.is_some()
    }
}

/// Drift for any non-deterministic parameter triple: closed form when
/// `chi = 0`, spline numerics otherwise.
pub fn omega(params: &SwarmParams, cfg: &OmegaConfig) -> Result<OmegaResult> {
    if params.chi == 0.0 {
        let omega = omega_chi_zero(params.c_l, params.c_g)?;
        return Ok(OmegaResult {
            omega,
            abs_error_estimate: 0.0,
            fixed_point_iterations: 0,
            method: OmegaMethod::ChiZeroClosedForm,
        });
    }
    omega_general(params, cfg)
}

pub fn classify(params: &SwarmParams, cfg: &OmegaConfig) -> Verdict {
    if params.is_deterministic() {
        let kind = if params.chi.abs() < 1.0 {
            VerdictKind::DeterministicConverges
        } else {
            VerdictKind::DeterministicDiverges
        };
        return Verdict {
            kind,
            omega: None,
            diagnostic: None,
        };
    }
    Verdict::from_outcome(omega(params, cfg))
}

/// Exposes the stationary CDF alongside the drift, for callers that also
/// want the angle law (plots, debug dumps).
pub fn omega_with_cdf(params: &SwarmParams, cfg: &OmegaConfig) -> Result<(OmegaResult, angle::StationaryCdf)> {
    cfg.validate()?;
    let d = params.h_density()?;
    let fixed = stationary_cdf(params, &cfg.fixed_point)?;
    let result = omega_for_stationary(params, &d, &fixed.cdf, fixed.iterations, cfg)?;
    Ok((result, fixed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_integrand_examples() {
        assert_eq!(g_integrand(0.0, 0.0, 0.4), 0.0);
        assert!((g_integrand(0.0, 2.0, 0.4) - 5f64.ln()).abs() < 1e-15);
        assert!((g_integrand(0.0, 2.0, -3.0) - 5f64.ln()).abs() < 1e-15);
        assert!((g_integrand(FRAC_PI_2, 0.7, 0.5) - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(g_integrand(-FRAC_PI_2, 0.7, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn g_integrand_matches_tangent_form() {
        for &(a, h, chi) in &[(0.3, 0.4, 0.7), (-1.2, 2.5, -0.6), (1.5, 1.0, 0.9), (0.9, -0.3, 0.1)] {
            let t: f64 = f64::tan(a);
            let direct = (((chi * t - h).powi(2) + (chi * t - h + 1.0).powi(2)) / (1.0 + t * t)).ln();
            assert!((g_integrand(a, h, chi) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn f_inner_at_the_boundary_angle() {
        let d = make_h_density(1.3, 0.4).unwrap();
        assert!((f_inner(FRAC_PI_2, &d, 0.5, 64) - 0.5f64.ln()).abs() < 1e-15);
        // Just inside the boundary the integrand is nearly constant in h.
        assert!((f_inner(FRAC_PI_2 - 1e-12, &d, 0.5, 64) - 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn closed_form_special_values() {
        assert_eq!(omega_chi_zero(1.0, 1.0).unwrap(), -3.0);
        assert_eq!(omega_chi_zero(2.0, 0.0).unwrap(), -2.0);
        assert_eq!(omega_chi_zero(0.0, 2.0).unwrap(), -2.0);
        assert_eq!(omega_chi_zero(0.0, 1.0).unwrap(), -2.0);
        assert_eq!(omega_chi_zero(0.0, 0.0), Err(Error::DegenerateCoefficients));
        // Unequal pair with c_l + c_g = 1 hits 0 ln 0.
        assert!(omega_chi_zero(0.25, 0.75).unwrap().is_finite());
    }

    #[test]
    fn equal_coefficient_form_agrees_with_general_form() {
        for c in [0.3, 0.9, 1.7, 2.5] {
            let general =
                (sq_log_sq(1.0 - 2.0 * c) - 2.0 * sq_log_sq(1.0 - c)) / (2.0 * c * c) - 3.0;
            let nudged = omega_chi_zero(c, c * (1.0 + 1e-9)).unwrap();
            assert!((general - nudged).abs() < 1e-6);
        }
    }

    #[test]
    fn one_zero_limit() {
        for c in [0.4, 1.0, 1.8, 3.0] {
            let limit = omega_chi_zero(c, 1e-6).unwrap();
            let exact = omega_chi_zero(c, 0.0).unwrap();
            assert!((limit - exact).abs() < 1e-4, "c = {c}: {limit} vs {exact}");
        }
    }

    #[test]
    fn deterministic_class() {
        let cfg = OmegaConfig::default();
        let v = classify(&SwarmParams::new(0.5, 0.0, 0.0).unwrap(), &cfg);
        assert_eq!(v.kind, VerdictKind::DeterministicConverges);
        let v = classify(&SwarmParams::new(1.0, 0.0, 0.0).unwrap(), &cfg);
        assert_eq!(v.kind, VerdictKind::DeterministicDiverges);
        let v = classify(&SwarmParams::new(-1.0, 0.0, 0.0).unwrap(), &cfg);
        assert_eq!(v.kind, VerdictKind::DeterministicDiverges);
    }

    #[test]
    fn chi_zero_classification_uses_closed_form() {
        let v = classify(&SwarmParams::new(0.0, 1.0, 1.0).unwrap(), &OmegaConfig::default());
        assert_eq!(v.kind, VerdictKind::Converges);
        let r = v.omega.unwrap();
        assert_eq!(r.method, OmegaMethod::ChiZeroClosedForm);
        assert_eq!(r.omega, -3.0);
    }

    #[test]
    fn non_finite_parameters_are_rejected() {
        assert!(SwarmParams::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(SwarmParams::new(0.5, f64::INFINITY, 1.0).is_err());
    }
}
