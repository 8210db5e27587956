//! Law of the angle `alpha_t` with `v_t = x_t * tan(alpha_t)`.
//!
//! One movement step maps `m = tan(alpha_t)` to
//! `f_plus(m, h) = 1 - 1 / (1 + chi * m - h)` with `h` drawn from the
//! [`HDensity`]. The CDF of the successor angle is obtained by integrating the
//! pushforward probability over `h`; iterating that map from the uniform
//! angle law converges to the stationary law.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdensity::HDensity;
use crate::omega::SwarmParams;
use crate::spline::{self, build_spline, natural_quadrature_weights, BoundaryKind, CubicSpline, KnotVector};

/// Monotone CDF on `[-pi/2, pi/2]`, pinned to 0 and 1 at the ends.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleCdf {
    spline: CubicSpline,
}

impl AngleCdf {
    /// Builds the CDF through `values` at `knots`, clamping into `[0, 1]`
    /// and pinning the end values.
    pub fn from_values(knots: KnotVector, mut values: Vec<f64>) -> Result<Self> {
        if knots.first() != -FRAC_PI_2 || knots.last() != FRAC_PI_2 {
            return Err(Error::DomainMismatch(knots.first(), knots.last(), -FRAC_PI_2, FRAC_PI_2));
        }
        for v in values.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        if let Some(first) = values.first_mut() {
            *first = 0.0;
        }
        if let Some(last) = values.last_mut() {
            *last = 1.0;
        }
        let spline = build_spline(knots, values, BoundaryKind::DerivativeMatched)?;
        Ok(Self { spline })
    }

    pub fn from_fn(knots: KnotVector, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = knots.as_slice().iter().map(|&b| f(b)).collect();
        Self::from_values(knots, values)
    }

    /// `F(beta) = (beta + pi/2) / pi`.
    pub fn uniform(knots: KnotVector) -> Result<Self> {
        Self::from_fn(knots, |b| (b + FRAC_PI_2) / PI)
    }

    pub fn spline(&self) -> &CubicSpline {
        &self.spline
    }

    pub fn knots(&self) -> &KnotVector {
        self.spline.knots()
    }

    #[inline]
    pub fn cdf(&self, beta: f64) -> f64 {
        self.spline.eval_clamped(beta)
    }

    /// Angle density, the derivative of the CDF spline.
    #[inline]
    pub fn density(&self, beta: f64) -> f64 {
        self.spline.derivative_clamped(beta)
    }

    /// Resamples onto a different knot vector over the same domain.
    pub fn resample(&self, knots: KnotVector) -> Result<Self> {
        Self::from_fn(knots, |b| self.cdf(b))
    }

    /// Smallest increment seen across the knots and `probes_per_interval`
    /// interior probes per interval (negative when the spline dips).
    pub fn min_increment(&self, probes_per_interval: usize) -> f64 {
        let k = self.knots().as_slice();
        let mut prev = self.cdf(k[0]);
        let mut worst = f64::INFINITY;
        for w in k.windows(2) {
            for p in 1..=probes_per_interval {
                let x = w[0] + (w[1] - w[0]) * p as f64 / probes_per_interval as f64;
                let v = self.cdf(x);
                worst = worst.min(v - prev);
                prev = v;
            }
        }
        worst
    }
}

/// Which branch of the pushforward probability applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    ChiZeroLeq,
    ChiZeroGt,
    MEqOneChiPos,
    MEqOneChiNeg,
    MGtOne,
    MLtOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationCase {
    pub tag: CaseTag,
    /// `arctan((h - 1) / chi)`; absent when `chi = 0`.
    pub gamma1: Option<f64>,
    /// `arctan((h - 1) / chi + 1 / (chi (1 - m)))`; absent when `chi = 0` or `m = 1`.
    pub gamma2: Option<f64>,
}

impl PropagationCase {
    pub fn gamma_min(&self) -> Option<f64> {
        match (self.gamma1, self.gamma2) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, None) => a,
            (None, b) => b,
        }
    }

    pub fn gamma_max(&self) -> Option<f64> {
        match (self.gamma1, self.gamma2) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

/// Tangent of the successor angle.
pub fn f_plus(m: f64, h: f64, chi: f64) -> Result<f64> {
    let denom = 1.0 + chi * m - h;
    if denom == 0.0 {
        return Err(Error::SingularMap);
    }
    Ok(1.0 - 1.0 / denom)
}

/// Inverse of [`f_plus`] in its first argument.
pub fn f_minus(m: f64, h: f64, chi: f64) -> Result<f64> {
    if chi == 0.0 || m == 1.0 {
        return Err(Error::SingularInverse);
    }
    Ok(1.0 / (chi * (1.0 - m)) + (h - 1.0) / chi)
}

pub fn propagation_case(m: f64, h: f64, chi: f64) -> PropagationCase {
    if chi == 0.0 {
        let next = 1.0 - 1.0 / (1.0 - h);
        let tag = if next <= m { CaseTag::ChiZeroLeq } else { CaseTag::ChiZeroGt };
        return PropagationCase {
            tag,
            gamma1: None,
            gamma2: None,
        };
    }
    let shift = (h - 1.0) / chi;
    let gamma1 = Some(shift.atan());
    if m == 1.0 {
        let tag = if chi > 0.0 { CaseTag::MEqOneChiPos } else { CaseTag::MEqOneChiNeg };
        return PropagationCase {
            tag,
            gamma1,
            gamma2: None,
        };
    }
    let gamma2 = Some((shift + 1.0 / (chi * (1.0 - m))).atan());
    let tag = if m > 1.0 { CaseTag::MGtOne } else { CaseTag::MLtOne };
    PropagationCase { tag, gamma1, gamma2 }
}

/// `Pr[f_plus(tan(alpha), h) <= m]` for `alpha ~ cdf`.
pub fn prob_step_leq(cdf: &AngleCdf, m: f64, h: f64, chi: f64) -> f64 {
    if m == f64::INFINITY {
        return 1.0;
    }
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let case = propagation_case(m, h, chi);
    let p = match case.tag {
        CaseTag::ChiZeroLeq => 1.0,
        CaseTag::ChiZeroGt => 0.0,
        CaseTag::MEqOneChiPos => 1.0 - cdf.cdf(case.gamma1.unwrap_or(0.0)),
        CaseTag::MEqOneChiNeg => cdf.cdf(case.gamma1.unwrap_or(0.0)),
        CaseTag::MGtOne | CaseTag::MLtOne => {
            let lo = cdf.cdf(case.gamma_min().unwrap_or(0.0));
            let hi = cdf.cdf(case.gamma_max().unwrap_or(0.0));
            if case.tag == CaseTag::MGtOne {
                1.0 - hi + lo
            } else {
                hi - lo
            }
        }
    };
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub initial_knots: usize,
    pub max_knots: usize,
    pub l2_tolerance: f64,
    /// Share of the previous CDF kept in each update.
    pub blend_factor: f64,
    pub max_iterations: usize,
    /// Total h-knots per propagation; `None` follows the angle knot count.
    pub h_knots: Option<usize>,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            initial_knots: 64,
            max_knots: 2048,
            l2_tolerance: 1e-7,
            blend_factor: 0.1,
            max_iterations: 20_000,
            h_knots: None,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_knots < 4 || self.max_knots < self.initial_knots {
            return Err(Error::InvalidConfig(format!(
                "knot budget {} -> {} is invalid",
                self.initial_knots, self.max_knots
            )));
        }
        if self.l2_tolerance.is_nan() || self.l2_tolerance <= 0.0 {
            return Err(Error::InvalidConfig("l2 tolerance must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.blend_factor) {
            return Err(Error::InvalidConfig("blend factor must lie in [0, 1)".into()));
        }
        if matches!(self.h_knots, Some(n) if n < 8) {
            return Err(Error::InvalidConfig("at least 8 h-knots are required".into()));
        }
        Ok(())
    }
}

/// Splits `[lo, hi]` at the sorted `cuts` and lays `total` knots over the
/// pieces proportionally to their length (at least 4 each).
pub(crate) fn piece_grids(cuts: &[f64], total: usize) -> Vec<KnotVector> {
    let span = cuts[cuts.len() - 1] - cuts[0];
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .filter_map(|w| {
            let share = ((w[1] - w[0]) / span * total as f64).round() as usize;
            KnotVector::uniform(w[0], w[1], share.max(4)).ok()
        })
        .collect()
}

/// One integration piece over h: knots, density-weighted quadrature
/// weights, and (for `chi != 0`) the per-knot quantities shared by all
/// angle knots.
struct HPiece {
    knots: KnotVector,
    weights: Vec<f64>,
    shift: Vec<f64>,
    cdf_gamma1: Vec<f64>,
    gamma1: Vec<f64>,
}

/// Quadrature weights of the natural spline over `grid`, multiplied by the
/// density at each knot. The density is continuous on every piece (a
/// one-sided plateau when a coefficient is zero), so knot values suffice.
fn weighted_piece(grid: KnotVector, d: &HDensity) -> (KnotVector, Vec<f64>) {
    let w = natural_quadrature_weights(&grid);
    let weights = w.iter().zip(grid.as_slice()).map(|(wj, &h)| wj * d.eval(h)).collect();
    (grid, weights)
}

fn propagate_values(cdf: &AngleCdf, d: &HDensity, chi: f64, h_knots: usize) -> Vec<f64> {
    let betas = cdf.knots().as_slice();
    let last = betas.len() - 1;
    if chi == 0.0 {
        return betas
            .par_iter()
            .enumerate()
            .map(|(i, &beta)| match i {
                0 => 0.0,
                i if i == last => 1.0,
                _ => chi_zero_value(cdf, d, beta.tan(), h_knots),
            })
            .collect();
    }
    let pieces: Vec<HPiece> = piece_grids(&d.breakpoints(), h_knots)
        .into_iter()
        .map(|grid| {
            let (knots, weights) = weighted_piece(grid, d);
            let shift: Vec<f64> = knots.as_slice().iter().map(|h| (h - 1.0) / chi).collect();
            let gamma1: Vec<f64> = shift.iter().map(|s| s.atan()).collect();
            let cdf_gamma1 = gamma1.iter().map(|&g| cdf.cdf(g)).collect();
            HPiece {
                knots,
                weights,
                shift,
                cdf_gamma1,
                gamma1,
            }
        })
        .collect();
    betas
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| {
            if i == 0 {
                return 0.0;
            }
            if i == last {
                return 1.0;
            }
            let m = beta.tan();
            let total: f64 = pieces.iter().map(|p| piece_integral(cdf, p, m, chi)).sum();
            total
        })
        .collect()
}

fn piece_integral(cdf: &AngleCdf, piece: &HPiece, m: f64, chi: f64) -> f64 {
    let n = piece.knots.len();
    if m == 1.0 {
        return (0..n)
            .map(|j| {
                let f1 = piece.cdf_gamma1[j];
                let p = if chi > 0.0 { 1.0 - f1 } else { f1 };
                piece.weights[j] * p.clamp(0.0, 1.0)
            })
            .sum();
    }
    let offset = 1.0 / (chi * (1.0 - m));
    let outside = m > 1.0;
    (0..n)
        .map(|j| {
            let g2 = (piece.shift[j] + offset).atan();
            let f2 = cdf.cdf(g2);
            let f1 = piece.cdf_gamma1[j];
            let inside = if g2 >= piece.gamma1[j] { f2 - f1 } else { f1 - f2 };
            let p = if outside { 1.0 - inside } else { inside };
            piece.weights[j] * p.clamp(0.0, 1.0)
        })
        .sum()
}

/// With `chi = 0` the successor tangent `1 - 1/(1 - h)` ignores the old
/// angle, so the probability is an indicator in `h`; splitting at its jumps
/// (`h = 1` and `h = 1 - 1/(1 - m)`) leaves pieces on which it is constant.
fn chi_zero_value(cdf: &AngleCdf, d: &HDensity, m: f64, h_knots: usize) -> f64 {
    let (lo, hi) = d.support();
    let mut cuts = d.breakpoints();
    let mut extra = vec![1.0];
    if m != 1.0 {
        extra.push(1.0 - 1.0 / (1.0 - m));
    }
    for e in extra {
        if e > lo && e < hi {
            cuts.push(e);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    piece_grids(&cuts, h_knots)
        .into_iter()
        .map(|grid| {
            let (knots, weights) = weighted_piece(grid, d);
            let x = knots.as_slice();
            let mid = 0.5 * (x[0] + x[x.len() - 1]);
            let p = prob_step_leq(cdf, m, mid, 0.0);
            p * weights.iter().sum::<f64>()
        })
        .sum()
}

/// One step of the angle-law map on the knots of `cdf`.
pub fn propagate_cdf(cdf: &AngleCdf, d: &HDensity, chi: f64, cfg: &FixedPointConfig) -> Result<AngleCdf> {
    let h_knots = cfg.h_knots.unwrap_or(cdf.knots().len()).max(8);
    let values = propagate_values(cdf, d, chi, h_knots);
    AngleCdf::from_values(cdf.knots().clone(), values)
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryCdf {
    pub cdf: AngleCdf,
    pub iterations: usize,
    /// L2 distance between the last two iterates.
    pub residual: f64,
    pub knot_count: usize,
    pub residuals: Vec<f64>,
}

/// Fixed-point iteration from the uniform angle law.
pub fn stationary_cdf(params: &SwarmParams, cfg: &FixedPointConfig) -> Result<StationaryCdf> {
    cfg.validate()?;
    let knots = KnotVector::uniform(-FRAC_PI_2, FRAC_PI_2, cfg.initial_knots)?;
    stationary_cdf_from(params, AngleCdf::uniform(knots)?, cfg)
}

/// Fixed-point iteration from an arbitrary start. The knot set grows
/// (doubling, adaptively placed) whenever the residual at the current
/// resolution meets the tolerance or stalls; iteration ends once the
/// tolerance is met at `max_knots`.
pub fn stationary_cdf_from(params: &SwarmParams, start: AngleCdf, cfg: &FixedPointConfig) -> Result<StationaryCdf> {
    cfg.validate()?;
    let d = params.h_density()?;
    let chi = params.chi;
    let mut current = if start.knots().len() == cfg.initial_knots {
        start
    } else {
        start.resample(KnotVector::uniform(-FRAC_PI_2, FRAC_PI_2, cfg.initial_knots)?)?
    };
    let mut residuals = Vec::new();
    let mut level_start = 0;
    let mut residual = f64::INFINITY;
    for iteration in 1..=cfg.max_iterations {
        let n = current.knots().len();
        let h_knots = cfg.h_knots.unwrap_or(n).max(8);
        let pushed = propagate_values(&current, &d, chi, h_knots);
        let blended: Vec<f64> = pushed
            .iter()
            .zip(current.spline().values())
            .map(|(p, old)| (1.0 - cfg.blend_factor) * p + cfg.blend_factor * old)
            .collect();
        let next = AngleCdf::from_values(current.knots().clone(), blended)?;
        residual = spline::l2_distance(current.spline(), next.spline())?;
        residuals.push(residual);
        current = next;

        let converged = residual <= cfg.l2_tolerance;
        let level = &residuals[level_start..];
        let stalled = level.len() > 10 && residual > 0.9 * level[level.len() - 11];
        if converged && n >= cfg.max_knots {
            return Ok(StationaryCdf {
                cdf: current,
                iterations: iteration,
                residual,
                knot_count: n,
                residuals,
            });
        }
        if (converged || stalled) && n < cfg.max_knots {
            let target = (2 * n).min(cfg.max_knots);
            let knots = spline::refine_knots(current.spline(), target)?;
            current = current.resample(knots)?;
            level_start = residuals.len();
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}
