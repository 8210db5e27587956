//! Long single-particle runs of the one-dimensional recurrence
//!
//! ```text
//! v' = chi v - H x,   x' = x + v',   H = c_l r + c_g s,
//! ```
//!
//! tracked through the angle of `(x, v)` only, so `Phi = ln(x^2 + v^2)` never
//! has to be represented. Used to cross-check the spline numerics.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angle::AngleCdf;
use crate::error::{Error, Result};
use crate::omega::SwarmParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub iterations: usize,
    pub seed: u64,
    pub histogram_bins: usize,
    pub batch_count: usize,
    /// Leading share of the run excluded from every statistic.
    pub burn_in_fraction: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            iterations: 1_000_000,
            seed: 0,
            histogram_bins: 1000,
            batch_count: 100,
            burn_in_fraction: 0.01,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_count < 2 {
            return Err(Error::InvalidConfig("batch_count must be at least 2".into()));
        }
        if self.histogram_bins == 0 {
            return Err(Error::InvalidConfig("histogram_bins must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::InvalidConfig("burn_in_fraction must lie in [0, 1)".into()));
        }
        if self.measured_iterations() < self.batch_count {
            return Err(Error::InvalidConfig(format!(
                "{} iterations leave fewer than {} measured steps after burn-in",
                self.iterations, self.batch_count
            )));
        }
        Ok(())
    }

    fn burn_in(&self) -> usize {
        (self.iterations as f64 * self.burn_in_fraction).floor() as usize
    }

    /// Post-burn-in steps, truncated to a multiple of the batch count.
    fn measured_iterations(&self) -> usize {
        let post = self.iterations - self.burn_in();
        post - post % self.batch_count.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub mean_drift: f64,
    /// Batch-means standard error of `mean_drift`.
    pub stderr: f64,
    /// Bin densities over `[-pi/2, pi/2]`: `count * bins / (pi * iterations_used)`.
    pub histogram: Vec<f64>,
    pub iterations_used: usize,
    /// Draws rejected because they sent `x` exactly to zero.
    pub singular_redraws: u64,
}

impl SimStats {
    pub fn bin_width(&self) -> f64 {
        PI / self.histogram.len() as f64
    }

    pub fn bin_midpoints(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.histogram.len()).map(|i| -FRAC_PI_2 + (i as f64 + 0.5) * w).collect()
    }
}

/// Two uniforms per step, `r` before `s`.
fn draw_h(rng: &mut ChaCha8Rng, p: &SwarmParams) -> f64 {
    let r: f64 = rng.random();
    let s: f64 = rng.random();
    p.c_l * r + p.c_g * s
}

/// One step from angle `alpha`: `(delta_phi, next_alpha)`, or `None` if the
/// new position is exactly zero.
#[inline]
fn angle_step(alpha: f64, h: f64, chi: f64) -> Option<(f64, f64)> {
    let (s, c) = alpha.sin_cos();
    let v = chi * s - h * c;
    let x = c + v;
    if x == 0.0 {
        return None;
    }
    Some(((x * x + v * v).ln(), (v / x).atan()))
}

fn bin_index(alpha: f64, bins: usize) -> usize {
    let t = (alpha + FRAC_PI_2) / PI * bins as f64;
    (t.max(0.0) as usize).min(bins - 1)
}

/// Runs the angle recurrence from `alpha_0 = 0` and reports the mean drift
/// of `Phi`, its batch-means standard error and the angle histogram.
pub fn simulate_drift(params: &SwarmParams, cfg: &SimConfig) -> Result<SimStats> {
    cfg.validate()?;
    if params.is_deterministic() {
        return Err(Error::DegenerateCoefficients);
    }
    let burn_in = cfg.burn_in();
    let used = cfg.measured_iterations();
    let batch_len = used / cfg.batch_count;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = vec![0u64; cfg.histogram_bins];
    let mut batch_means = Vec::with_capacity(cfg.batch_count);
    let mut batch_sum = 0.0;
    let mut redraws = 0u64;
    let mut alpha = 0.0;
    for t in 0..burn_in + used {
        let (dphi, next) = loop {
            let h = draw_h(&mut rng, params);
            match angle_step(alpha, h, params.chi) {
                Some(step) => break step,
                None => redraws += 1,
            }
        };
        if t >= burn_in {
            counts[bin_index(alpha, cfg.histogram_bins)] += 1;
            batch_sum += dphi;
            if (t - burn_in + 1).is_multiple_of(batch_len) {
                batch_means.push(batch_sum / batch_len as f64);
                batch_sum = 0.0;
            }
        }
        alpha = next;
    }
    let b = batch_means.len() as f64;
    let mean = batch_means.iter().sum::<f64>() / b;
    let var = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    let scale = cfg.histogram_bins as f64 / (PI * used as f64);
    Ok(SimStats {
        mean_drift: mean,
        stderr: (var / b).sqrt(),
        histogram: counts.iter().map(|&n| n as f64 * scale).collect(),
        iterations_used: used,
        singular_redraws: redraws,
    })
}

/// Per-step increments of `Phi` from the angle recurrence, starting at
/// `alpha_0 = 0` with no burn-in. Same random stream as [`simulate_drift`].
pub fn angle_increments(params: &SwarmParams, steps: usize, seed: u64) -> Result<Vec<f64>> {
    if params.is_deterministic() {
        return Err(Error::DegenerateCoefficients);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alpha = 0.0;
    let mut increments = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (dphi, next) = loop {
            if let Some(step) = angle_step(alpha, draw_h(&mut rng, params), params.chi) {
                break step;
            }
        };
        increments.push(dphi);
        alpha = next;
    }
    Ok(increments)
}

/// `ln(x^2 + v^2)` above which (or below the negation of which) the state is
/// rescaled to unit length.
const RENORMALIZE_AT: f64 = 40.0;

/// Runs the position/velocity recurrence itself from `x = 1, v = 0` and
/// returns the per-step increments of `Phi`. Consumes random numbers exactly
/// like [`angle_increments`], so both produce the same increments for the
/// same seed.
pub fn simulate_xv_direct(params: &SwarmParams, steps: usize, seed: u64) -> Result<Vec<f64>> {
    if params.is_deterministic() {
        return Err(Error::DegenerateCoefficients);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut v) = (1.0f64, 0.0f64);
    let mut phi = 0.0f64;
    let mut increments = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (nx, nv) = loop {
            let h = draw_h(&mut rng, params);
            let nv = params.chi * v - h * x;
            let nx = x + nv;
            if nx != 0.0 {
                break (nx, nv);
            }
        };
        let next_phi = (nx * nx + nv * nv).ln();
        increments.push(next_phi - phi);
        x = nx;
        v = nv;
        phi = next_phi;
        if phi.abs() > RENORMALIZE_AT {
            let norm = (x * x + v * v).sqrt();
            x /= norm;
            v /= norm;
            phi = (x * x + v * v).ln();
        }
    }
    Ok(increments)
}

/// L1 distance between the empirical bin densities and the density of `f`
/// averaged over each bin (exactly the CDF increment over the bin width).
pub fn histogram_distance(stats: &SimStats, f: &AngleCdf) -> f64 {
    let w = stats.bin_width();
    let mut prev = f.cdf(-FRAC_PI_2);
    stats
        .histogram
        .iter()
        .enumerate()
        .map(|(i, &emp)| {
            let hi = if i + 1 == stats.histogram.len() {
                FRAC_PI_2
            } else {
                -FRAC_PI_2 + (i + 1) as f64 * w
            };
            let next = f.cdf(hi);
            let mass = next - prev;
            prev = next;
            (emp * w - mass).abs()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(chi: f64, c: f64) -> SwarmParams {
        SwarmParams::new(chi, c, c).unwrap()
    }

    #[test]
    fn histogram_is_normalized() {
        let cfg = SimConfig {
            iterations: 20_000,
            seed: 3,
            ..SimConfig::default()
        };
        let stats = simulate_drift(&params(0.6, 1.7), &cfg).unwrap();
        let total: f64 = stats.histogram.iter().map(|d| d * stats.bin_width()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(stats.histogram.iter().all(|&d| d >= 0.0));
        assert_eq!(stats.iterations_used, 19_800);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = SimConfig {
            iterations: 5_000,
            seed: 42,
            ..SimConfig::default()
        };
        let a = simulate_drift(&params(0.72984, 1.496172), &cfg).unwrap();
        let b = simulate_drift(&params(0.72984, 1.496172), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn first_direct_increment_from_rest() {
        // From x = 1, v = 0: Phi_1 = ln((1 - h)^2 + h^2).
        let p = params(0.5, 1.0);
        let inc = simulate_xv_direct(&p, 1, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = draw_h(&mut rng, &p);
        assert!((inc[0] - ((1.0 - h).powi(2) + h * h).ln()).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs() {
        let p = params(0.5, 1.0);
        for cfg in [
            SimConfig { batch_count: 1, ..SimConfig::default() },
            SimConfig { histogram_bins: 0, ..SimConfig::default() },
            SimConfig { iterations: 50, ..SimConfig::default() },
            SimConfig { burn_in_fraction: 1.0, ..SimConfig::default() },
        ] {
            assert!(matches!(simulate_drift(&p, &cfg), Err(Error::InvalidConfig(_))));
        }
        assert_eq!(
            simulate_drift(&SwarmParams::new(0.5, 0.0, 0.0).unwrap(), &SimConfig::default()),
            Err(Error::DegenerateCoefficients)
        );
    }

    #[test]
    fn bins_cover_the_closed_interval() {
        assert_eq!(bin_index(-FRAC_PI_2, 10), 0);
        assert_eq!(bin_index(FRAC_PI_2, 10), 9);
        assert_eq!(bin_index(0.0, 10), 5);
    }
}
