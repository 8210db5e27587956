//! Cubic spline interpolation on arbitrary strictly increasing knots.
//!
//! A spline is stored as knot values plus second derivatives ("moments") at
//! the knots, from which the per-interval power-basis coefficients
//! `a + b t + c t^2 + d t^3` (with `t = x - x_i`) are derived once. Definite
//! integrals use a prefix table of whole-interval integrals, so every query is
//! `O(log n)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, strictly increasing abscissae with at least four entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct KnotVector(Vec<f64>);

impl KnotVector {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.len() < 4 {
            return Err(Error::InsufficientKnots(positions.len()));
        }
        for (i, x) in positions.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidKnots(i));
            }
            if i > 0 && positions[i - 1] >= *x {
                return Err(Error::InvalidKnots(i));
            }
        }
        Ok(Self(positions))
    }

    /// `count` equidistant knots on `[lo, hi]`; both endpoints are exact.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 4 {
            return Err(Error::InsufficientKnots(count));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let mut positions: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
        positions[count - 1] = hi;
        Self::new(positions)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for KnotVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let positions = Vec::<f64>::deserialize(deserializer)?;
        KnotVector::new(positions).map_err(serde::de::Error::custom)
    }
}

/// End conditions closing the interpolation system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Zero second derivative at both ends.
    Natural,
    /// First and second derivatives agree between the two ends; the values
    /// themselves are free (a CDF runs from 0 to 1).
    DerivativeMatched,
    /// Third derivative continuous across the second and penultimate knots.
    /// Reproduces cubic polynomials exactly.
    NotAKnot,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplineRecord {
    knots: KnotVector,
    values: Vec<f64>,
    boundary: BoundaryKind,
}

/// Piecewise cubic interpolant, immutable after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "SplineRecord", try_from = "SplineRecord")]
pub struct CubicSpline {
    knots: KnotVector,
    values: Vec<f64>,
    boundary: BoundaryKind,
    /// Per-interval `[a, b, c, d]`.
    coeffs: Vec<[f64; 4]>,
    /// `prefix[i]` is the integral from the first knot to knot `i`.
    prefix: Vec<f64>,
}

impl From<CubicSpline> for SplineRecord {
    fn from(s: CubicSpline) -> Self {
        SplineRecord {
            knots: s.knots,
            values: s.values,
            boundary: s.boundary,
        }
    }
}

impl TryFrom<SplineRecord> for CubicSpline {
    type Error = Error;

    fn try_from(r: SplineRecord) -> Result<Self> {
        build_spline(r.knots, r.values, r.boundary)
    }
}

pub fn build_spline(knots: KnotVector, values: Vec<f64>, boundary: BoundaryKind) -> Result<CubicSpline> {
    if knots.len() < 4 {
        return Err(Error::InsufficientKnots(knots.len()));
    }
    if values.len() != knots.len() {
        return Err(Error::InvalidConfig(format!(
            "{} values for {} knots",
            values.len(),
            knots.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("spline value"));
    }
    let moments = match boundary {
        BoundaryKind::Natural => natural_moments(knots.as_slice(), &values),
        BoundaryKind::NotAKnot => not_a_knot_moments(knots.as_slice(), &values),
        BoundaryKind::DerivativeMatched => derivative_matched_moments(knots.as_slice(), &values),
    };
    Ok(CubicSpline::from_moments(knots, values, boundary, &moments))
}

impl CubicSpline {
    fn from_moments(knots: KnotVector, values: Vec<f64>, boundary: BoundaryKind, m: &[f64]) -> Self {
        let x = knots.as_slice();
        let n = x.len() - 1;
        let mut coeffs = Vec::with_capacity(n);
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        for i in 0..n {
            let h = x[i + 1] - x[i];
            let a = values[i];
            let b = (values[i + 1] - values[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
            let c = m[i] / 2.0;
            let d = (m[i + 1] - m[i]) / (6.0 * h);
            coeffs.push([a, b, c, d]);
            let whole = h * (values[i] + values[i + 1]) / 2.0 - h * h * h * (m[i] + m[i + 1]) / 24.0;
            prefix.push(prefix[i] + whole);
        }
        Self {
            knots,
            values,
            boundary,
            coeffs,
            prefix,
        }
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots.first(), self.knots.last())
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if x.is_nan() || x < lo || x > hi {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        Ok(())
    }

    #[inline]
    fn locate(&self, x: f64) -> usize {
        let k = self.knots.as_slice();
        let i = k.partition_point(|&p| p <= x);
        i.saturating_sub(1).min(self.coeffs.len() - 1)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.eval_clamped(x))
    }

    /// Evaluates at `x` clamped into the domain. For hot loops whose
    /// arguments are in-domain by construction.
    #[inline]
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let i = self.locate(x);
        let t = x - self.knots.as_slice()[i];
        let [a, b, c, d] = self.coeffs[i];
        a + t * (b + t * (c + t * d))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.derivative_clamped(x))
    }

    #[inline]
    pub fn derivative_clamped(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let i = self.locate(x);
        let t = x - self.knots.as_slice()[i];
        let [_, b, c, d] = self.coeffs[i];
        b + t * (2.0 * c + 3.0 * t * d)
    }

    pub fn second_derivative(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        let i = self.locate(x);
        let t = x - self.knots.as_slice()[i];
        let [_, _, c, d] = self.coeffs[i];
        Ok(2.0 * c + 6.0 * t * d)
    }

    /// Piecewise-constant third derivative, one entry per interval.
    pub fn third_derivatives(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| 6.0 * c[3]).collect()
    }

    fn antiderivative(&self, x: f64) -> f64 {
        let i = self.locate(x);
        let t = x - self.knots.as_slice()[i];
        let [a, b, c, d] = self.coeffs[i];
        self.prefix[i] + t * (a + t * (b / 2.0 + t * (c / 3.0 + t * d / 4.0)))
    }

    /// Exact integral of the piecewise cubic over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        self.check_domain(a)?;
        self.check_domain(b)?;
        if a > b {
            return Err(Error::InvalidConfig(format!("integral bounds reversed: {a} > {b}")));
        }
        Ok(self.antiderivative(b) - self.antiderivative(a))
    }

    /// Integral over the whole knot domain.
    pub fn total_integral(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }
}

/// Thomas algorithm. `sub[0]` and `sup[n-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Cyclic tridiagonal solve via Sherman-Morrison. `sub[0]` couples row 0
/// to the last unknown and `sup[n-1]` couples the last row to unknown 0.
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(sub, &bb, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(sub, &bb, sup, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn interior_rhs(x: &[f64], y: &[f64], i: usize) -> f64 {
    let h0 = x[i] - x[i - 1];
    let h1 = x[i + 1] - x[i];
    6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0)
}

fn natural_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len() - 1;
    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n - 1];
    let mut sup = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n - 1];
    for i in 1..n {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        sub[i - 1] = h0;
        diag[i - 1] = 2.0 * (h0 + h1);
        sup[i - 1] = h1;
        rhs[i - 1] = interior_rhs(x, y, i);
    }
    let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
    let mut m = Vec::with_capacity(n + 1);
    m.push(0.0);
    m.extend(inner);
    m.push(0.0);
    m
}

fn not_a_knot_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len() - 1;
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let k = n - 1;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for i in 1..n {
        sub[i - 1] = h[i - 1];
        diag[i - 1] = 2.0 * (h[i - 1] + h[i]);
        sup[i - 1] = h[i];
        rhs[i - 1] = interior_rhs(x, y, i);
    }
    // M0 = ((h0 + h1) M1 - h0 M2) / h1, folded into the first row.
    diag[0] += h[0] * (h[0] + h[1]) / h[1];
    sup[0] -= h[0] * h[0] / h[1];
    // Mn = ((h[n-2] + h[n-1]) M[n-1] - h[n-1] M[n-2]) / h[n-2], folded into the last row.
    diag[k - 1] += h[n - 1] * (h[n - 2] + h[n - 1]) / h[n - 2];
    sub[k - 1] -= h[n - 1] * h[n - 1] / h[n - 2];
    let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
    let m0 = ((h[0] + h[1]) * inner[0] - h[0] * inner[1]) / h[1];
    let mn = ((h[n - 2] + h[n - 1]) * inner[k - 1] - h[n - 1] * inner[k - 2]) / h[n - 2];
    let mut m = Vec::with_capacity(n + 1);
    m.push(m0);
    m.extend(inner);
    m.push(mn);
    m
}

/// Moments of the periodic spline through `y - secant`, where the secant
/// joins the two end values. Adding the secant back changes neither the
/// moments nor the equality of the end slopes.
fn derivative_matched_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len() - 1;
    let (x0, xn) = (x[0], x[n]);
    let slope = (y[n] - y[0]) / (xn - x0);
    let r: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| yi - y[0] - slope * (xi - x0)).collect();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let hp = if i == 0 { h[n - 1] } else { h[i - 1] };
        let hn = h[i];
        let rp = if i == 0 { r[n - 1] } else { r[i - 1] };
        sub[i] = hp;
        diag[i] = 2.0 * (hp + hn);
        sup[i] = hn;
        rhs[i] = 6.0 * ((r[i + 1] - r[i]) / hn - (r[i] - rp) / hp);
    }
    let mut m = solve_cyclic(&sub, &diag, &sup, &rhs);
    m.push(m[0]);
    m
}

/// Weights `w` with `sum_j w[j] * y[j]` equal to the integral of the natural
/// spline through `(knots[j], y[j])` over the whole knot range.
///
/// With interior moments `m = A^{-1} B y`, the integral is `t.y - c.m`, where
/// `t` holds trapezoid weights and `c` the moment weights; solving the
/// symmetric system `A z = c` once gives `w = t - B^T z`.
pub fn natural_quadrature_weights(knots: &KnotVector) -> Vec<f64> {
    let x = knots.as_slice();
    let n = x.len() - 1;
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mut w = vec![0.0; n + 1];
    for i in 0..n {
        w[i] += 0.5 * h[i];
        w[i + 1] += 0.5 * h[i];
    }
    let k = n - 1;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut c = vec![0.0; k];
    for i in 1..n {
        sub[i - 1] = h[i - 1];
        diag[i - 1] = 2.0 * (h[i - 1] + h[i]);
        sup[i - 1] = h[i];
        c[i - 1] = (h[i - 1].powi(3) + h[i].powi(3)) / 24.0;
    }
    let z = solve_tridiagonal(&sub, &diag, &sup, &c);
    for i in 1..n {
        let zi = z[i - 1];
        w[i - 1] -= zi * 6.0 / h[i - 1];
        w[i] += zi * 6.0 * (1.0 / h[i] + 1.0 / h[i - 1]);
        w[i + 1] -= zi * 6.0 / h[i];
    }
    w
}

pub fn eval(s: &CubicSpline, x: f64) -> Result<f64> {
    s.eval(x)
}

pub fn integral(s: &CubicSpline, a: f64, b: f64) -> Result<f64> {
    s.integral(a, b)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    lo: f64,
    hi: f64,
    jump_lo: f64,
    jump_hi: f64,
}

impl Candidate {
    fn signal(&self) -> f64 {
        self.jump_lo.max(self.jump_hi) * (self.hi - self.lo)
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap order: strongest signal, then longest, then leftmost.
    fn cmp(&self, other: &Self) -> Ordering {
        self.signal()
            .total_cmp(&other.signal())
            .then((self.hi - self.lo).total_cmp(&(other.hi - other.lo)))
            .then(other.lo.total_cmp(&self.lo))
    }
}

/// Grows the knot set of `s` to `target_count` by repeatedly bisecting the
/// interval with the largest third-derivative jump at its end knots.
///
/// The jump of the piecewise-constant third derivative at an interior knot
/// measures the local fourth derivative. An interval's signal is the larger
/// of its two end-knot jumps scaled by its length; a freshly inserted
/// midpoint carries no jump, because the original spline is already smooth
/// there. Equal signals go to the longer interval, then the smaller abscissa.
pub fn refine_knots(s: &CubicSpline, target_count: usize) -> Result<KnotVector> {
    let current = s.knots().len();
    if target_count <= current {
        return Err(Error::NoRefinementNeeded {
            current,
            target: target_count,
        });
    }
    let x = s.knots().as_slice();
    let third = s.third_derivatives();
    let n = third.len();
    let jump_at = |k: usize| -> f64 {
        if k == 0 || k == n {
            0.0
        } else {
            (third[k] - third[k - 1]).abs()
        }
    };
    let mut heap: BinaryHeap<Candidate> = (0..n)
        .map(|i| Candidate {
            lo: x[i],
            hi: x[i + 1],
            jump_lo: jump_at(i),
            jump_hi: jump_at(i + 1),
        })
        .collect();
    let mut inserted = Vec::with_capacity(target_count - current);
    while inserted.len() < target_count - current {
        let Some(best) = heap.pop() else { break };
        let mid = 0.5 * (best.lo + best.hi);
        if mid <= best.lo || mid >= best.hi {
            continue;
        }
        inserted.push(mid);
        heap.push(Candidate {
            lo: best.lo,
            hi: mid,
            jump_lo: best.jump_lo,
            jump_hi: 0.0,
        });
        heap.push(Candidate {
            lo: mid,
            hi: best.hi,
            jump_lo: 0.0,
            jump_hi: best.jump_hi,
        });
    }
    let mut all: Vec<f64> = x.iter().copied().chain(inserted).collect();
    all.sort_by(f64::total_cmp);
    KnotVector::new(all)
}

const GAUSS4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_26,
    0.339_981_043_584_856_26,
    0.861_136_311_594_052_6,
];
const GAUSS4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_85,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_85,
];

/// Root mean square difference under the uniform probability measure on the
/// shared domain. The squared difference is a degree-6 polynomial on each
/// piece of the merged knot set, so 4-point Gauss-Legendre is exact.
pub fn l2_distance(a: &CubicSpline, b: &CubicSpline) -> Result<f64> {
    let (alo, ahi) = a.domain();
    let (blo, bhi) = b.domain();
    let scale = 1e-12 * (ahi - alo).abs().max(1.0);
    if (alo - blo).abs() > scale || (ahi - bhi).abs() > scale {
        return Err(Error::DomainMismatch(alo, ahi, blo, bhi));
    }
    let mut merged: Vec<f64> = a
        .knots()
        .as_slice()
        .iter()
        .chain(b.knots().as_slice())
        .copied()
        .collect();
    merged.sort_by(f64::total_cmp);
    merged.dedup();
    let mut sum = 0.0;
    for w in merged.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[1] + w[0]);
        for (node, weight) in GAUSS4_NODES.iter().zip(&GAUSS4_WEIGHTS) {
            let x = mid + half * node;
            let diff = a.eval_clamped(x) - b.eval_clamped(x);
            sum += half * weight * diff * diff;
        }
    }
    Ok((sum / (ahi - alo)).sqrt())
}
