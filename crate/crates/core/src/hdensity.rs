//! Density of the combined random coefficient `H = c_l * r + c_g * s` with
//! `r, s ~ U[0, 1]` independent: a trapezoid (triangle when `|c_l| = |c_g|`)
//! on `[l_h, u_h]`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HDensity {
    pub c_l: f64,
    pub c_g: f64,
    pub l_h: f64,
    pub u_h: f64,
    pub c_min: f64,
    pub c_max: f64,
}

pub fn make_h_density(c_l: f64, c_g: f64) -> Result<HDensity> {
    if !c_l.is_finite() || !c_g.is_finite() {
        return Err(Error::NonFiniteInput("acceleration coefficient"));
    }
    if c_l == 0.0 && c_g == 0.0 {
        return Err(Error::DegenerateCoefficients);
    }
    Ok(HDensity {
        c_l,
        c_g,
        l_h: c_l.min(0.0) + c_g.min(0.0),
        u_h: c_l.max(0.0) + c_g.max(0.0),
        c_min: c_l.abs().min(c_g.abs()),
        c_max: c_l.abs().max(c_g.abs()),
    })
}

impl HDensity {
    /// Piecewise-linear density. Ends of the plateau belong to the plateau;
    /// the support ends belong to the plateau only when the ramps are empty.
    pub fn eval(&self, h: f64) -> f64 {
        if h < self.l_h || h > self.u_h {
            return 0.0;
        }
        let ramp_lo = self.l_h + self.c_min;
        let ramp_hi = self.u_h - self.c_min;
        if h < ramp_lo {
            (h - self.l_h) / (self.c_l * self.c_g).abs()
        } else if h <= ramp_hi {
            1.0 / self.c_max
        } else {
            (self.u_h - h) / (self.c_l * self.c_g).abs()
        }
    }

    /// Sorted distinct points where the density has kinks, support ends
    /// included.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![self.l_h, self.l_h + self.c_min, self.u_h - self.c_min, self.u_h];
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    pub fn support(&self) -> (f64, f64) {
        (self.l_h, self.u_h)
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.c_l + self.c_g)
    }
}

pub fn eval_density(d: &HDensity, h: f64) -> Result<f64> {
    if !h.is_finite() {
        return Err(Error::NonFiniteInput("h"));
    }
    Ok(d.eval(h))
}

pub fn breakpoints(d: &HDensity) -> Vec<f64> {
    d.breakpoints()
}
