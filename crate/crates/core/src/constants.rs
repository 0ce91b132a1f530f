//! Tunable constants shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the small-Hessian exponent is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaMode {
    /// Fixed practical exponent.
    Practical(f64),
    /// `2^((2-d)(d+1)^2)` evaluated at the polynomial degree.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    /// Scale-splitting constant.
    pub m: f64,
    pub alpha: AlphaMode,
    /// Target overlap exponent.
    pub eps: f64,
    /// The base case applies once the working scale reaches `m^-base_power`.
    pub base_power: f64,
    /// Side of curved squares is `c_square * delta^(1/2)`.
    pub c_square: f64,
    pub cover_slack: f64,
    pub strip_slack: f64,
    pub c_adm: f64,
    pub py_floor: f64,
    pub sublevel_slack: f64,
    pub eig_floor: f64,
    pub overlap_cap: usize,
    pub ratio_gap: f64,
    pub c_eq: f64,
    pub c_nb: f64,
    /// Layer constants in the V-set definitions.
    pub layer_c: f64,
    pub layer_big_c: f64,
    /// Overlap bound is `overlap_k * delta^-eps`.
    pub overlap_k: f64,
    /// Hard cap on emitted rectangles.
    pub work_budget: usize,
}

impl Default for ConstantsTable {
    fn default() -> Self {
        ConstantsTable {
            m: 8.0,
            alpha: AlphaMode::Practical(0.25),
            eps: 0.25,
            base_power: 3.0,
            c_square: 0.25,
            cover_slack: 32.0,
            strip_slack: 64.0,
            c_adm: 0.125,
            py_floor: 0.25,
            sublevel_slack: 2.0,
            eig_floor: 0.05,
            overlap_cap: 64,
            ratio_gap: 8.0,
            c_eq: 16.0,
            c_nb: 8.0,
            layer_c: 0.25,
            layer_big_c: 8.0,
            overlap_k: 64.0,
            work_budget: 10_000_000,
        }
    }
}

impl ConstantsTable {
    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 2.0) {
            return Err(Error::InvalidInput(format!("M must be >= 2, got {}", self.m)));
        }
        if let AlphaMode::Practical(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidInput(format!("alpha must lie in (0,1], got {a}")));
            }
        }
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(Error::InvalidInput(format!("eps must lie in (0,1/2], got {}", self.eps)));
        }
        Ok(())
    }

    /// Exponent used at polynomial degree `d`.
    pub fn alpha_for(&self, d: usize) -> f64 {
        match self.alpha {
            AlphaMode::Practical(a) => a,
            AlphaMode::Strict => strict_alpha(d),
        }
    }

    /// Deepest recursion level allowed at scale `delta`.
    pub fn n_max(&self, delta: f64, d: usize) -> usize {
        let a = self.alpha_for(d);
        ((1.0 / delta).ln() / (a * self.m.ln())).ceil().max(0.0) as usize + 2
    }

    pub fn overlap_bound(&self, delta: f64) -> f64 {
        self.overlap_k * delta.powf(-self.eps)
    }
}

/// `beta = 2^(2-d)`.
pub fn beta(d: usize) -> f64 {
    2f64.powi(2 - d as i32)
}

/// `alpha = beta^((d+1)^2)`.
pub fn strict_alpha(d: usize) -> f64 {
    beta(d).powi(((d + 1) * (d + 1)) as i32)
}

/// Bound on the coefficients of `B` in the small-Hessian form.
pub fn c_ab(d: usize) -> f64 {
    2f64.powi(d as i32) * ((d + 1) * (d + 1)) as f64
}
