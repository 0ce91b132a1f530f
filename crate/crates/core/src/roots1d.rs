//! Real-root isolation and sublevel intervals for univariate polynomials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycore::Poly1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Multiplicity {
    Odd,
    Even,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsolatedRoot {
    pub lo: f64,
    pub hi: f64,
    pub multiplicity_hint: Multiplicity,
}

impl IsolatedRoot {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Relative isolation tolerance.
pub const ISOLATION_TOL: f64 = 1e-9;

/// `(|q0|, sum of |q_k| for k >= 1)` of the pullback to `[-1,1]`.
fn centre_and_rest(p: &Poly1, lo: f64, hi: f64) -> (f64, f64) {
    let q = p.pullback(lo, hi);
    let c0 = q.coeff(0);
    (c0, q.coeffs.iter().skip(1).map(|c| c.abs()).sum())
}

fn sign(v: f64) -> i32 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Isolate the real roots of `p` in `[lo, hi]`.
///
/// Intervals where the coefficient bound proves `p != 0` are pruned; the rest
/// are bisected down to `ISOLATION_TOL * (hi - lo)` and adjacent survivors merged.
pub fn isolate_roots(p: &Poly1, domain: (f64, f64)) -> Result<Vec<IsolatedRoot>> {
    let (a, b) = domain;
    let scale = p.coeff_max();
    let q = p.pullback(a, b);
    if scale == 0.0 || q.coeff_max() <= 1e-14 * scale {
        return Err(Error::IdenticallyZero);
    }
    let tol = ISOLATION_TOL * (b - a);
    let mut leaves: Vec<(f64, f64)> = Vec::new();
    let mut stack = vec![(a, b)];
    while let Some((lo, hi)) = stack.pop() {
        let (c0, rest) = centre_and_rest(p, lo, hi);
        if c0.abs() > rest {
            continue;
        }
        if hi - lo <= tol {
            leaves.push((lo, hi));
            continue;
        }
        let mid = 0.5 * (lo + hi);
        stack.push((mid, hi));
        stack.push((lo, mid));
    }
    leaves.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut clusters: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in leaves {
        match clusters.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => clusters.push((lo, hi)),
        }
    }
    let dp = p.deriv();
    Ok(clusters
        .into_iter()
        .map(|(lo, hi)| {
            let (pl, ph) = (p.eval(lo), p.eval(hi));
            let hint = if sign(pl) * sign(ph) < 0 || pl == 0.0 || ph == 0.0 {
                Multiplicity::Odd
            } else if sign(dp.eval(lo)) * sign(dp.eval(hi)) <= 0 {
                Multiplicity::Even
            } else {
                Multiplicity::Unknown
            };
            IsolatedRoot { lo, hi, multiplicity_hint: hint }
        })
        .collect())
}

/// Certified sign of `p` on `[lo, hi]`: `Some(1)` if `p > 0` throughout,
/// `Some(-1)` if `p < 0` throughout, `None` if it cannot be shown within `max_depth`
/// bisections.
pub fn certified_sign(p: &Poly1, lo: f64, hi: f64, max_depth: usize) -> Option<i32> {
    let mut stack = vec![(lo, hi, 0usize)];
    let mut found = 0;
    while let Some((l, h, depth)) = stack.pop() {
        let (c0, rest) = centre_and_rest(p, l, h);
        if c0.abs() > rest {
            let s = sign(c0);
            if found != 0 && s != found {
                return None;
            }
            found = s;
            continue;
        }
        if depth >= max_depth {
            return None;
        }
        let m = 0.5 * (l + h);
        stack.push((m, h, depth + 1));
        stack.push((l, m, depth + 1));
    }
    (found != 0).then_some(found)
}

#[derive(Clone, Copy, PartialEq)]
enum Cls {
    Out,
    In,
}

/// Disjoint closed intervals covering `{x in domain : |p(x)| < level}` with
/// `|p| <= 2 level` on each.
pub fn sublevel_intervals(p: &Poly1, domain: (f64, f64), level: f64) -> Vec<(f64, f64)> {
    let (a, b) = domain;
    assert!(level > 0.0, "level must be positive");
    let tol = ISOLATION_TOL * (b - a);
    let mut pieces: Vec<(f64, f64, Cls)> = Vec::new();
    let mut stack = vec![(a, b)];
    while let Some((lo, hi)) = stack.pop() {
        let (c0, rest) = centre_and_rest(p, lo, hi);
        if c0.abs() - rest >= level {
            pieces.push((lo, hi, Cls::Out));
        } else if c0.abs() + rest <= 2.0 * level {
            pieces.push((lo, hi, Cls::In));
        } else if hi - lo <= tol {
            let v = p.eval(0.5 * (lo + hi)).abs();
            pieces.push((lo, hi, if v <= 1.5 * level { Cls::In } else { Cls::Out }));
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut runs: Vec<(f64, f64)> = Vec::new();
    for (lo, hi, c) in pieces {
        if c != Cls::In {
            continue;
        }
        match runs.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => runs.push((lo, hi)),
        }
    }
    // Merge across gaps on which |p| <= 2 level is certified, so that the
    // number of runs matches the components of the band.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for r in runs {
        if let Some(last) = merged.last_mut() {
            if band_certified(p, last.1, r.0, 2.0 * level, 40) {
                last.1 = r.1;
                continue;
            }
        }
        merged.push(r);
    }
    merged
}

/// Whether `|p| <= bound` can be certified on `[lo, hi]`.
fn band_certified(p: &Poly1, lo: f64, hi: f64, bound: f64, max_depth: usize) -> bool {
    let mut stack = vec![(lo, hi, 0usize)];
    while let Some((l, h, depth)) = stack.pop() {
        let (c0, rest) = centre_and_rest(p, l, h);
        if c0.abs() + rest <= bound {
            continue;
        }
        if c0.abs() - rest > bound || depth >= max_depth {
            return false;
        }
        let m = 0.5 * (l + h);
        stack.push((m, h, depth + 1));
        stack.push((l, m, depth + 1));
    }
    true
}
