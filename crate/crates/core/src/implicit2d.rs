//! Implicit branches `P(x, g(x)) = 0` where `P_y` is bounded away from zero.

use crate::error::{Error, Result};
use crate::flat1d::Fn1Handle;
use crate::polycore::{Poly1, Poly2};
use crate::roots1d::isolate_roots;

/// Roots of `p` in `[-1,1]` as cluster intervals; a zero polynomial has none.
fn root_clusters(p: &Poly1) -> Vec<(f64, f64)> {
    match isolate_roots(p, (-1.0, 1.0)) {
        Ok(r) => r.into_iter().map(|r| (r.lo, r.hi)).collect(),
        Err(_) => Vec::new(),
    }
}

/// Sign of `P_y` read at the centre; callers certify it is constant.
fn py_sign(p: &Poly2) -> f64 {
    if p.dy().eval(0.0, 0.0) < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Intervals of `x in [-1,1]` admitting some `y in [-1,1]` with `|P(x,y)| <= δ`.
///
/// With `P` monotone in `y` these are the `x` where `P(x,-1) <= δ` and
/// `P(x,1) >= -δ` (after orienting `P_y > 0`); endpoints are roots of
/// `P(x,∓1) ∓ δ` or `±1`.
pub fn branch_intervals(p: &Poly2, delta: f64) -> Result<Vec<(f64, f64)>> {
    let s = py_sign(p);
    let r = p.scale(s);
    let low = r.restrict_y(-1.0).add(&Poly1::constant(-delta));
    let high = r.restrict_y(1.0).add(&Poly1::constant(delta));
    let slack = 1e-12 * p.coeff_sum().max(1.0);
    let ok = |x: f64| low.eval(x) <= slack && high.eval(x) >= -slack;

    let mut cuts = vec![-1.0, 1.0];
    let mut clusters = root_clusters(&low);
    clusters.extend(root_clusters(&high));
    for (a, b) in &clusters {
        cuts.push(*a);
        cuts.push(*b);
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        if !(ok(mid) || ok(a) || ok(b)) {
            continue;
        }
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySet);
    }
    // Pad by the isolation tolerance so endpoints are never inside the set.
    let pad = 4e-9;
    Ok(out.into_iter().map(|(a, b)| ((a - pad).max(-1.0), (b + pad).min(1.0))).collect())
}

/// The branch `y = g(x)` of `P = 0` over an interval.
#[derive(Debug, Clone)]
pub struct ImplicitBranch {
    p: Poly2,
    px: Poly2,
    py: Poly2,
    pxx: Poly2,
    pxy: Poly2,
    pyy: Poly2,
    pub interval: (f64, f64),
    pub window: (f64, f64),
    scale: f64,
}

impl ImplicitBranch {
    /// Branch over `interval` with y-window `[-1 - C0 δ, 1 + C0 δ]`, `C0 = 4 / py_floor`.
    pub fn new(p: &Poly2, interval: (f64, f64), delta: f64, py_floor: f64) -> Self {
        let c0 = 4.0 / py_floor;
        Self::with_window(p, interval, (-1.0 - c0 * delta, 1.0 + c0 * delta))
    }

    pub fn with_window(p: &Poly2, interval: (f64, f64), window: (f64, f64)) -> Self {
        let s = py_sign(p);
        let p = p.scale(s);
        let px = p.dx();
        let py = p.dy();
        ImplicitBranch {
            pxx: px.dx(),
            pxy: px.dy(),
            pyy: py.dy(),
            px,
            py,
            interval,
            window,
            scale: p.coeff_sum().max(1e-300),
            p,
        }
    }

    /// `g(x)` alone.
    pub fn g(&self, x: f64) -> Result<f64> {
        let (mut a, mut b) = self.window;
        let fa = self.p.eval(x, a);
        let fb = self.p.eval(x, b);
        if fa > 0.0 || fb < 0.0 {
            return Err(Error::NewtonDivergence(x));
        }
        if fa == 0.0 {
            return Ok(a);
        }
        if fb == 0.0 {
            return Ok(b);
        }
        let mut y = 0.5 * (a + b);
        for _ in 0..60 {
            let f = self.p.eval(x, y);
            if f == 0.0 {
                return Ok(y);
            }
            if f < 0.0 {
                a = y;
            } else {
                b = y;
            }
            let d = self.py.eval(x, y);
            let newton = y - f / d;
            let next = if d > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - y).abs() <= 1e-16 * (1.0 + y.abs()) || b - a <= 1e-16 * (1.0 + y.abs()) {
                return Ok(next);
            }
            y = next;
        }
        if self.p.eval(x, y).abs() <= 1e-12 * self.scale {
            Ok(y)
        } else {
            Err(Error::NewtonDivergence(x))
        }
    }

    /// `(g, g', g'')` at `x`.
    pub fn solve_g(&self, x: f64) -> Result<(f64, f64, f64)> {
        let y = self.g(x)?;
        let px = self.px.eval(x, y);
        let py = self.py.eval(x, y);
        let pxx = self.pxx.eval(x, y);
        let pxy = self.pxy.eval(x, y);
        let pyy = self.pyy.eval(x, y);
        let g1 = -px / py;
        let g2 = -(pxx * py * py + px * px * pyy - 2.0 * px * py * pxy) / (py * py * py);
        Ok((y, g1, g2))
    }
}

impl Fn1Handle for ImplicitBranch {
    fn eval(&self, x: f64) -> Result<(f64, f64, f64)> {
        self.solve_g(x)
    }
}

pub fn solve_g(branch: &ImplicitBranch, x: f64) -> Result<(f64, f64, f64)> {
    branch.solve_g(x)
}
