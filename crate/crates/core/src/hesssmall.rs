//! Polynomials with small Hessian determinant: after a rotation they are a
//! univariate polynomial plus a small remainder, `P ∘ ρ = A(x) + ν^α B(x, y)`.

use serde::{Deserialize, Serialize};

use crate::constants::{beta, ConstantsTable};
use crate::error::{Error, Result};
use crate::polycore::{AffineMap2, Poly1, Poly2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvedPoint {
    pub point: [f64; 2],
    pub eigenvalue: f64,
    pub eigenvector: [f64; 2],
}

/// Eigenvalue of largest magnitude of `[[a, b], [b, c]]` and a unit eigenvector.
pub fn dominant_eigen(h: [f64; 3]) -> (f64, [f64; 2]) {
    let [a, b, c] = h;
    let m = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let lam = if m >= 0.0 { m + r } else { m - r };
    let v1 = [b, lam - a];
    let v2 = [lam - c, b];
    let (n1, n2) = (v1[0].hypot(v1[1]), v2[0].hypot(v2[1]));
    let mut v = if n1.max(n2) <= 1e-14 * (lam.abs() + 1e-300) {
        if a.abs() >= c.abs() {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    } else if n1 >= n2 {
        [v1[0] / n1, v1[1] / n1]
    } else {
        [v2[0] / n2, v2[1] / n2]
    };
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    (lam, v)
}

/// A point of the unit disc where the Hessian has an eigenvalue of size at
/// least `eig_floor`, found by grid search with two local refinements.
pub fn find_curved_point(p: &Poly2, eig_floor: f64) -> Result<CurvedPoint> {
    if p.nonlinear_sum() <= 1e-12 {
        return Err(Error::NoCurvature);
    }
    let score = |x: f64, y: f64| dominant_eigen(p.hessian_at(x, y)).0.abs();
    let mut best = ([0.0, 0.0], score(0.0, 0.0));
    let consider = |x: f64, y: f64, best: &mut ([f64; 2], f64)| {
        if x * x + y * y <= 1.0 {
            let s = score(x, y);
            if s > best.1 * (1.0 + 1e-12) {
                *best = ([x, y], s);
            }
        }
    };
    let n = 64;
    let mut h = 2.0 / (n - 1) as f64;
    for i in 0..n {
        for j in 0..n {
            consider(-1.0 + h * i as f64, -1.0 + h * j as f64, &mut best);
        }
    }
    for _ in 0..2 {
        let c = best.0;
        let step = h / 4.0;
        for i in -4..=4 {
            for j in -4..=4 {
                consider(c[0] + step * i as f64, c[1] + step * j as f64, &mut best);
            }
        }
        h = step;
    }
    let (lam, v) = dominant_eigen(p.hessian_at(best.0[0], best.0[1]));
    if lam.abs() < eig_floor {
        return Err(Error::NoCurvature);
    }
    Ok(CurvedPoint { point: best.0, eigenvalue: lam, eigenvector: v })
}

/// Line `m = t n + 2` in the index plane through `(2,0)` with the whole
/// support of `Q` on the side `m >= t n + 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentingLine {
    pub t: f64,
    pub points: Vec<(usize, usize)>,
}

impl RepresentingLine {
    pub fn contains(&self, m: usize, n: usize) -> bool {
        (m as f64 - self.t * n as f64 - 2.0).abs() <= 1e-12
    }

    /// Whether `(m, n)` lies on the closed side of the line away from the origin.
    pub fn above(&self, m: usize, n: usize) -> bool {
        m as f64 - self.t * n as f64 - 2.0 >= -1e-12
    }
}

fn support(q: &Poly2) -> Vec<(usize, usize)> {
    let tiny = 1e-14 * q.coeff_max();
    q.terms().filter(|(_, _, c)| c.abs() > tiny).map(|(m, n, _)| (m, n)).collect()
}

pub fn representing_line(q: &Poly2) -> Option<RepresentingLine> {
    let supp = support(q);
    let t = supp
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(m, n)| (*m as f64 - 2.0) / *n as f64)
        .min_by(|a, b| a.total_cmp(b))?;
    let mut line = RepresentingLine { t, points: vec![(2, 0)] };
    let on: Vec<_> = supp.into_iter().filter(|&(m, n)| n > 0 && line.contains(m, n)).collect();
    line.points.extend(on);
    Some(line)
}

/// Exponent applied to the determinant bound per strip step.
pub fn strip_exponent(d: usize) -> f64 {
    beta(d).min(0.5)
}

/// Remove the terms of `Q` on its representing line other than `x^2`.
///
/// Returns `(Q_next, ν_next)`; each stripped coefficient must be at most
/// `strip_slack ν^e` with `e = min(β, 1/2)`, and `ν_next = ν^e`.
pub fn strip_line_terms(q: &Poly2, nu: f64, cfg: &ConstantsTable) -> Result<(Poly2, f64)> {
    let line = representing_line(q).ok_or(Error::InvalidInput("no representing line".into()))?;
    let e = strip_exponent(q.degree().max(2));
    let limit = cfg.strip_slack * nu.powf(e);
    let mut next = q.clone();
    for &(m, n) in line.points.iter().filter(|&&p| p != (2, 0)) {
        let c = q.coeff(m, n);
        if c.abs() > limit {
            return Err(Error::BoundViolated(format!(
                "coefficient of x^{m} y^{n} is {c:e}, above {limit:e}"
            )));
        }
        next.set(m, n, 0.0);
    }
    Ok((next, nu.powf(e)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallHessianDecomp {
    /// Angle of the frame rotation `ρ = AffineMap2::rotation(theta)`.
    pub rotation: f64,
    #[serde(rename = "A")]
    pub a: Poly1,
    #[serde(rename = "B")]
    pub b: Poly2,
    pub alpha: f64,
    pub nu: f64,
    pub residual: f64,
    /// Strip steps run on the normalized form.
    pub strip_steps: usize,
    /// Whether every strip step respected its coefficient bound.
    pub certified: bool,
}

impl SmallHessianDecomp {
    pub fn rotation_map(&self) -> AffineMap2 {
        AffineMap2::rotation(self.rotation)
    }

    /// `A(x) + ν^α B(x, y)`.
    pub fn reconstruct(&self) -> Poly2 {
        let d = self.b.degree_bound().max(self.a.degree());
        let mut out = self.b.with_degree_bound(d).scale(self.nu.powf(self.alpha));
        for (m, c) in self.a.coeffs.iter().enumerate() {
            out.set(m, 0, out.coeff(m, 0) + c);
        }
        out
    }
}

/// Size of the part of `P ∘ ρ_θ` not depending on `x` alone.
fn off_axis(p: &Poly2, theta: f64) -> f64 {
    let q = p.compose_affine_unchecked(&AffineMap2::rotation(theta));
    q.terms().filter(|(_, n, _)| *n > 0).map(|(_, _, c)| c.abs()).fold(0.0, f64::max)
}

/// Angle near `theta0` minimising the off-axis part.
fn refine_angle(p: &Poly2, theta0: f64) -> f64 {
    let span = std::f64::consts::PI / 8.0;
    let n = 64;
    let grid: Vec<f64> = (0..=n).map(|k| theta0 - span + 2.0 * span * k as f64 / n as f64).collect();
    let mut best = theta0;
    let mut best_v = off_axis(p, theta0);
    for &t in &grid {
        let v = off_axis(p, t);
        if v < best_v {
            best = t;
            best_v = v;
        }
    }
    // Golden-section search on the bracket around the best grid point.
    let h = 2.0 * span / n as f64;
    let (mut a, mut b) = (best - h, best + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (off_axis(p, c), off_axis(p, d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = off_axis(p, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = off_axis(p, d);
        }
    }
    let t = 0.5 * (a + b);
    if off_axis(p, t) < best_v {
        t
    } else {
        best
    }
}

/// Run the strip loop on `P ∘ ρ` translated to the curved point and
/// normalised to leading `x^2`; returns `(steps, certified)`.
fn strip_loop(q: &Poly2, at: [f64; 2], lam: f64, nu: f64, cfg: &ConstantsTable) -> (usize, bool) {
    let d = q.degree().max(2);
    let shifted = q.compose_affine_unchecked(&AffineMap2::translation(at[0], at[1]));
    let mut cur = shifted.without_affine().scale(2.0 / lam);
    let mut nu_cur = nu.max(cur.hessian_det().coeff_max());
    let mut steps = 0;
    for _ in 0..(d + 1) * (d + 1) {
        if representing_line(&cur).is_none() {
            return (steps, true);
        }
        match strip_line_terms(&cur, nu_cur, cfg) {
            Ok((next, nu_next)) => {
                cur = next;
                nu_cur = nu_next;
                steps += 1;
            }
            Err(_) => return (steps, false),
        }
    }
    (steps, representing_line(&cur).is_none())
}

/// Decompose `P ∘ ρ = A(x) + ν^α B(x, y)`.
///
/// `ν` is the caller's bound on the coefficients of `det D²P`. The rotation
/// aligns the first axis with the dominant Hessian eigenvector at a curved
/// point, then is refined to minimise the part of `P ∘ ρ` depending on `y`.
pub fn decompose_small_hessian(p: &Poly2, nu: f64, cfg: &ConstantsTable) -> Result<SmallHessianDecomp> {
    let d = p.degree().max(2);
    let alpha = cfg.alpha_for(d);
    let (theta, steps, certified) = match find_curved_point(p, cfg.eig_floor) {
        Ok(cp) => {
            let theta0 = (-cp.eigenvector[1]).atan2(cp.eigenvector[0]);
            let theta = refine_angle(p, theta0);
            let q = p.compose_affine_unchecked(&AffineMap2::rotation(theta));
            let at = AffineMap2::rotation(theta).inverse()?.apply(cp.point);
            let (steps, ok) = strip_loop(&q, at, cp.eigenvalue, nu, cfg);
            (theta, steps, ok)
        }
        Err(Error::NoCurvature) => (0.0, 0, true),
        Err(e) => return Err(e),
    };
    let q = p.compose_affine_unchecked(&AffineMap2::rotation(theta));
    let a = q.pure_x();
    let mut rest = q.clone();
    for m in 0..=q.degree_bound() {
        rest.set(m, 0, 0.0);
    }
    let scale = nu.powf(alpha);
    let b = if rest.coeff_max() <= 1e-15 * p.coeff_max() || scale == 0.0 {
        Poly2::zero(q.degree_bound())
    } else {
        rest.scale(1.0 / scale)
    };
    let mut out = SmallHessianDecomp { rotation: theta, a, b, alpha, nu, residual: 0.0, strip_steps: steps, certified };
    out.residual = q.sub(&out.reconstruct()).coeff_max();
    Ok(out)
}
