//! Dense polynomials in one and two variables, affine maps and the
//! coefficient bounds behind every flatness certificate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smooth::SmoothFn;

/// Relative threshold below which composed coefficients are flushed.
pub const FLUSH_REL: f64 = 1e-14;

/// Univariate polynomial, coefficients indexed by power.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly1 {
    pub coeffs: Vec<f64>,
}

impl Poly1 {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly1 { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly1 { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly1::new(vec![c])
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if *c == 0.0) {
            self.coeffs.pop();
        }
    }

    /// Highest power with a nonzero coefficient; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn deriv(&self) -> Poly1 {
        Poly1::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly1) -> Poly1 {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly1::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn scale(&self, s: f64) -> Poly1 {
        Poly1::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly1) -> Poly1 {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly1::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly1::new(out)
    }

    /// `s -> p(a + b s)`.
    pub fn compose_linear(&self, a: f64, b: f64) -> Poly1 {
        let mut out = vec![0.0; self.coeffs.len()];
        // Horner in the shifted variable.
        for &c in self.coeffs.iter().rev() {
            for k in (0..out.len()).rev() {
                let prev = if k > 0 { out[k - 1] } else { 0.0 };
                out[k] = out[k] * a + prev * b;
            }
            out[0] += c;
        }
        Poly1::new(out)
    }

    /// Pull back to `[-1,1]` from the interval `[lo, hi]`.
    pub fn pullback(&self, lo: f64, hi: f64) -> Poly1 {
        self.compose_linear(0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    pub fn coeff_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn coeff_max(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Sum of |c_k| over k >= 2.
    pub fn nonlinear_sum(&self) -> f64 {
        self.coeffs.iter().skip(2).map(|c| c.abs()).sum()
    }
}

/// Dense bivariate polynomial with `m + n <= degree_bound`.
///
/// Coefficients are stored by total degree, then by the power of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    d: usize,
    c: Vec<f64>,
}

#[inline]
fn idx(m: usize, n: usize) -> usize {
    let k = m + n;
    k * (k + 1) / 2 + n
}

impl Poly2 {
    pub fn zero(d: usize) -> Self {
        Poly2 { d, c: vec![0.0; (d + 1) * (d + 2) / 2] }
    }

    pub fn constant(v: f64) -> Self {
        Poly2 { d: 0, c: vec![v] }
    }

    pub fn from_terms(d: usize, terms: &[(usize, usize, f64)]) -> Self {
        let mut p = Poly2::zero(d);
        for &(m, n, v) in terms {
            assert!(m + n <= d, "term x^{m} y^{n} exceeds degree bound {d}");
            p.c[idx(m, n)] += v;
        }
        p
    }

    pub fn degree_bound(&self) -> usize {
        self.d
    }

    /// Largest `m + n` with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.terms().map(|(m, n, _)| m + n).max().unwrap_or(0)
    }

    pub fn coeff(&self, m: usize, n: usize) -> f64 {
        if m + n > self.d {
            0.0
        } else {
            self.c[idx(m, n)]
        }
    }

    pub fn set(&mut self, m: usize, n: usize, v: f64) {
        assert!(m + n <= self.d);
        self.c[idx(m, n)] = v;
    }

    /// Nonzero terms as `(m, n, c)` in graded order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.d).flat_map(move |k| {
            (0..=k).filter_map(move |n| {
                let v = self.c[idx(k - n, n)];
                (v != 0.0).then_some((k - n, n, v))
            })
        })
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|v| *v == 0.0)
    }

    pub fn coeff_max(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn coeff_sum(&self) -> f64 {
        self.c.iter().map(|v| v.abs()).sum()
    }

    /// Sum of |c| over terms of total degree >= 2.
    pub fn nonlinear_sum(&self) -> f64 {
        if self.d < 2 {
            return 0.0;
        }
        self.c[3..].iter().map(|v| v.abs()).sum()
    }

    /// Same polynomial with a different degree bound; panics if terms would be lost.
    pub fn with_degree_bound(&self, d: usize) -> Poly2 {
        let mut out = Poly2::zero(d);
        for (m, n, v) in self.terms() {
            out.set(m, n, v);
        }
        out
    }

    /// Shrink the degree bound to the actual degree.
    pub fn tight(&self) -> Poly2 {
        self.with_degree_bound(self.degree())
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let d = self.d;
        let mut acc = 0.0;
        for n in (0..=d).rev() {
            let mut r = 0.0;
            for m in (0..=d - n).rev() {
                r = r * x + self.c[idx(m, n)];
            }
            acc = acc * y + r;
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Poly2 {
        Poly2 { d: self.d, c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Poly2) -> Poly2 {
        let d = self.d.max(other.d);
        let mut out = self.with_degree_bound(d);
        for (m, n, v) in other.terms() {
            out.c[idx(m, n)] += v;
        }
        out
    }

    pub fn sub(&self, other: &Poly2) -> Poly2 {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        let mut out = Poly2::zero(self.d + other.d);
        for (m1, n1, a) in self.terms() {
            for (m2, n2, b) in other.terms() {
                out.c[idx(m1 + m2, n1 + n2)] += a * b;
            }
        }
        out
    }

    pub fn dx(&self) -> Poly2 {
        let mut out = Poly2::zero(self.d.saturating_sub(1));
        for (m, n, v) in self.terms() {
            if m > 0 {
                out.c[idx(m - 1, n)] += v * m as f64;
            }
        }
        out
    }

    pub fn dy(&self) -> Poly2 {
        let mut out = Poly2::zero(self.d.saturating_sub(1));
        for (m, n, v) in self.terms() {
            if n > 0 {
                out.c[idx(m, n - 1)] += v * n as f64;
            }
        }
        out
    }

    /// Gradient at a point.
    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let (mut gx, mut gy) = (0.0, 0.0);
        for (m, n, v) in self.terms() {
            if m > 0 {
                gx += v * m as f64 * x.powi(m as i32 - 1) * y.powi(n as i32);
            }
            if n > 0 {
                gy += v * n as f64 * x.powi(m as i32) * y.powi(n as i32 - 1);
            }
        }
        [gx, gy]
    }

    /// Hessian entries `(pxx, pxy, pyy)` at a point.
    pub fn hessian_at(&self, x: f64, y: f64) -> [f64; 3] {
        let mut h = [0.0; 3];
        for (m, n, v) in self.terms() {
            let (mi, ni) = (m as i32, n as i32);
            if m >= 2 {
                h[0] += v * (m * (m - 1)) as f64 * x.powi(mi - 2) * y.powi(ni);
            }
            if m >= 1 && n >= 1 {
                h[1] += v * (m * n) as f64 * x.powi(mi - 1) * y.powi(ni - 1);
            }
            if n >= 2 {
                h[2] += v * (n * (n - 1)) as f64 * x.powi(mi) * y.powi(ni - 2);
            }
        }
        h
    }

    /// Constant plus linear part.
    pub fn affine_part(&self) -> Poly2 {
        let mut out = Poly2::zero(1);
        for (m, n, v) in self.terms() {
            if m + n <= 1 {
                out.set(m, n, v);
            }
        }
        out
    }

    /// The polynomial with its constant and linear terms removed.
    pub fn without_affine(&self) -> Poly2 {
        let mut out = self.clone();
        for k in 0..self.c.len().min(3) {
            out.c[k] = 0.0;
        }
        out
    }

    /// Terms depending on `x` alone, as a univariate polynomial.
    pub fn pure_x(&self) -> Poly1 {
        Poly1::new((0..=self.d).map(|m| self.coeff(m, 0)).collect())
    }

    /// `x -> p(x, y0)`.
    pub fn restrict_y(&self, y0: f64) -> Poly1 {
        let mut out = vec![0.0; self.d + 1];
        for (m, n, v) in self.terms() {
            out[m] += v * y0.powi(n as i32);
        }
        Poly1::new(out)
    }

    /// `s -> p(x0 + ax s, y0 + ay s)`.
    pub fn along_line(&self, x0: f64, y0: f64, ax: f64, ay: f64) -> Poly1 {
        let xs = Poly1::new(vec![x0, ax]);
        let ys = Poly1::new(vec![y0, ay]);
        self.compose_curves(&xs, &ys)
    }

    /// `s -> p(x(s), y(s))` for univariate polynomial curves.
    pub fn compose_curves(&self, xs: &Poly1, ys: &Poly1) -> Poly1 {
        let d = self.d;
        let mut acc = Poly1::zero();
        for n in (0..=d).rev() {
            let mut r = Poly1::zero();
            for m in (0..=d - n).rev() {
                r = r.mul(xs).add(&Poly1::constant(self.c[idx(m, n)]));
            }
            acc = acc.mul(ys).add(&r);
        }
        acc
    }

    /// `a0 + ax x + ay y` times self; the result keeps the degree bound, so the
    /// caller guarantees the true degree stays within it.
    fn mul_linear_into(&self, a0: f64, ax: f64, ay: f64, out: &mut Poly2) {
        let d = self.d;
        for k in (0..=d).rev() {
            for n in 0..=k {
                let m = k - n;
                let mut v = a0 * self.c[idx(m, n)];
                if m > 0 {
                    v += ax * self.c[idx(m - 1, n)];
                }
                if n > 0 {
                    v += ay * self.c[idx(m, n - 1)];
                }
                out.c[idx(m, n)] = v;
            }
        }
    }

    /// Zero out coefficients below `FLUSH_REL * coeff_max`.
    pub fn flush(&mut self) {
        let t = FLUSH_REL * self.coeff_max();
        for v in self.c.iter_mut() {
            if v.abs() < t {
                *v = 0.0;
            }
        }
    }

    /// Exact composition `p(m(x, y))`.
    pub fn compose_affine(&self, map: &AffineMap2) -> Result<Poly2> {
        if map.det() == 0.0 || !map.det().is_finite() {
            return Err(Error::SingularMap);
        }
        Ok(self.compose_affine_unchecked(map))
    }

    pub(crate) fn compose_affine_unchecked(&self, map: &AffineMap2) -> Poly2 {
        let d = self.d;
        let [[a, b], [c, e]] = map.linear;
        let [s, t] = map.shift;
        let mut acc = Poly2::zero(d);
        let mut r = Poly2::zero(d);
        let mut tmp = Poly2::zero(d);
        for n in (0..=d).rev() {
            r.c.iter_mut().for_each(|v| *v = 0.0);
            for m in (0..=d - n).rev() {
                r.mul_linear_into(s, a, b, &mut tmp);
                std::mem::swap(&mut r, &mut tmp);
                r.c[0] += self.c[idx(m, n)];
            }
            acc.mul_linear_into(t, c, e, &mut tmp);
            std::mem::swap(&mut acc, &mut tmp);
            for (x, y) in acc.c.iter_mut().zip(r.c.iter()) {
                *x += y;
            }
        }
        acc.flush();
        acc
    }

    /// Pull back to the unit square of a rectangle.
    pub fn pullback(&self, rect: &Rect) -> Poly2 {
        self.compose_affine_unchecked(&rect.to_map())
    }

    pub fn hessian_det(&self) -> Poly2 {
        if self.d < 2 {
            return Poly2::zero(0);
        }
        let dx = self.dx();
        let dy = self.dy();
        let pxx = dx.dx();
        let pxy = dx.dy();
        let pyy = dy.dy();
        let mut out = pxx.mul(&pyy).sub(&pxy.mul(&pxy));
        out.flush();
        out
    }
}

/// Evaluate by Horner's rule.
pub fn eval2(p: &Poly2, x: f64, y: f64) -> f64 {
    p.eval(x, y)
}

pub fn hessian_det(p: &Poly2) -> Poly2 {
    p.hessian_det()
}

pub fn compose_affine(p: &Poly2, m: &AffineMap2) -> Result<Poly2> {
    p.compose_affine(m)
}

/// Lower and upper bounds for `sup_T |p|`.
///
/// The upper bound is the coefficient sum of the pullback to `[-1,1]^2`.
/// The lower bound is the smaller of the largest pulled-back coefficient and
/// the largest value seen on a fixed probe grid; the probe value is always a
/// true lower bound.
pub fn sup_norm_bounds(p: &Poly2, t: &Rect) -> (f64, f64) {
    let q = p.pullback(t);
    let upper = q.coeff_sum();
    let mut probe: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            let x = -1.0 + 0.5 * i as f64;
            let y = -1.0 + 0.5 * j as f64;
            probe = probe.max(q.eval(x, y).abs());
        }
    }
    (q.coeff_max().min(probe), upper)
}

/// Taylor polynomial of order `k` at `center`, expanded about the origin.
pub fn taylor2(f: &dyn SmoothFn, center: [f64; 2], k: usize) -> Result<Poly2> {
    let local = taylor2_local(f, center, k)?;
    let back = AffineMap2::translation(-center[0], -center[1]);
    Ok(local.compose_affine_unchecked(&back))
}

/// Taylor polynomial of order `k` in the shifted variables `(x - cx, y - cy)`.
pub fn taylor2_local(f: &dyn SmoothFn, center: [f64; 2], k: usize) -> Result<Poly2> {
    let jet = f.jet(center[0], center[1], k)?;
    for (_, _, v) in jet.terms() {
        if !v.is_finite() {
            return Err(Error::SamplerFailure(format!(
                "non-finite derivative at ({}, {})",
                center[0], center[1]
            )));
        }
    }
    Ok(jet)
}

/// Invertible affine map `p -> linear * p + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap2 {
    /// Row-major 2x2 matrix.
    pub linear: [[f64; 2]; 2],
    pub shift: [f64; 2],
}

impl AffineMap2 {
    pub fn new(linear: [[f64; 2]; 2], shift: [f64; 2]) -> Self {
        AffineMap2 { linear, shift }
    }

    pub fn identity() -> Self {
        AffineMap2::new([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
    }

    /// Rotation of the coordinate frame by `theta`, so `p ∘ rotation(theta)`
    /// expresses `p` in axes turned by `theta`. Points move by `-theta`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        AffineMap2::new([[c, s], [-s, c]], [0.0, 0.0])
    }

    pub fn scaling(sx: f64, sy: f64) -> Self {
        AffineMap2::new([[sx, 0.0], [0.0, sy]], [0.0, 0.0])
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        AffineMap2::new([[1.0, 0.0], [0.0, 1.0]], [tx, ty])
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.linear;
        a * d - b * c
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.linear;
        [a * p[0] + b * p[1] + self.shift[0], c * p[0] + d * p[1] + self.shift[1]]
    }

    pub fn apply_linear(&self, v: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.linear;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &AffineMap2) -> AffineMap2 {
        let [[a, b], [c, d]] = self.linear;
        let [[e, f], [g, h]] = other.linear;
        AffineMap2::new(
            [[a * e + b * g, a * f + b * h], [c * e + d * g, c * f + d * h]],
            self.apply(other.shift),
        )
    }

    pub fn inverse(&self) -> Result<AffineMap2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::SingularMap);
        }
        let [[a, b], [c, d]] = self.linear;
        let lin = [[d / det, -b / det], [-c / det, a / det]];
        let inv = AffineMap2::new(lin, [0.0, 0.0]);
        let s = inv.apply(self.shift);
        Ok(AffineMap2::new(lin, [-s[0], -s[1]]))
    }
}

/// Oriented rectangle: `center + s * half[0] * axis + t * half[1] * perp(axis)` for `|s|, |t| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: [f64; 2],
    /// Unit vector of the first side.
    pub axis: [f64; 2],
    pub half: [f64; 2],
}

impl Rect {
    pub fn new(center: [f64; 2], axis: [f64; 2], half: [f64; 2]) -> Self {
        let n = axis[0].hypot(axis[1]);
        Rect { center, axis: [axis[0] / n, axis[1] / n], half }
    }

    pub fn unit_square() -> Self {
        Rect::new([0.0, 0.0], [1.0, 0.0], [1.0, 1.0])
    }

    pub fn axis_aligned(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect::new(
            [0.5 * (x0 + x1), 0.5 * (y0 + y1)],
            [1.0, 0.0],
            [0.5 * (x1 - x0), 0.5 * (y1 - y0)],
        )
    }

    pub fn perp(&self) -> [f64; 2] {
        [-self.axis[1], self.axis[0]]
    }

    /// Map from `[-1,1]^2` onto the rectangle.
    pub fn to_map(&self) -> AffineMap2 {
        let p = self.perp();
        AffineMap2::new(
            [
                [self.axis[0] * self.half[0], p[0] * self.half[1]],
                [self.axis[1] * self.half[0], p[1] * self.half[1]],
            ],
            self.center,
        )
    }

    /// Local coordinates `(s, t)` normalised so the rectangle is `[-1,1]^2`.
    pub fn local(&self, p: [f64; 2]) -> [f64; 2] {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let q = self.perp();
        [
            (dx * self.axis[0] + dy * self.axis[1]) / self.half[0],
            (dx * q[0] + dy * q[1]) / self.half[1],
        ]
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let q = self.perp();
        (dx * self.axis[0] + dy * self.axis[1]).abs() <= self.half[0] + tol
            && (dx * q[0] + dy * q[1]).abs() <= self.half[1] + tol
    }

    pub fn dilate(&self, k: f64) -> Rect {
        Rect { half: [self.half[0] * k, self.half[1] * k], ..*self }
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half[0] * self.half[1]
    }

    /// Corners in counter-clockwise order.
    pub fn vertices(&self) -> [[f64; 2]; 4] {
        let m = self.to_map();
        [
            m.apply([-1.0, -1.0]),
            m.apply([1.0, -1.0]),
            m.apply([1.0, 1.0]),
            m.apply([-1.0, 1.0]),
        ]
    }

    /// Axis-aligned bounding box `(xmin, xmax, ymin, ymax)`.
    pub fn bbox(&self) -> [f64; 4] {
        let ex = (self.axis[0] * self.half[0]).abs() + (self.axis[1] * self.half[1]).abs();
        let ey = (self.axis[1] * self.half[0]).abs() + (self.axis[0] * self.half[1]).abs();
        [self.center[0] - ex, self.center[0] + ex, self.center[1] - ey, self.center[1] + ey]
    }
}

#[derive(Serialize, Deserialize)]
struct Poly2Json {
    degree: usize,
    coeffs: Vec<(usize, usize, f64)>,
}

impl Serialize for Poly2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Poly2Json { degree: self.d, coeffs: self.terms().collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly2 {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = Poly2Json::deserialize(de)?;
        let mut p = Poly2::zero(j.degree);
        for (m, n, v) in j.coeffs {
            if m + n > j.degree {
                return Err(serde::de::Error::custom(format!(
                    "term x^{m} y^{n} exceeds degree {}",
                    j.degree
                )));
            }
            p.c[idx(m, n)] += v;
        }
        Ok(p)
    }
}

impl fmt::Display for Poly2 {
    /// Canonical text form `c*x^m*y^n + ...`, parsed back exactly by `FromStr`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, n, v) in self.terms() {
            let mag = if first {
                first = false;
                write!(f, "{v}")?;
                None
            } else if v < 0.0 {
                Some((" - ", -v))
            } else {
                Some((" + ", v))
            };
            if let Some((sep, a)) = mag {
                write!(f, "{sep}{a}")?;
            }
            match m {
                0 => {}
                1 => write!(f, "*x")?,
                _ => write!(f, "*x^{m}")?,
            }
            match n {
                0 => {}
                1 => write!(f, "*y")?,
                _ => write!(f, "*y^{n}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl FromStr for Poly2 {
    type Err = Error;

    /// Parse a sum of terms such as `2*x^2*y - 0.5*y^3 + x*y + 1e-3`.
    fn from_str(s: &str) -> Result<Poly2> {
        let bad = |msg: &str| Error::InvalidInput(format!("cannot parse polynomial '{s}': {msg}"));
        let src: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        if src.is_empty() {
            return Err(bad("empty"));
        }
        let mut terms: Vec<(usize, usize, f64)> = Vec::new();
        let mut i = 0;
        while i < src.len() {
            let mut sign = 1.0;
            while i < src.len() && (src[i] == '+' || src[i] == '-') {
                if src[i] == '-' {
                    sign = -sign;
                }
                i += 1;
            }
            let (mut coef, mut m, mut n) = (sign, 0usize, 0usize);
            let mut factors = 0;
            loop {
                if i >= src.len() {
                    break;
                }
                let ch = src[i];
                if ch.is_ascii_digit() || ch == '.' {
                    let start = i;
                    while i < src.len() && (src[i].is_ascii_digit() || src[i] == '.') {
                        i += 1;
                    }
                    if i < src.len() && (src[i] == 'e' || src[i] == 'E') {
                        i += 1;
                        if i < src.len() && (src[i] == '+' || src[i] == '-') {
                            i += 1;
                        }
                        while i < src.len() && src[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                    let text: String = src[start..i].iter().collect();
                    coef *= text.parse::<f64>().map_err(|_| bad(&format!("bad number '{text}'")))?;
                } else if ch == 'x' || ch == 'y' {
                    i += 1;
                    let mut e = 1usize;
                    if i < src.len() && src[i] == '^' {
                        i += 1;
                        let start = i;
                        while i < src.len() && src[i].is_ascii_digit() {
                            i += 1;
                        }
                        let text: String = src[start..i].iter().collect();
                        e = text.parse().map_err(|_| bad("bad exponent"))?;
                    }
                    if ch == 'x' {
                        m += e;
                    } else {
                        n += e;
                    }
                } else {
                    return Err(bad(&format!("unexpected '{ch}'")));
                }
                factors += 1;
                if i < src.len() && src[i] == '*' {
                    i += 1;
                    continue;
                }
                break;
            }
            if factors == 0 {
                return Err(bad("missing term"));
            }
            if i < src.len() && src[i] != '+' && src[i] != '-' {
                return Err(bad(&format!("unexpected '{}'", src[i])));
            }
            terms.push((m, n, coef));
        }
        let d = terms.iter().map(|t| t.0 + t.1).max().unwrap_or(0);
        Ok(Poly2::from_terms(d, &terms))
    }
}
