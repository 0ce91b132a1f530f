//! Smooth surfaces supplied through their Taylor jets.

use crate::error::{Error, Result};
use crate::polycore::{Poly2, Rect};

/// A smooth function on the plane.
///
/// `jet(x, y, k)` returns the Taylor polynomial of order `k` at `(x, y)` in the
/// shifted variables, so the coefficient of `u^m v^n` is `∂^{m,n} f / (m! n!)`.
pub trait SmoothFn: Send + Sync {
    fn name(&self) -> String;

    fn value(&self, x: f64, y: f64) -> f64;

    fn jet(&self, x: f64, y: f64, k: usize) -> Result<Poly2>;

    /// Upper bound for `|∂^β f|` over `|β| = order` on the rectangle.
    ///
    /// The default samples a 9x9 grid and applies a safety factor of 2; types
    /// with an analytic bound override it.
    fn derivative_bound(&self, order: usize, rect: &Rect) -> Result<f64> {
        let map = rect.to_map();
        let mut best: f64 = 0.0;
        for i in 0..9 {
            for j in 0..9 {
                let p = map.apply([-1.0 + 0.25 * i as f64, -1.0 + 0.25 * j as f64]);
                let jet = self.jet(p[0], p[1], order)?;
                for m in 0..=order {
                    let v = jet.coeff(m, order - m) * factorial(m) * factorial(order - m);
                    best = best.max(v.abs());
                }
            }
        }
        Ok(2.0 * best)
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn truncate(p: &Poly2, k: usize) -> Poly2 {
    let mut out = Poly2::zero(k);
    for (m, n, v) in p.terms() {
        if m + n <= k {
            out.set(m, n, v);
        }
    }
    out
}

fn mul_trunc(a: &Poly2, b: &Poly2, k: usize) -> Poly2 {
    let mut out = Poly2::zero(k);
    for (m1, n1, x) in a.terms() {
        for (m2, n2, y) in b.terms() {
            if m1 + m2 + n1 + n2 <= k {
                out.set(m1 + m2, n1 + n2, out.coeff(m1 + m2, n1 + n2) + x * y);
            }
        }
    }
    out
}

/// Powers `h^0 .. h^k` truncated at order `k`, for `h` without constant term.
fn powers(h: &Poly2, k: usize) -> Vec<Poly2> {
    let mut out = vec![Poly2::constant(1.0).with_degree_bound(k)];
    for j in 1..=k {
        let next = mul_trunc(&out[j - 1], h, k);
        out.push(next);
    }
    out
}

/// `exp` of a jet.
pub fn jet_exp(g: &Poly2, k: usize) -> Poly2 {
    let g = truncate(g, k);
    let g0 = g.coeff(0, 0);
    let mut h = g.clone();
    h.set(0, 0, 0.0);
    let pw = powers(&h, k);
    let mut out = Poly2::zero(k);
    for (j, p) in pw.iter().enumerate() {
        out = out.add(&p.scale(1.0 / factorial(j)));
    }
    out.scale(g0.exp())
}

/// `(sin, cos)` of a jet.
pub fn jet_sin_cos(g: &Poly2, k: usize) -> (Poly2, Poly2) {
    let g = truncate(g, k);
    let g0 = g.coeff(0, 0);
    let mut h = g.clone();
    h.set(0, 0, 0.0);
    let pw = powers(&h, k);
    let (mut sh, mut ch) = (Poly2::zero(k), Poly2::zero(k));
    for (j, p) in pw.iter().enumerate() {
        let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let term = p.scale(sign / factorial(j));
        if j % 2 == 0 {
            ch = ch.add(&term);
        } else {
            sh = sh.add(&term);
        }
    }
    let (s0, c0) = g0.sin_cos();
    let sin = sh.scale(c0).add(&ch.scale(s0));
    let cos = ch.scale(c0).sub(&sh.scale(s0));
    (sin, cos)
}

/// A polynomial viewed as a smooth function.
#[derive(Debug, Clone)]
pub struct PolyFn(pub Poly2);

impl SmoothFn for PolyFn {
    fn name(&self) -> String {
        self.0.to_string()
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        self.0.eval(x, y)
    }

    fn jet(&self, x: f64, y: f64, k: usize) -> Result<Poly2> {
        let shifted = self.0.compose_affine(&crate::polycore::AffineMap2::translation(x, y))?;
        Ok(truncate(&shifted, k))
    }

    fn derivative_bound(&self, order: usize, rect: &Rect) -> Result<f64> {
        if order > self.0.degree() {
            return Ok(0.0);
        }
        let [x0, x1, y0, y1] = rect.bbox();
        let r = x0.abs().max(x1.abs()).max(y0.abs()).max(y1.abs()).max(1.0);
        // Each derivative of order `order` is bounded by the coefficient sum
        // times the largest falling factorial times r^d.
        let d = self.0.degree();
        let ff = factorial(d) / factorial(d - order);
        Ok(self.0.coeff_sum() * ff * r.powi(d as i32))
    }
}

/// `exp(a x + b y)`.
#[derive(Debug, Clone, Copy)]
pub struct ExpLinear {
    pub a: f64,
    pub b: f64,
}

impl SmoothFn for ExpLinear {
    fn name(&self) -> String {
        format!("exp({}*x + {}*y)", self.a, self.b)
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        (self.a * x + self.b * y).exp()
    }

    fn jet(&self, x: f64, y: f64, k: usize) -> Result<Poly2> {
        let g = Poly2::from_terms(1, &[(0, 0, self.a * x + self.b * y), (1, 0, self.a), (0, 1, self.b)]);
        Ok(jet_exp(&g, k))
    }

    fn derivative_bound(&self, order: usize, rect: &Rect) -> Result<f64> {
        let [x0, x1, y0, y1] = rect.bbox();
        let top = (self.a * x0).max(self.a * x1) + (self.b * y0).max(self.b * y1);
        Ok(self.a.abs().max(self.b.abs()).powi(order as i32) * top.exp())
    }
}

/// `sin(k x y)`.
#[derive(Debug, Clone, Copy)]
pub struct SinXY {
    pub k: f64,
}

impl SmoothFn for SinXY {
    fn name(&self) -> String {
        format!("sin({}*x*y)", self.k)
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        (self.k * x * y).sin()
    }

    fn jet(&self, x: f64, y: f64, k: usize) -> Result<Poly2> {
        let g = Poly2::from_terms(
            2,
            &[(0, 0, self.k * x * y), (1, 0, self.k * y), (0, 1, self.k * x), (1, 1, self.k)],
        );
        Ok(jet_sin_cos(&g, k).0)
    }

    /// Majorant bound: every derivative of `sin(k x y)` at `(x, y)` is at most the
    /// matching derivative of `exp(|k| X Y)` at `X = |x|`, `Y = |y|`.
    fn derivative_bound(&self, order: usize, rect: &Rect) -> Result<f64> {
        let [x0, x1, y0, y1] = rect.bbox();
        let xm = x0.abs().max(x1.abs());
        let ym = y0.abs().max(y1.abs());
        let g = Poly2::from_terms(
            2,
            &[(0, 0, self.k.abs() * xm * ym), (1, 0, self.k.abs() * ym), (0, 1, self.k.abs() * xm), (1, 1, self.k.abs())],
        );
        let jet = jet_exp(&g, order);
        let mut best: f64 = 0.0;
        for m in 0..=order {
            best = best.max(jet.coeff(m, order - m) * factorial(m) * factorial(order - m));
        }
        Ok(best)
    }
}

/// Look up a named surface: `paraboloid`, `saddle`, `cylinder`, `exp`, or
/// `sin-products[:k]`.
pub fn builtin(name: &str) -> Result<Box<dyn SmoothFn>> {
    let (base, param) = match name.split_once(':') {
        Some((b, p)) => {
            let v: f64 = p
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad parameter in '{name}'")))?;
            (b, Some(v))
        }
        None => (name, None),
    };
    let poly = |s: &str| -> Result<Box<dyn SmoothFn>> { Ok(Box::new(PolyFn(s.parse()?))) };
    match base {
        "paraboloid" => poly("x^2 + y^2"),
        "saddle" => poly("x^2 - y^2"),
        "cylinder" => poly("x^2"),
        "exp" => Ok(Box::new(ExpLinear { a: param.unwrap_or(1.0), b: param.unwrap_or(1.0) })),
        "sin-products" => Ok(Box::new(SinXY { k: param.unwrap_or(1.0) })),
        _ => Err(Error::InvalidInput(format!("unknown surface '{name}'"))),
    }
}

/// Polynomial form of a builtin, when it has one.
pub fn builtin_poly(name: &str) -> Option<Poly2> {
    match name {
        "paraboloid" => "x^2 + y^2".parse().ok(),
        "saddle" => "x^2 - y^2".parse().ok(),
        "cylinder" => "x^2".parse().ok(),
        _ => None,
    }
}
