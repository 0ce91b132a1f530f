//! Flatness of univariate functions and greedy admissible partitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycore::Poly1;

/// A univariate function with two derivatives.
pub trait Fn1Handle: Sync {
    /// `(f, f', f'')` at `x`.
    fn eval(&self, x: f64) -> Result<(f64, f64, f64)>;

    /// Optional closed-form deviation bound on `[lo, hi]`; `None` falls back to
    /// sampling `f''`.
    fn deviation(&self, _lo: f64, _hi: f64) -> Option<f64> {
        None
    }
}

/// Polynomial handle; deviation uses the coefficient bound for `sup |f''|`.
#[derive(Debug, Clone)]
pub struct PolyHandle {
    pub p: Poly1,
    d2: Poly1,
}

impl PolyHandle {
    pub fn new(p: Poly1) -> Self {
        let d2 = p.deriv().deriv();
        PolyHandle { p, d2 }
    }
}

impl Fn1Handle for PolyHandle {
    fn eval(&self, x: f64) -> Result<(f64, f64, f64)> {
        Ok((self.p.eval(x), self.p.deriv().eval(x), self.d2.eval(x)))
    }

    fn deviation(&self, lo: f64, hi: f64) -> Option<f64> {
        let w = hi - lo;
        Some(0.5 * self.d2.pullback(lo, hi).coeff_sum() * w * w)
    }
}

/// Polynomial handle whose deviation is the two-point certificate
/// `sum_k w_k |c_k|` of the pullback to `[-1,1]`, plus a fixed `extra` term.
///
/// Used where interval flatness must match the rectangle certificate exactly.
#[derive(Debug, Clone)]
pub struct CertPolyHandle {
    pub p: Poly1,
    pub extra: f64,
}

impl Fn1Handle for CertPolyHandle {
    fn eval(&self, x: f64) -> Result<(f64, f64, f64)> {
        let d1 = self.p.deriv();
        Ok((self.p.eval(x), d1.eval(x), d1.deriv().eval(x)))
    }

    fn deviation(&self, lo: f64, hi: f64) -> Option<f64> {
        let q = self.p.pullback(lo, hi);
        let s: f64 = q
            .coeffs
            .iter()
            .enumerate()
            .skip(2)
            .map(|(k, c)| crate::certify::degree_weight(k) * c.abs())
            .sum();
        Some(s + self.extra)
    }
}

/// Ordered breakpoints with per-interval deviation estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPartition {
    pub breaks: Vec<f64>,
    pub deviations: Vec<f64>,
}

impl IntervalPartition {
    pub fn len(&self) -> usize {
        self.breaks.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breaks.windows(2).map(|w| (w[0], w[1]))
    }
}

fn sampled_d2_sup(f: &dyn Fn1Handle, lo: f64, hi: f64) -> Result<f64> {
    let mut prev = -1.0;
    let mut n = 9;
    loop {
        let mut sup: f64 = 0.0;
        for k in 0..n {
            // Chebyshev-Lobatto nodes include both endpoints.
            let t = (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
            let x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
            sup = sup.max(f.eval(x)?.2.abs());
        }
        if (sup - prev).abs() <= 1e-3 * sup.max(1e-300) || n >= 129 {
            return Ok(sup);
        }
        prev = sup;
        n = 2 * n - 1;
    }
}

/// Upper estimate of the two-point deviation of `f` on `[lo, hi]` in the
/// Taylor form `sup |f''| |I|^2 / 2`.
pub fn deviation1d(f: &dyn Fn1Handle, lo: f64, hi: f64) -> Result<f64> {
    if let Some(d) = f.deviation(lo, hi) {
        return Ok(d);
    }
    let w = hi - lo;
    Ok(0.5 * sampled_d2_sup(f, lo, hi)? * w * w)
}

/// Greedy left-to-right partition into maximal intervals of deviation at most `delta`.
pub fn admissible_partition(f: &dyn Fn1Handle, domain: (f64, f64), delta: f64) -> Result<IntervalPartition> {
    let (lo, hi) = domain;
    let res = 1e-6 * (hi - lo);
    let mut breaks = vec![lo];
    let mut deviations = Vec::new();
    let mut a = lo;
    loop {
        let whole = deviation1d(f, a, hi)?;
        if !whole.is_finite() {
            return Err(Error::DegenerateFunction(format!("non-finite deviation on [{a}, {hi}]")));
        }
        if whole <= delta {
            breaks.push(hi);
            deviations.push(whole);
            break;
        }
        let (mut good, mut bad) = (a, hi);
        let mut good_dev = 0.0;
        while bad - good > res {
            let mid = 0.5 * (good + bad);
            let d = deviation1d(f, a, mid)?;
            if d <= delta {
                good = mid;
                good_dev = d;
            } else {
                bad = mid;
            }
        }
        if good <= a {
            // Cannot extend even by one resolution step; keep progress and
            // report the true deviation so callers see the violation.
            good = (a + res).min(hi);
            good_dev = deviation1d(f, a, good)?;
        }
        breaks.push(good);
        deviations.push(good_dev);
        a = good;
        if a >= hi {
            break;
        }
    }
    Ok(IntervalPartition { breaks, deviations })
}

/// Maximum over generic points of `#{I : x in C I}`.
pub fn overlap_profile_1d(partition: &IntervalPartition, c: f64) -> usize {
    let dil: Vec<(f64, f64)> = partition
        .intervals()
        .map(|(a, b)| {
            let m = 0.5 * (a + b);
            let h = 0.5 * (b - a) * c;
            (m - h, m + h)
        })
        .collect();
    let mut cuts: Vec<f64> = dil.iter().flat_map(|(a, b)| [*a, *b]).collect();
    cuts.sort_by(|x, y| x.total_cmp(y));
    let scale = cuts.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * scale);
    let mut best = 0;
    for w in cuts.windows(2) {
        let x = 0.5 * (w[0] + w[1]);
        let tol = 1e-12 * scale;
        let count = dil.iter().filter(|(a, b)| *a + tol < x && x < *b - tol).count();
        best = best.max(count);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Cube;
    impl Fn1Handle for Cube {
        fn eval(&self, x: f64) -> Result<(f64, f64, f64)> {
            Ok((x * x * x, 3.0 * x * x, 6.0 * x))
        }
    }

    fn poly(c: &[f64]) -> PolyHandle {
        PolyHandle::new(Poly1::new(c.to_vec()))
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(deviation1d(&poly(&[1.0, 2.0]), -1.0, 1.0).unwrap(), 0.0);
        let h = 0.3;
        let d = deviation1d(&poly(&[0.0, 0.0, 1.0]), 0.0, h).unwrap();
        assert!(d >= h * h - 1e-15 && d <= 2.0 * h * h);
    }

    #[test]
    fn cube_deviation_against_double_loop() {
        let est = deviation1d(&Cube, 0.0, 0.5).unwrap();
        let mut truth: f64 = 0.0;
        for i in 0..500 {
            for j in 0..500 {
                let x = 0.5 * i as f64 / 499.0;
                let x0 = 0.5 * j as f64 / 499.0;
                truth = truth.max((x.powi(3) - x0.powi(3) - 3.0 * x0 * x0 * (x - x0)).abs());
            }
        }
        assert!(est >= truth && est <= 4.0 * truth, "{est} vs {truth}");
    }

    #[test]
    fn linear_is_single_interval() {
        let p = admissible_partition(&poly(&[0.5, 1.0]), (-1.0, 1.0), 0.1).unwrap();
        assert_eq!(p.breaks, vec![-1.0, 1.0]);
    }

    #[test]
    fn square_partition_count() {
        let p = admissible_partition(&poly(&[0.0, 0.0, 1.0]), (-1.0, 1.0), 0.04).unwrap();
        // Deviation |I|^2 <= 0.04 gives |I| = 0.2.
        assert!(p.len() >= 8 && p.len() <= 12, "{}", p.len());
        for (a, b) in p.intervals() {
            assert!(b > a);
        }
        assert!(p.deviations.iter().all(|d| *d <= 0.04));
    }

    #[test]
    fn maximality_witness() {
        let f = Cube;
        let delta = 1e-3;
        let p = admissible_partition(&f, (-1.0, 1.0), delta).unwrap();
        let n = p.len();
        for (k, (a, b)) in p.intervals().enumerate() {
            assert!(deviation1d(&f, a, b).unwrap() <= delta);
            if k + 1 < n {
                assert!(deviation1d(&f, a, b + 2e-6).unwrap() > delta);
            }
        }
        // Intervals are shortest at the ends and widest in the middle.
        let lens: Vec<f64> = p.intervals().map(|(a, b)| b - a).collect();
        assert!(lens[0] < lens[n / 2]);
    }

    #[test]
    fn overlap_uniform() {
        let p = IntervalPartition {
            breaks: (0..=10).map(|k| k as f64 / 10.0).collect(),
            deviations: vec![0.0; 10],
        };
        assert_eq!(overlap_profile_1d(&p, 1.0), 1);
        assert!(overlap_profile_1d(&p, 3.0) <= 4);
    }

    #[test]
    fn cube_overlap_is_finite() {
        let p = admissible_partition(&Cube, (-1.0, 1.0), 1e-3).unwrap();
        let m = overlap_profile_1d(&p, 100.0);
        assert!(m >= 1 && m <= p.len());
    }
}
