//! Flatness certificates, coverage checks and overlap profiles.
//!
//! The deviation bound: pull `φ` back to `[-1,1]^2` and drop the affine part,
//! leaving `N = Σ c_mn s^m t^n` over `m + n >= 2`. For `u` in the square and
//! `Δ = v - u` in `[-2,2]^2`, a monomial of degree `k` satisfies
//! `|N(u+Δ) - N(u) - ∇N(u)·Δ| <= min(2 + 2k, 3^k - 1 - 2k)` times `|c|`: the first
//! form bounds the three terms separately (`|N| <= 1`, `|∇N·Δ| <= 2k`), the
//! second drops the zeroth and first order terms of the majorant `(1 + 2)^k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::ConstantsTable;
use crate::error::Result;
use crate::partition3d::partition_polynomial;
use crate::polycore::{Poly2, Rect};

/// Two-point deviation weight of a monomial of total degree `k`.
pub fn degree_weight(k: usize) -> f64 {
    match k {
        0 | 1 => 0.0,
        2 => 4.0,
        _ => 2.0 + 2.0 * k as f64,
    }
}

/// Certificate for a polynomial already pulled back to `[-1,1]^2`.
pub fn deviation_ub_local(q: &Poly2) -> f64 {
    q.terms()
        .map(|(m, n, c)| degree_weight(m + n) * c.abs())
        .sum()
}

/// Deviation upper bound of `φ` on `T` without sampling.
pub fn deviation_ub(phi: &Poly2, t: &Rect) -> f64 {
    deviation_ub_local(&phi.pullback(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertMethod {
    CoefficientBound,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessCertificate {
    pub rect: Rect,
    pub deviation_ub: f64,
    pub method: CertMethod,
    pub sample_max: f64,
}

/// Sampled two-point deviation of `f` over `pairs` random pairs in `T`.
pub fn sampled_deviation<F>(f: F, t: &Rect, pairs: usize, seed: u64) -> f64
where
    F: Fn(f64, f64) -> (f64, [f64; 2]),
{
    let map = t.to_map();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let u = map.apply([rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)]);
        let v = map.apply([rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)]);
        let (fu, g) = f(u[0], u[1]);
        let (fv, _) = f(v[0], v[1]);
        best = best.max((fv - fu - g[0] * (v[0] - u[0]) - g[1] * (v[1] - u[1])).abs());
    }
    best
}

/// Certificate with `pairs` sampled point pairs for the lower estimate.
pub fn certify_flat_with(phi: &Poly2, t: &Rect, pairs: usize) -> FlatnessCertificate {
    let ub = deviation_ub(phi, t);
    let sample_max = if pairs == 0 {
        0.0
    } else {
        // Sample in the pulled-back frame; deviation is invariant under the
        // affine change of variables.
        let q = phi.pullback(t);
        let dx = q.dx();
        let dy = q.dy();
        sampled_deviation(
            |x, y| (q.eval(x, y), [dx.eval(x, y), dy.eval(x, y)]),
            &Rect::unit_square(),
            pairs,
            0x5eed,
        )
    };
    FlatnessCertificate { rect: *t, deviation_ub: ub, method: CertMethod::CoefficientBound, sample_max }
}

/// Certificate with 10^3 sampled pairs.
pub fn certify_flat(phi: &Poly2, t: &Rect) -> FlatnessCertificate {
    certify_flat_with(phi, t, 1000)
}

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Standard probe set: the 256x256 cell-centre grid followed by 10^5 Halton points (bases 2, 3).
pub fn standard_probes() -> Vec<[f64; 2]> {
    probes(256, 100_000)
}

pub fn probes(grid: usize, halton: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(grid * grid + halton);
    for i in 0..grid {
        for j in 0..grid {
            out.push([
                -1.0 + (2 * i + 1) as f64 / grid as f64,
                -1.0 + (2 * j + 1) as f64 / grid as f64,
            ]);
        }
    }
    for k in 1..=halton as u64 {
        out.push([2.0 * radical_inverse(k, 2) - 1.0, 2.0 * radical_inverse(k, 3) - 1.0]);
    }
    out
}

/// Uniform bucket index of rectangles over `[-1,1]^2`.
pub struct RectIndex<'a> {
    rects: &'a [Rect],
    n: usize,
    buckets: Vec<Vec<u32>>,
}

impl<'a> RectIndex<'a> {
    pub fn new(rects: &'a [Rect], n: usize) -> Self {
        let mut buckets = vec![Vec::new(); n * n];
        let cell = |v: f64| (((v + 1.0) * 0.5 * n as f64).floor().max(0.0) as usize).min(n - 1);
        for (k, r) in rects.iter().enumerate() {
            let [x0, x1, y0, y1] = r.bbox();
            if x1 < -1.0 || x0 > 1.0 || y1 < -1.0 || y0 > 1.0 {
                continue;
            }
            for i in cell(x0)..=cell(x1) {
                for j in cell(y0)..=cell(y1) {
                    buckets[i * n + j].push(k as u32);
                }
            }
        }
        RectIndex { rects, n, buckets }
    }

    /// Indices of rectangles containing `p`, with a relative tolerance.
    pub fn containing(&self, p: [f64; 2]) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        let cell = |v: f64| (((v + 1.0) * 0.5 * n as f64).floor().max(0.0) as usize).min(n - 1);
        let b = &self.buckets[cell(p[0]) * n + cell(p[1])];
        b.iter().map(|k| *k as usize).filter(move |k| {
            let r = &self.rects[*k];
            r.contains(p, 1e-12 * (1.0 + r.half[0].max(r.half[1])))
        })
    }

    pub fn count(&self, p: [f64; 2]) -> usize {
        self.containing(p).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub probes: usize,
    pub misses: usize,
    /// Up to 32 missed probe points.
    pub witnesses: Vec<[f64; 2]>,
}

/// Count probes of the standard set (restricted to `region`) lying in no rectangle.
pub fn coverage_check(rects: &[Rect], region: &dyn Fn(f64, f64) -> bool) -> CoverageReport {
    coverage_check_on(rects, region, &standard_probes())
}

pub fn coverage_check_on(rects: &[Rect], region: &dyn Fn(f64, f64) -> bool, pts: &[[f64; 2]]) -> CoverageReport {
    let index = RectIndex::new(rects, 128);
    let mut report = CoverageReport { probes: 0, misses: 0, witnesses: Vec::new() };
    for p in pts {
        if !region(p[0], p[1]) {
            continue;
        }
        report.probes += 1;
        if index.containing(*p).next().is_none() {
            report.misses += 1;
            if report.witnesses.len() < 32 {
                report.witnesses.push(*p);
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapHistogram {
    /// `counts[k]` is the number of probes covered exactly `k` times.
    pub counts: Vec<usize>,
    pub max: usize,
}

/// Multiplicity histogram of the dilated cover over the standard probe set.
pub fn overlap_profile(rects: &[Rect], dilation: f64) -> OverlapHistogram {
    overlap_profile_on(rects, dilation, &standard_probes())
}

pub fn overlap_profile_on(rects: &[Rect], dilation: f64, pts: &[[f64; 2]]) -> OverlapHistogram {
    let dil: Vec<Rect> = rects.iter().map(|r| r.dilate(dilation)).collect();
    let index = RectIndex::new(&dil, 128);
    let mut counts = vec![0usize; 1];
    for p in pts {
        let c = index.count(*p);
        if c >= counts.len() {
            counts.resize(c + 1, 0);
        }
        counts[c] += 1;
    }
    let max = counts.len() - 1;
    OverlapHistogram { counts, max }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// One row of a scaling report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub delta: f64,
    pub count: usize,
    pub max_mult_1x: usize,
    pub max_mult_100x: usize,
    pub depth: usize,
    /// Slope of the whole report, repeated on every row.
    pub slope: f64,
}

/// Largest multiplicity of the `dilation`-fold dilated cover over `pts`, by direct scan.
pub fn max_multiplicity_direct(rects: &[Rect], dilation: f64, pts: &[[f64; 2]]) -> usize {
    let dil: Vec<Rect> = rects.iter().map(|r| r.dilate(dilation)).collect();
    pts.iter()
        .map(|p| dil.iter().filter(|r| r.contains(*p, 1e-12)).count())
        .max()
        .unwrap_or(0)
}

/// Cover size, overlap and depth across a ladder of `δ`, with the least-squares
/// slope of `log #rects` against `log(1/δ)`.
pub fn scaling_report(phi: &Poly2, deltas: &[f64], cfg: &ConstantsTable) -> Result<Vec<ScalingRow>> {
    let coarse = probes(16, 256);
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let cov = partition_polynomial(phi, delta, cfg)?;
        let rects = cov.rect_list();
        rows.push(ScalingRow {
            delta,
            count: cov.len(),
            max_mult_1x: overlap_profile(&rects, 1.0).max,
            max_mult_100x: max_multiplicity_direct(&rects, 100.0, &coarse),
            depth: cov.stats.depth,
            slope: 0.0,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.delta).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.count as f64).ln()).collect();
    let slope = if rows.len() > 1 { fit_slope(&xs, &ys) } else { 0.0 };
    for r in &mut rows {
        r.slope = slope;
    }
    Ok(rows)
}
