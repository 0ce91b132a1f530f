//! Numerical probe of the decoupling inequalities on a torus.
//!
//! Test functions are exponential sums `f(x) = Σ a_j e^{2πi ξ_j·x}` with one
//! jittered frequency per lattice site of the `δ`-neighbourhood of the graph.
//! Frequencies are rounded to the torus lattice `Z^3 / L`; the `L^4` norm is
//! the mean of `|f|^4` over the period cell. It is computed either by a 3D
//! inverse FFT or exactly from pair sums, since `mean |f|^4 = Σ_s |c_s|^2`
//! with `c_s = Σ_{k_i + k_j = s} a_i a_j`.

use std::collections::HashSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::certify::RectIndex;
use crate::error::{Error, Result};
use crate::partition3d::FlatCover;
use crate::polycore::{Poly2, Rect};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecestConfig {
    /// Lattice spacing; `None` picks `max(δ, h_floor)`.
    pub h: Option<f64>,
    pub h_floor: f64,
    /// The period is `L = period_factor / h`.
    pub period_factor: f64,
    /// Largest FFT grid per axis; bigger problems use pair sums.
    pub grid: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for DecestConfig {
    fn default() -> Self {
        DecestConfig { h: None, h_floor: 1.0 / 32.0, period_factor: 4.0, grid: 128, trials: 50, seed: 7 }
    }
}

/// Frequencies, coefficients and the covering rectangle of each frequency.
#[derive(Debug, Clone)]
pub struct WavePacketSet {
    pub freqs: Vec<[f64; 3]>,
    pub coeffs: Vec<Complex64>,
    pub assignment: Vec<usize>,
}

/// Lattice points `(jh, kh)` of `[-1,1]^2` lifted to `φ(jh, kh) + jitter`,
/// jitter uniform in `(-δ/2, δ/2)`.
pub fn sample_surface_points(phi: &Poly2, delta: f64, h: f64, seed: u64) -> Result<Vec<[f64; 3]>> {
    if !(h > 0.0 && delta > 0.0) {
        return Err(Error::InvalidInput(format!("need h > 0 and delta > 0, got h = {h}, delta = {delta}")));
    }
    let m = (1.0 / h + 1e-9).floor() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(((2 * m + 1) * (2 * m + 1)) as usize);
    for j in -m..=m {
        for k in -m..=m {
            let (x, y) = (j as f64 * h, k as f64 * h);
            let jitter = if delta > 0.0 { rng.gen_range(-0.5 * delta..0.5 * delta) } else { 0.0 };
            out.push([x, y, phi.eval(x, y) + jitter]);
        }
    }
    Ok(out)
}

/// Index of the rectangle containing each frequency's `(ξ1, ξ2)`; ties go to
/// the nearest centre.
pub fn assign_points(freqs: &[[f64; 3]], rects: &[Rect]) -> Result<Vec<usize>> {
    let index = RectIndex::new(rects, 128);
    freqs
        .iter()
        .map(|f| {
            let p = [f[0], f[1]];
            index
                .containing(p)
                .min_by(|&a, &b| {
                    let da = (rects[a].center[0] - p[0]).hypot(rects[a].center[1] - p[1]);
                    let db = (rects[b].center[0] - p[0]).hypot(rects[b].center[1] - p[1]);
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .ok_or_else(|| Error::InvalidInput(format!("frequency ({}, {}) lies in no rectangle", p[0], p[1])))
        })
        .collect()
}

/// Nearest torus bins `round(ξ L)`; two frequencies in one bin is an error.
pub fn torus_bins(freqs: &[[f64; 3]], period: f64) -> Result<Vec<[i64; 3]>> {
    let mut seen = HashSet::with_capacity(freqs.len());
    let mut out = Vec::with_capacity(freqs.len());
    for f in freqs {
        let b = [(f[0] * period).round() as i64, (f[1] * period).round() as i64, (f[2] * period).round() as i64];
        if !seen.insert(b) {
            return Err(Error::AliasCollision(b));
        }
        out.push(b);
    }
    Ok(out)
}

/// Smallest grid per axis for which the sampled mean of `|f|^4` is exact.
pub fn required_grid(bins: &[[i64; 3]]) -> usize {
    let mut need = 1;
    for a in 0..3 {
        let lo = bins.iter().map(|b| b[a]).min().unwrap_or(0);
        let hi = bins.iter().map(|b| b[a]).max().unwrap_or(0);
        need = need.max(2 * (hi - lo) as usize + 1);
    }
    need
}

fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Values of `f` at the points `L (i, j, k) / n` of the period cell, row-major.
pub fn torus_field(bins: &[[i64; 3]], coeffs: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n * n];
    for (b, a) in bins.iter().zip(coeffs) {
        buf[(wrap(b[0], n) * n + wrap(b[1], n)) * n + wrap(b[2], n)] += a;
    }
    let fft = FftPlanner::new().plan_fft_inverse(n);
    // Last axis is contiguous.
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                line[j] = buf[(i * n + j) * n + k];
            }
            fft.process(&mut line);
            for j in 0..n {
                buf[(i * n + j) * n + k] = line[j];
            }
        }
    }
    for j in 0..n {
        for k in 0..n {
            for i in 0..n {
                line[i] = buf[(i * n + j) * n + k];
            }
            fft.process(&mut line);
            for i in 0..n {
                buf[(i * n + j) * n + k] = line[i];
            }
        }
    }
    buf
}

/// `f` at grid point `idx` by direct summation.
pub fn torus_value_direct(bins: &[[i64; 3]], coeffs: &[Complex64], n: usize, idx: [usize; 3]) -> Complex64 {
    bins.iter()
        .zip(coeffs)
        .map(|(b, a)| {
            let phase: i64 = (0..3).map(|t| (b[t] * idx[t] as i64).rem_euclid(n as i64)).sum();
            a * Complex64::from_polar(1.0, 2.0 * PI * (phase.rem_euclid(n as i64)) as f64 / n as f64)
        })
        .sum()
}

/// Normalized `L^4` norm on the torus `[0, L]^3` by inverse FFT on an `n^3` grid.
pub fn l4_norm_torus(freqs: &[[f64; 3]], coeffs: &[Complex64], n: usize, period: f64) -> Result<f64> {
    let bins = torus_bins(freqs, period)?;
    let need = required_grid(&bins);
    if n < need {
        return Err(Error::GridTooSmall { need, have: n });
    }
    let field = torus_field(&bins, coeffs, n);
    let mean = field.iter().map(|v| v.norm_sqr() * v.norm_sqr()).sum::<f64>() / field.len() as f64;
    Ok(mean.powf(0.25))
}

/// Pairs `i <= j` grouped by their bin sum.
pub struct PairTable {
    starts: Vec<u32>,
    pairs: Vec<(u32, u32)>,
}

impl PairTable {
    /// Table over the points `members` of `bins`.
    pub fn new(bins: &[[i64; 3]], members: &[usize]) -> Self {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for &i in members {
            for a in 0..3 {
                lo[a] = lo[a].min(bins[i][a]);
                hi[a] = hi[a].max(bins[i][a]);
            }
        }
        let span: Vec<u64> = (0..3).map(|a| if members.is_empty() { 1 } else { (2 * (hi[a] - lo[a]) + 1) as u64 }).collect();
        let key = |i: usize, j: usize| -> u64 {
            let s: Vec<u64> = (0..3).map(|a| (bins[i][a] + bins[j][a] - 2 * lo[a]) as u64).collect();
            (s[0] * span[1] + s[1]) * span[2] + s[2]
        };
        let mut keyed = Vec::with_capacity(members.len() * (members.len() + 1) / 2);
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x..] {
                keyed.push((key(i, j), i as u32, j as u32));
            }
        }
        keyed.sort_unstable();
        let mut starts = Vec::new();
        let mut pairs = Vec::with_capacity(keyed.len());
        for (t, (k, i, j)) in keyed.iter().enumerate() {
            if t == 0 || keyed[t - 1].0 != *k {
                starts.push(t as u32);
            }
            pairs.push((*i, *j));
        }
        starts.push(pairs.len() as u32);
        PairTable { starts, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `mean |f|^4` for the coefficients `coeffs` (indexed like `bins`).
    pub fn energy(&self, coeffs: &[Complex64]) -> f64 {
        let mut total = 0.0;
        for w in self.starts.windows(2) {
            let mut c = Complex64::new(0.0, 0.0);
            for &(i, j) in &self.pairs[w[0] as usize..w[1] as usize] {
                let p = coeffs[i as usize] * coeffs[j as usize];
                c += if i == j { p } else { 2.0 * p };
            }
            total += c.norm_sqr();
        }
        total
    }
}

/// Normalized torus `L^4` norm from pair sums; no grid needed.
pub fn l4_norm_pairs(bins: &[[i64; 3]], coeffs: &[Complex64]) -> f64 {
    let all: Vec<usize> = (0..bins.len()).collect();
    PairTable::new(bins, &all).energy(coeffs).powf(0.25)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub mean: f64,
    pub max: f64,
}

impl RatioStats {
    fn of(v: &[f64]) -> Self {
        let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
        RatioStats { mean, max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoupleReport {
    pub delta: f64,
    /// Cover cardinality.
    pub count: usize,
    pub trials: usize,
    pub seed: u64,
    pub ratio_l4: RatioStats,
    pub ratio_l2: RatioStats,
    /// Exact-FFT grid size per axis for the full sum.
    pub grid: usize,
    pub period: f64,
    pub h: f64,
    /// Number of frequencies (packet density is `points / 4`).
    pub points: usize,
    /// "fft" or "pairs".
    pub method: String,
    /// `[ratio_l4, ratio_l2]` for every trial.
    pub per_trial: Vec<[f64; 2]>,
}

impl DecoupleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Random unit-modulus coefficients for trial `t`.
pub fn trial_phases(seed: u64, t: u64, n: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t + 1);
    (0..n).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))).collect()
}

/// Build the packet set for `φ` and `cover` (phases of trial 0).
pub fn wave_packets(phi: &Poly2, cover: &FlatCover, cfg: &DecestConfig) -> Result<(WavePacketSet, f64)> {
    let h = cfg.h.unwrap_or(cover.delta.max(cfg.h_floor));
    let freqs = sample_surface_points(phi, cover.delta, h, cfg.seed)?;
    let assignment = assign_points(&freqs, &cover.rect_list())?;
    let coeffs = trial_phases(cfg.seed, 0, freqs.len());
    Ok((WavePacketSet { freqs, coeffs, assignment }, h))
}

/// LHS/RHS ratios of the `ℓ^4` and `ℓ^2` decoupling inequalities over random-phase trials.
pub fn decoupling_ratio(phi: &Poly2, cover: &FlatCover, cfg: &DecestConfig) -> Result<DecoupleReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidInput("trials must be positive".into()));
    }
    if cover.is_empty() {
        return Err(Error::InvalidInput("cover has no rectangles".into()));
    }
    let (packets, h) = wave_packets(phi, cover, cfg)?;
    let period = cfg.period_factor / h;
    let bins = torus_bins(&packets.freqs, period)?;
    let need = required_grid(&bins);
    let use_fft = need <= cfg.grid;
    let full = if use_fft { None } else { Some(PairTable::new(&bins, &(0..bins.len()).collect::<Vec<_>>())) };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cover.len()];
    for (i, &t) in packets.assignment.iter().enumerate() {
        members[t].push(i);
    }
    let tables: Vec<PairTable> = members.iter().filter(|m| !m.is_empty()).map(|m| PairTable::new(&bins, m)).collect();
    let count = cover.len() as f64;

    let mut per_trial = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let a = trial_phases(cfg.seed, t as u64, bins.len());
        let norm = match &full {
            Some(table) => table.energy(&a).powf(0.25),
            None => {
                let field = torus_field(&bins, &a, cfg.grid);
                (field.iter().map(|v| v.norm_sqr() * v.norm_sqr()).sum::<f64>() / field.len() as f64).powf(0.25)
            }
        };
        let (mut s4, mut s2) = (0.0, 0.0);
        for table in &tables {
            let e = table.energy(&a);
            s4 += e;
            s2 += e.sqrt();
        }
        per_trial.push([norm / (count.powf(0.25) * s4.powf(0.25)), norm / s2.sqrt()]);
    }
    let l4: Vec<f64> = per_trial.iter().map(|r| r[0]).collect();
    let l2: Vec<f64> = per_trial.iter().map(|r| r[1]).collect();
    Ok(DecoupleReport {
        delta: cover.delta,
        count: cover.len(),
        trials: cfg.trials,
        seed: cfg.seed,
        ratio_l4: RatioStats::of(&l4),
        ratio_l2: RatioStats::of(&l2),
        grid: need,
        period,
        h,
        points: bins.len(),
        method: if use_fft { "fft" } else { "pairs" }.to_string(),
        per_trial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ConstantsTable;
    use crate::partition3d::partition_polynomial;

    fn one(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn flat_surface_points() {
        let pts = sample_surface_points(&Poly2::zero(1), 0.1, 0.5, 1).unwrap();
        assert_eq!(pts.len(), 25);
        assert!(pts.iter().all(|p| p[2].abs() < 0.05));
        let phi: Poly2 = "x^2 + y^2".parse().unwrap();
        let d = 2f64.powi(-4);
        for p in sample_surface_points(&phi, d, d, 2).unwrap() {
            assert!((p[2] - phi.eval(p[0], p[1])).abs() < d / 2.0);
        }
    }

    #[test]
    fn single_and_double_frequency() {
        let f = [[0.25, -0.5, 0.75]];
        let v = l4_norm_torus(&f, &[one(1.0)], 16, 4.0).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let f = [[0.25, -0.5, 0.75], [0.5, 0.0, -0.25]];
        let v = l4_norm_torus(&f, &[one(1.0), Complex64::from_polar(1.0, 0.3)], 16, 4.0).unwrap();
        assert!((v - 6f64.powf(0.25)).abs() < 1e-10);
        let bins = torus_bins(&f, 4.0).unwrap();
        assert!((l4_norm_pairs(&bins, &[one(1.0), one(1.0)]) - 6f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let f = [[0.0, 0.0, 0.0], [0.01, 0.0, 0.0]];
        assert!(matches!(torus_bins(&f, 4.0), Err(Error::AliasCollision(_))));
        let f = [[0.0, 0.0, 0.0], [4.0, 0.0, 0.0]];
        assert!(matches!(l4_norm_torus(&f, &[one(1.0), one(1.0)], 16, 4.0), Err(Error::GridTooSmall { need: 33, have: 16 })));
    }

    fn random_set(seed: u64, n: usize, span: i64) -> (Vec<[i64; 3]>, Vec<Complex64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::new();
        let mut bins = Vec::new();
        while bins.len() < n {
            let b = [rng.gen_range(-span..=span), rng.gen_range(-span..=span), rng.gen_range(-span..=span)];
            if seen.insert(b) {
                bins.push(b);
            }
        }
        (bins, trial_phases(seed, 0, n))
    }

    #[test]
    fn fft_matches_direct_summation() {
        let (bins, a) = random_set(3, 100, 8);
        let n = 34;
        let field = torus_field(&bins, &a, n);
        for i in 0..17 {
            for j in 0..17 {
                for k in 0..17 {
                    let idx = [2 * i, 2 * j, 2 * k];
                    let v = field[(idx[0] * n + idx[1]) * n + idx[2]];
                    assert!((v - torus_value_direct(&bins, &a, n, idx)).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn pairs_match_fft_and_parseval() {
        let (bins, a) = random_set(4, 60, 6);
        let n = required_grid(&bins);
        let field = torus_field(&bins, &a, n);
        let l4 = (field.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / field.len() as f64).powf(0.25);
        assert!((l4 - l4_norm_pairs(&bins, &a)).abs() < 1e-9 * l4);
        let l2 = (field.iter().map(|v| v.norm_sqr()).sum::<f64>() / field.len() as f64).sqrt();
        assert!((l2 - (a.len() as f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn single_rect_cover_is_trivial() {
        let phi = Poly2::zero(2);
        let cover = partition_polynomial(&"x".parse().unwrap(), 0.125, &ConstantsTable::default()).unwrap();
        assert_eq!(cover.len(), 1);
        let cfg = DecestConfig { trials: 5, ..Default::default() };
        let rep = decoupling_ratio(&phi, &cover, &cfg).unwrap();
        for r in &rep.per_trial {
            assert!((r[0] - 1.0).abs() < 1e-10 && (r[1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn paraboloid_ratios_and_bridge() {
        let phi: Poly2 = "x^2 + y^2".parse().unwrap();
        let cover = partition_polynomial(&phi, 2f64.powi(-4), &ConstantsTable::default()).unwrap();
        let cfg = DecestConfig { trials: 10, ..Default::default() };
        let (packets, _) = wave_packets(&phi, &cover, &cfg).unwrap();
        assert_eq!(packets.assignment.len(), packets.freqs.len());
        let rep = decoupling_ratio(&phi, &cover, &cfg).unwrap();
        let p = (rep.count as f64).powf(0.25);
        for r in &rep.per_trial {
            assert!(r[0].is_finite() && r[0] > 0.0 && r[1].is_finite() && r[1] > 0.0);
            assert!(r[1] <= r[0] * p * (1.0 + 1e-9));
        }
        let again = decoupling_ratio(&phi, &cover, &cfg).unwrap();
        assert_eq!(rep, again);
    }
}
