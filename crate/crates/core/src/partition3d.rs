//! Flat rectangle covers of `[-1,1]^2` for a polynomial or smooth `φ`.
//!
//! Every emitted rectangle carries a coefficient-bound certificate that the
//! two-point deviation of `φ` on it is at most `δ`. The driver splits the
//! square into curved squares, where `|det D²φ|` is not small, and a flat
//! region covered by `cover2d`; flat rectangles are rotated so that `φ` is
//! close to a function of one variable and cut into strips.

use serde::{Deserialize, Serialize};

use crate::certify::{degree_weight, deviation_ub, deviation_ub_local, overlap_profile_on, probes};
use crate::constants::ConstantsTable;
use crate::cover2d::{cover_sublevel, enclose_parallelogram, SublevelCover};
use crate::error::{Error, Result};
use crate::flat1d::{admissible_partition, CertPolyHandle};
use crate::hesssmall::decompose_small_hessian;
use crate::polycore::{taylor2_local, AffineMap2, Poly2, Rect};
use crate::smooth::{factorial, SmoothFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatRect {
    pub center: [f64; 2],
    pub axis: [f64; 2],
    pub half: [f64; 2],
    /// Certified upper bound of the deviation of `φ` on the rectangle.
    pub deviation_cert: f64,
    /// Branch tags from the root to this rectangle.
    pub provenance: Vec<String>,
}

impl FlatRect {
    pub fn rect(&self) -> Rect {
        Rect { center: self.center, axis: self.axis, half: self.half }
    }

    pub fn depth(&self) -> usize {
        self.provenance.iter().filter(|t| t.as_str() == "recurse").count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverStats {
    pub count: usize,
    pub max_overlap_sampled: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatCover {
    /// The polynomial, or `None` for a smooth input.
    pub phi: Option<Poly2>,
    pub delta: f64,
    pub l2_eligible: bool,
    pub rects: Vec<FlatRect>,
    pub stats: CoverStats,
}

impl FlatCover {
    pub fn rect_list(&self) -> Vec<Rect> {
        self.rects.iter().map(|r| r.rect()).collect()
    }

    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cover serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    fn finish(phi: Option<Poly2>, delta: f64, l2_eligible: bool, rects: Vec<FlatRect>) -> Self {
        let rl: Vec<Rect> = rects.iter().map(|r| r.rect()).collect();
        let max_overlap_sampled = overlap_profile_on(&rl, 1.0, &probes(64, 4096)).max;
        let depth = rects.iter().map(|r| r.depth()).max().unwrap_or(0);
        let stats = CoverStats { count: rects.len(), max_overlap_sampled, depth };
        FlatCover { phi, delta, l2_eligible, rects, stats }
    }
}

/// Curved squares and the flat-region cover for `φ` (coefficients at most 1).
///
/// Squares of side about `c δ^{1/2}` are curved unless `|det D²φ| < M^{-1}` is
/// certified on them; the flat cover covers `{|det D²φ| < M^{-1}}`.
pub fn curved_flat_split(phi: &Poly2, delta: f64, cfg: &ConstantsTable) -> Result<(Vec<Rect>, SublevelCover)> {
    let det = phi.hessian_det();
    let grid = SquareGrid::new(&det, delta, cfg);
    let mut curved = Vec::new();
    for i in 0..grid.n {
        for j in 0..grid.n {
            if !grid.skipped[i * grid.n + j] {
                curved.push(grid.square(i, j));
            }
        }
    }
    let flat = if grid.skipped.iter().any(|s| *s) {
        grid.flat_cover(cfg)?
    } else {
        SublevelCover { delta: 1.0 / cfg.m, rects: Vec::new() }
    };
    Ok((curved, flat))
}

struct SquareGrid<'a> {
    det: &'a Poly2,
    n: usize,
    skipped: Vec<bool>,
    level: f64,
}

impl<'a> SquareGrid<'a> {
    fn new(det: &'a Poly2, delta: f64, cfg: &ConstantsTable) -> Self {
        let n = ((2.0 / (cfg.c_square * delta.sqrt())).ceil() as usize).max(1);
        let level = 1.0 / cfg.m;
        let everywhere = det.coeff_sum() < level;
        let mut skipped = vec![everywhere; n * n];
        if !everywhere {
            let h = 2.0 / n as f64;
            for i in 0..n {
                for j in 0..n {
                    let r = Rect::axis_aligned(-1.0 + h * i as f64, -1.0 + h * (i + 1) as f64, -1.0 + h * j as f64, -1.0 + h * (j + 1) as f64);
                    skipped[i * n + j] = det.pullback(&r).coeff_sum() < level;
                }
            }
        }
        SquareGrid { det, n, skipped, level }
    }

    fn bounds(&self, i: usize, j: usize) -> [f64; 4] {
        let h = 2.0 / self.n as f64;
        [-1.0 + h * i as f64, -1.0 + h * (i + 1) as f64, -1.0 + h * j as f64, -1.0 + h * (j + 1) as f64]
    }

    fn square(&self, i: usize, j: usize) -> Rect {
        let b = self.bounds(i, j);
        Rect::axis_aligned(b[0], b[1], b[2], b[3])
    }

    fn flat_cover(&self, cfg: &ConstantsTable) -> Result<SublevelCover> {
        if self.det.coeff_sum() < self.level {
            return Ok(SublevelCover {
                delta: self.level,
                rects: vec![crate::cover2d::CoverRect {
                    center: [0.0, 0.0],
                    axis: [1.0, 0.0],
                    half: [1.0, 1.0],
                    layer: crate::cover2d::Layer::V0,
                    sup_p: self.det.coeff_sum(),
                }],
            });
        }
        let k = self.det.coeff_max();
        let mut cov = cover_sublevel(&self.det.scale(1.0 / k), self.level / k, 40)?;
        cov.delta = self.level;
        for r in &mut cov.rects {
            r.sup_p *= k;
        }
        let _ = cfg;
        Ok(cov)
    }

    /// Whether the bounding box of `r` meets a skipped square.
    fn touches_skipped(&self, r: &Rect) -> bool {
        let [x0, x1, y0, y1] = r.bbox();
        let n = self.n as f64;
        let idx = |v: f64| (((v + 1.0) * 0.5 * n).floor().clamp(0.0, n - 1.0)) as usize;
        if x1 < -1.0 || x0 > 1.0 || y1 < -1.0 || y0 > 1.0 {
            return false;
        }
        for i in idx(x0)..=idx(x1) {
            for j in idx(y0)..=idx(y1) {
                if self.skipped[i * self.n + j] {
                    return true;
                }
            }
        }
        false
    }
}

fn unit_rect_map(b: [f64; 4]) -> AffineMap2 {
    Rect::axis_aligned(b[0], b[1], b[2], b[3]).to_map()
}

struct Engine<'a> {
    /// Root polynomial in engine coordinates.
    phi0: &'a Poly2,
    delta: f64,
    cfg: &'a ConstantsTable,
    /// Translation from engine to output coordinates.
    shift: [f64; 2],
    n_max: usize,
    out: Vec<FlatRect>,
    /// Cleared when some recursion level breaks the convexity bookkeeping.
    l2_levels_ok: bool,
}

fn tags(prefix: &[String], t: &str) -> Vec<String> {
    let mut v = prefix.to_vec();
    v.push(t.to_string());
    v
}

impl Engine<'_> {
    fn budget(&self) -> Result<()> {
        if self.out.len() >= self.cfg.work_budget {
            return Err(Error::RecursionOverflow(format!("more than {} rectangles", self.cfg.work_budget)));
        }
        Ok(())
    }

    /// Cover `g(R)` for the local rectangle `R = [b0,b1] x [b2,b3]` by certified
    /// rectangles, splitting `R` on failure along the side carrying more of the
    /// nonlinear part.
    fn leaf_fit(&mut self, g: &AffineMap2, b: [f64; 4], prov: &[String]) -> Result<()> {
        let mut stack = vec![(b, 0usize)];
        while let Some((b, lvl)) = stack.pop() {
            let m = g.compose(&unit_rect_map(b));
            let verts = [m.apply([-1.0, -1.0]), m.apply([1.0, -1.0]), m.apply([1.0, 1.0]), m.apply([-1.0, 1.0])];
            let t = enclose_parallelogram(&verts)?;
            let dev = deviation_ub(self.phi0, &t);
            if dev <= self.delta {
                let mut p = prov.to_vec();
                if lvl > 0 {
                    p.push(format!("split{lvl}"));
                }
                self.out.push(FlatRect {
                    center: [t.center[0] + self.shift[0], t.center[1] + self.shift[1]],
                    axis: t.axis,
                    half: t.half,
                    deviation_cert: dev,
                    provenance: p,
                });
                continue;
            }
            if lvl >= 80 {
                return Err(Error::RecursionOverflow(format!("leaf split depth {lvl} at {:?}", t.center)));
            }
            self.budget()?;
            let q = self.phi0.compose_affine_unchecked(&m);
            let (mut ws, mut wt) = (0.0, 0.0);
            for (mm, nn, c) in q.terms() {
                let k = mm + nn;
                if k >= 2 {
                    let w = degree_weight(k) * c.abs() / k as f64;
                    ws += w * mm as f64;
                    wt += w * nn as f64;
                }
            }
            if ws >= wt {
                let mid = 0.5 * (b[0] + b[1]);
                stack.push(([b[0], mid, b[2], b[3]], lvl + 1));
                stack.push(([mid, b[1], b[2], b[3]], lvl + 1));
            } else {
                let mid = 0.5 * (b[2] + b[3]);
                stack.push(([b[0], b[1], b[2], mid], lvl + 1));
                stack.push(([b[0], b[1], mid, b[3]], lvl + 1));
            }
        }
        Ok(())
    }

    const FULL: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

    /// `φ0 ∘ g` without its affine part, with its largest coefficient.
    fn normalized(&self, g: &AffineMap2) -> (Poly2, f64) {
        let core = self.phi0.compose_affine_unchecked(g).without_affine();
        let k = core.coeff_max();
        (core, k)
    }

    /// A node: curved squares plus flat rectangles, on the square `g([-1,1]^2)`.
    fn node(&mut self, g: AffineMap2, depth: usize, prov: &[String]) -> Result<()> {
        let (core, k) = self.normalized(&g);
        if k == 0.0 || deviation_ub_local(&core) <= self.delta {
            return self.leaf_fit(&g, Self::FULL, &tags(prov, "leaf"));
        }
        let phi1 = core.scale(1.0 / k);
        let d1 = self.delta / k;
        if depth > 0 && d1 >= self.cfg.m.powf(-self.cfg.base_power) {
            return self.leaf_fit(&g, Self::FULL, &tags(prov, "base"));
        }
        let det = phi1.hessian_det();
        let grid = SquareGrid::new(&det, d1, self.cfg);
        let curved = tags(prov, "curved");
        for i in 0..grid.n {
            for j in 0..grid.n {
                if !grid.skipped[i * grid.n + j] {
                    self.leaf_fit(&g, grid.bounds(i, j), &curved)?;
                }
            }
        }
        if !grid.skipped.iter().any(|s| *s) {
            return Ok(());
        }
        let flat = match grid.flat_cover(self.cfg) {
            Ok(f) => f,
            Err(_) => {
                // No flat cover: treat the skipped squares as curved.
                for i in 0..grid.n {
                    for j in 0..grid.n {
                        if grid.skipped[i * grid.n + j] {
                            self.leaf_fit(&g, grid.bounds(i, j), &curved)?;
                        }
                    }
                }
                return Ok(());
            }
        };
        for (idx, f) in flat.rects.iter().enumerate() {
            let r = f.rect();
            if grid.touches_skipped(&r) {
                self.flat_node(g.compose(&r.to_map()), depth, &tags(prov, &format!("flat{idx}")))?;
            }
        }
        Ok(())
    }

    /// A flat rectangle `g([-1,1]^2)`: rotate to `A(x) + small` and cut strips.
    fn flat_node(&mut self, g1: AffineMap2, depth: usize, prov: &[String]) -> Result<()> {
        let (core, k) = self.normalized(&g1);
        if k == 0.0 || deviation_ub_local(&core) <= self.delta {
            return self.leaf_fit(&g1, Self::FULL, &tags(prov, "leaf"));
        }
        let phi1 = core.scale(1.0 / k);
        let d1 = self.delta / k;
        let base = self.cfg.m.powf(-self.cfg.base_power);
        let nu = phi1.hessian_det().coeff_max();
        let Ok(dec) = decompose_small_hessian(&phi1, nu, self.cfg) else {
            return self.leaf_fit(&g1, Self::FULL, &tags(prov, "base"));
        };
        let (s, c) = dec.rotation.sin_cos();
        let r = c.abs() + s.abs();
        // ρ^{-1}([-1,1]^2) lies in [-r, r]^2.
        let g2 = g1.compose(&dec.rotation_map()).compose(&AffineMap2::scaling(r, r));
        let phi2 = self.phi0.compose_affine_unchecked(&g2).without_affine().scale(1.0 / k);
        let a = phi2.pure_x();
        let mut rest = phi2.clone();
        for m in 0..=rest.degree_bound() {
            rest.set(m, 0, 0.0);
        }
        let b = deviation_ub_local(&rest);
        if b <= 0.5 * d1 {
            let part = admissible_partition(&CertPolyHandle { p: a, extra: b }, (-1.0, 1.0), d1)?;
            let p = tags(prov, "terminal");
            for (lo, hi) in part.intervals() {
                self.leaf_fit(&g2, [lo, hi, -1.0, 1.0], &p)?;
            }
            return Ok(());
        }
        if d1 >= base || depth + 1 > self.n_max {
            return self.leaf_fit(&g1, Self::FULL, &tags(prov, "base"));
        }
        let level = self.cfg.m.powf(-self.cfg.alpha_for(phi1.degree()));
        let part = admissible_partition(&CertPolyHandle { p: a, extra: 0.0 }, (-1.0, 1.0), level)?;
        // Working scale after this level; the convexity bookkeeping needs it
        // to stay inside the flat part.
        let grown = self.delta * self.cfg.m.powf(self.cfg.alpha_for(phi1.degree()) * (depth + 1) as f64);
        if grown * grown >= 1.0 / self.cfg.m {
            self.l2_levels_ok = false;
        }
        for (i, (lo, hi)) in part.intervals().enumerate() {
            let child = g2.compose(&unit_rect_map([lo, hi, -1.0, 1.0]));
            let (_, kc) = self.normalized(&child);
            let p = tags(prov, &format!("strip{i}"));
            if kc > 0.0 && self.delta / kc > 1.25 * d1 {
                self.node(child, depth + 1, &tags(&p, "recurse"))?;
            } else {
                self.leaf_fit(&g2, [lo, hi, -1.0, 1.0], &tags(&p, "base"))?;
            }
        }
        Ok(())
    }
}

/// Whether `det D²φ > -δ²` on a 64x64 probe grid.
pub fn l2_probe(phi: &Poly2, delta: f64) -> (bool, f64) {
    let det = phi.hessian_det();
    let mut min = f64::INFINITY;
    for i in 0..64 {
        for j in 0..64 {
            let x = -1.0 + 2.0 * i as f64 / 63.0;
            let y = -1.0 + 2.0 * j as f64 / 63.0;
            min = min.min(det.eval(x, y));
        }
    }
    (min > -delta * delta, min)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Flat cover of `[-1,1]^2` for a polynomial with coefficients at most 1.
pub fn partition_polynomial(phi: &Poly2, delta: f64, cfg: &ConstantsTable) -> Result<FlatCover> {
    check_delta(delta)?;
    cfg.validate()?;
    let d = phi.degree().max(2);
    let mut eng = Engine {
        phi0: phi,
        delta,
        cfg,
        shift: [0.0, 0.0],
        n_max: cfg.n_max(delta, d),
        out: Vec::new(),
        l2_levels_ok: true,
    };
    eng.node(AffineMap2::identity(), 0, &[])?;
    let (probe_ok, min_det) = l2_probe(phi, delta);
    let l2 = probe_ok && (eng.l2_levels_ok || min_det >= 0.0);
    Ok(FlatCover::finish(Some(phi.clone()), delta, l2, eng.out))
}

/// Bound on the two-point deviation of the order-`d` Taylor remainder on a
/// square of half side `r`, given `|D^{d+1} f| <= dbound`.
pub fn remainder_deviation_bound(dbound: f64, r: f64, d: usize) -> f64 {
    dbound * (2.0 * r).powi(d as i32 + 1) * (2.0 / factorial(d + 1) + 2.0 / factorial(d))
}

/// Flat cover for a smooth `f`: squares of side at most `δ^ε`, each handled
/// through its Taylor polynomial of degree `ceil(1/ε)`.
pub fn partition_smooth(f: &dyn SmoothFn, delta: f64, eps: f64, cfg: &ConstantsTable) -> Result<FlatCover> {
    check_delta(delta)?;
    cfg.validate()?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1], got {eps}")));
    }
    let d = (1.0 / eps - 1e-12).ceil().max(1.0) as usize;
    let n = (2.0 / delta.powf(eps)).ceil() as usize;
    let r = 1.0 / n as f64;
    let mut squares = Vec::with_capacity(n * n);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = [-1.0 + r * (2 * i + 1) as f64, -1.0 + r * (2 * j + 1) as f64];
            let q = Rect::new(c, [1.0, 0.0], [r, r]);
            let dev = remainder_deviation_bound(f.derivative_bound(d + 1, &q)?, r, d);
            worst = worst.max(dev);
            squares.push((c, dev));
        }
    }
    if worst >= 0.5 * delta {
        return Err(Error::ScaleTooCoarse { bound: worst, limit: 0.5 * delta });
    }
    let mut rects = Vec::new();
    let mut l2 = true;
    for (c, dev) in squares {
        let p = taylor2_local(f, c, d)?;
        let target = delta - dev;
        let mut eng = Engine {
            phi0: &p,
            delta: target,
            cfg,
            shift: c,
            n_max: cfg.n_max(target, d.max(2)),
            out: Vec::new(),
            l2_levels_ok: true,
        };
        eng.node(AffineMap2::scaling(r, r), 0, &[format!("square({:.6},{:.6})", c[0], c[1])])?;
        l2 &= eng.l2_levels_ok;
        rects.extend(eng.out);
    }
    Ok(FlatCover::finish(None, delta, l2, rects))
}
