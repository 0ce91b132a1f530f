//! Covers of polynomial sublevel sets `{|P| < δ}` by rectangles, and the
//! rectangle geometry they rest on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::ConstantsTable;
use crate::error::{Error, Result};
use crate::flat1d::admissible_partition;
use crate::implicit2d::{branch_intervals, ImplicitBranch};
use crate::polycore::{sup_norm_bounds, Poly1, Poly2};
pub use crate::polycore::Rect;
use crate::roots1d::{certified_sign, sublevel_intervals};

// ---------------------------------------------------------------------------
// Polygon helpers

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// Clip a convex polygon to the half-plane `n · p <= k`.
pub fn clip_halfplane(poly: &[[f64; 2]], n: [f64; 2], k: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let fa = dot(n, a) - k;
        let fb = dot(n, b) - k;
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Convex polygon clipped to a rectangle.
pub fn clip_to_rect(poly: &[[f64; 2]], r: &Rect) -> Vec<[f64; 2]> {
    let u = r.axis;
    let v = r.perp();
    let cu = dot(u, r.center);
    let cv = dot(v, r.center);
    let mut out = poly.to_vec();
    for (n, c, h) in [(u, cu, r.half[0]), (v, cv, r.half[1])] {
        out = clip_halfplane(&out, n, c + h);
        out = clip_halfplane(&out, [-n[0], -n[1]], -(c - h));
        if out.is_empty() {
            break;
        }
    }
    out
}

/// Smallest rectangle with first axis `axis` containing the points, with
/// half-lengths floored at `min_half`.
pub fn oriented_bbox(pts: &[[f64; 2]], axis: [f64; 2], min_half: f64) -> Rect {
    let n = norm(axis);
    let u = [axis[0] / n, axis[1] / n];
    let v = [-u[1], u[0]];
    let (mut lu, mut hu, mut lv, mut hv) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        let a = dot(u, *p);
        let b = dot(v, *p);
        lu = lu.min(a);
        hu = hu.max(a);
        lv = lv.min(b);
        hv = hv.max(b);
    }
    let (mu, mv) = (0.5 * (lu + hu), 0.5 * (lv + hv));
    Rect {
        center: [mu * u[0] + mv * v[0], mu * u[1] + mv * v[1]],
        axis: u,
        half: [(0.5 * (hu - lu)).max(min_half), (0.5 * (hv - lv)).max(min_half)],
    }
}

// ---------------------------------------------------------------------------
// Parallelograms

/// Parallelogram given by its vertices in cyclic order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parallelogram {
    pub center: [f64; 2],
    /// Half of the side from vertex 0 to vertex 1.
    pub e1: [f64; 2],
    /// Half of the side from vertex 0 to vertex 3.
    pub e2: [f64; 2],
}

impl Parallelogram {
    pub fn from_vertices(v: &[[f64; 2]; 4]) -> Result<Self> {
        let e1 = sub(v[1], v[0]);
        let e2 = sub(v[3], v[0]);
        let closing = sub(sub(v[2], v[1]), e2);
        let scale = norm(e1).max(norm(e2));
        if !(scale > 0.0) || !scale.is_finite() || norm(closing) > 1e-9 * scale {
            return Err(Error::DegenerateParallelogram);
        }
        if cross(e1, e2).abs() <= 1e-13 * norm(e1) * norm(e2) {
            return Err(Error::DegenerateParallelogram);
        }
        let center = [
            0.25 * (v[0][0] + v[1][0] + v[2][0] + v[3][0]),
            0.25 * (v[0][1] + v[1][1] + v[2][1] + v[3][1]),
        ];
        Ok(Parallelogram { center, e1: [0.5 * e1[0], 0.5 * e1[1]], e2: [0.5 * e2[0], 0.5 * e2[1]] })
    }

    pub fn vertices(&self) -> [[f64; 2]; 4] {
        let [c, a, b] = [self.center, self.e1, self.e2];
        [
            [c[0] - a[0] - b[0], c[1] - a[1] - b[1]],
            [c[0] + a[0] - b[0], c[1] + a[1] - b[1]],
            [c[0] + a[0] + b[0], c[1] + a[1] + b[1]],
            [c[0] - a[0] + b[0], c[1] - a[1] + b[1]],
        ]
    }

    /// Whether `p` lies in the `k`-dilation about the centre (relative tolerance `tol`).
    pub fn contains(&self, p: [f64; 2], k: f64, tol: f64) -> bool {
        let d = sub(p, self.center);
        let det = cross(self.e1, self.e2);
        let s = cross(d, self.e2) / det;
        let t = cross(self.e1, d) / det;
        s.abs() <= k * (1.0 + tol) && t.abs() <= k * (1.0 + tol)
    }
}

/// Rectangle in the frame where `e2` is "vertical": `|x| <= 1`, `|y - m x| <= b`
/// after scaling, for the side choice `(e1, e2)`.
fn enclose_with(p: &Parallelogram, e1: [f64; 2], e2: [f64; 2]) -> Rect {
    let w = {
        let n = norm(e2);
        [e2[0] / n, e2[1] / n]
    };
    let mut nrm = [w[1], -w[0]];
    if dot(e1, nrm) < 0.0 {
        nrm = [-nrm[0], -nrm[1]];
    }
    let a = dot(e1, nrm);
    let mut w = w;
    let mut m = dot(e1, w) / a;
    if m < 0.0 {
        w = [-w[0], -w[1]];
        m = -m;
    }
    let b = norm(e2) / a;
    if m <= b {
        Rect { center: p.center, axis: nrm, half: [a, a * (m + b)] }
    } else {
        let s = (1.0 + m * m).sqrt();
        let dir = [(nrm[0] + m * w[0]) / s, (nrm[1] + m * w[1]) / s];
        Rect { center: p.center, axis: dir, half: [a * (1.0 + m * m + m * b) / s, a * b / s] }
    }
}

/// A rectangle `T` with `P ⊆ T ⊆ 3P`.
pub fn enclose_parallelogram(para: &[[f64; 2]; 4]) -> Result<Rect> {
    let p = Parallelogram::from_vertices(para)?;
    let t1 = enclose_with(&p, p.e1, p.e2);
    let t2 = enclose_with(&p, p.e2, p.e1);
    Ok(if t1.area() <= t2.area() { t1 } else { t2 })
}

// ---------------------------------------------------------------------------
// Intersections

fn separated(a: &Rect, b: &Rect) -> bool {
    let (va, vb) = (a.vertices(), b.vertices());
    for axis in [a.axis, a.perp(), b.axis, b.perp()] {
        let proj = |vs: &[[f64; 2]; 4]| {
            vs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let d = dot(axis, *v);
                (lo.min(d), hi.max(d))
            })
        };
        let (l1, h1) = proj(&va);
        let (l2, h2) = proj(&vb);
        if h1 < l2 || h2 < l1 {
            return true;
        }
    }
    false
}

/// Vertices of `T` all lie in `k·S`.
fn rect_inside(t: &Rect, s: &Rect, k: f64) -> bool {
    let tol = 1e-9 * (s.half[0].max(s.half[1]));
    let big = s.dilate(k);
    t.vertices().iter().all(|v| big.contains(*v, tol))
}

/// A rectangle `T` with `T1 ∩ T2 ⊆ T ⊆ 100 T1 ∩ 100 T2`.
pub fn intersect_rectangles(t1: &Rect, t2: &Rect) -> Result<Rect> {
    if separated(t1, t2) {
        return Err(Error::EmptyIntersection);
    }
    let poly = clip_to_rect(&t1.vertices(), t2);
    if poly.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let floor = 1e-12 * t1.half.iter().chain(&t2.half).fold(0.0f64, |m, h| m.max(*h));
    let mut cands = vec![oriented_bbox(&poly, t1.axis, floor), oriented_bbox(&poly, t2.axis, floor)];
    // Minimum-area box: one side is flush with an edge of the polygon.
    for i in 0..poly.len() {
        let e = sub(poly[(i + 1) % poly.len()], poly[i]);
        if norm(e) > floor {
            cands.push(oriented_bbox(&poly, e, floor));
        }
    }
    cands.sort_by(|a, b| a.area().total_cmp(&b.area()));
    let ok = cands.iter().find(|c| rect_inside(c, t1, 100.0) && rect_inside(c, t2, 100.0));
    Ok(*ok.unwrap_or(&cands[0]))
}

// ---------------------------------------------------------------------------
// Dyadic layers

/// Which dyadic layer a point belongs to; indices count steps of the ladder
/// `δ (1 + 2c)^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    V0,
    Vx(i32),
    Vy(i32),
    Vxy(i32, i32),
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::V0 => write!(f, "V0"),
            Layer::Vx(j) => write!(f, "Vx:{j}"),
            Layer::Vy(j) => write!(f, "Vy:{j}"),
            Layer::Vxy(i, j) => write!(f, "Vxy:{i},{j}"),
        }
    }
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad layer tag {s:?}"));
        let int = |t: &str| t.parse::<i32>().map_err(|_| bad());
        if s == "V0" {
            Ok(Layer::V0)
        } else if let Some(r) = s.strip_prefix("Vxy:") {
            let (a, b) = r.split_once(',').ok_or_else(bad)?;
            Ok(Layer::Vxy(int(a)?, int(b)?))
        } else if let Some(r) = s.strip_prefix("Vx:") {
            Ok(Layer::Vx(int(r)?))
        } else if let Some(r) = s.strip_prefix("Vy:") {
            Ok(Layer::Vy(int(r)?))
        } else {
            Err(bad())
        }
    }
}

impl Serialize for Layer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Layer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ladders of gradient magnitudes for the layer decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicLayers {
    pub delta: f64,
    pub c: f64,
    pub big_c: f64,
    pub sigma_x: Vec<f64>,
    pub sigma_y: Vec<f64>,
}

fn ladder(delta: f64, ratio: f64, cap: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = delta;
    while s <= cap {
        out.push(s);
        s *= ratio;
    }
    out
}

impl DyadicLayers {
    pub fn ratio(&self) -> f64 {
        1.0 + 2.0 * self.c
    }

    fn step(&self, v: f64, base: f64) -> i32 {
        ((v / base).ln() / self.ratio().ln()).floor().max(0.0) as i32
    }

    /// Layer of a point with gradient `(px, py)`.
    pub fn classify(&self, px: f64, py: f64) -> Layer {
        let (ax, ay) = (px.abs(), py.abs());
        let (d, cd) = (self.delta, self.big_c * self.delta);
        if ax < cd && ay < cd {
            Layer::V0
        } else if ay < d {
            Layer::Vx(self.step(ax, cd))
        } else if ax < d {
            Layer::Vy(self.step(ay, cd))
        } else {
            Layer::Vxy(self.step(ax, d), self.step(ay, d))
        }
    }

    /// Lower ends `(σ1, σ2)` of the gradient bands of a layer.
    pub fn sigma(&self, layer: Layer) -> (f64, f64) {
        let r = self.ratio();
        let (d, cd) = (self.delta, self.big_c * self.delta);
        match layer {
            Layer::V0 => (0.0, 0.0),
            Layer::Vx(j) => (cd * r.powi(j), 0.0),
            Layer::Vy(j) => (0.0, cd * r.powi(j)),
            Layer::Vxy(i, j) => (d * r.powi(i), d * r.powi(j)),
        }
    }
}

pub fn dyadic_layers_with(p: &Poly2, delta: f64, c: f64, big_c: f64) -> DyadicLayers {
    let r = 1.0 + 2.0 * c;
    DyadicLayers {
        delta,
        c,
        big_c,
        sigma_x: ladder(delta, r, p.dx().coeff_sum()),
        sigma_y: ladder(delta, r, p.dy().coeff_sum()),
    }
}

pub fn dyadic_layers(p: &Poly2, delta: f64) -> DyadicLayers {
    let cfg = ConstantsTable::default();
    dyadic_layers_with(p, delta, cfg.layer_c, cfg.layer_big_c)
}

// ---------------------------------------------------------------------------
// Sublevel covers

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverRect {
    pub center: [f64; 2],
    pub axis: [f64; 2],
    pub half: [f64; 2],
    pub layer: Layer,
    /// Certified upper bound of `sup_T |P|`.
    #[serde(rename = "supP")]
    pub sup_p: f64,
}

impl CoverRect {
    pub fn rect(&self) -> Rect {
        Rect { center: self.center, axis: self.axis, half: self.half }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublevelCover {
    pub delta: f64,
    pub rects: Vec<CoverRect>,
}

impl SublevelCover {
    pub fn rect_list(&self) -> Vec<Rect> {
        self.rects.iter().map(|r| r.rect()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cover serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

fn swap_xy(q: &Poly2) -> Poly2 {
    let terms: Vec<_> = q.terms().map(|(m, n, c)| (n, m, c)).collect();
    Poly2::from_terms(q.degree_bound(), &terms)
}

type Staged = Vec<(Rect, f64)>;

/// Largest band half-width, relative to the cell, at which curve tracing runs.
const TRACE_MAX_BAND: f64 = 1.0 / 16.0;

/// Half-height of the window on which monotonicity is certified.
const TRACE_WINDOW: f64 = 1.5;

struct Coverer<'a> {
    p: &'a Poly2,
    delta: f64,
    cap: f64,
}

impl Coverer<'_> {
    fn stage(&self, out: &mut Staged, r: Rect) -> bool {
        let (_, up) = sup_norm_bounds(self.p, &r);
        if up <= self.cap {
            out.push((r, up));
            true
        } else {
            false
        }
    }

    /// `None` means the cell must be split.
    fn cell(&self, c: [f64; 4]) -> Option<Staged> {
        let r = Rect::axis_aligned(c[0], c[1], c[2], c[3]);
        let q = self.p.pullback(&r);
        let c0 = q.coeff(0, 0).abs();
        let rest = q.coeff_sum() - c0;
        let d = self.delta;
        if c0 - rest >= d {
            return Some(Vec::new());
        }
        if c0 + rest <= 2.0 * d {
            return Some(vec![(r, c0 + rest)]);
        }
        self.near_affine(c, &q)
            .or_else(|| self.trace(c, &q))
            .or_else(|| self.thin_band(c, &q, false))
            .or_else(|| self.thin_band(c, &q, true))
    }

    /// Nonlinear part below `δ/2`: the sublevel set lies in a straight strip.
    fn near_affine(&self, c: [f64; 4], q: &Poly2) -> Option<Staged> {
        let e = q.nonlinear_sum();
        if e > 0.5 * self.delta {
            return None;
        }
        let (hx, hy) = (0.5 * (c[1] - c[0]), 0.5 * (c[3] - c[2]));
        let cc = [0.5 * (c[0] + c[1]), 0.5 * (c[2] + c[3])];
        let a = q.coeff(0, 0);
        let n = [q.coeff(1, 0) / hx, q.coeff(0, 1) / hy];
        if norm(n) == 0.0 {
            return None;
        }
        let level = self.delta + e;
        let cell = [[c[0], c[2]], [c[1], c[2]], [c[1], c[3]], [c[0], c[3]]];
        let nc = dot(n, cc);
        let poly = clip_halfplane(&cell, n, level - a + nc);
        let poly = clip_halfplane(&poly, [-n[0], -n[1]], level + a - nc);
        if poly.is_empty() {
            return Some(Vec::new());
        }
        let floor = 1e-12 * hx.max(hy);
        let mut out = Vec::new();
        self.stage(&mut out, oriented_bbox(&poly, [-n[1], n[0]], floor)).then_some(out)
    }

    /// Weak dependence on one variable: cover by full-height strips over the
    /// sublevel intervals of the restriction.
    fn thin_band(&self, c: [f64; 4], q: &Poly2, swap: bool) -> Option<Staged> {
        let q = if swap { swap_xy(q) } else { q.clone() };
        let e: f64 = q.terms().filter(|(_, n, _)| *n > 0).map(|(_, _, v)| v.abs()).sum();
        if e > 8.0 * self.delta {
            return None;
        }
        let base = q.restrict_y(0.0);
        let mut out = Vec::new();
        for (a, b) in sublevel_intervals(&base, (-1.0, 1.0), self.delta + e) {
            let r = if swap {
                let (y0, y1) = (lerp(c[2], c[3], a), lerp(c[2], c[3], b));
                Rect::axis_aligned(c[0], c[1], y0, y1)
            } else {
                let (x0, x1) = (lerp(c[0], c[1], a), lerp(c[0], c[1], b));
                Rect::axis_aligned(x0, x1, c[2], c[3])
            };
            if !self.stage(&mut out, r) {
                return None;
            }
        }
        Some(out)
    }

    /// Monotone in one variable on the cell: follow the implicit branch with
    /// thin parallelograms.
    fn trace(&self, c: [f64; 4], q: &Poly2) -> Option<Staged> {
        let window = Rect::axis_aligned(-1.0, 1.0, -TRACE_WINDOW, TRACE_WINDOW);
        let lower = |pt: &Poly2| {
            let w = pt.dy().pullback(&window);
            let c0 = w.coeff(0, 0);
            (c0.abs() - (w.coeff_sum() - c0.abs()), c0.signum())
        };
        let qs = swap_xy(q);
        let (lt, st) = lower(q);
        let (ls, ss) = lower(&qs);
        let (pt, lambda, sign, swap) = if lt >= ls { (q.clone(), lt, st, false) } else { (qs, ls, ss, true) };
        if lambda <= 0.0 {
            return None;
        }
        let dt = self.delta / lambda;
        if dt > TRACE_MAX_BAND {
            return None;
        }
        let pt = pt.scale(sign / lambda);
        let ivs = match branch_intervals(&pt, dt) {
            Ok(v) => v,
            Err(Error::EmptySet) => return Some(Vec::new()),
            Err(_) => return None,
        };
        let mut out = Vec::new();
        for iv in ivs {
            // |P̃_t| >= 1 puts the root within dt of a sublevel point.
            let br = ImplicitBranch::with_window(&pt, iv, (-1.0 - 2.0 * dt, 1.0 + 2.0 * dt));
            let part = admissible_partition(&br, iv, dt).ok()?;
            for (a, b) in part.intervals() {
                self.trace_piece(&pt, &br, (a, b), dt, c, swap, 0, &mut out)?;
            }
        }
        Some(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn trace_piece(
        &self,
        pt: &Poly2,
        br: &ImplicitBranch,
        (a, b): (f64, f64),
        dt: f64,
        c: [f64; 4],
        swap: bool,
        depth: usize,
        out: &mut Staged,
    ) -> Option<()> {
        let ga = br.g(a).ok()?;
        let gb = br.g(b).ok()?;
        let slope = (gb - ga) / (b - a);
        let mut dev: f64 = 0.0;
        for k in 1..16 {
            let s = a + (b - a) * k as f64 / 16.0;
            dev = dev.max((br.g(s).ok()? - ga - slope * (s - a)).abs());
        }
        let xs = Poly1::new(vec![0.5 * (a + b), 0.5 * (b - a)]);
        let line = Poly1::new(vec![ga + slope * 0.5 * (b - a), slope * 0.5 * (b - a)]);
        let mut h = 1.25 * (dt + dev);
        for _ in 0..4 {
            if ga.abs() + h > TRACE_WINDOW || gb.abs() + h > TRACE_WINDOW {
                break;
            }
            let above = pt.compose_curves(&xs, &line.add(&Poly1::constant(h))).add(&Poly1::constant(-dt));
            let below = pt.compose_curves(&xs, &line.add(&Poly1::constant(-h))).add(&Poly1::constant(dt));
            if certified_sign(&above, -1.0, 1.0, 16) == Some(1) && certified_sign(&below, -1.0, 1.0, 16) == Some(-1) {
                let to_global = |s: f64, t: f64| {
                    let (u, v) = if swap { (t, s) } else { (s, t) };
                    [lerp(c[0], c[1], u), lerp(c[2], c[3], v)]
                };
                let verts = [
                    to_global(a, ga - h),
                    to_global(b, gb - h),
                    to_global(b, gb + h),
                    to_global(a, ga + h),
                ];
                let Ok(t) = enclose_parallelogram(&verts) else { break };
                if self.stage(out, t) {
                    return Some(());
                }
                break;
            }
            h *= 2.0;
        }
        if depth >= 12 {
            return None;
        }
        let m = 0.5 * (a + b);
        self.trace_piece(pt, br, (a, m), dt, c, swap, depth + 1, out)?;
        self.trace_piece(pt, br, (m, b), dt, c, swap, depth + 1, out)
    }
}

/// Point at parameter `t in [-1,1]` of `[lo, hi]`.
fn lerp(lo: f64, hi: f64, t: f64) -> f64 {
    0.5 * (lo + hi) + 0.5 * (hi - lo) * t
}

/// Cover `{|P| < δ} ∩ [-1,1]^2` with rectangles on which `|P| <= cover_slack δ`.
///
/// The square is split into cells until each cell is either free of the
/// sublevel set, entirely small, close to affine, weakly dependent on one
/// variable, or monotone in one variable with a thin band that can be traced.
pub fn cover_sublevel(p: &Poly2, delta: f64, max_depth: usize) -> Result<SublevelCover> {
    cover_sublevel_with(p, delta, max_depth, &ConstantsTable::default())
}

pub fn cover_sublevel_with(p: &Poly2, delta: f64, max_depth: usize, cfg: &ConstantsTable) -> Result<SublevelCover> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    let cov = Coverer { p, delta, cap: cfg.cover_slack * delta };
    let layers = dyadic_layers_with(p, delta, cfg.layer_c, cfg.layer_big_c);
    let (px, py) = (p.dx(), p.dy());
    let mut rects = Vec::new();
    let mut stack = vec![([-1.0, 1.0, -1.0, 1.0], 0usize)];
    let mut work = 0usize;
    while let Some((c, depth)) = stack.pop() {
        work += 1;
        if work > cfg.work_budget {
            return Err(Error::RecursionBudgetExceeded(format!("more than {} cells", cfg.work_budget)));
        }
        if let Some(staged) = cov.cell(c) {
            for (r, sup) in staged {
                let layer = layers.classify(px.eval(r.center[0], r.center[1]), py.eval(r.center[0], r.center[1]));
                rects.push(CoverRect { center: r.center, axis: r.axis, half: r.half, layer, sup_p: sup });
            }
            continue;
        }
        if depth >= max_depth {
            return Err(Error::RecursionBudgetExceeded(format!(
                "cell [{}, {}] x [{}, {}] unresolved at depth {depth}",
                c[0], c[1], c[2], c[3]
            )));
        }
        if c[1] - c[0] >= c[3] - c[2] {
            let m = 0.5 * (c[0] + c[1]);
            stack.push(([c[0], m, c[2], c[3]], depth + 1));
            stack.push(([m, c[1], c[2], c[3]], depth + 1));
        } else {
            let m = 0.5 * (c[2] + c[3]);
            stack.push(([c[0], c[1], c[2], m], depth + 1));
            stack.push(([c[0], c[1], m, c[3]], depth + 1));
        }
    }
    Ok(SublevelCover { delta, rects })
}
