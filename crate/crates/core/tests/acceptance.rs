//! Acceptance suite: runs every criterion, prints one PASS/FAIL line each,
//! then fails if any criterion failed.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flatdec_core::certify::{
    certify_flat_with, coverage_check, deviation_ub, fit_slope, overlap_profile, sampled_deviation, scaling_report,
};
use flatdec_core::constants::c_ab;
use flatdec_core::cover2d::{enclose_parallelogram, intersect_rectangles, Parallelogram};
use flatdec_core::decest::{decoupling_ratio, torus_field, torus_value_direct, DecestConfig};
use flatdec_core::flat1d::{admissible_partition, deviation1d, Fn1Handle, PolyHandle};
use flatdec_core::hesssmall::{decompose_small_hessian, strip_line_terms};
use flatdec_core::implicit2d::{branch_intervals, ImplicitBranch};
use flatdec_core::partition3d::{partition_polynomial, partition_smooth};
use flatdec_core::smooth::ExpLinear;
use flatdec_core::{AffineMap2, ConstantsTable, Poly1, Poly2, Rect};

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Verdict {
    Verdict { ok, detail }
}

fn random_poly(rng: &mut ChaCha8Rng, d: usize) -> Poly2 {
    let mut p = Poly2::zero(d);
    for k in 0..=d {
        for n in 0..=k {
            p.set(k - n, n, rng.gen_range(-1.0..1.0));
        }
    }
    // Force full degree so the corpus really has degree d.
    if (0..=d).all(|n| p.coeff(d - n, n).abs() < 0.1) {
        p.set(d, 0, 0.5);
    }
    p.scale(1.0 / p.coeff_max())
}

/// Criteria 1-3 over one corpus: soundness, coverage and overlap.
fn corpus_criteria() -> [Verdict; 3] {
    let cfg = ConstantsTable::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let polys: Vec<Poly2> = (0..200).map(|i| random_poly(&mut rng, 2 + i % 3)).collect();
    let deltas = [2f64.powi(-4), 2f64.powi(-6), 2f64.powi(-8), 2f64.powi(-10)];

    let (mut cert_fail, mut sample_viol, mut errors, mut rects_total) = (0usize, 0usize, 0usize, 0usize);
    let mut slowest = Duration::ZERO;
    let (mut misses, mut miss_runs) = (0usize, 0usize);
    let (mut worst_ratio, mut overlap_fail) = (0.0f64, 0usize);
    let mut first_error = String::new();
    for (i, p) in polys.iter().enumerate() {
        for &delta in &deltas {
            let t0 = Instant::now();
            let cover = match partition_polynomial(p, delta, &cfg) {
                Ok(c) => c,
                Err(e) => {
                    errors += 1;
                    if first_error.is_empty() {
                        first_error = format!("poly {i} at δ = {delta}: {e}");
                    }
                    continue;
                }
            };
            let rects = cover.rect_list();
            for (k, r) in rects.iter().enumerate() {
                // Sampled lower estimates on a subset; the certificate on all.
                let pairs = if k % 211 == 0 { 1000 } else { 0 };
                let c = certify_flat_with(p, r, pairs);
                if c.deviation_ub > delta {
                    cert_fail += 1;
                }
                if c.sample_max > c.deviation_ub * (1.0 + 1e-9) + 1e-15 {
                    sample_viol += 1;
                }
            }
            slowest = slowest.max(t0.elapsed());
            rects_total += rects.len();

            let cov = coverage_check(&rects, &|_, _| true);
            if cov.misses > 0 {
                misses += cov.misses;
                miss_runs += 1;
            }
            let ov = overlap_profile(&rects, 1.0);
            let bound = 64.0 * delta.powf(-0.25);
            worst_ratio = worst_ratio.max(ov.max as f64 / bound);
            if ov.max as f64 > bound {
                overlap_fail += 1;
            }
        }
    }
    let runs = polys.len() * deltas.len();
    [
        verdict(
            cert_fail == 0 && sample_viol == 0 && errors == 0 && slowest <= Duration::from_secs(10),
            format!(
                "{runs} runs, {rects_total} rects, {cert_fail} certificate failures, {sample_viol} sample violations, {errors} errors{}, slowest {:.2}s",
                if first_error.is_empty() { String::new() } else { format!(" ({first_error})") },
                slowest.as_secs_f64()
            ),
        ),
        verdict(misses == 0 && errors == 0, format!("{misses} missed probes in {miss_runs} runs")),
        verdict(
            overlap_fail == 0 && errors == 0,
            format!("{overlap_fail} runs above 64·δ^(-1/4); worst max/bound = {worst_ratio:.3}"),
        ),
    ]
}

fn scaling() -> Verdict {
    let cfg = ConstantsTable::default();
    let deltas: Vec<f64> = (4..=10).map(|k| 2f64.powi(-k)).collect();
    let slope = |s: &str| scaling_report(&s.parse().unwrap(), &deltas, &cfg);
    match (slope("x^2 + y^2"), slope("x^2"), slope("0.2 + x - 0.7*y")) {
        (Ok(a), Ok(b), Ok(c)) => {
            let (sa, sb) = (a[0].slope, b[0].slope);
            let flat = c.iter().all(|r| r.count == 1);
            verdict(
                (0.85..=1.15).contains(&sa) && (0.4..=0.6).contains(&sb) && flat,
                format!("paraboloid slope {sa:.3}, cylinder slope {sb:.3}, affine counts {:?}", c.iter().map(|r| r.count).collect::<Vec<_>>()),
            )
        }
        (a, b, c) => verdict(false, format!("errors: {:?} {:?} {:?}", a.err(), b.err(), c.err())),
    }
}

fn small_hessian() -> Verdict {
    let cfg = ConstantsTable::default();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (mut bad_res, mut bad_b, mut errs) = (0, 0, 0);
    for i in 0..100 {
        let nu: f64 = if i % 2 == 0 { 1e-2 } else { 1e-4 };
        let d = 2 + i % 3;
        let alpha = cfg.alpha_for(d);
        let mut planted = Poly2::zero(d);
        planted.set(2, 0, rng.gen_range(0.5..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        for m in 3..=d {
            planted.set(m, 0, rng.gen_range(-1.0..1.0));
        }
        for k in 2..=d {
            for n in 1..=k {
                planted.set(k - n, n, nu.powf(alpha) * rng.gen_range(-1.0..1.0));
            }
        }
        let theta = rng.gen_range(-3.0..3.0);
        let p = planted.compose_affine(&AffineMap2::rotation(theta).inverse().unwrap()).unwrap();
        let p = p.scale(1.0 / p.coeff_max());
        match decompose_small_hessian(&p, nu, &cfg) {
            Ok(dec) => {
                let back = p.compose_affine(&dec.rotation_map()).unwrap();
                if back.sub(&dec.reconstruct()).coeff_max() > 1e-9 * p.coeff_max() || dec.residual > 1e-9 * p.coeff_max() {
                    bad_res += 1;
                }
                if dec.b.coeff_max() > c_ab(d) {
                    bad_b += 1;
                }
            }
            Err(_) => errs += 1,
        }
    }
    let mut strip_bad = 0;
    for _ in 0..100 {
        let a: f64 = rng.gen_range(-0.3..0.3);
        let q = Poly2::from_terms(3, &[(2, 0, 1.0), (0, 3, a)]);
        let nu = q.hessian_det().coeff_max();
        if a.abs() > cfg.strip_slack * nu || strip_line_terms(&q, nu, &cfg).is_err() {
            strip_bad += 1;
        }
        let c: f64 = rng.gen_range(-0.3..0.3);
        let q = Poly2::from_terms(2, &[(2, 0, 1.0), (1, 1, c)]);
        let nu = q.hessian_det().coeff_max();
        if c.abs() > cfg.strip_slack * nu.sqrt() || strip_line_terms(&q, nu, &cfg).is_err() {
            strip_bad += 1;
        }
    }
    verdict(
        bad_res == 0 && bad_b == 0 && errs == 0 && strip_bad == 0,
        format!("100 planted: {bad_res} residual failures, {bad_b} B-bound failures, {errs} errors; strip relations: {strip_bad} failures"),
    )
}

/// Brute-force greedy endpoints with a fixed step scan of the flatness predicate.
fn scan_partition(f: &dyn Fn1Handle, delta: f64, step: f64) -> Vec<f64> {
    let mut breaks = vec![-1.0];
    let mut a: f64 = -1.0;
    while a < 1.0 {
        let mut b = a;
        while b + step <= 1.0 + 1e-12 && deviation1d(f, a, b + step).unwrap() <= delta {
            b += step;
        }
        if b + step > 1.0 + 1e-12 {
            breaks.push(1.0);
            break;
        }
        breaks.push(b);
        a = b;
    }
    breaks
}

fn one_d() -> Verdict {
    let fns = [("x^2", vec![0.0, 0.0, 1.0]), ("x^3", vec![0.0, 0.0, 0.0, 1.0]), ("x^4-x^2", vec![0.0, 0.0, -1.0, 0.0, 1.0])];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, c) in &fns {
        let f = PolyHandle::new(Poly1::new(c.clone()));
        for &delta in &[1e-2, 1e-3] {
            let part = admissible_partition(&f, (-1.0, 1.0), delta).unwrap();
            let scan = scan_partition(&f, delta, 1e-5);
            let mut worst: f64 = if scan.len() == part.breaks.len() { 0.0 } else { f64::INFINITY };
            if worst == 0.0 {
                for (a, b) in part.breaks.iter().zip(&scan) {
                    worst = worst.max((a - b).abs());
                }
            }
            let n = part.len();
            let mut flat_ok = true;
            let mut maximal_ok = true;
            for (k, (a, b)) in part.intervals().enumerate() {
                flat_ok &= deviation1d(&f, a, b).unwrap() <= delta;
                if k + 1 < n {
                    maximal_ok &= deviation1d(&f, a, part.breaks[k + 2]).unwrap() > delta;
                }
            }
            ok &= worst <= 1e-3 && flat_ok && maximal_ok;
            notes.push(format!("{name}@{delta}: {n} pieces, max endpoint gap {worst:.1e}"));
        }
    }
    verdict(ok, notes.join("; "))
}

fn implicit() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut polys, mut worst_res, mut worst_fd, mut errs) = (0, 0.0f64, 0.0f64, 0);
    while polys < 50 {
        let mut p = Poly2::zero(3);
        p.set(0, 1, 1.0);
        for k in 0..=3 {
            for n in 0..=k {
                let c = rng.gen_range(-1.0..1.0) * if n > 0 { 0.08 } else { 0.5 };
                p.set(k - n, n, p.coeff(k - n, n) + c);
            }
        }
        // Certified lower bound for |P_y| on the square.
        let py = p.dy();
        let lower = py.coeff(0, 0).abs() - (py.coeff_sum() - py.coeff(0, 0).abs());
        if lower < 0.25 {
            continue;
        }
        polys += 1;
        let Ok(ivs) = branch_intervals(&p, 0.01) else { continue };
        for iv in ivs {
            let b = ImplicitBranch::new(&p, iv, 0.01, 0.25);
            for k in 0..1000 {
                let x = iv.0 + (iv.1 - iv.0) * (k as f64 + 0.5) / 1000.0;
                match b.solve_g(x) {
                    Ok((g, _, g2)) => {
                        worst_res = worst_res.max(p.eval(x, g).abs());
                        let h = 1e-4;
                        if x - h > iv.0 && x + h < iv.1 {
                            if let (Ok(gp), Ok(gm)) = (b.g(x + h), b.g(x - h)) {
                                worst_fd = worst_fd.max(((gp - 2.0 * g + gm) / (h * h) - g2).abs());
                            }
                        }
                    }
                    Err(_) => errs += 1,
                }
            }
        }
    }
    verdict(
        worst_res <= 1e-10 && worst_fd <= 1e-4 && errs == 0,
        format!("max residual {worst_res:.1e}, max |g'' - FD| {worst_fd:.1e}, {errs} solver errors"),
    )
}

fn geometry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let (mut para_viol, mut paras) = (0usize, 0usize);
    while paras < 10_000 {
        let c: [f64; 2] = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let e1: [f64; 2] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let e2: [f64; 2] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        if (e1[0] * e2[1] - e1[1] * e2[0]).abs() < 1e-3 {
            continue;
        }
        paras += 1;
        let p = Parallelogram { center: c, e1, e2 };
        let t = enclose_parallelogram(&p.vertices()).unwrap();
        let tol = 1e-9 * t.half[0].max(t.half[1]);
        for _ in 0..1000 {
            let (s, u) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let q = [c[0] + s * e1[0] + u * e2[0], c[1] + s * e1[1] + u * e2[1]];
            if !t.contains(q, tol) {
                para_viol += 1;
            }
            let q = t.to_map().apply([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            if !p.contains(q, 3.0, 1e-9) {
                para_viol += 1;
            }
        }
    }
    let (mut pair_viol, mut pairs) = (0usize, 0usize);
    let mk = |rng: &mut ChaCha8Rng, center: [f64; 2]| {
        let th: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        Rect::new(center, [th.cos(), th.sin()], [10f64.powf(rng.gen_range(-3.0..0.0)), 10f64.powf(rng.gen_range(-3.0..0.0))])
    };
    while pairs < 10_000 {
        let center = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let a = mk(&mut rng, center);
        let inside = a.to_map().apply([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let b = mk(&mut rng, inside);
        let Ok(t) = intersect_rectangles(&a, &b) else {
            pair_viol += 1;
            pairs += 1;
            continue;
        };
        pairs += 1;
        let (a100, b100) = (a.dilate(100.0), b.dilate(100.0));
        let tol = 1e-9 * t.half[0].max(t.half[1]);
        for _ in 0..1000 {
            let q = a.to_map().apply([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            if b.contains(q, 0.0) && !t.contains(q, tol) {
                pair_viol += 1;
            }
            let q = t.to_map().apply([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            if !a100.contains(q, tol) || !b100.contains(q, tol) {
                pair_viol += 1;
            }
        }
    }
    verdict(
        para_viol == 0 && pair_viol == 0,
        format!("{paras} parallelograms: {para_viol} violations; {pairs} rect pairs: {pair_viol} violations"),
    )
}

fn estimator_sanity() -> Verdict {
    let cfg = ConstantsTable::default();
    let dcfg = DecestConfig { trials: 20, ..Default::default() };
    let single = partition_polynomial(&"0.3*x - y".parse().unwrap(), 0.125, &cfg).unwrap();
    let flat = Poly2::zero(1);
    let rep = decoupling_ratio(&flat, &single, &dcfg).unwrap();
    let single_err = rep.per_trial.iter().map(|r| (r[1] - 1.0).abs()).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut fft_err: f64 = 0.0;
    for _ in 0..3 {
        let mut bins: Vec<[i64; 3]> = Vec::new();
        while bins.len() < 100 {
            let b = [rng.gen_range(-8..=8), rng.gen_range(-8..=8), rng.gen_range(-8..=8)];
            if !bins.contains(&b) {
                bins.push(b);
            }
        }
        let a: Vec<Complex64> = (0..100).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..6.3))).collect();
        let n = 34;
        let field = torus_field(&bins, &a, n);
        for i in 0..17 {
            for j in 0..17 {
                for k in 0..17 {
                    let idx = [2 * i, 2 * j, 2 * k];
                    let v = field[(idx[0] * n + idx[1]) * n + idx[2]];
                    fft_err = fft_err.max((v - torus_value_direct(&bins, &a, n, idx)).norm());
                }
            }
        }
    }

    let mut bridge_viol = 0;
    let phi: Poly2 = "x^2 + y^2".parse().unwrap();
    for e in [3, 4, 5] {
        let cover = partition_polynomial(&phi, 2f64.powi(-e), &cfg).unwrap();
        let rep = decoupling_ratio(&phi, &cover, &dcfg).unwrap();
        let p = (rep.count as f64).powf(0.25);
        bridge_viol += rep.per_trial.iter().filter(|r| r[1] > r[0] * p * (1.0 + 1e-9)).count();
    }
    verdict(
        single_err <= 1e-9 && fft_err <= 1e-8 && bridge_viol == 0,
        format!("single-rect |ratio_l2 - 1| {single_err:.1e}, FFT vs direct {fft_err:.1e}, bridge violations {bridge_viol}"),
    )
}

fn estimator_trend() -> Verdict {
    let cfg = ConstantsTable::default();
    let phi: Poly2 = "x^2 + y^2".parse().unwrap();
    let (mut xs, mut ys, mut means) = (Vec::new(), Vec::new(), Vec::new());
    for e in 3..=7 {
        let delta = 2f64.powi(-e);
        let cover = partition_polynomial(&phi, delta, &cfg).unwrap();
        let rep = decoupling_ratio(&phi, &cover, &DecestConfig::default()).unwrap();
        xs.push((1.0 / delta).ln());
        ys.push(rep.ratio_l2.mean.ln());
        means.push(format!("{:.4}", rep.ratio_l2.mean));
    }
    let slope = fit_slope(&xs, &ys);
    verdict(slope <= 0.25, format!("growth exponent {slope:.4}; mean ratio_l2 by δ = 2^-3..2^-7: [{}]", means.join(", ")))
}

fn taylor_front_end() -> Verdict {
    let delta = 2f64.powi(-10);
    let f = ExpLinear { a: 1.0, b: 1.0 };
    let cover = match partition_smooth(&f, delta, 1.0 / 3.0, &ConstantsTable::default()) {
        Ok(c) => c,
        Err(e) => return verdict(false, format!("partition_smooth failed: {e}")),
    };
    let mut fails = 0;
    let mut worst: f64 = 0.0;
    for (k, r) in cover.rects.iter().enumerate() {
        let dev = sampled_deviation(|x, y| ((x + y).exp(), [(x + y).exp(); 2]), &r.rect(), 1000, k as u64);
        worst = worst.max(dev / delta);
        if dev > delta {
            fails += 1;
        }
    }
    let miss = coverage_check(&cover.rect_list(), &|_, _| true).misses;
    verdict(
        fails == 0 && miss == 0,
        format!("{} rects, {fails} failures, max sampled deviation / δ = {worst:.3}, {miss} coverage misses", cover.len()),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let [c1, c2, c3] = corpus_criteria();
    results.push(("1 flatness soundness", c1));
    results.push(("2 coverage", c2));
    results.push(("3 overlap", c3));
    results.push(("4 cardinality scaling", scaling()));
    results.push(("5 small-Hessian round trip", small_hessian()));
    results.push(("6 1D admissible partitions", one_d()));
    results.push(("7 implicit solver", implicit()));
    results.push(("8 rectangle geometry", geometry()));
    results.push(("9 estimator sanity", estimator_sanity()));
    results.push(("10 decoupling trend", estimator_trend()));
    results.push(("11 Taylor front-end", taylor_front_end()));

    // Keep the certificate helper honest on a known case: x^2 + y^2 on a side-s square.
    let s = 0.125;
    let exact = deviation_ub(&"x^2 + y^2".parse().unwrap(), &Rect::axis_aligned(0.0, s, 0.0, s));
    assert!((exact - 2.0 * s * s).abs() < 1e-15);

    let mut failed = Vec::new();
    for (name, v) in &results {
        println!("criterion {name}: {} ({})", if v.ok { "PASS" } else { "FAIL" }, v.detail);
        if !v.ok {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
