use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn flatdec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatdec")).args(args).output().expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn partition_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cover = path(dir.path(), "cover.json");
    let out = flatdec(&["partition", "--phi", "x^2+y^2", "--delta", "0.015625", "--out", &cover]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&cover).unwrap()).unwrap();
    assert_eq!(v["stats"]["count"].as_u64(), Some(v["rects"].as_array().unwrap().len() as u64));

    let report = path(dir.path(), "report.json");
    let out = flatdec(&["estimate", "--cover", &cover, "--trials", "5", "--seed", "7", "--out", &report]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for k in ["delta", "count", "trials", "seed", "grid", "period"] {
        assert!(r.get(k).is_some(), "missing {k}");
    }
    for k in ["ratio_l4", "ratio_l2"] {
        assert!(r[k]["mean"].as_f64().unwrap() > 0.0 && r[k]["max"].is_number());
    }
    assert_eq!(r["seed"].as_u64(), Some(7));
}

#[test]
fn bad_delta_is_config_error() {
    let out = flatdec(&["partition", "--phi", "x^2", "--delta", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = flatdec(&["partition", "--phi", "x^^2", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = flatdec(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_constant_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let k = path(dir.path(), "k.json");
    fs::write(&k, r#"{"m": 8.0, "bogus": 1}"#).unwrap();
    let out = flatdec(&["--constants", &k, "partition", "--phi", "x", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    fs::write(&k, r#"{"m": 16.0}"#).unwrap();
    let out = flatdec(&["--constants", &k, "partition", "--phi", "x", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.json");
    let b = path(dir.path(), "b.json");
    for p in [&a, &b] {
        let out = flatdec(&["partition", "--phi", "x^3 + 0.5*x*y - y^2", "--delta", "0.03125", "--out", p]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let ra = path(dir.path(), "ra.json");
    let rb = path(dir.path(), "rb.json");
    for r in [&ra, &rb] {
        let out = flatdec(&["estimate", "--cover", &a, "--trials", "3", "--seed", "11", "--out", r]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(fs::read(&ra).unwrap(), fs::read(&rb).unwrap());
}

#[test]
fn certify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cover = path(dir.path(), "cover.json");
    assert_eq!(flatdec(&["partition", "--phi", "x^2", "--delta", "0.0625", "--out", &cover]).status.code(), Some(0));
    assert_eq!(flatdec(&["certify", "--cover", &cover]).status.code(), Some(0));

    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cover).unwrap()).unwrap();
    let rects = v["rects"].as_array_mut().unwrap();
    let removed = rects.remove(0);
    let holed = path(dir.path(), "holed.json");
    fs::write(&holed, v.to_string()).unwrap();
    assert_eq!(flatdec(&["certify", "--cover", &holed]).status.code(), Some(3));

    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cover).unwrap()).unwrap();
    v["rects"][0] = removed;
    v["rects"][0]["half"] = serde_json::json!([1.0, 1.0]);
    v["rects"][0]["center"] = serde_json::json!([0.0, 0.0]);
    let fat = path(dir.path(), "fat.json");
    fs::write(&fat, v.to_string()).unwrap();
    assert_eq!(flatdec(&["certify", "--cover", &fat]).status.code(), Some(2));
}

#[test]
fn scaling_report_csv() {
    let out = flatdec(&["scaling-report", "--phi", "cylinder", "--deltas", "0.0625,0.03125,0.015625"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta,count,max_mult_1x,max_mult_100x,depth,slope"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn smooth_cover_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cover = path(dir.path(), "s.json");
    let plot = path(dir.path(), "plot.json");
    let out = flatdec(&["partition-smooth", "--surface", "exp", "--delta", "0.0009765625", "--out", &cover, "--dump-plot-data", &plot]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&cover).unwrap()).unwrap();
    assert!(v["phi"].is_null());
    let p: Value = serde_json::from_str(&fs::read_to_string(&plot).unwrap()).unwrap();
    assert_eq!(p.as_array().unwrap().len(), v["rects"].as_array().unwrap().len());
    assert_eq!(p[0].as_array().unwrap().len(), 4);
    // Too coarse for a fast oscillation: numeric failure.
    let out = flatdec(&["partition-smooth", "--surface", "sin-products:50", "--delta", "0.0625"]);
    assert_eq!(out.status.code(), Some(4));
    // Estimation needs a polynomial.
    let out = flatdec(&["estimate", "--cover", &cover, "--trials", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cover2d_and_hessian() {
    let out = flatdec(&["cover2d", "--phi", "x^2+y^2-0.5", "--delta", "0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(!v["rects"].as_array().unwrap().is_empty());

    let out = flatdec(&["analyze-hessian", "--phi", "x^2 + 0.001*x*y^2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(v["decomposition"]["A"].is_object());
    assert!(v["curved_point"]["eigenvalue"].as_f64().unwrap().abs() >= 0.05);
}
