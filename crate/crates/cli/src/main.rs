use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use flatdec_core::certify::{self, coverage_check, overlap_profile, scaling_report};
use flatdec_core::cover2d::{cover_sublevel_with, SublevelCover};
use flatdec_core::decest::{decoupling_ratio, DecestConfig};
use flatdec_core::hesssmall::{decompose_small_hessian, find_curved_point};
use flatdec_core::partition3d::{partition_polynomial, partition_smooth};
use flatdec_core::smooth::{builtin, builtin_poly};
use flatdec_core::{ConstantsTable, Error, FlatCover, Poly2, Rect};

#[derive(Parser)]
#[command(name = "flatdec", version, about = "Flat rectangle covers of polynomial surfaces, certificates and decoupling estimates")]
struct Cli {
    /// JSON file with ConstantsTable overrides (unknown keys are rejected).
    #[arg(long, global = true)]
    constants: Option<PathBuf>,
    /// Worker threads hint; the pipeline is single-threaded.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Flat cover of [-1,1]^2 for a polynomial.
    Partition {
        /// Polynomial such as "x^2 + 0.5*x*y^2", or paraboloid | saddle | cylinder.
        #[arg(long)]
        phi: String,
        #[arg(long)]
        delta: f64,
        /// Output JSON path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write rectangle vertex lists for external plotting.
        #[arg(long)]
        dump_plot_data: Option<PathBuf>,
    },
    /// Flat cover for a smooth builtin surface through local Taylor polynomials.
    PartitionSmooth {
        /// exp[:a] | sin-products[:k] | paraboloid | saddle | cylinder
        #[arg(long)]
        surface: String,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dump_plot_data: Option<PathBuf>,
    },
    /// Rectangle cover of the sublevel set {|P| < delta}.
    Cover2d {
        #[arg(long)]
        phi: String,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 40)]
        max_depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dump_plot_data: Option<PathBuf>,
    },
    /// Re-check certificates, coverage and overlap of a saved flat cover.
    Certify {
        #[arg(long)]
        cover: PathBuf,
        /// Polynomial to certify against, if the cover does not store one.
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decoupling ratios for a saved flat cover.
    Estimate {
        #[arg(long)]
        cover: PathBuf,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Frequency lattice spacing (default max(delta, 1/32)).
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Curved point and small-Hessian decomposition of a polynomial.
    AnalyzeHessian {
        #[arg(long)]
        phi: String,
        /// Hessian size; defaults to the largest coefficient of det D^2 phi.
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV of cover size, overlap and depth over a halving ladder of delta.
    ScalingReport {
        #[arg(long)]
        phi: String,
        /// Comma-separated deltas; overrides the ladder.
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 0.0625)]
        delta_max: f64,
        #[arg(long, default_value_t = 0.0009765625)]
        delta_min: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Certificate(String),
    Coverage(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Certificate(_) => 2,
            Failure::Coverage(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Certificate(m) | Failure::Coverage(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) => Failure::Config(e.to_string()),
            Error::CertificateFailure(_) => Failure::Certificate(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load_constants(path: Option<&Path>) -> std::result::Result<ConstantsTable, Failure> {
    let Some(path) = path else { return Ok(ConstantsTable::default()) };
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let overrides: Value = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let Value::Object(overrides) = overrides else {
        return Err(Failure::Config("constants file must hold a JSON object".into()));
    };
    let mut base = serde_json::to_value(ConstantsTable::default()).expect("constants serialize");
    let obj = base.as_object_mut().expect("constants are an object");
    for (k, v) in overrides {
        if !obj.contains_key(&k) {
            return Err(Failure::Config(format!("unknown constant '{k}'")));
        }
        obj.insert(k, v);
    }
    let cfg: ConstantsTable = serde_json::from_value(base).map_err(|e| Failure::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_phi(s: &str) -> std::result::Result<Poly2, Failure> {
    if let Some(p) = builtin_poly(s) {
        return Ok(p);
    }
    s.parse().map_err(|e: Error| Failure::Config(format!("cannot parse polynomial '{s}': {e}")))
}

fn check_delta(delta: f64) -> Outcome {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Failure::Config(format!("delta must lie in (0, 1), got {delta}")))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Config(format!("{}: {e}", p.display()))),
        None => {
            let mut s = std::io::stdout().lock();
            writeln!(s, "{text}").map_err(|e| Failure::Config(e.to_string()))
        }
    }
}

fn dump_plot(path: Option<&Path>, rects: &[Rect]) -> Outcome {
    let Some(path) = path else { return Ok(()) };
    let verts: Vec<Vec<[f64; 2]>> = rects.iter().map(|r| r.vertices().to_vec()).collect();
    emit(Some(path), &serde_json::to_string(&verts).expect("vertices serialize"))
}

/// Certificate and coverage checks of a flat cover against `phi`.
fn verify_flat(cover: &FlatCover, phi: Option<&Poly2>) -> (Value, Outcome) {
    let rects = cover.rect_list();
    let mut failures = 0usize;
    let mut worst: f64 = 0.0;
    if let Some(phi) = phi {
        for r in &rects {
            let c = certify::certify_flat_with(phi, r, 0);
            worst = worst.max(c.deviation_ub);
            if c.deviation_ub > cover.delta * (1.0 + 1e-12) {
                failures += 1;
            }
        }
    } else {
        // Smooth covers keep their per-rect certificates.
        for r in &cover.rects {
            worst = worst.max(r.deviation_cert);
            if r.deviation_cert > cover.delta * (1.0 + 1e-12) {
                failures += 1;
            }
        }
    }
    let cov = coverage_check(&rects, &|_, _| true);
    let ov = overlap_profile(&rects, 1.0);
    let summary = json!({
        "delta": cover.delta,
        "count": rects.len(),
        "certificate_failures": failures,
        "max_deviation_ub": worst,
        "probes": cov.probes,
        "misses": cov.misses,
        "witnesses": cov.witnesses,
        "max_overlap": ov.max,
    });
    let outcome = if failures > 0 {
        Err(Failure::Certificate(format!("{failures} rectangles fail the flatness certificate")))
    } else if cov.misses > 0 {
        Err(Failure::Coverage(format!("{} probe points are not covered", cov.misses)))
    } else {
        Ok(())
    };
    (summary, outcome)
}

fn read_cover(path: &Path) -> std::result::Result<FlatCover, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(FlatCover::from_json(&text)?)
}

fn cover_phi(cover: &FlatCover, phi: Option<&str>) -> std::result::Result<Option<Poly2>, Failure> {
    match phi {
        Some(s) => parse_phi(s).map(Some),
        None => Ok(cover.phi.clone()),
    }
}

fn ladder(max: f64, min: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut d = max;
    while d >= min * (1.0 - 1e-12) {
        v.push(d);
        d *= 0.5;
    }
    v
}

fn run(cli: Cli) -> Outcome {
    let cfg = load_constants(cli.constants.as_deref())?;
    let _ = cli.threads;
    match cli.cmd {
        Cmd::Partition { phi, delta, out, dump_plot_data } => {
            check_delta(delta)?;
            let p = parse_phi(&phi)?;
            let cover = partition_polynomial(&p, delta, &cfg)?;
            emit(out.as_deref(), &cover.to_json())?;
            dump_plot(dump_plot_data.as_deref(), &cover.rect_list())?;
            let (summary, outcome) = verify_flat(&cover, Some(&p));
            eprintln!("{summary}");
            outcome
        }
        Cmd::PartitionSmooth { surface, delta, eps, out, dump_plot_data } => {
            check_delta(delta)?;
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Failure::Config(format!("eps must lie in (0, 1], got {eps}")));
            }
            let f = builtin(&surface)?;
            let cover = partition_smooth(f.as_ref(), delta, eps, &cfg)?;
            emit(out.as_deref(), &cover.to_json())?;
            dump_plot(dump_plot_data.as_deref(), &cover.rect_list())?;
            let (summary, outcome) = verify_flat(&cover, None);
            eprintln!("{summary}");
            outcome
        }
        Cmd::Cover2d { phi, delta, max_depth, out, dump_plot_data } => {
            check_delta(delta)?;
            let p = parse_phi(&phi)?;
            let cover: SublevelCover = cover_sublevel_with(&p, delta, max_depth, &cfg)?;
            emit(out.as_deref(), &cover.to_json())?;
            dump_plot(dump_plot_data.as_deref(), &cover.rect_list())?;
            let rep = coverage_check(&cover.rect_list(), &|x, y| p.eval(x, y).abs() < delta);
            eprintln!("{}", json!({"count": cover.rects.len(), "probes": rep.probes, "misses": rep.misses}));
            if rep.misses > 0 {
                return Err(Failure::Coverage(format!("{} sublevel probe points are not covered", rep.misses)));
            }
            Ok(())
        }
        Cmd::Certify { cover, phi, out } => {
            let cover = read_cover(&cover)?;
            let p = cover_phi(&cover, phi.as_deref())?;
            let (summary, outcome) = verify_flat(&cover, p.as_ref());
            emit(out.as_deref(), &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
            outcome
        }
        Cmd::Estimate { cover, phi, trials, seed, h, out } => {
            let cover = read_cover(&cover)?;
            let p = cover_phi(&cover, phi.as_deref())?
                .ok_or_else(|| Failure::Config("cover stores no polynomial; pass --phi".into()))?;
            let dcfg = DecestConfig { h, trials, seed, ..Default::default() };
            let report = decoupling_ratio(&p, &cover, &dcfg)?;
            emit(out.as_deref(), &report.to_json())
        }
        Cmd::AnalyzeHessian { phi, nu, out } => {
            let p = parse_phi(&phi)?;
            let nu = nu.unwrap_or_else(|| p.hessian_det().coeff_max());
            let curved = find_curved_point(&p, cfg.eig_floor).ok();
            let dec = decompose_small_hessian(&p, nu, &cfg)?;
            let v = json!({
                "phi": p.to_string(),
                "nu": nu,
                "curved_point": curved.map(|c| json!({"point": c.point, "eigenvalue": c.eigenvalue, "eigenvector": c.eigenvector})),
                "decomposition": dec,
            });
            emit(out.as_deref(), &serde_json::to_string_pretty(&v).expect("analysis serializes"))
        }
        Cmd::ScalingReport { phi, deltas, delta_max, delta_min, out } => {
            let p = parse_phi(&phi)?;
            let deltas = if deltas.is_empty() { ladder(delta_max, delta_min) } else { deltas };
            for &d in &deltas {
                check_delta(d)?;
            }
            let rows = scaling_report(&p, &deltas, &cfg)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r).map_err(|e| Failure::Numeric(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Failure::Numeric(e.to_string()))?;
            let text = String::from_utf8(bytes).expect("csv is utf-8");
            emit(out.as_deref(), text.trim_end())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
