//! Command-line front end: construction, verification, curve emission,
//! entropy/moment reports, sampling, and fitting.
//!
//! Config files are JSON with up to four sections:
//!
//! ```json
//! {
//!   "dist":   { "scale": {...}, "lambda": 1.0, "measure": "T" },
//!   "sample": { "n": 256 },
//!   "curves": { "points": 129 },
//!   "fit":    { "family": "gamma", "init": {...}, "data_path": "d.txt" }
//! }
//! ```
//!
//! `--set path.to.key=value` patches the parsed config (values parse as
//! JSON, falling back to strings), so identical config + seed always
//! produces byte-identical output. The `INVSCALES_QUAD_RELTOL` variable
//! supplies a quadrature tolerance when the config has no `quad` block.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::catalog::catalog_entries;
use crate::dist::{DistSpec, Distribution, MeasureKind};
use crate::error::{Error, Result};
use crate::fit::{mle_fit, read_data_file};
use crate::grid::probe_grid;
use crate::invariance::{check_affine_similarity, check_shift_invariance, check_stretch_invariance};
use crate::quad::QuadratureConfig;
use crate::radial::{curves_to_csv, parametric_curves, radial_variance, to_gaussian_form};
use crate::scale::{Generator, ScaleSpec};

pub const QUAD_RELTOL_ENV: &str = "INVSCALES_QUAD_RELTOL";

const SHIFT_OFFSETS: [f64; 3] = [-1.0, 0.5, 3.0];
const STRETCH_FACTORS: [f64; 3] = [0.5, 2.0, 10.0];

#[derive(Debug, Parser)]
#[command(
    name = "invscales",
    version,
    about = "Distributions built from invariances of a canonical measurement scale"
)]
pub struct CommandSpec {
    #[command(subcommand)]
    pub subcommand: Cmd,

    /// JSON config file (see the repo's configs/ directory).
    #[arg(long = "config", global = true, value_name = "PATH")]
    pub config_path: Option<PathBuf>,

    /// Write output here instead of stdout.
    #[arg(long = "out", global = true, value_name = "PATH")]
    pub output_path: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Sampling seed (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Config override, `--set dist.lambda=2` (repeatable, applied in order).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Replaces every verification tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Cmd {
    /// Build the distribution and print k, λ, ⟨T⟩, entropy.
    Build,
    /// Run the invariance suite; exit 0 iff every check passes.
    Verify,
    /// Emit (z, T, R, q_z, q_T, q_R) parametric curve rows.
    Curves,
    /// Entropy and moment report.
    Report,
    /// Draw n points (config `sample.n`, flag `--seed`).
    Sample,
    /// Maximum-likelihood fit (config `fit` section).
    Fit,
    /// List the named families.
    Catalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, serde::Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub dist: Option<DistSpec>,
    pub sample: Option<SampleCfg>,
    pub curves: Option<CurvesCfg>,
    pub fit: Option<FitCfg>,
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleCfg {
    pub n: usize,
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesCfg {
    pub points: usize,
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitCfg {
    pub family: String,
    pub init: BTreeMap<String, f64>,
    #[serde(default)]
    pub data_path: Option<PathBuf>,
    #[serde(default)]
    pub data: Option<Vec<f64>>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_max_iter() -> usize {
    500
}

/// Entry point behind `main`: maps errors to exit codes (0 success or
/// all-pass, 1 verification failure, 2 usage, 3 numeric) with a one-line
/// diagnostic on stderr.
pub fn run(spec: CommandSpec) -> i32 {
    match run_inner(&spec) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("invscales: {e}");
            exit_code_of(&e)
        }
    }
}

fn exit_code_of(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Param(_) => 2,
        _ => 3,
    }
}

fn run_inner(spec: &CommandSpec) -> Result<i32> {
    let output = match spec.subcommand {
        Cmd::Catalog => render_catalog(spec.format)?,
        Cmd::Build => {
            let d = build_dist(spec)?;
            render_build(&d)?
        }
        Cmd::Report => {
            let d = build_dist(spec)?;
            render_report(&d)?
        }
        Cmd::Curves => {
            let d = build_dist(spec)?;
            let points = load_config(spec)?.curves.map(|c| c.points).unwrap_or(129);
            render_curves(&d, points, spec.format)?
        }
        Cmd::Sample => {
            let d = build_dist(spec)?;
            let n = load_config(spec)?.sample.map(|s| s.n).unwrap_or(100);
            render_sample(&d, n, spec.seed.unwrap_or(0), spec.format)?
        }
        Cmd::Fit => render_fit(spec)?,
        Cmd::Verify => {
            let d = build_dist(spec)?;
            let rows = verify_distribution(&d, spec.tol);
            let all = rows.iter().all(|r| r.status != "fail");
            write_output(spec, &render_checks(&rows, all, spec.format)?)?;
            return Ok(if all { 0 } else { 1 });
        }
    };
    write_output(spec, &output)?;
    Ok(0)
}

fn write_output(spec: &CommandSpec, text: &str) -> Result<()> {
    let mut owned = text.to_string();
    if !owned.ends_with('\n') {
        owned.push('\n');
    }
    match &spec.output_path {
        Some(path) => std::fs::write(path, owned)?,
        None => print!("{owned}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Config loading and overrides
// ---------------------------------------------------------------------------

fn load_config(spec: &CommandSpec) -> Result<CliConfig> {
    let path = spec
        .config_path
        .as_ref()
        .ok_or_else(|| Error::Config("this subcommand needs --config".to_string()))?;
    let text = std::fs::read_to_string(path)?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for patch in &spec.overrides {
        apply_override(&mut value, patch)?;
    }
    let mut config: CliConfig = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    apply_quad_env(&mut config)?;
    Ok(config)
}

/// `--set a.b.c=VALUE`: VALUE parses as JSON, else as a string. Creates
/// intermediate objects along the path.
fn apply_override(root: &mut Value, patch: &str) -> Result<()> {
    let (path, raw) = patch
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {patch:?} is not KEY=VALUE")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("override path {path:?} has an empty segment")));
    }
    for (i, seg) in segments.iter().enumerate() {
        if !node.is_object() {
            return Err(Error::Config(format!(
                "override path {path:?} crosses a non-object at {seg:?}"
            )));
        }
        let map = node.as_object_mut().expect("checked above");
        if i + 1 == segments.len() {
            map.insert(seg.to_string(), parsed);
            return Ok(());
        }
        node = map.entry(seg.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("segments is nonempty")
}

fn apply_quad_env(config: &mut CliConfig) -> Result<()> {
    let Ok(raw) = std::env::var(QUAD_RELTOL_ENV) else {
        return Ok(());
    };
    let rel: f64 = raw
        .parse()
        .map_err(|_| Error::Config(format!("{QUAD_RELTOL_ENV}={raw:?} is not a number")))?;
    if !(rel > 0.0) || !rel.is_finite() {
        return Err(Error::Config(format!("{QUAD_RELTOL_ENV} must be positive, got {rel}")));
    }
    if let Some(dist) = &mut config.dist {
        if dist.quad.is_none() {
            dist.quad = Some(QuadratureConfig {
                rel_tol: rel,
                abs_tol: rel * 1e-2,
                ..QuadratureConfig::default()
            });
        }
    }
    Ok(())
}

fn build_dist(spec: &CommandSpec) -> Result<Distribution> {
    let config = load_config(spec)?;
    let dist = config
        .dist
        .ok_or_else(|| Error::Config("config needs a \"dist\" section".to_string()))?;
    dist.build()
}

// ---------------------------------------------------------------------------
// Renderers
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct BuildSummary {
    k: f64,
    lambda: f64,
    mean_t: f64,
    entropy: f64,
}

fn render_build(d: &Distribution) -> Result<String> {
    let summary = BuildSummary {
        k: d.k(),
        lambda: d.lambda(),
        mean_t: d.mean_t()?,
        entropy: d.entropy()?,
    };
    Ok(serde_json::to_string_pretty(&summary).expect("plain struct"))
}

#[derive(Debug, Serialize)]
struct ReportSummary {
    k: f64,
    lambda: f64,
    mean_t: f64,
    entropy: f64,
    entropy_quadrature: f64,
    conserved: f64,
    mean_z: Option<f64>,
    var_z: Option<f64>,
}

fn render_report(d: &Distribution) -> Result<String> {
    // First and second moments do not exist for heavy tails; those come
    // out null rather than failing the report.
    let mean_z = d.mean_of(|z| Ok(z)).ok();
    let var_z = match mean_z {
        Some(m) => d.mean_of(|z| Ok((z - m) * (z - m))).ok(),
        None => None,
    };
    let summary = ReportSummary {
        k: d.k(),
        lambda: d.lambda(),
        mean_t: d.mean_t()?,
        entropy: d.entropy()?,
        entropy_quadrature: d.entropy_by_quadrature()?,
        conserved: d.conserved_check()?,
        mean_z,
        var_z,
    };
    Ok(serde_json::to_string_pretty(&summary).expect("plain struct"))
}

fn render_curves(d: &Distribution, points: usize, format: Format) -> Result<String> {
    let grid = probe_grid(d.domain(), points);
    let rows = parametric_curves(d, &grid)?;
    Ok(match format {
        Format::Csv => curves_to_csv(&rows),
        Format::Json => serde_json::to_string_pretty(&rows).expect("plain rows"),
    })
}

fn render_sample(d: &Distribution, n: usize, seed: u64, format: Format) -> Result<String> {
    let draws = d.sample(n, seed)?;
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&draws).expect("numbers"),
        Format::Csv => {
            let mut out = String::from("value\n");
            for v in &draws {
                out.push_str(&format!("{v:.16e}\n"));
            }
            out
        }
    })
}

fn render_fit(spec: &CommandSpec) -> Result<String> {
    let config = load_config(spec)?;
    let fit = config
        .fit
        .ok_or_else(|| Error::Config("config needs a \"fit\" section".to_string()))?;
    let data = match (&fit.data, &fit.data_path) {
        (Some(inline), None) => inline.clone(),
        (None, Some(path)) => read_data_file(path)?,
        (Some(_), Some(_)) => {
            return Err(Error::Config("fit takes data or data_path, not both".to_string()))
        }
        (None, None) => {
            return Err(Error::Config("fit needs inline data or data_path".to_string()))
        }
    };
    let result = mle_fit(&fit.family, &data, &fit.init, fit.max_iter)?;
    Ok(serde_json::to_string_pretty(&result).expect("plain struct"))
}

fn render_catalog(format: Format) -> Result<String> {
    let entries = catalog_entries();
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&entries).expect("plain rows"),
        Format::Csv => {
            let mut out = String::from("family,params,scale_kind,measure,domain_lo,domain_hi\n");
            for e in &entries {
                let measure = match e.measure {
                    MeasureKind::OverZ => "z",
                    MeasureKind::OverT => "T",
                    MeasureKind::OverR => "R",
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    e.family,
                    e.params_schema.join(";"),
                    e.scale_kind,
                    measure,
                    e.domain[0].0,
                    e.domain[1].0
                ));
            }
            out
        }
    })
}

// ---------------------------------------------------------------------------
// The verify suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    /// "pass" | "fail" | "skip"
    pub status: String,
    /// The measured residual compared against tolerance (absent on skip).
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl CheckRow {
    fn judged(name: &str, residual: f64, tol: f64, detail: String) -> Self {
        CheckRow {
            name: name.to_string(),
            status: if residual.is_finite() && residual <= tol { "pass" } else { "fail" }
                .to_string(),
            value: Some(residual),
            tolerance: Some(tol),
            detail,
        }
    }

    fn skipped(name: &str, why: String) -> Self {
        CheckRow { name: name.to_string(), status: "skip".into(), value: None, tolerance: None, detail: why }
    }
}

/// A self-similarity generator for the scale, where one exists in the
/// generator catalog. The pair is (generator, expected b exponent note).
fn affine_generator(d: &Distribution) -> Option<(Generator, String)> {
    let scale = d.scale();
    let spec = ScaleSpec::from_base(scale.base());
    let lifted = scale.exp_rate() != 0.0;
    match (spec.kind.as_str(), lifted) {
        ("linear", _) => Some((Generator::shift(1.0).expect("finite"), "G: z+1".to_string())),
        ("log", _) => Some((Generator::stretch(2.0).expect("finite"), "G: 2z".to_string())),
        ("square", false) => {
            Some((Generator::stretch(2.0).expect("finite"), "G: 2z".to_string()))
        }
        ("linear_log", false) => {
            let beta = spec.beta?;
            Some((
                Generator::power_linear(2.0, beta).ok()?,
                format!("G: ((1+{beta}z)^2-1)/{beta}"),
            ))
        }
        _ => None,
    }
}

/// The fixed verification suite. Every row lands in the output in the
/// declared order; `tol` replaces each check's default tolerance.
pub fn verify_distribution(d: &Distribution, tol: Option<f64>) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let t = |default: f64| tol.unwrap_or(default);

    // affine: T(G(z)) ≈ a + b·T(z) for the scale's own generator.
    match affine_generator(d) {
        Some((g, note)) => {
            let grid = probe_grid(d.domain(), 64);
            match check_affine_similarity(d.scale(), &g, &grid, t(1e-9)) {
                Ok(r) => rows.push(CheckRow {
                    name: "affine".into(),
                    status: if r.passed { "pass" } else { "fail" }.into(),
                    value: Some(r.max_residual),
                    tolerance: Some(r.tolerance),
                    detail: format!("{note}, a={:.6}, b={:.6}", r.fitted_a, r.fitted_b),
                }),
                Err(e) => rows.push(CheckRow::skipped("affine", format!("{e}"))),
            }
        }
        None => rows.push(CheckRow::skipped(
            "affine",
            format!("no affine generator for the {} scale", d.scale().base().kind_name()),
        )),
    }

    // conserved: λ⟨T−T*⟩_dT = 1 on the scale's natural domain; on a
    // truncated domain the value moves but stretch must transport it
    // exactly, so the drift is what gets judged.
    let natural = {
        let (sd, dd) = (d.scale().domain(), d.domain());
        sd.lo() == dd.lo() && sd.hi() == dd.hi()
    };
    match d.conserved_check() {
        Ok(c) if natural => {
            rows.push(CheckRow::judged("conserved", (c - 1.0).abs(), t(1e-6), format!("value={c}")))
        }
        Ok(c) => match d.stretched(2.0).and_then(|s| s.conserved_check()) {
            Ok(cs) => rows.push(CheckRow::judged(
                "conserved",
                (cs - c).abs(),
                t(1e-6),
                format!("truncated domain: value={c}, after stretch b=2: {cs}"),
            )),
            Err(e) => rows.push(CheckRow::skipped("conserved", format!("{e}"))),
        },
        Err(e) => rows.push(CheckRow::skipped("conserved", format!("{e}"))),
    }

    // cumulative: −(1/λ)dq = q·dT at step 1e−4 in a window around an
    // interior probe point.
    {
        let center = probe_grid(d.domain(), 3)[1];
        let step = 1e-4;
        let mut lo = center - 0.05;
        if d.domain().lo().is_finite() {
            lo = lo.max(0.5 * (d.domain().lo() + center));
        }
        let grid: Vec<f64> = (0..=1000).map(|i| lo + step * i as f64).collect();
        match d.cumulative_relation_check(&grid) {
            Ok(err) => rows.push(CheckRow::judged(
                "cumulative",
                err,
                t(1e-6),
                format!("window [{lo:.4}, {:.4}], step {step}", lo + 0.1),
            )),
            Err(e) => rows.push(CheckRow::skipped("cumulative", format!("{e}"))),
        }
    }

    // normalization: ∫ pdf = 1.
    match d.mean_of(|_| Ok(1.0)) {
        Ok(mass) => rows.push(CheckRow::judged(
            "normalization",
            (mass - 1.0).abs(),
            t(1e-8),
            format!("mass={mass}"),
        )),
        Err(e) => rows.push(CheckRow::skipped("normalization", format!("{e}"))),
    }

    // radial: in the Gaussian form, πv²σ² = ½ (and ⟨R⟩ = 0 two-sided,
    // enforced inside radial_variance).
    match to_gaussian_form(d).and_then(|dr| radial_variance(&dr)) {
        Ok((sigma2, circular)) => rows.push(CheckRow::judged(
            "radial",
            (circular - 0.5).abs(),
            t(1e-8),
            format!("sigma2={sigma2}, pi v^2 sigma2={circular}"),
        )),
        Err(e) => rows.push(CheckRow::skipped("radial", format!("{e}"))),
    }

    // shift: k_a/k = e^{−λa} with density ratios unchanged. The radial
    // chart re-centers any shift away, so there is nothing to measure
    // over R.
    for a in SHIFT_OFFSETS {
        let name = format!("shift a={a}");
        if d.measure() == MeasureKind::OverR {
            rows.push(CheckRow::skipped(&name, "radial charts re-center shifts".to_string()));
            continue;
        }
        match check_shift_invariance(d, a, t(1e-8)) {
            Ok(r) => rows.push(CheckRow {
                name,
                status: if r.passed { "pass" } else { "fail" }.into(),
                value: Some(r.max_residual),
                tolerance: Some(r.tolerance),
                detail: format!("k ratio={:.12}, expected={:.12}", r.fitted_b, (-d.lambda() * a).exp()),
            }),
            Err(e) => rows.push(CheckRow::skipped(&name, format!("{e}"))),
        }
    }

    // stretch: T ↦ bT with λ ↦ λ/b leaves the density untouched.
    for b in STRETCH_FACTORS {
        let name = format!("stretch b={b}");
        match check_stretch_invariance(d, b, t(1e-8)) {
            Ok(r) => rows.push(CheckRow {
                name,
                status: if r.passed { "pass" } else { "fail" }.into(),
                value: Some(r.max_residual),
                tolerance: Some(r.tolerance),
                detail: "density and conserved drift".to_string(),
            }),
            Err(e) => rows.push(CheckRow::skipped(&name, format!("{e}"))),
        }
    }

    rows
}

#[derive(Debug, Serialize)]
struct VerifyOutput<'a> {
    checks: &'a [CheckRow],
    all_passed: bool,
}

fn render_checks(rows: &[CheckRow], all: bool, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&VerifyOutput { checks: rows, all_passed: all })
            .expect("plain rows"),
        Format::Csv => {
            let mut out = String::from("name,status,value,tolerance\n");
            for r in rows {
                let value = r.value.map(|v| format!("{v:.16e}")).unwrap_or_default();
                let tolerance = r.tolerance.map(|v| format!("{v:.16e}")).unwrap_or_default();
                out.push_str(&format!("{},{},{},{}\n", r.name, r.status, value, tolerance));
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> CommandSpec {
        CommandSpec::parse_from(args)
    }

    fn write_config(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    const EXP_CONFIG: &str = r#"{
        "dist": {
            "scale": {"kind": "linear", "domain": [0.0, "inf"]},
            "lambda": 1.0,
            "measure": "T"
        },
        "sample": {"n": 32}
    }"#;

    #[test]
    fn override_paths_patch_nested_values() {
        let mut v: Value = serde_json::from_str(r#"{"dist": {"lambda": 1.0}}"#).unwrap();
        apply_override(&mut v, "dist.lambda=2.5").unwrap();
        assert_eq!(v["dist"]["lambda"], 2.5);
        apply_override(&mut v, "sample.n=64").unwrap();
        assert_eq!(v["sample"]["n"], 64);
        apply_override(&mut v, "dist.measure=T").unwrap();
        assert_eq!(v["dist"]["measure"], "T");
        assert!(apply_override(&mut v, "no_equals").is_err());
        assert!(apply_override(&mut v, "dist.lambda.x=1").is_err());
    }

    #[test]
    fn build_reports_exponential_constants() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(&dir, "exp.json", EXP_CONFIG);
        let out = dir.path().join("build.json");
        let spec = parse(&[
            "invscales",
            "build",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(run(spec), 0);
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!((v["k"].as_f64().unwrap() - 1.0).abs() < 1e-10);
        assert!((v["entropy"].as_f64().unwrap() - 1.0).abs() < 1e-8);
        assert!((v["mean_t"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn verify_exponential_all_pass() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(&dir, "exp.json", EXP_CONFIG);
        let out = dir.path().join("verify.json");
        let spec = parse(&[
            "invscales",
            "verify",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(run(spec), 0);
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["all_passed"], true);
        let checks = v["checks"].as_array().unwrap();
        assert_eq!(checks.len(), 11);
        assert!(checks.iter().all(|c| c["status"] != "fail"));
        // The exponential scale has an affine generator; nothing skips.
        assert!(checks.iter().all(|c| c["status"] == "pass"));
    }

    #[test]
    fn both_lambda_and_target_avg_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(
            &dir,
            "bad.json",
            r#"{"dist": {"scale": {"kind": "linear", "domain": [0.0, "inf"]},
                "lambda": 1.0, "target_avg": 2.0, "measure": "T"}}"#,
        );
        let spec = parse(&["invscales", "build", "--config", config.to_str().unwrap()]);
        assert_eq!(run(spec), 2);
    }

    #[test]
    fn divergent_config_is_numeric_error() {
        // Lomax-type tail with λα ≤ 1 has no normalization.
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(
            &dir,
            "divergent.json",
            r#"{"dist": {"scale": {"kind": "linear_log", "alpha": 0.5, "beta": 1.0,
                "domain": [0.0, "inf"]}, "lambda": 1.0, "measure": "z"}}"#,
        );
        let spec = parse(&["invscales", "build", "--config", config.to_str().unwrap()]);
        assert_eq!(run(spec), 3);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(&dir, "exp.json", EXP_CONFIG);
        let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
        for (path, seed) in [(&a, "9"), (&b, "9"), (&c, "10")] {
            let spec = parse(&[
                "invscales",
                "sample",
                "--config",
                config.to_str().unwrap(),
                "--seed",
                seed,
                "--format",
                "csv",
                "--out",
                path.to_str().unwrap(),
            ]);
            assert_eq!(run(spec), 0);
        }
        let (ba, bb, bc) = (
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            std::fs::read(&c).unwrap(),
        );
        assert_eq!(ba, bb);
        assert_ne!(ba, bc);
        let text = String::from_utf8(ba).unwrap();
        assert_eq!(text.lines().count(), 33);
        assert!(text.starts_with("value\n"));
    }

    #[test]
    fn set_overrides_reach_the_build() {
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(&dir, "exp.json", EXP_CONFIG);
        let out = dir.path().join("build.json");
        let spec = parse(&[
            "invscales",
            "build",
            "--config",
            config.to_str().unwrap(),
            "--set",
            "dist.lambda=2.0",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(run(spec), 0);
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!((v["k"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn catalog_lists_ten_families() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("catalog.json");
        let spec = parse(&["invscales", "catalog", "--out", out.to_str().unwrap()]);
        assert_eq!(run(spec), 0);
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 10);

        let out_csv = dir.path().join("catalog.csv");
        let spec = parse(&[
            "invscales",
            "catalog",
            "--format",
            "csv",
            "--out",
            out_csv.to_str().unwrap(),
        ]);
        assert_eq!(run(spec), 0);
        let text = std::fs::read_to_string(&out_csv).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert!(text.starts_with("family,params,scale_kind,measure,domain_lo,domain_hi\n"));
    }

    #[test]
    fn missing_config_is_usage_error() {
        let spec = parse(&["invscales", "build"]);
        assert_eq!(run(spec), 2);
        let spec = parse(&["invscales", "build", "--config", "/nonexistent/x.json"]);
        assert_eq!(run(spec), 2);
    }
}
