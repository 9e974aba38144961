//! Operations behind the static demo page. Each takes the same JSON
//! distribution config the CLI's "dist" section uses and returns JSON
//! text, so the page stays a thin canvas renderer. The functions are
//! plain Rust first and wasm exports only at the bottom, which keeps
//! them testable on the native target.

use invscales::cli::verify_distribution;
use invscales::grid::probe_grid;
use invscales::{parametric_curves, DistSpec, Distribution};

fn build(config: &str) -> Result<Distribution, String> {
    let spec: DistSpec =
        serde_json::from_str(config).map_err(|e| format!("config: {e}"))?;
    spec.build().map_err(|e| e.to_string())
}

/// Builds the configured distribution and returns its constants together
/// with the three-chart curve rows (z, T, R, q_z, q_T, q_R) over an
/// interior probe grid of `points` points.
pub fn curves_json(config: &str, points: usize) -> Result<String, String> {
    if !(2..=100_000).contains(&points) {
        return Err(format!("points must lie in 2..=100000, got {points}"));
    }
    let d = build(config)?;
    let grid = probe_grid(d.domain(), points);
    let rows = parametric_curves(&d, &grid).map_err(|e| e.to_string())?;
    let out = serde_json::json!({
        "k": d.k(),
        "lambda": d.lambda(),
        "rows": rows,
    });
    Ok(out.to_string())
}

/// Runs the full invariance check suite and returns the row list plus an
/// overall verdict, mirroring the CLI's `verify` subcommand.
pub fn verify_json(config: &str) -> Result<String, String> {
    let d = build(config)?;
    let checks = verify_distribution(&d, None);
    let all_passed = checks.iter().all(|c| c.status != "fail");
    let out = serde_json::json!({
        "all_passed": all_passed,
        "checks": checks,
    });
    Ok(out.to_string())
}

/// Draws `n` inverse-transform samples with the given seed and returns
/// them with the density constants, so the page can overlay the curve
/// on a histogram.
pub fn sample_json(config: &str, n: usize, seed: u64) -> Result<String, String> {
    if !(1..=1_000_000).contains(&n) {
        return Err(format!("n must lie in 1..=1000000, got {n}"));
    }
    let d = build(config)?;
    let values = d.sample(n, seed).map_err(|e| e.to_string())?;
    let out = serde_json::json!({
        "k": d.k(),
        "lambda": d.lambda(),
        "values": values,
    });
    Ok(out.to_string())
}

#[cfg(target_arch = "wasm32")]
mod wasm {
    use wasm_bindgen::prelude::*;

    #[wasm_bindgen]
    pub fn curves(config: &str, points: usize) -> Result<String, JsValue> {
        super::curves_json(config, points).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen]
    pub fn verify(config: &str) -> Result<String, JsValue> {
        super::verify_json(config).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen]
    pub fn sample(config: &str, n: usize, seed: u64) -> Result<String, JsValue> {
        super::sample_json(config, n, seed).map_err(|e| JsValue::from_str(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXP: &str = r#"{
        "scale": {"kind": "linear", "domain": [0.0, "inf"]},
        "lambda": 1.0,
        "measure": "T"
    }"#;

    const GAMMA: &str = r#"{
        "scale": {"kind": "log_linear", "alpha": 2.0},
        "lambda": 1.0,
        "measure": "z"
    }"#;

    #[test]
    fn curves_payload_has_constants_and_rows() {
        let text = curves_json(EXP, 65).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!((json["k"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        let rows = json["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 65);
        // On the identity scale the exponential chart is the native one.
        let mid = &rows[32];
        assert!((mid["q_z"].as_f64().unwrap() - mid["q_T"].as_f64().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn verify_payload_reports_pass() {
        for config in [EXP, GAMMA] {
            let text = verify_json(config).unwrap();
            let json: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(json["all_passed"], true, "{text}");
        }
    }

    #[test]
    fn sample_payload_is_seeded_and_sized() {
        let a = sample_json(GAMMA, 128, 5).unwrap();
        let b = sample_json(GAMMA, 128, 5).unwrap();
        let c = sample_json(GAMMA, 128, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let json: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(json["values"].as_array().unwrap().len(), 128);
    }

    #[test]
    fn bad_config_is_an_error_string() {
        assert!(curves_json("{", 64).is_err());
        assert!(sample_json(EXP, 0, 1).is_err());
        assert!(curves_json(EXP, 1).is_err());
    }
}
