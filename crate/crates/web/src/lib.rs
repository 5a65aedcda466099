//! Browser bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no generated type glue beyond the functions themselves.

use rfflab::bounds::{bound_report, BoundParams};
use rfflab::datagen::{simulate_panel, ProcessParams};
use rfflab::harness::{run_convergence, ExperimentConfig, Metric};
use rfflab::oracle::small_ball_curve;
use rfflab::stats::fit_loglog_slope;
use rfflab::{derive_stream, ScaleMode};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js(r: rfflab::Result<String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

fn parse_list(s: &str) -> rfflab::Result<Vec<f64>> {
    s.split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            v.trim().parse::<f64>().map_err(|_| rfflab::Error::Config {
                key: "list".into(),
                reason: format!("`{v}` is not a number"),
            })
        })
        .collect()
}

pub fn tcrit_table(b2: f64, sigma2: f64, cap_c_z: f64, c_z: f64, t: f64, p_list: &str) -> rfflab::Result<String> {
    let rows = parse_list(p_list)?
        .into_iter()
        .map(|p| {
            let params = BoundParams {
                b2,
                sigma2,
                t,
                p,
                c_z,
                cap_c_z,
                c_universal: 1.0,
            };
            Ok(json!({ "P": p, "report": bound_report(&params)? }))
        })
        .collect::<rfflab::Result<Vec<_>>>()?;
    Ok(serde_json::to_string(&rows)?)
}

/// Critical sample size, bounds and regime for each P in a comma list.
#[wasm_bindgen]
pub fn tcrit_explorer(b2: f64, sigma2: f64, cap_c_z: f64, c_z: f64, t: f64, p_list: &str) -> Result<String, JsValue> {
    js(tcrit_table(b2, sigma2, cap_c_z, c_z, t, p_list))
}

#[allow(clippy::too_many_arguments)]
pub fn convergence_table(
    k: usize,
    t: usize,
    gamma: f64,
    trials: usize,
    p_list: &str,
    sample_std: bool,
    seed: u64,
) -> rfflab::Result<String> {
    let cfg = ExperimentConfig {
        p_grid: parse_list(p_list)?.into_iter().map(|p| p as usize).collect(),
        t_grid: vec![t],
        k_grid: vec![k],
        gamma: vec![gamma],
        trials,
        mode: if sample_std { ScaleMode::SampleStd } else { ScaleMode::Rms },
        root_seed: seed,
        ..ExperimentConfig::default()
    };
    let table = run_convergence(&cfg)?;
    let curve = |m: Metric| {
        table
            .series(m)
            .iter()
            .map(|r| json!({ "P": r.cell.p, "mean": r.mean, "stderr": r.stderr }))
            .collect::<Vec<_>>()
    };
    let std_rows = table.series(Metric::MaeStandardVsGauss);
    let sizes: Vec<f64> = std_rows.iter().map(|r| r.cell.p as f64).collect();
    let means: Vec<f64> = std_rows.iter().map(|r| r.mean).collect();
    let slope = fit_loglog_slope(&sizes, &means).ok().map(|s| s.0);
    Ok(serde_json::to_string(&json!({
        "standard": curve(Metric::MaeStandardVsGauss),
        "standardized": curve(Metric::MaeStdVsGauss),
        "standard_slope": slope,
        "dropped_trials": table.dropped_trials,
    }))?)
}

/// Mean absolute kernel error of plain and standardized features against
/// the Gaussian kernel, for each P in a comma list.
#[wasm_bindgen]
pub fn convergence_curve(
    k: usize,
    t: usize,
    gamma: f64,
    trials: usize,
    p_list: &str,
    sample_std: bool,
    seed: u32,
) -> Result<String, JsValue> {
    js(convergence_table(k, t, gamma, trials, p_list, sample_std, seed.into()))
}

pub fn small_ball_table(t: usize, k: usize, gamma: f64, eps_list: &str, n: usize, seed: u64) -> rfflab::Result<String> {
    let key = derive_stream(seed, "web-small-ball", 0, 0);
    let spec = ProcessParams::default().with_dim(k)?;
    let panel = simulate_panel(&spec, t, 1, &mut key.child("panel", 0).rng())?;
    let curve = small_ball_curve(&panel.train, gamma, &parse_list(eps_list)?, n, &key.child("draws", 0))?;
    let dense: Vec<_> = curve.iter().filter(|c| !c.sparse).collect();
    let slope = if dense.len() >= 3 {
        let e: Vec<f64> = dense.iter().map(|c| c.epsilon).collect();
        let p: Vec<f64> = dense.iter().map(|c| c.probability).collect();
        fit_loglog_slope(&e, &p).ok().map(|s| s.0)
    } else {
        None
    };
    Ok(serde_json::to_string(&json!({
        "curve": curve,
        "slope": slope,
        "reference_slope": t as f64 / 2.0,
    }))?)
}

/// Empirical `P(σ̂² <= ε)` on a simulated window, with its log-log slope.
#[wasm_bindgen]
pub fn small_ball(t: usize, k: usize, gamma: f64, eps_list: &str, n: usize, seed: u32) -> Result<String, JsValue> {
    js(small_ball_table(t, k, gamma, eps_list, n, seed.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tcrit_rows() {
        let v: serde_json::Value = serde_json::from_str(&tcrit_table(5e-5, 2.2e-3, 1.1, 1.0, 12.0, "15, 12000").unwrap()).unwrap();
        let tc = v[1]["report"]["t_crit_months"].as_f64().unwrap();
        assert!((tc - 375.7).abs() < 0.1);
        assert_eq!(v[0]["report"]["regime"], "signal_limited");
        assert!(tcrit_table(5e-5, 2.2e-3, 1.1, 1.0, 12.0, "x").is_err());
    }

    #[test]
    fn convergence_json() {
        let v: serde_json::Value = serde_json::from_str(&convergence_table(5, 12, 2.0, 5, "100,1000,4000", false, 1).unwrap()).unwrap();
        assert_eq!(v["standard"].as_array().unwrap().len(), 3);
        assert!(v["standard_slope"].as_f64().unwrap() < 0.0);
    }

    #[test]
    fn small_ball_json() {
        let v: serde_json::Value =
            serde_json::from_str(&small_ball_table(3, 5, 2.0, "0.05,0.1,0.2,0.4", 100_000, 2).unwrap()).unwrap();
        assert_eq!(v["curve"].as_array().unwrap().len(), 4);
        assert_eq!(v["reference_slope"], 1.5);
    }
}
