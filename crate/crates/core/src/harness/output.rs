use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::calibration::CalibrationRow;
use crate::harness::run::{ConvergenceTable, SweepRow, SweepTable};

pub const CONVERGENCE_HEADER: [&str; 10] = ["experiment", "P", "T", "K", "gamma", "mode", "metric", "mean", "stderr", "n"];
pub const SWEEP_HEADER: [&str; 11] = [
    "P", "T", "K", "gamma", "mode", "mae_standard", "mae_standardized", "degradation", "ks_stat", "ks_pvalue", "trials",
];
pub const MARGINAL_HEADER: [&str; 10] = [
    "parameter", "value", "scheme", "mode", "mae_standard", "mae_standardized", "degradation", "ks_stat", "ks_pvalue", "trials",
];
pub const CALIBRATION_HEADER: [&str; 12] = [
    "scenario", "P", "B2", "sigma2", "Cz", "cz", "T_operational", "t_crit_months", "exp_bound", "poly_bound", "binding_term",
    "regime",
];

/// Shortest representation that round-trips.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn write_convergence_csv(path: &Path, experiment: &str, table: &ConvergenceTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CONVERGENCE_HEADER)?;
    for r in &table.rows {
        w.write_record([
            experiment.to_string(),
            r.cell.p.to_string(),
            r.cell.t.to_string(),
            r.cell.k.to_string(),
            num(r.cell.gamma),
            r.mode.to_string(),
            r.metric.as_str().to_string(),
            num(r.mean),
            num(r.stderr),
            r.n.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_sweep_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let c = &r.comparison;
        w.write_record([
            r.cell.p.to_string(),
            r.cell.t.to_string(),
            r.cell.k.to_string(),
            num(r.cell.gamma),
            r.mode.to_string(),
            num(c.mae_standard),
            num(c.mae_standardized),
            num(c.degradation),
            num(c.ks_stat),
            num(c.ks_pvalue),
            c.trials.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `sweep.csv`, `marginals.csv`, `heatmap_PT.csv` and
/// `heatmap_Pgamma.csv` under `dir`; returns the paths.
pub fn write_sweep_csvs(dir: &Path, table: &SweepTable) -> Result<Vec<PathBuf>> {
    let paths: Vec<PathBuf> = ["sweep.csv", "marginals.csv", "heatmap_PT.csv", "heatmap_Pgamma.csv"]
        .iter()
        .map(|n| dir.join(n))
        .collect();
    write_sweep_rows(&paths[0], &table.cells)?;
    let mut w = writer(&paths[1])?;
    w.write_record(MARGINAL_HEADER)?;
    for m in &table.marginals {
        let c = &m.comparison;
        w.write_record([
            m.parameter.to_string(),
            num(m.value),
            m.scheme.as_str().to_string(),
            m.mode.to_string(),
            num(c.mae_standard),
            num(c.mae_standardized),
            num(c.degradation),
            num(c.ks_stat),
            num(c.ks_pvalue),
            c.trials.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&paths[1], e))?;
    write_sweep_rows(&paths[2], &table.heatmap_pt)?;
    write_sweep_rows(&paths[3], &table.heatmap_pgamma)?;
    Ok(paths)
}

pub fn write_calibration_csv(path: &Path, rows: &[CalibrationRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CALIBRATION_HEADER)?;
    for r in rows {
        let p = &r.scenario.params;
        w.write_record([
            r.scenario.name.clone(),
            num(p.p),
            num(p.b2),
            num(p.sigma2),
            num(p.cap_c_z),
            num(p.c_z),
            num(p.t),
            num(r.report.t_crit_months),
            num(r.report.exp_bound),
            num(r.report.poly_bound),
            r.report.poly_binding_term.as_str().to_string(),
            r.report.regime.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Provenance written next to every run's CSVs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub experiment: String,
    pub build: String,
    pub config: C,
    pub root_seed: Option<u64>,
    pub workers: usize,
    pub outputs: Vec<PathBuf>,
    pub dropped_trials: usize,
    pub notes: Vec<String>,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
}

pub fn build_id() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn write_manifest<C: Serialize>(path: &Path, manifest: &RunManifest<C>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
