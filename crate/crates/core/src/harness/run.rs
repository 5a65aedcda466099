use serde::Serialize;

use crate::datagen::{simulate_panel, PredictorPanel};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, GridPoint, MarginalScheme, SweepLayout};
use crate::oracle::LimitKernelOracle;
use crate::par;
use crate::rff::{gaussian_kernel, kernel_from_features, FeatureBank, ScaleMode, StandardizedBank, WindowId};
use crate::stats::{degradation_factor, ks_two_sample, standard_error, ErrorSample, KernelLabel};
use crate::stream::{derive_stream, StreamKey};

pub const CONVERGENCE_ID: &str = "convergence";
pub const SWEEP_ID: &str = "sweep";

/// Absolute kernel errors from one trial at one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub cell: GridPoint,
    pub trial: usize,
    /// `|k_RFF - k_G|`, one per query pair.
    pub standard: Vec<f64>,
    /// `|k_std - k_G|`, one per query pair.
    pub standardized: Vec<f64>,
    /// `|k_std - k*_std|`, one per query pair, when the oracle is enabled.
    pub oracle: Option<Vec<f64>>,
    /// The bank had a feature with sigma-hat below the floor; the trial
    /// carries no errors and is left out of aggregates.
    pub degenerate_scale: bool,
}

fn panel_for(cfg: &ExperimentConfig, t: usize, k: usize, key: &StreamKey) -> Result<PredictorPanel> {
    let spec = cfg.process.with_dim(k)?;
    simulate_panel(&spec, t, cfg.queries, &mut key.child("panel", 0).rng())
}

struct Oracle {
    values: Vec<f64>,
}

fn oracle_for(cfg: &ExperimentConfig, panel: &PredictorPanel, gamma: f64, trial: usize, key: &StreamKey) -> Result<Option<Oracle>> {
    let Some(n) = cfg.oracle_samples else { return Ok(None) };
    let pairs = cfg.pairing.pairs(panel.queries.len());
    let oracle = LimitKernelOracle::new(&panel.train, gamma, cfg.mode, WindowId(trial as u64))?;
    let est = oracle.estimate_pairs(&panel.queries, &pairs, n, &key.child("oracle", 0))?;
    Ok(Some(Oracle {
        values: est.iter().map(|e| e.mean).collect(),
    }))
}

/// Errors for one feature count on a fixed panel. The two kernels share
/// the bank and the query pairs.
fn evaluate(
    cfg: &ExperimentConfig,
    cell: GridPoint,
    trial: usize,
    panel: &PredictorPanel,
    oracle: Option<&Oracle>,
    key: &StreamKey,
) -> Result<TrialResult> {
    let bank = FeatureBank::sample(cell.k, cell.p, cell.gamma, &mut key.child("bank", cell.p as u64).rng())?;
    let z_train = bank.map_points(&panel.train)?;
    let z_query = bank.map_points(&panel.queries)?;
    let empty = |degenerate_scale| TrialResult {
        cell,
        trial,
        standard: Vec::new(),
        standardized: Vec::new(),
        oracle: None,
        degenerate_scale,
    };
    let std_bank = match StandardizedBank::fit_from_features(bank, &z_train, cfg.mode, WindowId(trial as u64)) {
        Ok(b) => b,
        Err(Error::DegenerateScale { .. }) => return Ok(empty(true)),
        Err(e) => return Err(e),
    };
    let pairs = cfg.pairing.pairs(panel.queries.len());
    let mut out = empty(false);
    let mut oracle_err = Vec::with_capacity(pairs.len());
    for (j, &(a, b)) in pairs.iter().enumerate() {
        let kg = gaussian_kernel(&panel.queries[a], &panel.queries[b], cell.gamma)?;
        let k_rff = kernel_from_features(&z_query[a], &z_query[b]);
        let k_std = std_bank.kernel_from_features(&z_query[a], &z_query[b]);
        out.standard.push((k_rff - kg).abs());
        out.standardized.push((k_std - kg).abs());
        if let Some(o) = oracle {
            oracle_err.push((k_std - o.values[j]).abs());
        }
    }
    if oracle.is_some() {
        out.oracle = Some(oracle_err);
    }
    Ok(out)
}

fn cartesian(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let mut cells = Vec::new();
    for &p in &cfg.p_grid {
        for &t in &cfg.t_grid {
            for &k in &cfg.k_grid {
                for &gamma in &cfg.gamma {
                    cells.push(GridPoint { p, t, k, gamma });
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MaeStandardVsGauss,
    MaeStdVsGauss,
    MaeStdVsOracle,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::MaeStandardVsGauss => "mae_standard_vs_gauss",
            Metric::MaeStdVsGauss => "mae_std_vs_gauss",
            Metric::MaeStdVsOracle => "mae_std_vs_oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub cell: GridPoint,
    pub mode: ScaleMode,
    pub metric: Metric,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub trials: Vec<TrialResult>,
    pub dropped_trials: usize,
}

impl ConvergenceTable {
    /// Rows for one metric in P-grid order.
    pub fn series(&self, metric: Metric) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.metric == metric).collect()
    }
}

fn summarize(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (mean, standard_error(values).unwrap_or(f64::NAN))
}

/// Error-versus-P curves. Each `(T, K, gamma)` cell and trial simulates one
/// panel, shared by every P in the grid, so the oracle runs once per trial.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let mut planes = Vec::new();
    for &t in &cfg.t_grid {
        for &k in &cfg.k_grid {
            for &gamma in &cfg.gamma {
                planes.push((t, k, gamma));
            }
        }
    }
    let jobs = planes.len() * cfg.trials;
    let results = par::map_indexed(jobs, |job| -> Result<Vec<TrialResult>> {
        let (c, trial) = (job / cfg.trials, job % cfg.trials);
        let (t, k, gamma) = planes[c];
        let key = derive_stream(cfg.root_seed, CONVERGENCE_ID, c as u64, trial as u64);
        let panel = panel_for(cfg, t, k, &key)?;
        let oracle = oracle_for(cfg, &panel, gamma, trial, &key)?;
        cfg.p_grid
            .iter()
            .map(|&p| evaluate(cfg, GridPoint { p, t, k, gamma }, trial, &panel, oracle.as_ref(), &key))
            .collect()
    });
    let mut trials = Vec::with_capacity(jobs * cfg.p_grid.len());
    for r in results {
        trials.extend(r?);
    }

    let mut rows = Vec::new();
    for &(t, k, gamma) in &planes {
        for &p in &cfg.p_grid {
            let cell = GridPoint { p, t, k, gamma };
            let here: Vec<&TrialResult> = trials
                .iter()
                .filter(|r| r.cell == cell && !r.degenerate_scale)
                .collect();
            let mut metrics = vec![
                (Metric::MaeStandardVsGauss, here.iter().flat_map(|r| r.standard.iter().copied()).collect::<Vec<_>>()),
                (Metric::MaeStdVsGauss, here.iter().flat_map(|r| r.standardized.iter().copied()).collect()),
            ];
            if cfg.oracle_samples.is_some() {
                metrics.push((
                    Metric::MaeStdVsOracle,
                    here.iter().flat_map(|r| r.oracle.iter().flatten().copied()).collect(),
                ));
            }
            for (metric, values) in metrics {
                let (mean, stderr) = summarize(&values);
                rows.push(ConvergenceRow {
                    cell,
                    mode: cfg.mode,
                    metric,
                    mean,
                    stderr,
                    n: values.len(),
                });
            }
        }
    }
    let dropped_trials = trials.iter().filter(|r| r.degenerate_scale).count();
    Ok(ConvergenceTable {
        rows,
        trials,
        dropped_trials,
    })
}

/// Paired comparison of the two kernels on one pooled set of errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub mae_standard: f64,
    pub mae_standardized: f64,
    pub degradation: f64,
    pub ks_stat: f64,
    pub ks_pvalue: f64,
    pub trials: usize,
}

fn compare<'a>(results: impl Iterator<Item = &'a TrialResult>, key: &str) -> Result<Comparison> {
    let (mut a, mut b, mut n) = (Vec::new(), Vec::new(), 0);
    for r in results.filter(|r| !r.degenerate_scale) {
        a.extend_from_slice(&r.standard);
        b.extend_from_slice(&r.standardized);
        n += 1;
    }
    let standard = ErrorSample::new(a, KernelLabel::Standard, key)?;
    let standardized = ErrorSample::new(b, KernelLabel::Standardized, key)?;
    if standard.is_empty() {
        return Err(Error::Internal(format!("cell {key}: every trial was degenerate")));
    }
    let ks = ks_two_sample(standard.values(), standardized.values())?;
    Ok(Comparison {
        mae_standard: crate::stats::mean_abs_error(&standard)?,
        mae_standardized: crate::stats::mean_abs_error(&standardized)?,
        degradation: degradation_factor(&standardized, &standard)?,
        ks_stat: ks.statistic,
        ks_pvalue: ks.p_value,
        trials: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: GridPoint,
    pub mode: ScaleMode,
    pub comparison: Comparison,
}

/// One-at-a-time table entry: `parameter` took `value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalRow {
    pub parameter: &'static str,
    pub value: f64,
    pub scheme: MarginalScheme,
    pub mode: ScaleMode,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub cells: Vec<SweepRow>,
    pub marginals: Vec<MarginalRow>,
    /// P x T plane through the base point.
    pub heatmap_pt: Vec<SweepRow>,
    /// P x gamma plane through the base point.
    pub heatmap_pgamma: Vec<SweepRow>,
    pub dropped_trials: usize,
}

impl SweepTable {
    pub fn cell(&self, p: usize, t: usize, k: usize, gamma: f64) -> Option<&SweepRow> {
        let want = GridPoint { p, t, k, gamma };
        self.cells.iter().find(|r| r.cell == want)
    }

    pub fn marginal(&self, parameter: &str, value: f64) -> Option<&MarginalRow> {
        self.marginals
            .iter()
            .find(|m| m.parameter == parameter && m.value == value)
    }
}

fn sweep_cells(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let full = cartesian(cfg);
    if cfg.layout == SweepLayout::Full || cfg.marginals == MarginalScheme::GridAverage {
        return full;
    }
    let b = cfg.base_point;
    full.into_iter()
        .filter(|c| {
            let off = [c.p != b.p, c.t != b.t, c.k != b.k, c.gamma != b.gamma];
            let n_off = off.iter().filter(|x| **x).count();
            // marginals, plus the P x T and P x gamma planes
            n_off <= 1 || (n_off == 2 && off[0] && (off[1] || off[3]))
        })
        .collect()
}

fn grid_index(cfg: &ExperimentConfig, c: &GridPoint) -> u64 {
    let pos = |v: &[usize], x: usize| v.iter().position(|y| *y == x).unwrap_or(0);
    let gi = cfg.gamma.iter().position(|g| *g == c.gamma).unwrap_or(0);
    let (nt, nk, ng) = (cfg.t_grid.len(), cfg.k_grid.len(), cfg.gamma.len());
    (((pos(&cfg.p_grid, c.p) * nt + pos(&cfg.t_grid, c.t)) * nk + pos(&cfg.k_grid, c.k)) * ng + gi) as u64
}

fn cell_key(c: &GridPoint) -> String {
    format!("P={},T={},K={},gamma={}", c.p, c.t, c.k, c.gamma)
}

/// Degradation and KS comparison per grid cell, with marginal tables and
/// the two heatmap planes.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let cells = sweep_cells(cfg);
    let jobs = cells.len() * cfg.trials;
    let results = par::map_indexed(jobs, |job| -> Result<TrialResult> {
        let (c, trial) = (job / cfg.trials, job % cfg.trials);
        let cell = cells[c];
        let key = derive_stream(cfg.root_seed, SWEEP_ID, grid_index(cfg, &cell), trial as u64);
        let panel = panel_for(cfg, cell.t, cell.k, &key)?;
        evaluate(cfg, cell, trial, &panel, None, &key)
    });
    let results: Vec<TrialResult> = results.into_iter().collect::<Result<_>>()?;
    let by_cell: Vec<&[TrialResult]> = results.chunks(cfg.trials).collect();

    let mut rows = Vec::with_capacity(cells.len());
    for (cell, rs) in cells.iter().zip(&by_cell) {
        rows.push(SweepRow {
            cell: *cell,
            mode: cfg.mode,
            comparison: compare(rs.iter(), &cell_key(cell))?,
        });
    }

    let b = cfg.base_point;
    let mut marginals = Vec::new();
    let params: [(&'static str, Vec<f64>, fn(&GridPoint) -> f64); 4] = [
        ("P", cfg.p_grid.iter().map(|v| *v as f64).collect(), |c| c.p as f64),
        ("T", cfg.t_grid.iter().map(|v| *v as f64).collect(), |c| c.t as f64),
        ("K", cfg.k_grid.iter().map(|v| *v as f64).collect(), |c| c.k as f64),
        ("gamma", cfg.gamma.clone(), |c| c.gamma),
    ];
    let base = [b.p as f64, b.t as f64, b.k as f64, b.gamma];
    for (i, (name, values, get)) in params.iter().enumerate() {
        for &v in values {
            let members: Vec<usize> = cells
                .iter()
                .enumerate()
                .filter(|(_, c)| {
                    get(c) == v
                        && (cfg.marginals == MarginalScheme::GridAverage
                            || params
                                .iter()
                                .enumerate()
                                .all(|(j, (_, _, g))| j == i || g(c) == base[j]))
                })
                .map(|(ci, _)| ci)
                .collect();
            if members.is_empty() {
                continue;
            }
            let comparison = compare(members.iter().flat_map(|&ci| by_cell[ci].iter()), &format!("{name}={v}"))?;
            marginals.push(MarginalRow {
                parameter: name,
                value: v,
                scheme: cfg.marginals,
                mode: cfg.mode,
                comparison,
            });
        }
    }

    let plane = |vary: fn(&GridPoint, &GridPoint) -> bool| -> Vec<SweepRow> {
        rows.iter().filter(|r| vary(&r.cell, &b)).cloned().collect()
    };
    let heatmap_pt = plane(|c, b| c.k == b.k && c.gamma == b.gamma);
    let heatmap_pgamma = plane(|c, b| c.k == b.k && c.t == b.t);
    let dropped_trials = results.iter().filter(|r| r.degenerate_scale).count();
    Ok(SweepTable {
        cells: rows,
        marginals,
        heatmap_pt,
        heatmap_pgamma,
        dropped_trials,
    })
}
