//! `rfflab` command-line front end.
//!
//! Exit status: 0 on success, 1 for a bad flag, config key or parameter,
//! 2 for runtime failures (I/O, degenerate oracle).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rfflab::bounds::{self, bound_report, BoundParams};
use rfflab::datagen::{simulate_panel, ProcessParams};
use rfflab::harness::output::{build_id, unix_now};
use rfflab::harness::{
    preset, run_calibration, run_convergence, run_sweep, write_calibration_csv, write_convergence_csv, write_manifest,
    write_sweep_csvs, CalibrationScenario, ExperimentConfig, RunManifest,
};
use rfflab::oracle::{small_ball_curve, LimitKernelOracle};
use rfflab::rff::gaussian_kernel;
use rfflab::stats::ks_two_sample;
use rfflab::{derive_stream, Error, ScaleMode, WindowId};

#[derive(Parser)]
#[command(name = "rfflab", version, about = "Standardized random Fourier feature experiments and sample-complexity calculators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel error versus feature count P; writes convergence.csv.
    Convergence(RunArgs),
    /// Degradation and KS comparison over the (P, T, K, gamma) grid; writes
    /// sweep.csv, marginals.csv, heatmap_PT.csv, heatmap_Pgamma.csv.
    Sweep(RunArgs),
    /// Critical sample size and bound table for preset or custom scenarios;
    /// writes calibration.csv.
    Calibrate(CalibrateArgs),
    /// Evaluate the lower bounds and regime for one parameter set (stdout only).
    Bounds(BoundsArgs),
    /// Monte-Carlo limit kernel on a simulated training window (stdout only).
    Oracle(OracleArgs),
    /// Two-sample Kolmogorov-Smirnov test on two files of numbers (stdout only).
    Ks(KsArgs),
}

/// Parses a count, accepting scientific notation such as `1e6`.
fn count(s: &str) -> Result<usize, String> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 9.0e15 {
        Ok(f as usize)
    } else {
        Err(format!("`{s}` is not a nonnegative integer"))
    }
}

fn seed(s: &str) -> Result<u64, String> {
    count(s).map(|v| v as u64)
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; keys left out keep their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set T=6,60 --set process.rho=0.2`.
    /// Applied after the config file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Root seed (integer); beats config and --set.
    #[arg(long, value_parser = seed)]
    seed: Option<u64>,
    /// Trials per grid cell (count).
    #[arg(long, value_parser = count)]
    trials: Option<usize>,
    /// Per-feature scale statistic.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Draws per limit-kernel estimate (count, >= 1000); enables the oracle metric.
    #[arg(long, value_parser = count)]
    oracle_samples: Option<usize>,
    /// Output directory (default: the config's output_path).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads (count; 0 = one per core).
    #[arg(long, default_value = "0", value_parser = count)]
    workers: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rms,
    SampleStd,
}

impl From<ModeArg> for ScaleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rms => ScaleMode::Rms,
            ModeArg::SampleStd => ScaleMode::SampleStd,
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    /// Preset scenario family.
    #[arg(long, value_enum, default_value = "all", conflicts_with = "scenarios")]
    preset: PresetArg,
    /// JSON array of scenarios: {"name", "B2", "sigma2", "T", "P", "c_z", "C_z", "c_universal"?}.
    #[arg(long, value_name = "PATH")]
    scenarios: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "results")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Baseline,
    Signal,
    Noise,
    All,
}

#[derive(Args)]
struct BoundsArgs {
    /// Signal power B² (return-variance units).
    #[arg(long = "B2", default_value = "5e-5")]
    b2: f64,
    /// Noise variance σ² (return-variance units).
    #[arg(long, default_value = "2.2e-3")]
    sigma2: f64,
    /// Upper covariance eigenvalue bound C_z (dimensionless).
    #[arg(long = "Cz", default_value = "1.1")]
    cap_c_z: f64,
    /// Lower covariance eigenvalue bound c_z (dimensionless).
    #[arg(long = "cz", default_value = "1")]
    c_z: f64,
    /// Feature count P; a comma list gives one scenario per value.
    #[arg(long = "P", default_value = "12000", value_delimiter = ',')]
    p: Vec<f64>,
    /// Operational sample size T (months).
    #[arg(long = "T", default_value = "12")]
    t: f64,
    /// Leading constant c of the exponential bound (dimensionless).
    #[arg(long = "c", default_value = "1", conflicts_with = "proof_sketch_c")]
    c_universal: f64,
    /// Use c = c_z/4 · exp(-4 ln 2 / P) instead of --c.
    #[arg(long)]
    proof_sketch_c: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairArg {
    /// First query state with itself.
    #[value(name = "self")]
    Self_,
    /// First two query states.
    Consecutive,
    /// First training state with itself.
    TrainDiagonal,
}

#[derive(Args)]
struct OracleArgs {
    /// Input dimension K (count).
    #[arg(long = "K", default_value = "15", value_parser = count)]
    k: usize,
    /// Training window length T (months).
    #[arg(long = "T", default_value = "12", value_parser = count)]
    t: usize,
    /// Kernel bandwidth γ (inverse input units).
    #[arg(long, default_value = "2.0")]
    gamma: f64,
    #[arg(long, value_enum, default_value = "rms")]
    mode: ModeArg,
    /// Monte-Carlo draws (count, >= 1000).
    #[arg(long, default_value = "1e6", value_parser = count)]
    samples: usize,
    #[arg(long, default_value = "1234", value_parser = seed)]
    seed: u64,
    /// Which pair of states to evaluate.
    #[arg(long, value_enum, default_value = "self")]
    pair: PairArg,
    /// Also run the training-set scaling probe with this factor (>= 1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Also report P(σ̂² <= ε) for these ε in (0, 1], comma separated.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
}

#[derive(Args)]
struct KsArgs {
    /// File of numbers separated by whitespace, commas or newlines.
    a: PathBuf,
    /// Second sample, same format.
    b: PathBuf,
}

fn param(name: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: name.to_string(),
        reason: reason.into(),
    }
}

fn load_config(args: &RunArgs) -> rfflab::Result<ExperimentConfig> {
    let base = match &args.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = base.with_overrides(&args.overrides)?;
    if let Some(s) = args.seed {
        cfg.root_seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(m) = args.mode {
        cfg.mode = m.into();
    }
    if let Some(n) = args.oracle_samples {
        cfg.oracle_samples = Some(n);
    }
    if let Some(d) = &args.out_dir {
        cfg.output_path = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn manifest_path(dir: &Path, experiment: &str) -> PathBuf {
    dir.join(format!("{experiment}.manifest.json"))
}

fn convergence(args: &RunArgs) -> rfflab::Result<()> {
    let cfg = load_config(args)?;
    let start = Instant::now();
    let started = unix_now();
    eprintln!(
        "convergence: {} P values x {} trials, mode {}",
        cfg.p_grid.len(),
        cfg.trials,
        cfg.mode
    );
    let table = rfflab::with_workers(args.workers, || run_convergence(&cfg))??;
    for r in &table.rows {
        eprintln!(
            "  P={} T={} K={} gamma={} {}: {:.6} ± {:.6} (n={})",
            r.cell.p,
            r.cell.t,
            r.cell.k,
            r.cell.gamma,
            r.metric.as_str(),
            r.mean,
            r.stderr,
            r.n
        );
    }
    let csv = cfg.output_path.join("convergence.csv");
    write_convergence_csv(&csv, "convergence", &table)?;
    write_manifest(
        &manifest_path(&cfg.output_path, "convergence"),
        &RunManifest {
            experiment: "convergence".into(),
            build: build_id(),
            root_seed: Some(cfg.root_seed),
            workers: args.workers,
            outputs: vec![csv.clone()],
            dropped_trials: table.dropped_trials,
            notes: vec![format!("query pairing: {:?}", cfg.pairing)],
            config: &cfg,
            started_unix_s: started,
            wall_clock_s: start.elapsed().as_secs_f64(),
        },
    )?;
    eprintln!("wrote {}", csv.display());
    Ok(())
}

fn sweep(args: &RunArgs) -> rfflab::Result<()> {
    let cfg = load_config(args)?;
    let start = Instant::now();
    let started = unix_now();
    eprintln!("sweep: {} trials per cell, mode {}", cfg.trials, cfg.mode);
    let table = rfflab::with_workers(args.workers, || run_sweep(&cfg))??;
    for r in &table.cells {
        let c = &r.comparison;
        eprintln!(
            "  P={} T={} K={} gamma={}: degradation {:.3}, KS {:.3} (p={:.2e}), trials {}",
            r.cell.p, r.cell.t, r.cell.k, r.cell.gamma, c.degradation, c.ks_stat, c.ks_pvalue, c.trials
        );
    }
    let outputs = write_sweep_csvs(&cfg.output_path, &table)?;
    write_manifest(
        &manifest_path(&cfg.output_path, "sweep"),
        &RunManifest {
            experiment: "sweep".into(),
            build: build_id(),
            root_seed: Some(cfg.root_seed),
            workers: args.workers,
            outputs: outputs.clone(),
            dropped_trials: table.dropped_trials,
            notes: vec![
                format!("marginal scheme: {}", cfg.marginals.as_str()),
                format!(
                    "base point: P={} T={} K={} gamma={}",
                    cfg.base_point.p, cfg.base_point.t, cfg.base_point.k, cfg.base_point.gamma
                ),
                format!("query pairing: {:?}", cfg.pairing),
            ],
            config: &cfg,
            started_unix_s: started,
            wall_clock_s: start.elapsed().as_secs_f64(),
        },
    )?;
    eprintln!("wrote {} files under {}", outputs.len(), cfg.output_path.display());
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> rfflab::Result<()> {
    let start = Instant::now();
    let started = unix_now();
    let scenarios: Vec<CalibrationScenario> = match &args.scenarios {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| param("--scenarios", format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| param("--scenarios", e.to_string()))?
        }
        None => preset(match args.preset {
            PresetArg::Baseline => "baseline",
            PresetArg::Signal => "signal",
            PresetArg::Noise => "noise",
            PresetArg::All => "all",
        })?,
    };
    let rows = run_calibration(&scenarios)?;
    for r in &rows {
        eprintln!(
            "  {}: t_crit {:.1} months, regime {} at T={}",
            r.scenario.name,
            r.report.t_crit_months,
            r.report.regime.as_str(),
            r.scenario.params.t
        );
    }
    let csv = args.out_dir.join("calibration.csv");
    write_calibration_csv(&csv, &rows)?;
    write_manifest(
        &manifest_path(&args.out_dir, "calibration"),
        &RunManifest {
            experiment: "calibration".into(),
            build: build_id(),
            root_seed: None,
            workers: 1,
            outputs: vec![csv.clone()],
            dropped_trials: 0,
            notes: vec!["c_universal is a free constant; the default 1 is not a derived value".into()],
            config: &scenarios,
            started_unix_s: started,
            wall_clock_s: start.elapsed().as_secs_f64(),
        },
    )?;
    eprintln!("wrote {}", csv.display());
    Ok(())
}

fn bounds_cmd(args: &BoundsArgs) -> rfflab::Result<()> {
    let mut out = Vec::new();
    for &p in &args.p {
        let params = BoundParams {
            b2: args.b2,
            sigma2: args.sigma2,
            t: args.t,
            p,
            c_z: args.c_z,
            cap_c_z: args.cap_c_z,
            c_universal: if args.proof_sketch_c {
                bounds::proof_sketch_constant(args.c_z, p)
            } else {
                args.c_universal
            },
        };
        let report = bound_report(&params)?;
        match args.format {
            Format::Json => out.push(serde_json::json!({ "params": params, "report": report })),
            Format::Text => {
                println!("P = {p}");
                println!("  t_crit      = {:.2} months", report.t_crit_months);
                println!("  regime      = {} (T = {} months)", report.regime.as_str(), args.t);
                println!("  exp bound   = {:.6e}", report.exp_bound);
                println!(
                    "  poly bound  = {:.6e} ({} term binds{})",
                    report.poly_bound,
                    report.poly_binding_term.as_str(),
                    if report.poly_out_of_range { "; P < 4, outside the stated range" } else { "" }
                );
            }
        }
    }
    if let Format::Json = args.format {
        for o in out {
            println!("{o}");
        }
    }
    Ok(())
}

fn oracle_cmd(args: &OracleArgs) -> rfflab::Result<()> {
    let key = derive_stream(args.seed, "oracle-cli", 0, 0);
    let spec = ProcessParams::default().with_dim(args.k)?;
    let panel = simulate_panel(&spec, args.t, 2, &mut key.child("panel", 0).rng())?;
    let (x, y) = match args.pair {
        PairArg::Self_ => (&panel.queries[0], &panel.queries[0]),
        PairArg::Consecutive => (&panel.queries[0], &panel.queries[1]),
        PairArg::TrainDiagonal => (&panel.train[0], &panel.train[0]),
    };
    let mode: ScaleMode = args.mode.into();
    let oracle = LimitKernelOracle::new(&panel.train, args.gamma, mode, WindowId(0))?;
    let est = oracle.estimate(x, y, args.samples, &key.child("oracle", 0))?;
    let mut out = serde_json::json!({
        "K": args.k,
        "T": args.t,
        "gamma": args.gamma,
        "seed": args.seed,
        "gaussian_kernel": gaussian_kernel(x, y, args.gamma)?,
        "limit_kernel": est,
    });
    if let Some(alpha) = args.alpha {
        out["scaling_probe"] = serde_json::to_value(oracle.scaling_probe(x, y, alpha, args.samples, &key.child("probe", 0))?)?;
    }
    if let Some(eps) = &args.epsilons {
        out["small_ball"] =
            serde_json::to_value(small_ball_curve(&panel.train, args.gamma, eps, args.samples, &key.child("small-ball", 0))?)?;
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn read_numbers(path: &Path) -> rfflab::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| param(&path.display().to_string(), format!("`{s}` is not a number")))
        })
        .collect()
}

fn ks_cmd(args: &KsArgs) -> rfflab::Result<()> {
    let r = ks_two_sample(&read_numbers(&args.a)?, &read_numbers(&args.b)?)?;
    println!("{}", serde_json::to_string(&r)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Convergence(a) => convergence(a),
        Command::Sweep(a) => sweep(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Bounds(a) => bounds_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::Ks(a) => ks_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
