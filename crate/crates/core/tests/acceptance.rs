//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test -p rfflab --test acceptance -- --nocapture`.

use std::time::Instant;

use rand::seq::index::sample;
use rfflab::bounds::{
    diagnose_regime, effective_vc, poly_lower_bound, shattering_probe, t_crit, BoundParams, BoundTerm, Regime,
    DEFAULT_RANK_TOL,
};
use rfflab::datagen::{simulate_panel, ProcessParams};
use rfflab::harness::output::{write_convergence_csv, write_sweep_csvs};
use rfflab::harness::{run_convergence, run_sweep, ExperimentConfig, Metric, SweepLayout};
use rfflab::oracle::{scaling_dependence_probe, small_ball_curve};
use rfflab::stats::fit_loglog_slope;
use rfflab::{derive_stream, with_workers, FeatureBank, ScaleMode};

const SEED: u64 = 1234;

fn check(name: &str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

fn config(p: &[usize], t: &[usize], k: &[usize], gamma: &[f64], trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        p_grid: p.to_vec(),
        t_grid: t.to_vec(),
        k_grid: k.to_vec(),
        gamma: gamma.to_vec(),
        trials,
        root_seed: SEED,
        layout: SweepLayout::Full,
        ..ExperimentConfig::default()
    }
}

fn series(table: &rfflab::harness::ConvergenceTable, m: Metric) -> (Vec<f64>, Vec<f64>) {
    let rows = table.series(m);
    (
        rows.iter().map(|r| r.cell.p as f64).collect(),
        rows.iter().map(|r| r.mean).collect(),
    )
}

#[test]
fn standard_rff_convergence_and_standardized_plateau() {
    let start = Instant::now();
    let table = run_convergence(&config(&[100, 1000, 10_000], &[12], &[15], &[2.0], 200)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (p, standard) = series(&table, Metric::MaeStandardVsGauss);
    let (_, standardized) = series(&table, Metric::MaeStdVsGauss);
    let (slope, _) = fit_loglog_slope(&p, &standard).unwrap();
    check(
        "convergence slope",
        (-0.6..=-0.4).contains(&slope) && secs <= 600.0,
        format!("slope {slope:.4} (want [-0.6, -0.4]); runtime {secs:.1}s (want <= 600s); MAE {standard:.5?}"),
    );
    let plateau = standardized[2];
    let degradation = plateau / standard[2];
    check(
        "standardized plateau and degradation",
        (0.01..=0.06).contains(&plateau) && degradation >= 3.0,
        format!("standardized MAE at P=10000 {plateau:.4} (want [0.01, 0.06]); degradation {degradation:.2} (want >= 3)"),
    );
}

#[test]
fn small_window_blowup() {
    let table = run_sweep(&config(&[5000], &[6, 60], &[15], &[2.0], 200)).unwrap();
    let d6 = table.cell(5000, 6, 15, 2.0).unwrap().comparison.degradation;
    let d60 = table.cell(5000, 60, 15, 2.0).unwrap().comparison.degradation;
    check(
        "small-T blowup",
        d6 >= 10.0 && d6 >= 3.0 * d60,
        format!("degradation T=6 {d6:.2} (want >= 10), T=60 {d60:.2} (want T=6 >= 3x T=60)"),
    );
}

#[test]
fn bandwidth_direction() {
    let mut cfg = config(&[1000], &[12], &[15], &[0.5, 3.0], 1000);
    cfg.layout = SweepLayout::Marginals;
    let table = run_sweep(&cfg).unwrap();
    let lo = table.marginal("gamma", 0.5).unwrap().comparison.degradation;
    let hi = table.marginal("gamma", 3.0).unwrap().comparison.degradation;
    check(
        "bandwidth direction",
        lo > hi,
        format!("degradation gamma=0.5 {lo:.3}, gamma=3.0 {hi:.3} (want first > second)"),
    );
}

#[test]
fn input_dimension_stability() {
    let mut cfg = config(&[1000], &[12], &[5, 30], &[2.0], 1000);
    cfg.layout = SweepLayout::Marginals;
    let table = run_sweep(&cfg).unwrap();
    let d5 = table.marginal("K", 5.0).unwrap().comparison.degradation;
    let d30 = table.marginal("K", 30.0).unwrap().comparison.degradation;
    let ratio = d5 / d30;
    check(
        "K stability",
        (0.5..=2.0).contains(&ratio),
        format!("degradation K=5 {d5:.3}, K=30 {d30:.3}, ratio {ratio:.3} (want [0.5, 2])"),
    );
}

#[test]
fn ks_separation() {
    let table = run_sweep(&config(&[5000], &[12], &[15], &[2.0], 1000)).unwrap();
    let c = table.cell(5000, 12, 15, 2.0).unwrap().comparison;
    check(
        "KS separation",
        c.ks_stat >= 0.5 && c.ks_pvalue < 1e-6,
        format!("KS {:.4} (want >= 0.5), p-value {:e} (want < 1e-6)", c.ks_stat, c.ks_pvalue),
    );
}

#[test]
fn convergence_to_limit_kernel() {
    let mut cfg = config(&[100, 1000, 12_000], &[12], &[15], &[2.0], 20);
    cfg.mode = ScaleMode::SampleStd;
    cfg.oracle_samples = Some(1_000_000);
    let table = run_convergence(&cfg).unwrap();
    let (p, to_oracle) = series(&table, Metric::MaeStdVsOracle);
    let (_, to_gauss) = series(&table, Metric::MaeStdVsGauss);
    let monotone = to_oracle.windows(2).all(|w| w[1] < w[0]);
    let (slope, _) = fit_loglog_slope(&p, &to_oracle).unwrap();
    check(
        "oracle convergence",
        monotone && (-0.65..=-0.35).contains(&slope) && to_gauss[2] > to_oracle[2],
        format!(
            "|k_std - k*| {to_oracle:.5?} (want decreasing), slope {slope:.4} (want [-0.65, -0.35]); \
             at P=12000 |k_std - k_G| {:.5} vs |k_std - k*| {:.5} (want first larger)",
            to_gauss[2], to_oracle[2]
        ),
    );
}

#[test]
fn training_set_dependence() {
    let spec = ProcessParams::default().with_dim(15).unwrap();
    let key = derive_stream(SEED, "scaling-probe", 0, 0);
    let panel = simulate_panel(&spec, 12, 1, &mut key.child("panel", 0).rng()).unwrap();
    let picks = sample(&mut key.child("pairs", 0).rng(), panel.train.len(), 5).into_vec();
    let mut resolved = 0;
    let mut details = Vec::new();
    for (i, j) in picks.into_iter().enumerate() {
        let x = &panel.train[j];
        let probe = scaling_dependence_probe(x, x, &panel.train, 2.0, 2.0, 1_000_000, &key.child("probe", i as u64)).unwrap();
        resolved += probe.resolvable as usize;
        details.push(format!("|d|={:.4} se={:.4}", probe.difference, probe.std_error));
    }
    check(
        "training-set dependence",
        resolved >= 1,
        format!("{resolved} of 5 pairs resolved at 3 sigma (want >= 1): {}", details.join(", ")),
    );
}

#[test]
fn small_ball_exponent() {
    let spec = ProcessParams::default().with_dim(15).unwrap();
    let key = derive_stream(SEED, "small-ball", 0, 0);
    let panel = simulate_panel(&spec, 3, 1, &mut key.child("panel", 0).rng()).unwrap();
    let eps: Vec<f64> = (1..=10).map(|i| 0.02 * i as f64).collect();
    let curve = small_ball_curve(&panel.train, 2.0, &eps, 2_000_000, &key.child("draws", 0)).unwrap();
    let dense: Vec<_> = curve.iter().filter(|c| !c.sparse).collect();
    let (slope, _) = fit_loglog_slope(
        &dense.iter().map(|c| c.epsilon).collect::<Vec<_>>(),
        &dense.iter().map(|c| c.probability).collect::<Vec<_>>(),
    )
    .unwrap();
    check(
        "small-ball exponent",
        slope >= 1.2 && dense.len() >= 3,
        format!("slope {slope:.3} over {} dense points (want >= 1.2)", dense.len()),
    );
}

#[test]
fn calibration_exactness() {
    let tc = |p| t_crit(&BoundParams::baseline(p)).unwrap();
    let (a, b, c) = (tc(12_000.0), tc(1000.0), tc(15.0));
    let base = BoundParams::baseline(12_000.0);
    let poly = poly_lower_bound(&base).unwrap();
    let regime = diagnose_regime(12.0, &base).unwrap();
    check(
        "calibration exactness",
        (a - 375.0).abs() <= 1.5
            && (b - 276.0).abs() <= 1.5
            && (c - 108.0).abs() <= 1.5
            && poly.binding == BoundTerm::SignalTerm
            && poly.value == 5e-5 / 128.0
            && regime == Regime::SignalLimited,
        format!(
            "t_crit {a:.2}/{b:.2}/{c:.2} months; poly bound {:e} ({:?}); regime at T=12 {regime:?}",
            poly.value, poly.binding
        ),
    );
}

#[test]
fn effective_vc_dimension() {
    let mut generic_ok = 0;
    let mut shatter_ok = 0;
    for i in 0..100u64 {
        let key = derive_stream(SEED, "effective-vc", i, 0);
        let t = 3 + (i as usize % 10);
        let p = 20 + (i as usize * 37) % 181;
        let spec = ProcessParams::default().with_dim(15).unwrap();
        let panel = simulate_panel(&spec, t, 1, &mut key.child("panel", 0).rng()).unwrap();
        let bank = FeatureBank::sample(15, p, 2.0, &mut key.child("bank", 0).rng()).unwrap();
        let z = bank.map_points(&panel.train).unwrap();
        generic_ok += (effective_vc(&z, DEFAULT_RANK_TOL).unwrap() == t) as usize;
        let head = &z[..t.min(5)];
        let s = shattering_probe(head, 5, &mut key.child("shatter", 0).rng()).unwrap();
        shatter_ok += (s.largest_shattered <= effective_vc(head, DEFAULT_RANK_TOL).unwrap()) as usize;
    }
    // rank 2 by construction: third row is the sum of the first two
    let a = vec![1.0, 0.5, 0.0, 2.0];
    let b = vec![0.0, 1.0, 1.0, -1.0];
    let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let deficient = vec![a, b, c];
    let r = effective_vc(&deficient, DEFAULT_RANK_TOL).unwrap();
    let s = shattering_probe(&deficient, 5, &mut derive_stream(SEED, "effective-vc", 999, 0).rng()).unwrap();
    check(
        "effective VC",
        generic_ok == 100 && shatter_ok == 100 && r == 2 && s.largest_shattered <= r,
        format!(
            "generic full rank {generic_ok}/100, shattering within rank {shatter_ok}/100; \
             rank-deficient instance vc={r} (T=3), largest shattered {}",
            s.largest_shattered
        ),
    );
}

#[test]
fn deterministic_csvs_across_workers() {
    let mut cfg = config(&[100, 500], &[6, 12], &[5], &[1.0, 2.0], 5);
    cfg.layout = SweepLayout::Marginals;
    cfg.base_point.p = 100;
    cfg.base_point.k = 5;
    let mut conv_cfg = cfg.clone();
    conv_cfg.oracle_samples = Some(20_000);
    let run = |workers: usize| -> Vec<Vec<u8>> {
        let dir = tempfile::tempdir().unwrap();
        let (conv, sweep) = with_workers(workers, || (run_convergence(&conv_cfg).unwrap(), run_sweep(&cfg).unwrap())).unwrap();
        let mut paths = vec![dir.path().join("convergence.csv")];
        write_convergence_csv(&paths[0], "convergence", &conv).unwrap();
        paths.extend(write_sweep_csvs(dir.path(), &sweep).unwrap());
        paths.iter().map(|p| std::fs::read(p).unwrap()).collect()
    };
    let one = run(1);
    let again = run(1);
    let many = run(4);
    check(
        "determinism",
        one == again && one == many,
        format!(
            "{} CSVs; repeat identical {}, 1 vs 4 workers identical {}",
            one.len(),
            one == again,
            one == many
        ),
    );
}
