//! Minimax lower bounds, the critical sample size and regime diagnosis, and
//! capacity diagnostics for ridgeless RFF predictors.
//!
//! Logarithms are natural throughout.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rff::dot;

/// Half-width, in months, of the band around `t_crit` reported as a tie.
pub const BOUNDARY_MONTHS: f64 = 0.5;

/// Default relative eigenvalue tolerance for [`effective_vc`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Random coefficient draws per labeling when the Gram block is singular.
pub const SHATTER_SEARCH_BUDGET: usize = 10_000;

pub const MAX_SHATTER_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    /// Signal power, return-variance units.
    #[serde(rename = "B2")]
    pub b2: f64,
    /// Noise variance, same units as `b2`.
    pub sigma2: f64,
    /// Sample size in months.
    #[serde(rename = "T")]
    pub t: f64,
    /// Feature count.
    #[serde(rename = "P")]
    pub p: f64,
    /// Lower covariance eigenvalue bound.
    pub c_z: f64,
    /// Upper covariance eigenvalue bound.
    #[serde(rename = "C_z")]
    pub cap_c_z: f64,
    /// Leading constant of the exponential bound (not pinned by theory).
    #[serde(default = "one")]
    pub c_universal: f64,
}

fn one() -> f64 {
    1.0
}

impl BoundParams {
    /// The baseline calibration: `σ² = 2.2e-3`, `B² = 5e-5`, `C_z = 1.1`,
    /// `c_z = 1`, `T = 12`.
    pub fn baseline(p: f64) -> Self {
        BoundParams {
            b2: 5e-5,
            sigma2: 2.2e-3,
            t: 12.0,
            p,
            c_z: 1.0,
            cap_c_z: 1.1,
            c_universal: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("B2", self.b2),
            ("sigma2", self.sigma2),
            ("c_z", self.c_z),
            ("C_z", self.cap_c_z),
            ("c_universal", self.c_universal),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::param("T", format!("must be finite and >= 0, got {}", self.t)));
        }
        if !(self.p.is_finite() && self.p >= 2.0) {
            return Err(Error::param("P", format!("need P >= 2 for log P, got {}", self.p)));
        }
        if self.c_z > self.cap_c_z {
            return Err(Error::param(
                "c_z",
                format!("need c_z <= C_z, got {} > {}", self.c_z, self.cap_c_z),
            ));
        }
        Ok(())
    }
}

/// Constant suggested by the proof of the exponential bound:
/// `c = c_z / 4 * exp(-4 ln 2 / P)`.
pub fn proof_sketch_constant(c_z: f64, p: f64) -> f64 {
    c_z / 4.0 * (-4.0 * std::f64::consts::LN_2 / p).exp()
}

/// `c * B² * exp(-8 T C_z B² / (P σ²))`.
pub fn exp_lower_bound(params: &BoundParams) -> Result<f64> {
    params.validate()?;
    let p = params;
    Ok(p.c_universal * p.b2 * (-8.0 * p.t * p.cap_c_z * p.b2 / (p.p * p.sigma2)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTerm {
    /// `B²` is the smaller branch.
    SignalTerm,
    /// `σ² ln P / (C_z T)` is the smaller branch.
    ComplexityTerm,
}

impl BoundTerm {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundTerm::SignalTerm => "signal",
            BoundTerm::ComplexityTerm => "complexity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolyBound {
    pub value: f64,
    pub binding: BoundTerm,
    /// `P < 4`: outside the range where the bound is stated.
    pub out_of_range: bool,
}

/// `(c_z / 128) * min{B², σ² ln P / (C_z T)}`. Ties report the signal term.
pub fn poly_lower_bound(params: &BoundParams) -> Result<PolyBound> {
    params.validate()?;
    let p = params;
    let complexity = if p.t == 0.0 {
        f64::INFINITY
    } else {
        p.sigma2 * p.p.ln() / (p.cap_c_z * p.t)
    };
    let (m, binding) = if p.b2 <= complexity {
        (p.b2, BoundTerm::SignalTerm)
    } else {
        (complexity, BoundTerm::ComplexityTerm)
    };
    Ok(PolyBound {
        value: p.c_z / 128.0 * m,
        binding,
        out_of_range: p.p < 4.0,
    })
}

/// `T_crit = σ² ln P / (C_z B²)`, in months.
pub fn t_crit(params: &BoundParams) -> Result<f64> {
    params.validate()?;
    Ok(params.sigma2 / (params.cap_c_z * params.b2) * params.p.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SignalLimited,
    ComplexityLimited,
    Boundary,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::SignalLimited => "signal_limited",
            Regime::ComplexityLimited => "complexity_limited",
            Regime::Boundary => "boundary",
        }
    }
}

/// Classifies sample size `t` (months) against `t_crit(params)`; the `T` in
/// `params` is ignored.
pub fn diagnose_regime(t: f64, params: &BoundParams) -> Result<Regime> {
    if !(t.is_finite() && t >= 1.0) {
        return Err(Error::param("T", format!("need T >= 1 month, got {t}")));
    }
    let tc = t_crit(params)?;
    Ok(if (t - tc).abs() <= BOUNDARY_MONTHS {
        Regime::Boundary
    } else if t < tc {
        Regime::SignalLimited
    } else {
        Regime::ComplexityLimited
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub exp_bound: f64,
    pub poly_bound: f64,
    pub poly_binding_term: BoundTerm,
    pub poly_out_of_range: bool,
    pub t_crit_months: f64,
    pub regime: Regime,
}

pub fn bound_report(params: &BoundParams) -> Result<BoundReport> {
    let poly = poly_lower_bound(params)?;
    Ok(BoundReport {
        exp_bound: exp_lower_bound(params)?,
        poly_bound: poly.value,
        poly_binding_term: poly.binding,
        poly_out_of_range: poly.out_of_range,
        t_crit_months: t_crit(params)?,
        regime: diagnose_regime(params.t.max(1.0), params)?,
    })
}

fn check_rows(z: &[Vec<f64>]) -> Result<usize> {
    let p = z.first().map_or(0, |r| r.len());
    for r in z {
        check_len(p, r.len())?;
    }
    Ok(p)
}

fn gram(z: &[Vec<f64>]) -> DMatrix<f64> {
    let n = z.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = dot(&z[i], &z[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn numerical_rank(g: DMatrix<f64>, tol: f64) -> usize {
    if g.nrows() == 0 {
        return 0;
    }
    let eig = g.symmetric_eigen().eigenvalues;
    let max = eig.max();
    if !(max > 0.0) {
        return 0;
    }
    eig.iter().filter(|&&l| l > tol * max).count()
}

/// Number of eigenvalues of `ZZᵀ` above `tol` times the largest, for the
/// `T x P` feature matrix `z` given as rows.
pub fn effective_vc(z: &[Vec<f64>], tol: f64) -> Result<usize> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    check_rows(z)?;
    Ok(numerical_rank(gram(z), tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetSizeCount {
    pub size: usize,
    pub subsets: usize,
    pub shattered_subsets: usize,
    /// Realizable labelings summed over subsets of this size.
    pub realizable_labelings: usize,
    pub total_labelings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShatteringReport {
    pub largest_shattered: usize,
    pub by_size: Vec<SubsetSizeCount>,
}

fn signs_match(v: &DVector<f64>, y: &[f64]) -> bool {
    v.iter().zip(y).all(|(a, b)| a * b > 0.0)
}

fn realizable<R: Rng + ?Sized>(g: &DMatrix<f64>, nonsingular: bool, y: &[f64], rng: &mut R) -> bool {
    let yv = DVector::from_column_slice(y);
    if nonsingular {
        return true;
    }
    // least-squares projection of y onto col(G) first, then random search
    if let Ok(pinv) = g.clone().pseudo_inverse(1e-12) {
        if signs_match(&(g * (pinv * &yv)), y) {
            return true;
        }
    }
    let mut alpha = DVector::zeros(y.len());
    for _ in 0..SHATTER_SEARCH_BUDGET {
        for a in alpha.iter_mut() {
            *a = rng.sample(StandardNormal);
        }
        if signs_match(&(g * &alpha), y) {
            return true;
        }
    }
    false
}

/// Exhaustive shattering check of the ridgeless class `{sign(G_S α)}` over
/// every subset `S` of the rows of `z`, where `G_S` is the Gram block on `S`.
///
/// Realizability with a singular block is a one-sided randomized check: a
/// labeling reported realizable is, one reported unrealizable may not be.
pub fn shattering_probe<R: Rng + ?Sized>(z: &[Vec<f64>], max_points: usize, rng: &mut R) -> Result<ShatteringReport> {
    if max_points > MAX_SHATTER_POINTS {
        return Err(Error::param(
            "max_points",
            format!("at most {MAX_SHATTER_POINTS} points, got {max_points}"),
        ));
    }
    if z.len() > max_points {
        return Err(Error::param("Z", format!("{} rows exceed max_points = {max_points}", z.len())));
    }
    check_rows(z)?;
    let m = z.len();
    let full = gram(z);
    let mut by_size: Vec<SubsetSizeCount> = (0..=m)
        .map(|size| SubsetSizeCount {
            size,
            subsets: 0,
            shattered_subsets: 0,
            realizable_labelings: 0,
            total_labelings: 0,
        })
        .collect();
    let mut largest = 0;
    for mask in 0u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let s = idx.len();
        let g = DMatrix::from_fn(s, s, |a, b| full[(idx[a], idx[b])]);
        let nonsingular = s == 0 || numerical_rank(g.clone(), DEFAULT_RANK_TOL) == s;
        let mut ok = 0;
        for lab in 0u32..(1 << s) {
            let y: Vec<f64> = (0..s).map(|i| if lab & (1 << i) != 0 { 1.0 } else { -1.0 }).collect();
            if s == 0 || realizable(&g, nonsingular, &y, rng) {
                ok += 1;
            }
        }
        let entry = &mut by_size[s];
        entry.subsets += 1;
        entry.realizable_labelings += ok;
        entry.total_labelings += 1 << s;
        if ok == 1 << s {
            entry.shattered_subsets += 1;
            largest = largest.max(s);
        }
    }
    Ok(ShatteringReport {
        largest_shattered: largest,
        by_size,
    })
}

/// A named calibration scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub params: BoundParams,
}

/// Baseline scenarios at `P ∈ {15, 1000, 12000}`.
pub fn baseline_scenarios() -> Vec<Scenario> {
    [15.0, 1000.0, 12_000.0]
        .iter()
        .map(|&p| Scenario {
            name: format!("baseline_P{p}"),
            params: BoundParams::baseline(p),
        })
        .collect()
}

const PANEL_P: [f64; 3] = [15.0, 1000.0, 12_000.0];

/// Signal-strength panels: `σ² = 2e-3`, `C_z = 1`, varying `B²`.
pub fn signal_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();
    for b2 in [1e-4, 5e-5, 2.2e-5, 1e-5] {
        for p in PANEL_P {
            out.push(Scenario {
                name: format!("signal_B2_{b2:e}_P{p}"),
                params: BoundParams {
                    b2,
                    sigma2: 2e-3,
                    cap_c_z: 1.0,
                    ..BoundParams::baseline(p)
                },
            });
        }
    }
    out
}

/// Noise panels: `B² = 5e-5`, `C_z = 1`, varying `σ²`.
pub fn noise_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();
    for sigma2 in [1.5e-3, 2e-3, 2.5e-3, 3e-3] {
        for p in PANEL_P {
            out.push(Scenario {
                name: format!("noise_sigma2_{sigma2:e}_P{p}"),
                params: BoundParams {
                    sigma2,
                    cap_c_z: 1.0,
                    ..BoundParams::baseline(p)
                },
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::StreamKey;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn exp_bound_examples() {
        let mut p = BoundParams::baseline(12_000.0);
        let v = exp_lower_bound(&p).unwrap();
        let oracle = 5e-5 * (-8.0 * 12.0 * 1.1 * 5e-5 / (12_000.0 * 2.2e-3f64)).exp();
        assert!((v - oracle).abs() < 1e-18);
        assert!((v - 4.9990e-5).abs() < 1e-9);
        p.t = 0.0;
        assert_eq!(exp_lower_bound(&p).unwrap(), 5e-5);
        p.b2 = 1e-300;
        assert!(exp_lower_bound(&p).unwrap() < 1e-299);
    }

    #[test]
    fn poly_bound_examples() {
        let mut p = BoundParams::baseline(12_000.0);
        let b = poly_lower_bound(&p).unwrap();
        assert_eq!(b.binding, BoundTerm::SignalTerm);
        assert!((b.value - 5e-5 / 128.0).abs() < 1e-20);
        assert!(!b.out_of_range);
        p.t = 1e9;
        let b = poly_lower_bound(&p).unwrap();
        assert_eq!(b.binding, BoundTerm::ComplexityTerm);
        assert!(b.value < 1e-12);
        p.p = 3.0;
        assert!(poly_lower_bound(&p).unwrap().out_of_range);
    }

    #[test]
    fn poly_bound_continuous_at_tie() {
        let mut p = BoundParams::baseline(1000.0);
        p.t = p.sigma2 * p.p.ln() / (p.cap_c_z * p.b2);
        let v = poly_lower_bound(&p).unwrap().value;
        assert!((v - p.c_z / 128.0 * p.b2).abs() < 1e-18);
    }

    #[test]
    fn t_crit_baseline() {
        let tc = |p| t_crit(&BoundParams::baseline(p)).unwrap();
        assert!((tc(12_000.0) - 375.0).abs() < 1.0);
        assert!((tc(1000.0) - 276.0).abs() < 1.0);
        assert!((tc(15.0) - 108.0).abs() < 1.0);
    }

    #[test]
    fn regime_examples() {
        let p = BoundParams::baseline(12_000.0);
        assert_eq!(diagnose_regime(12.0, &p).unwrap(), Regime::SignalLimited);
        assert_eq!(diagnose_regime(400.0, &p).unwrap(), Regime::ComplexityLimited);
        let tc = t_crit(&p).unwrap();
        assert_eq!(diagnose_regime(tc, &p).unwrap(), Regime::Boundary);
        assert!(diagnose_regime(0.5, &p).is_err());
    }

    #[test]
    fn validation() {
        let mut p = BoundParams::baseline(100.0);
        p.c_z = 2.0;
        assert!(t_crit(&p).is_err());
        let mut p = BoundParams::baseline(1.0);
        assert!(t_crit(&p).is_err());
        p.p = 10.0;
        p.sigma2 = -1.0;
        assert!(exp_lower_bound(&p).is_err());
    }

    #[test]
    fn proof_sketch_constant_value() {
        let c = proof_sketch_constant(1.0, 4.0);
        assert!((c - 0.125).abs() < 1e-15);
    }

    #[test]
    fn vc_examples() {
        let mut z = vec![vec![0.0; 5]; 3];
        for (i, r) in z.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        assert_eq!(effective_vc(&z, DEFAULT_RANK_TOL).unwrap(), 3);
        z[2] = z[0].clone();
        assert_eq!(effective_vc(&z, DEFAULT_RANK_TOL).unwrap(), 2);
        assert_eq!(effective_vc(&vec![vec![0.0; 4]; 3], DEFAULT_RANK_TOL).unwrap(), 0);
        let mut rng = StreamKey::from_seed(5).rng();
        let z: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..12_000).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        assert_eq!(effective_vc(&z, DEFAULT_RANK_TOL).unwrap(), 12);
    }

    #[test]
    fn shattering_examples() {
        let mut rng = StreamKey::from_seed(6).rng();
        let z = vec![vec![1.0, 0.0, 0.0], vec![0.3, 1.0, 0.0], vec![0.0, 0.2, 1.0]];
        let r = shattering_probe(&z, 5, &mut rng).unwrap();
        assert_eq!(r.largest_shattered, 3);
        assert_eq!(r.by_size[0].shattered_subsets, 1);

        // rank-1 Gram with same-sign column: (+, -) cannot be realized
        let z = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
        let r = shattering_probe(&z, 5, &mut rng).unwrap();
        assert_eq!(r.largest_shattered, 1);
        assert_eq!(r.by_size[2].realizable_labelings, 2);

        let r = shattering_probe(&[], 5, &mut rng).unwrap();
        assert_eq!(r.largest_shattered, 0);
        assert!(shattering_probe(&z, 6, &mut rng).is_err());
    }

    #[test]
    fn presets_match_calibration_tables() {
        let tc: Vec<f64> = signal_scenarios()
            .iter()
            .filter(|s| s.params.p == 12_000.0)
            .map(|s| t_crit(&s.params).unwrap())
            .collect();
        for (got, want) in tc.iter().zip([187.85, 375.7, 853.9, 1878.5]) {
            assert!((got - want).abs() < 0.1, "{got} vs {want}");
        }
        let tc: Vec<f64> = noise_scenarios()
            .iter()
            .filter(|s| s.params.p == 12_000.0)
            .map(|s| t_crit(&s.params).unwrap())
            .collect();
        for (got, want) in tc.iter().zip([281.8, 375.7, 469.6, 563.6]) {
            assert!((got - want).abs() < 0.1, "{got} vs {want}");
        }
    }

    fn params() -> impl Strategy<Value = BoundParams> {
        (1e-6f64..1e-3, 1e-4f64..1e-2, 1.0f64..1000.0, 4.0f64..1e5, 0.5f64..1.0, 1.0f64..1.5).prop_map(
            |(b2, sigma2, t, p, c_z, cap_c_z)| BoundParams {
                b2,
                sigma2,
                t,
                p,
                c_z,
                cap_c_z,
                c_universal: 1.0,
            },
        )
    }

    proptest! {
        #[test]
        fn t_crit_monotone(p in params(), f in 1.01f64..3.0) {
            let base = t_crit(&p).unwrap();
            let noisier = t_crit(&BoundParams { sigma2: p.sigma2 * f, ..p }).unwrap();
            let wider = t_crit(&BoundParams { p: p.p * f, ..p }).unwrap();
            let stronger = t_crit(&BoundParams { b2: p.b2 * f, ..p }).unwrap();
            prop_assert!(noisier > base);
            prop_assert!(wider > base);
            prop_assert!(stronger < base);
        }

        #[test]
        fn exp_bound_in_range(p in params()) {
            let v = exp_lower_bound(&p).unwrap();
            prop_assert!(v > 0.0 && v <= p.c_universal * p.b2);
        }

        #[test]
        fn poly_bound_monotone(p in params(), f in 1.01f64..3.0) {
            let base = poly_lower_bound(&p).unwrap();
            let longer = poly_lower_bound(&BoundParams { t: p.t * f, ..p }).unwrap();
            prop_assert!(longer.value <= base.value);
            if base.binding == BoundTerm::ComplexityTerm {
                let wider = poly_lower_bound(&BoundParams { p: p.p * f, ..p }).unwrap();
                prop_assert!(wider.value >= base.value);
            }
        }

        #[test]
        fn vc_bounded_and_permutation_invariant(rows in 1usize..6, cols in 1usize..8, seed in 0u64..1000) {
            let mut rng = StreamKey::from_seed(seed).rng();
            // low-rank construction so some instances are rank deficient
            let r = (seed as usize % rows.min(cols)) + 1;
            let a: Vec<Vec<f64>> = (0..rows).map(|_| (0..r).map(|_| rng.sample(StandardNormal)).collect()).collect();
            let b: Vec<Vec<f64>> = (0..r).map(|_| (0..cols).map(|_| rng.sample(StandardNormal)).collect()).collect();
            let z: Vec<Vec<f64>> = a.iter().map(|ar| (0..cols).map(|j| (0..r).map(|k| ar[k] * b[k][j]).sum()).collect()).collect();
            let vc = effective_vc(&z, DEFAULT_RANK_TOL).unwrap();
            prop_assert!(vc <= rows.min(cols));
            let mut rev = z.clone();
            rev.reverse();
            prop_assert_eq!(effective_vc(&rev, DEFAULT_RANK_TOL).unwrap(), vc);
            if rows <= 4 {
                let s = shattering_probe(&z, 5, &mut rng).unwrap();
                prop_assert!(s.largest_shattered <= vc);
            }
        }
    }
}
