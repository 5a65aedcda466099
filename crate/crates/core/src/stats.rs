//! Error summaries, degradation ratios, two-sample KS tests and log-log fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelLabel {
    Standard,
    Standardized,
}

impl KernelLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelLabel::Standard => "standard",
            KernelLabel::Standardized => "standardized",
        }
    }
}

/// Absolute kernel errors from one kernel variant in one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSample {
    values: Vec<f64>,
    pub label: KernelLabel,
    pub config_key: String,
}

impl ErrorSample {
    pub fn new(values: Vec<f64>, label: KernelLabel, config_key: impl Into<String>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param("values", format!("absolute errors must be finite and >= 0, got {v}")));
        }
        Ok(ErrorSample {
            values,
            label,
            config_key: config_key.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn mean(values: &[f64], name: &str) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::param(name, "sample is empty"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn mean_abs_error(sample: &ErrorSample) -> Result<f64> {
    mean(&sample.values, "sample")
}

/// Standard error of the mean (`0` for a single value).
pub fn standard_error(values: &[f64]) -> Result<f64> {
    let m = mean(values, "sample")?;
    let n = values.len();
    if n < 2 {
        return Ok(0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((var / n as f64).sqrt())
}

/// `mean(standardized) / mean(standard)`; above 1 means standardization hurts.
pub fn degradation_factor(standardized: &ErrorSample, standard: &ErrorSample) -> Result<f64> {
    let num = mean(&standardized.values, "standardized")?;
    let den = mean(&standard.values, "standard")?;
    if !(den > 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Two-sample Kolmogorov-Smirnov test.
///
/// Both ECDFs are right-continuous and evaluated at every pooled value, so
/// ties across samples are stepped over together. The p-value is the
/// asymptotic Kolmogorov tail at `λ = D sqrt(n1 n2 / (n1 + n2))`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("samples", "both KS samples must be nonempty"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::param("samples", "KS samples contain NaN"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n1, n2) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let v = if xs[i] <= ys[j] { xs[i] } else { ys[j] };
        while i < n1 && xs[i] <= v {
            i += 1;
        }
        while j < n2 && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    // past the end of one sample, the gap is largest right there
    let d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    let en = (n1 as f64 * n2 as f64 / (n1 + n2) as f64).sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(d * en),
        n1,
        n2,
    })
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    const TOL: f64 = 1e-10;
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // theta-function form converges fast for small λ
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for j in 1..=100 {
            let k = (2 * j - 1) as f64;
            let term = (-k * k * c).exp();
            cdf += term;
            if term < TOL {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf
    } else {
        let mut q = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            q += if j % 2 == 1 { 2.0 * term } else { -2.0 * term };
            if term < TOL {
                break;
            }
        }
        q
    };
    p.clamp(0.0, 1.0)
}

/// OLS of `ln error` on `ln size`; returns `(slope, intercept)`.
pub fn fit_loglog_slope(sizes: &[f64], errors: &[f64]) -> Result<(f64, f64)> {
    if sizes.len() != errors.len() {
        return Err(Error::DimensionMismatch {
            expected: sizes.len(),
            actual: errors.len(),
        });
    }
    if sizes.len() < 3 {
        return Err(Error::param("sizes", "need at least 3 points"));
    }
    if let Some(v) = sizes.iter().chain(errors).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::param("errors", format!("log-log fit needs positive values, got {v}")));
    }
    let lx: Vec<f64> = sizes.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("sizes", "all sizes are equal"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn sample(v: &[f64]) -> ErrorSample {
        ErrorSample::new(v.to_vec(), KernelLabel::Standard, "t").unwrap()
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mean_abs_error(&sample(&[0.0, 0.0, 0.0])).unwrap(), 0.0);
        assert!((mean_abs_error(&sample(&[0.1, 0.3])).unwrap() - 0.2).abs() < 1e-15);
        assert!(mean_abs_error(&sample(&[])).is_err());
        assert!(ErrorSample::new(vec![-0.1], KernelLabel::Standard, "").is_err());
        let mut rng = crate::StreamKey::from_seed(9).rng();
        let v: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
        let m = mean_abs_error(&sample(&v)).unwrap();
        assert!((m - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.02);
    }

    #[test]
    fn degradation_examples() {
        let s = sample(&[0.1, 0.2]);
        assert_eq!(degradation_factor(&s, &s).unwrap(), 1.0);
        let f = degradation_factor(&sample(&[0.03]), &sample(&[0.005])).unwrap();
        assert!((f - 6.0).abs() < 1e-12);
        assert!(matches!(
            degradation_factor(&s, &sample(&[0.0, 0.0])),
            Err(Error::DegenerateDenominator)
        ));
    }

    #[test]
    fn ks_examples() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0, 5.0]).unwrap().statistic, 1.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.5, 2.5]).unwrap().statistic, 0.5);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn kolmogorov_reference_values() {
        // standard critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(0.8276) - 0.5).abs() < 1e-3);
        // both branches agree where they meet
        assert!((kolmogorov_sf(1.18 - 1e-9) - kolmogorov_sf(1.18)).abs() < 1e-9);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(10.0) < 1e-80);
    }

    #[test]
    fn loglog_examples() {
        let p = [100.0, 1000.0, 10_000.0, 20_000.0];
        let e: Vec<f64> = p.iter().map(|x: &f64| 0.7 * x.powf(-0.5)).collect();
        let (s, c) = fit_loglog_slope(&p, &e).unwrap();
        assert!((s + 0.5).abs() < 1e-12);
        assert!((c - 0.7f64.ln()).abs() < 1e-10);
        let (s, _) = fit_loglog_slope(&p, &[0.1; 4]).unwrap();
        assert!(s.abs() < 1e-12);
        assert!(fit_loglog_slope(&p, &[0.1, 0.0, 0.1, 0.1]).is_err());
        assert!(fit_loglog_slope(&p[..2], &e[..2]).is_err());

        let mut rng = crate::StreamKey::from_seed(3).rng();
        let p = [100.0, 1000.0, 10_000.0];
        let e: Vec<f64> = p
            .iter()
            .map(|x| 2.0 / x * (1.0 + 0.01 * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let (s, _) = fit_loglog_slope(&p, &e).unwrap();
        assert!((s + 1.0).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn ks_symmetric(a in prop::collection::vec(-5.0f64..5.0, 1..40), b in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let ab = ks_two_sample(&a, &b).unwrap();
            let ba = ks_two_sample(&b, &a).unwrap();
            prop_assert_eq!(ab.statistic, ba.statistic);
            prop_assert!((0.0..=1.0).contains(&ab.statistic));
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }

        #[test]
        fn ks_monotone_invariant(a in prop::collection::vec(-3.0f64..3.0, 1..40), b in prop::collection::vec(-3.0f64..3.0, 1..40)) {
            let f = |v: &[f64]| v.iter().map(|x| x.exp() * 2.0 + 1.0).collect::<Vec<_>>();
            let raw = ks_two_sample(&a, &b).unwrap().statistic;
            let tr = ks_two_sample(&f(&a), &f(&b)).unwrap().statistic;
            prop_assert_eq!(raw, tr);
        }

        #[test]
        fn self_degradation_is_one(v in prop::collection::vec(0.0f64..1.0, 1..30)) {
            prop_assume!(v.iter().any(|x| *x > 0.0));
            let s = sample(&v);
            prop_assert_eq!(degradation_factor(&s, &s).unwrap(), 1.0);
        }

        #[test]
        fn loglog_recovers_exponent(a in -2.0f64..2.0, c in 0.1f64..10.0) {
            let p = [10.0, 100.0, 1000.0, 5000.0];
            let e: Vec<f64> = p.iter().map(|x: &f64| c * x.powf(a)).collect();
            let (s, _) = fit_loglog_slope(&p, &e).unwrap();
            prop_assert!((s - a).abs() < 1e-10);
        }
    }
}
