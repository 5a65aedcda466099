//! Random Fourier features for the Gaussian kernel, in plain and
//! within-window standardized form.
//!
//! A bank draws `P` frequency rows `ω_i ~ N(0, γ² I_K)` and phases
//! `b_i ~ U[0, 2π)`; the feature map is `z_i(x) = √2 cos(ω_iᵀx + b_i)`.
//! The plain empirical kernel `(1/P) Σ z_i(x) z_i(x')` approximates
//! `exp(-γ²‖x - x'‖² / 2)`. Dividing each feature by a scale estimated on a
//! training window changes the limit: see [`crate::oracle`].

use std::f64::consts::{SQRT_2, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Smallest admissible per-feature scale σ̂_i.
pub const SCALE_FLOOR: f64 = 1e-12;

/// How σ̂_i² is estimated on the training window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ScaleMode {
    /// `σ̂² = (1/T) Σ_t z(x_t)²`
    #[default]
    #[serde(rename = "rms", alias = "RMS")]
    Rms,
    /// `σ̂² = (1/T) Σ_t z(x_t)² - ((1/T) Σ_t z(x_t))²`
    #[serde(rename = "sample_std", alias = "SampleStd")]
    SampleStd,
}

impl ScaleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScaleMode::Rms => "rms",
            ScaleMode::SampleStd => "sample_std",
        }
    }

    /// The mode's variance statistic of a window of feature values.
    pub(crate) fn variance(self, sum: f64, sum_sq: f64, n: usize) -> f64 {
        let n = n as f64;
        match self {
            ScaleMode::Rms => sum_sq / n,
            ScaleMode::SampleStd => {
                let mean = sum / n;
                sum_sq / n - mean * mean
            }
        }
    }
}

impl std::fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rms" => Ok(ScaleMode::Rms),
            "sample_std" | "samplestd" | "std" => Ok(ScaleMode::SampleStd),
            _ => Err(Error::param("mode", format!("unknown scale mode `{s}` (rms | sample_std)"))),
        }
    }
}

/// Identifies the training window a set of scales was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowId(pub u64);

/// The random draws `(ω_i, b_i)` defining a `P`-dimensional feature map on `R^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    // row-major P x K
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    gamma: f64,
    dim: usize,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::param("gamma", format!("must be positive and finite, got {gamma}")))
    }
}

impl FeatureBank {
    /// Draws a bank. Frequencies are drawn row by row, then all phases.
    pub fn sample<R: Rng + ?Sized>(dim: usize, n_features: usize, gamma: f64, rng: &mut R) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("K", "input dimension must be at least 1"));
        }
        if n_features == 0 {
            return Err(Error::param("P", "feature count must be at least 1"));
        }
        check_gamma(gamma)?;
        let frequencies = (0..n_features * dim)
            .map(|_| gamma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let phases = (0..n_features).map(|_| uniform_phase(rng)).collect();
        Ok(FeatureBank {
            frequencies,
            phases,
            gamma,
            dim,
        })
    }

    /// Builds a bank from explicit draws (one frequency row per feature).
    pub fn from_parts(frequencies: Vec<Vec<f64>>, phases: Vec<f64>, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if frequencies.is_empty() {
            return Err(Error::param("P", "feature count must be at least 1"));
        }
        check_len(frequencies.len(), phases.len())?;
        let dim = frequencies[0].len();
        if dim == 0 {
            return Err(Error::param("K", "input dimension must be at least 1"));
        }
        for row in &frequencies {
            check_len(dim, row.len())?;
        }
        if let Some(b) = phases.iter().find(|b| !(0.0..TAU).contains(*b)) {
            return Err(Error::param("phases", format!("phase {b} outside [0, 2π)")));
        }
        Ok(FeatureBank {
            frequencies: frequencies.into_iter().flatten().collect(),
            phases,
            gamma,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_features(&self) -> usize {
        self.phases.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn frequency(&self, i: usize) -> &[f64] {
        &self.frequencies[i * self.dim..(i + 1) * self.dim]
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// `z(x)`, one entry per feature, each in `[-√2, √2]`.
    pub fn feature_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x.len())?;
        Ok(self
            .frequencies
            .chunks_exact(self.dim)
            .zip(&self.phases)
            .map(|(w, b)| SQRT_2 * (dot(w, x) + b).cos())
            .collect())
    }

    /// Feature vectors for a batch of points.
    pub fn map_points(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|x| self.feature_map(x)).collect()
    }

    /// Unstandardized empirical kernel `(1/P) Σ z_i(x) z_i(x')`.
    pub fn empirical_kernel(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        let z = self.feature_map(x)?;
        let zp = self.feature_map(x_prime)?;
        Ok(kernel_from_features(&z, &zp))
    }
}

pub(crate) fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // random::<f64>() is in [0, 1); the product can round up to TAU
    let b = TAU * rng.random::<f64>();
    if b < TAU {
        b
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draws a feature bank; see [`FeatureBank::sample`].
pub fn sample_features<R: Rng + ?Sized>(dim: usize, n_features: usize, gamma: f64, rng: &mut R) -> Result<FeatureBank> {
    FeatureBank::sample(dim, n_features, gamma, rng)
}

/// `exp(-γ²‖x - x'‖² / 2)`.
pub fn gaussian_kernel(x: &[f64], x_prime: &[f64], gamma: f64) -> Result<f64> {
    check_len(x.len(), x_prime.len())?;
    check_gamma(gamma)?;
    let d2: f64 = x.iter().zip(x_prime).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-0.5 * gamma * gamma * d2).exp())
}

/// Mean of elementwise products of two precomputed feature vectors.
pub fn kernel_from_features(z: &[f64], z_prime: &[f64]) -> f64 {
    dot(z, z_prime) / z.len() as f64
}

/// Per-feature variance statistic over a window of feature vectors
/// (`train[t][i] = z_i(x_t)`). Returns σ̂_i², unvalidated.
pub fn window_variances(train_features: &[Vec<f64>], mode: ScaleMode) -> Vec<f64> {
    let p = train_features.first().map_or(0, Vec::len);
    let mut sum = vec![0.0; p];
    let mut sum_sq = vec![0.0; p];
    for row in train_features {
        for ((s, q), z) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(row) {
            *s += z;
            *q += z * z;
        }
    }
    sum.iter()
        .zip(&sum_sq)
        .map(|(&s, &q)| mode.variance(s, q, train_features.len()).max(0.0))
        .collect()
}

/// A feature bank together with per-feature scales fitted on one training window.
#[derive(Debug, Clone)]
pub struct StandardizedBank {
    bank: FeatureBank,
    scales: Vec<f64>,
    inv_var: Vec<f64>,
    mode: ScaleMode,
    window: WindowId,
}

impl StandardizedBank {
    /// Fits scales on `train` (T x K). Fails with [`Error::DegenerateScale`]
    /// naming the first feature whose σ̂ falls below [`SCALE_FLOOR`].
    pub fn fit(bank: FeatureBank, train: &[Vec<f64>], mode: ScaleMode, window: WindowId) -> Result<Self> {
        let feats = bank.map_points(train)?;
        Self::fit_from_features(bank, &feats, mode, window)
    }

    /// Same as [`fit`](Self::fit) with the window's feature vectors precomputed.
    pub fn fit_from_features(
        bank: FeatureBank,
        train_features: &[Vec<f64>],
        mode: ScaleMode,
        window: WindowId,
    ) -> Result<Self> {
        if train_features.len() < 2 {
            return Err(Error::param("T", "training window needs at least 2 points"));
        }
        for row in train_features {
            check_len(bank.n_features(), row.len())?;
        }
        let variances = window_variances(train_features, mode);
        let scales: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
        if let Some((index, &scale)) = scales.iter().enumerate().find(|(_, s)| !(**s >= SCALE_FLOOR)) {
            return Err(Error::DegenerateScale { index, scale });
        }
        let inv_var = variances.iter().map(|v| 1.0 / v).collect();
        Ok(StandardizedBank {
            bank,
            scales,
            inv_var,
            mode,
            window,
        })
    }

    pub fn bank(&self) -> &FeatureBank {
        &self.bank
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn mode(&self) -> ScaleMode {
        self.mode
    }

    pub fn window(&self) -> WindowId {
        self.window
    }

    /// `(1/P) Σ z_i(x) z_i(x') / σ̂_i²`.
    pub fn kernel(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        let z = self.bank.feature_map(x)?;
        let zp = self.bank.feature_map(x_prime)?;
        Ok(self.kernel_from_features(&z, &zp))
    }

    pub fn kernel_from_features(&self, z: &[f64], z_prime: &[f64]) -> f64 {
        let acc: f64 = z
            .iter()
            .zip(z_prime)
            .zip(&self.inv_var)
            .map(|((a, b), w)| a * b * w)
            .sum();
        acc / z.len() as f64
    }
}

/// Fits scales; see [`StandardizedBank::fit`].
pub fn compute_scales(bank: FeatureBank, train: &[Vec<f64>], mode: ScaleMode, window: WindowId) -> Result<StandardizedBank> {
    StandardizedBank::fit(bank, train, mode, window)
}
