//! Monte-Carlo ground truth for standardized kernels.
//!
//! For a single random feature `(ω, b)` and a training window `x_1..x_T`,
//! the standardized product is `h = N / D` with
//!
//! * `N = 2 cos(ωᵀx + b) cos(ωᵀx' + b) = z(x) z(x')`
//! * `D` = the window's variance statistic of `z` (mean of squares for
//!   [`ScaleMode::Rms`], mean-subtracted for [`ScaleMode::SampleStd`]),
//!
//! and the standardized empirical kernel is a `P`-sample average of `h`. Its
//! almost-sure limit `k*_std(x, x') = E[h]` depends on the window, which this
//! module estimates by brute-force sampling of `(ω, b)`.
//!
//! Draws are organised in fixed batches of [`BATCH_SIZE`], each with its own
//! child stream, and partial sums are reduced in batch order; estimates are
//! therefore identical for any number of worker threads.

use std::f64::consts::SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::par;
use crate::rff::{dot, uniform_phase, ScaleMode, WindowId, SCALE_FLOOR};
use crate::stream::{StreamKey, StreamRng};

/// Samples per reproducible batch.
pub const BATCH_SIZE: usize = 8192;

/// Smallest admissible oracle size.
pub const MIN_ORACLE_SAMPLES: usize = 1000;

/// Largest tolerated fraction of degenerate draws.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.01;

/// Outcome of evaluating `h` at one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HSample {
    Value(f64),
    /// `D` fell below [`SCALE_FLOOR`]; the draw is excluded and counted.
    Degenerate,
}

impl HSample {
    pub fn value(self) -> Option<f64> {
        match self {
            HSample::Value(v) => Some(v),
            HSample::Degenerate => None,
        }
    }
}

/// Evaluates `h(ω, b)` for one draw.
pub fn h_value(
    omega: &[f64],
    b: f64,
    x: &[f64],
    x_prime: &[f64],
    train: &[Vec<f64>],
    mode: ScaleMode,
) -> Result<HSample> {
    check_len(omega.len(), x.len())?;
    check_len(omega.len(), x_prime.len())?;
    if train.is_empty() {
        return Err(Error::param("T", "training window is empty"));
    }
    let (mut s, mut sq) = (0.0, 0.0);
    for xt in train {
        check_len(omega.len(), xt.len())?;
        let z = SQRT_2 * (dot(omega, xt) + b).cos();
        s += z;
        sq += z * z;
    }
    let d = mode.variance(s, sq, train.len());
    if !(d >= SCALE_FLOOR) {
        return Ok(HSample::Degenerate);
    }
    let n = 2.0 * (dot(omega, x) + b).cos() * (dot(omega, x_prime) + b).cos();
    Ok(HSample::Value(n / d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitKernelEstimate {
    pub mean: f64,
    pub standard_error: f64,
    /// Non-degenerate draws averaged.
    pub n_samples: usize,
    pub degenerate: usize,
    pub mode: ScaleMode,
    pub window: WindowId,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn standard_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Draws `(ω, b)` into `omega` and returns `b`.
fn draw_feature(rng: &mut StreamRng, gamma: f64, omega: &mut [f64]) -> f64 {
    for w in omega.iter_mut() {
        *w = gamma * rng.sample::<f64, _>(StandardNormal);
    }
    uniform_phase(rng)
}

fn batch_sizes(n: usize) -> Vec<usize> {
    let full = n / BATCH_SIZE;
    let mut sizes = vec![BATCH_SIZE; full];
    if n % BATCH_SIZE != 0 {
        sizes.push(n % BATCH_SIZE);
    }
    sizes
}

fn check_points(dim: usize, pts: &[Vec<f64>]) -> Result<()> {
    pts.iter().try_for_each(|p| check_len(dim, p.len()))
}

/// Monte-Carlo estimator of `k*_std` on one training window.
#[derive(Debug, Clone, Copy)]
pub struct LimitKernelOracle<'a> {
    train: &'a [Vec<f64>],
    gamma: f64,
    mode: ScaleMode,
    window: WindowId,
}

impl<'a> LimitKernelOracle<'a> {
    pub fn new(train: &'a [Vec<f64>], gamma: f64, mode: ScaleMode, window: WindowId) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::param("T", "training window is empty"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::param("gamma", format!("must be positive and finite, got {gamma}")));
        }
        check_points(train[0].len(), train)?;
        Ok(LimitKernelOracle {
            train,
            gamma,
            mode,
            window,
        })
    }

    pub fn dim(&self) -> usize {
        self.train[0].len()
    }

    /// Estimates `k*_std` for several pairs of `points` from one shared set
    /// of draws. Pairs index into `points`.
    pub fn estimate_pairs(
        &self,
        points: &[Vec<f64>],
        pairs: &[(usize, usize)],
        n_samples: usize,
        key: &StreamKey,
    ) -> Result<Vec<LimitKernelEstimate>> {
        if n_samples < MIN_ORACLE_SAMPLES {
            return Err(Error::param(
                "oracle_samples",
                format!("need at least {MIN_ORACLE_SAMPLES} draws, got {n_samples}"),
            ));
        }
        check_points(self.dim(), points)?;
        if let Some(&(a, b)) = pairs.iter().find(|(a, b)| *a >= points.len() || *b >= points.len()) {
            return Err(Error::param("pairs", format!("pair ({a}, {b}) out of range")));
        }
        let dim = self.dim();
        let sizes = batch_sizes(n_samples);
        let partials = par::map_indexed(sizes.len(), |j| {
            let mut rng = key.child("oracle-batch", j as u64).rng();
            let mut omega = vec![0.0; dim];
            let mut z_pts = vec![0.0; points.len()];
            let mut moments = vec![Moments::default(); pairs.len()];
            let mut degenerate = 0usize;
            for _ in 0..sizes[j] {
                let b = draw_feature(&mut rng, self.gamma, &mut omega);
                let (mut s, mut sq) = (0.0, 0.0);
                for xt in self.train {
                    let z = SQRT_2 * (dot(&omega, xt) + b).cos();
                    s += z;
                    sq += z * z;
                }
                let d = self.mode.variance(s, sq, self.train.len());
                if !(d >= SCALE_FLOOR) {
                    degenerate += 1;
                    continue;
                }
                for (zp, x) in z_pts.iter_mut().zip(points) {
                    *zp = SQRT_2 * (dot(&omega, x) + b).cos();
                }
                for (m, &(a, c)) in moments.iter_mut().zip(pairs) {
                    m.push(z_pts[a] * z_pts[c] / d);
                }
            }
            (moments, degenerate)
        });

        let mut total = vec![Moments::default(); pairs.len()];
        let mut degenerate = 0;
        for (m, d) in &partials {
            for (t, p) in total.iter_mut().zip(m) {
                t.merge(p);
            }
            degenerate += d;
        }
        if degenerate as f64 > MAX_DEGENERATE_FRACTION * n_samples as f64 {
            return Err(Error::DegenerateOracle {
                degenerate,
                total: n_samples,
            });
        }
        Ok(total
            .iter()
            .map(|m| LimitKernelEstimate {
                mean: m.mean(),
                standard_error: m.standard_error(),
                n_samples: m.n,
                degenerate,
                mode: self.mode,
                window: self.window,
            })
            .collect())
    }

    pub fn estimate(&self, x: &[f64], x_prime: &[f64], n_samples: usize, key: &StreamKey) -> Result<LimitKernelEstimate> {
        let pts = [x.to_vec(), x_prime.to_vec()];
        Ok(self.estimate_pairs(&pts, &[(0, 1)], n_samples, key)?[0])
    }

    /// Compares `k*_std` on the window against the window scaled by `alpha`,
    /// using the same draws for both (common random numbers).
    pub fn scaling_probe(
        &self,
        x: &[f64],
        x_prime: &[f64],
        alpha: f64,
        n_samples: usize,
        key: &StreamKey,
    ) -> Result<ScalingProbe> {
        if !(alpha.is_finite() && alpha >= 1.0) {
            return Err(Error::param("alpha", format!("need alpha >= 1, got {alpha}")));
        }
        if n_samples < MIN_ORACLE_SAMPLES {
            return Err(Error::param(
                "oracle_samples",
                format!("need at least {MIN_ORACLE_SAMPLES} draws, got {n_samples}"),
            ));
        }
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), x_prime.len())?;
        let dim = self.dim();
        let t = self.train.len();
        let sizes = batch_sizes(n_samples);
        let partials = par::map_indexed(sizes.len(), |j| {
            let mut rng = key.child("probe-batch", j as u64).rng();
            let mut omega = vec![0.0; dim];
            let (mut base, mut scaled, mut diff) = (Moments::default(), Moments::default(), Moments::default());
            let mut degenerate = 0usize;
            for _ in 0..sizes[j] {
                let b = draw_feature(&mut rng, self.gamma, &mut omega);
                let (mut s1, mut q1, mut s2, mut q2) = (0.0, 0.0, 0.0, 0.0);
                for xt in self.train {
                    let proj = dot(&omega, xt);
                    let z1 = SQRT_2 * (proj + b).cos();
                    let z2 = SQRT_2 * (alpha * proj + b).cos();
                    s1 += z1;
                    q1 += z1 * z1;
                    s2 += z2;
                    q2 += z2 * z2;
                }
                let d1 = self.mode.variance(s1, q1, t);
                let d2 = self.mode.variance(s2, q2, t);
                if !(d1 >= SCALE_FLOOR && d2 >= SCALE_FLOOR) {
                    degenerate += 1;
                    continue;
                }
                let n = 2.0 * (dot(&omega, x) + b).cos() * (dot(&omega, x_prime) + b).cos();
                let (h1, h2) = (n / d1, n / d2);
                base.push(h1);
                scaled.push(h2);
                diff.push(h2 - h1);
            }
            (base, scaled, diff, degenerate)
        });
        let (mut base, mut scaled, mut diff) = (Moments::default(), Moments::default(), Moments::default());
        let mut degenerate = 0;
        for (b, s, d, g) in &partials {
            base.merge(b);
            scaled.merge(s);
            diff.merge(d);
            degenerate += g;
        }
        if degenerate as f64 > MAX_DEGENERATE_FRACTION * n_samples as f64 {
            return Err(Error::DegenerateOracle {
                degenerate,
                total: n_samples,
            });
        }
        let difference = diff.mean().abs();
        let std_error = diff.standard_error();
        Ok(ScalingProbe {
            alpha,
            base: base.mean(),
            scaled: scaled.mean(),
            difference,
            std_error,
            resolvable: difference > 3.0 * std_error,
            n_samples: diff.n,
        })
    }
}

/// Estimates `k*_std(x, x')` on `train`; see [`LimitKernelOracle`].
#[allow(clippy::too_many_arguments)]
pub fn limit_kernel_mc(
    x: &[f64],
    x_prime: &[f64],
    train: &[Vec<f64>],
    gamma: f64,
    n_samples: usize,
    mode: ScaleMode,
    window: WindowId,
    key: &StreamKey,
) -> Result<LimitKernelEstimate> {
    LimitKernelOracle::new(train, gamma, mode, window)?.estimate(x, x_prime, n_samples, key)
}

/// Result of the training-set scaling probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingProbe {
    pub alpha: f64,
    /// `k*_std` on the original window.
    pub base: f64,
    /// `k*_std` on the window scaled by `alpha`.
    pub scaled: f64,
    pub difference: f64,
    /// Standard error of the paired per-draw difference.
    pub std_error: f64,
    /// `difference > 3 * std_error`.
    pub resolvable: bool,
    pub n_samples: usize,
}

/// RMS-mode scaling probe; see [`LimitKernelOracle::scaling_probe`].
pub fn scaling_dependence_probe(
    x: &[f64],
    x_prime: &[f64],
    train: &[Vec<f64>],
    gamma: f64,
    alpha: f64,
    n_samples: usize,
    key: &StreamKey,
) -> Result<ScalingProbe> {
    LimitKernelOracle::new(train, gamma, ScaleMode::Rms, WindowId(0))?.scaling_probe(x, x_prime, alpha, n_samples, key)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallBallPoint {
    pub epsilon: f64,
    pub probability: f64,
    pub hits: usize,
    /// Fewer than [`MIN_SMALL_BALL_HITS`] draws landed in the ball.
    pub sparse: bool,
}

pub const MIN_SMALL_BALL_HITS: usize = 100;

/// Empirical `P(σ̂² <= ε)` for the RMS statistic `σ̂² = (1/T) Σ z(x_t)²` of a
/// single random feature. Counts are nested, so probabilities are monotone
/// in `ε` by construction.
pub fn small_ball_curve(
    train: &[Vec<f64>],
    gamma: f64,
    epsilons: &[f64],
    n_samples: usize,
    key: &StreamKey,
) -> Result<Vec<SmallBallPoint>> {
    if train.is_empty() {
        return Err(Error::param("T", "training window is empty"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::param("gamma", format!("must be positive and finite, got {gamma}")));
    }
    if n_samples == 0 {
        return Err(Error::param("n_samples", "need at least one draw"));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(Error::param("epsilons", format!("epsilon {e} outside (0, 1]")));
    }
    let dim = train[0].len();
    check_points(dim, train)?;
    let t = train.len() as f64;
    let sizes = batch_sizes(n_samples);
    let partials = par::map_indexed(sizes.len(), |j| {
        let mut rng = key.child("small-ball-batch", j as u64).rng();
        let mut omega = vec![0.0; dim];
        let mut hits = vec![0usize; epsilons.len()];
        for _ in 0..sizes[j] {
            let b = draw_feature(&mut rng, gamma, &mut omega);
            let var = train
                .iter()
                .map(|xt| {
                    let z = SQRT_2 * (dot(&omega, xt) + b).cos();
                    z * z
                })
                .sum::<f64>()
                / t;
            for (h, e) in hits.iter_mut().zip(epsilons) {
                if var <= *e {
                    *h += 1;
                }
            }
        }
        hits
    });
    let mut hits = vec![0usize; epsilons.len()];
    for p in &partials {
        for (h, v) in hits.iter_mut().zip(p) {
            *h += v;
        }
    }
    Ok(epsilons
        .iter()
        .zip(hits)
        .map(|(&epsilon, hits)| SmallBallPoint {
            epsilon,
            probability: hits as f64 / n_samples as f64,
            hits,
            sparse: hits < MIN_SMALL_BALL_HITS,
        })
        .collect())
}

/// `g(r) = E[cos(ωᵀu)]` for `‖u‖ = r`, `ω ~ N(0, γ² I)`: `exp(-γ² r² / 2)`.
pub fn radial_g(r: f64, gamma: f64) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::param("r", format!("need a finite r >= 0, got {r}")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::param("gamma", format!("must be positive and finite, got {gamma}")));
    }
    Ok((-0.5 * gamma * gamma * r * r).exp())
}

/// Monte-Carlo estimate of `E[cos(ωᵀu)]` along `u = r e_1` in `R^dim`,
/// returned as `(mean, standard_error)`.
pub fn radial_g_mc(r: f64, gamma: f64, dim: usize, n_samples: usize, key: &StreamKey) -> Result<(f64, f64)> {
    radial_g(r, gamma)?;
    if dim == 0 || n_samples < 2 {
        return Err(Error::param("n_samples", "need dim >= 1 and at least 2 draws"));
    }
    let mut u = vec![0.0; dim];
    u[0] = r;
    let mut rng = key.rng();
    let mut omega = vec![0.0; dim];
    let mut m = Moments::default();
    for _ in 0..n_samples {
        draw_feature(&mut rng, gamma, &mut omega);
        m.push(dot(&omega, &u).cos());
    }
    Ok((m.mean(), m.standard_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn window() -> Vec<Vec<f64>> {
        (0..6).map(|t| vec![t as f64 * 0.7 - 1.0, (t as f64).sin(), 0.3 * t as f64]).collect()
    }

    #[test]
    fn h_at_zero_frequency() {
        let train = window();
        let w = [0.0; 3];
        let h = h_value(&w, 0.0, &[1.0, 2.0, 3.0], &[0.0, 0.0, 1.0], &train, ScaleMode::Rms)
            .unwrap()
            .value()
            .unwrap();
        assert!((h - 1.0).abs() < 1e-15);
        // b = π/2 zeroes the numerator and the window statistic together
        let h = h_value(&w, FRAC_PI_2, &[1.0, 2.0, 3.0], &[0.0, 0.0, 1.0], &train, ScaleMode::Rms).unwrap();
        assert_eq!(h, HSample::Degenerate);
    }

    #[test]
    fn h_flags_exact_small_ball_point() {
        // 2ωᵀx_1 + 2b = π
        let train = vec![vec![0.25]];
        let h = h_value(&[PI], PI / 4.0, &[0.0], &[1.0], &train, ScaleMode::Rms).unwrap();
        assert_eq!(h, HSample::Degenerate);
    }

    #[test]
    fn oracle_rejects_small_sizes_and_bad_pairs() {
        let train = window();
        let oracle = LimitKernelOracle::new(&train, 1.0, ScaleMode::Rms, WindowId(0)).unwrap();
        let key = StreamKey::from_seed(0);
        assert!(oracle.estimate(&[0.0; 3], &[0.0; 3], 999, &key).is_err());
        assert!(oracle.estimate_pairs(&[vec![0.0; 3]], &[(0, 1)], 1000, &key).is_err());
    }

    #[test]
    fn tiny_gamma_limit_is_one() {
        // all cosines collapse to cos(b); N / D -> 1 draw by draw
        let train = window();
        let x = [0.5, 0.5, 0.5];
        let est = limit_kernel_mc(&x, &x, &train, 1e-6, 20_000, ScaleMode::Rms, WindowId(0), &StreamKey::from_seed(2)).unwrap();
        assert!((est.mean - 1.0).abs() <= 3.0 * est.standard_error + 1e-9, "{est:?}");
    }

    #[test]
    fn estimates_are_deterministic() {
        let train = window();
        let key = StreamKey::from_seed(8);
        let a = limit_kernel_mc(&[0.1; 3], &[0.2; 3], &train, 2.0, 30_000, ScaleMode::SampleStd, WindowId(3), &key).unwrap();
        let b = limit_kernel_mc(&[0.1; 3], &[0.2; 3], &train, 2.0, 30_000, ScaleMode::SampleStd, WindowId(3), &key).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_pair_matches_multi_pair() {
        let train = window();
        let oracle = LimitKernelOracle::new(&train, 1.5, ScaleMode::Rms, WindowId(0)).unwrap();
        let key = StreamKey::from_seed(4);
        let pts = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.5]];
        let many = oracle.estimate_pairs(&pts, &[(0, 0), (0, 1)], 10_000, &key).unwrap();
        let one = oracle.estimate(&pts[0], &pts[1], 10_000, &key).unwrap();
        assert_eq!(many[1].mean, one.mean);
    }

    #[test]
    fn unit_alpha_probe_is_exactly_zero() {
        let train = window();
        let p = scaling_dependence_probe(&[0.0; 3], &[0.1; 3], &train, 2.0, 1.0, 5000, &StreamKey::from_seed(5)).unwrap();
        assert_eq!(p.difference, 0.0);
        assert_eq!(p.base, p.scaled);
        assert!(!p.resolvable);
        assert!(scaling_dependence_probe(&[0.0; 3], &[0.1; 3], &train, 2.0, 0.5, 5000, &StreamKey::from_seed(5)).is_err());
    }

    #[test]
    fn small_ball_boundary_near_half() {
        // ε = 1 is the event S_T <= 0, symmetric under b -> b + π/2
        let train = window();
        let pts = small_ball_curve(&train, 2.0, &[1.0], 200_000, &StreamKey::from_seed(6)).unwrap();
        assert!((pts[0].probability - 0.5).abs() < 0.01, "{:?}", pts[0]);
    }

    #[test]
    fn small_ball_nested_and_validated() {
        let train = window();
        let eps = [0.2, 0.05, 0.1, 0.02];
        let pts = small_ball_curve(&train, 2.0, &eps, 50_000, &StreamKey::from_seed(7)).unwrap();
        for a in &pts {
            for b in &pts {
                if a.epsilon < b.epsilon {
                    assert!(a.probability <= b.probability);
                }
            }
        }
        assert!(small_ball_curve(&train, 2.0, &[0.0], 100, &StreamKey::from_seed(7)).is_err());
    }

    #[test]
    fn radial_g_closed_form_and_mc() {
        assert_eq!(radial_g(0.0, 1.3).unwrap(), 1.0);
        assert!((radial_g(2f64.sqrt(), 1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(radial_g(-1.0, 1.0).is_err());
        let (m, se) = radial_g_mc(0.8, 1.5, 4, 200_000, &StreamKey::from_seed(1)).unwrap();
        assert!((m - radial_g(0.8, 1.5).unwrap()).abs() < 4.0 * se);
    }
}
