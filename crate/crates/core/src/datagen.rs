//! Persistent predictor panels: a diagonal VAR(1) with equicorrelated
//! Gaussian shocks, `x_t = Φ x_{t-1} + u_t`, `u_t ~ N(0, ρ11ᵀ + (1-ρ)I)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Process parameters shared by every `K` in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessParams {
    pub phi_low: f64,
    pub phi_high: f64,
    pub rho: f64,
    pub burn_in: usize,
}

impl Default for ProcessParams {
    fn default() -> Self {
        ProcessParams {
            phi_low: 0.82,
            phi_high: 0.98,
            rho: 0.1,
            burn_in: 500,
        }
    }
}

impl ProcessParams {
    pub fn with_dim(self, dim: usize) -> Result<PredictorProcessSpec> {
        PredictorProcessSpec::new(dim, self)
    }
}

/// A validated predictor process for one input dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictorProcessSpec {
    pub dim: usize,
    pub params: ProcessParams,
}

impl PredictorProcessSpec {
    pub fn new(dim: usize, params: ProcessParams) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("K", "input dimension must be at least 1"));
        }
        let ProcessParams { phi_low, phi_high, rho, .. } = params;
        // φ = 0 is allowed so white noise is a special case
        if !(0.0..1.0).contains(&phi_low) || !(0.0..1.0).contains(&phi_high) || phi_low > phi_high {
            return Err(Error::param(
                "process.phi_low",
                format!("need 0 <= phi_low <= phi_high < 1, got [{phi_low}, {phi_high}]"),
            ));
        }
        check_rho(dim, rho)?;
        Ok(PredictorProcessSpec { dim, params })
    }
}

fn check_rho(dim: usize, rho: f64) -> Result<()> {
    let lower = if dim > 1 { -1.0 / (dim as f64 - 1.0) } else { f64::NEG_INFINITY };
    if rho.is_finite() && rho > lower && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::param(
            "process.rho",
            format!("rho = {rho} outside ({lower}, 1); shock covariance would not be positive definite"),
        ))
    }
}

/// `ρ11ᵀ + (1-ρ)I_K`.
pub fn build_sigma_u(dim: usize, rho: f64) -> Result<DMatrix<f64>> {
    if dim == 0 {
        return Err(Error::param("K", "input dimension must be at least 1"));
    }
    check_rho(dim, rho)?;
    Ok(DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { rho }))
}

/// A simulated training window plus the chain states that follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorPanel {
    pub train: Vec<Vec<f64>>,
    pub queries: Vec<Vec<f64>>,
    pub phi_diag: Vec<f64>,
    pub spec: PredictorProcessSpec,
}

/// Simulates one chain: start at 0, run `burn_in` steps, record `T` training
/// states, then `Q` query states. Draw order: the `K` persistence values,
/// then `K` standard normals per step.
///
/// When `T <= K + 1` the augmented training points `(x_t, 1)` are checked
/// for affine independence, and a rank-deficient window is an error.
pub fn simulate_panel<R: Rng + ?Sized>(spec: &PredictorProcessSpec, t: usize, q: usize, rng: &mut R) -> Result<PredictorPanel> {
    if t < 2 {
        return Err(Error::param("T", "training window needs at least 2 points"));
    }
    if q < 1 {
        return Err(Error::param("Q", "need at least 1 query state"));
    }
    let k = spec.dim;
    let p = spec.params;
    let sigma = build_sigma_u(k, p.rho)?;
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::Internal("shock covariance is not positive definite".into()))?;
    let l = chol.l();

    let phi_diag: Vec<f64> = (0..k)
        .map(|_| {
            if p.phi_low == p.phi_high {
                p.phi_low
            } else {
                rng.random_range(p.phi_low..=p.phi_high)
            }
        })
        .collect();

    let mut state = DVector::<f64>::zeros(k);
    let mut noise = DVector::<f64>::zeros(k);
    let mut step = |rng: &mut R, state: &mut DVector<f64>| {
        for v in noise.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let shock = &l * &noise;
        for i in 0..k {
            state[i] = phi_diag[i] * state[i] + shock[i];
        }
    };

    for _ in 0..p.burn_in {
        step(rng, &mut state);
    }
    let mut record = |n: usize, rng: &mut R, state: &mut DVector<f64>| {
        (0..n)
            .map(|_| {
                step(rng, state);
                state.iter().copied().collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
    };
    let train = record(t, rng, &mut state);
    let queries = record(q, rng, &mut state);

    if t <= k + 1 {
        let rank = augmented_rank(&train);
        if rank < t {
            return Err(Error::AffineDependence { rank, expected: t });
        }
    }

    Ok(PredictorPanel {
        train,
        queries,
        phi_diag,
        spec: *spec,
    })
}

/// Numerical rank of the `(K+1) x T` matrix with columns `(x_t, 1)`.
pub fn augmented_rank(points: &[Vec<f64>]) -> usize {
    let Some(first) = points.first() else { return 0 };
    let k = first.len();
    let a = DMatrix::from_fn(k + 1, points.len(), |i, j| if i < k { points[j][i] } else { 1.0 });
    let sv = a.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    let tol = max * (k + 1).max(points.len()) as f64 * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Which query-state pairs a trial evaluates kernels on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QueryPairing {
    /// `(q_j, q_j)` for every query state, where the target kernel is 1.
    #[default]
    SelfPairs,
    /// Disjoint consecutive pairs `(q_{2j}, q_{2j+1})`.
    Consecutive,
    /// Consecutive pairs followed by every self-pair.
    Mixed,
}

impl QueryPairing {
    /// Index pairs into the query list.
    pub fn pairs(self, n_queries: usize) -> Vec<(usize, usize)> {
        let consecutive = (0..n_queries / 2).map(|j| (2 * j, 2 * j + 1));
        let selfs = (0..n_queries).map(|j| (j, j));
        match self {
            QueryPairing::SelfPairs => selfs.collect(),
            QueryPairing::Consecutive => consecutive.collect(),
            QueryPairing::Mixed => consecutive.chain(selfs).collect(),
        }
    }
}
