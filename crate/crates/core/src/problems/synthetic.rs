use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::fairness::{FairClassificationProblem, FairData};
use super::matrix_completion::MatrixCompletionProblem;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_DATA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticFairnessConfig {
    pub n_samples: usize,
    pub mean_pos: Vec<f64>,
    pub cov_pos: Vec<Vec<f64>>,
    pub mean_neg: Vec<f64>,
    pub cov_neg: Vec<Vec<f64>>,
    /// Rotation applied before evaluating the class densities that set the
    /// sensitive attribute; smaller angles correlate it more with the label.
    pub phi: f64,
    /// Append a constant-one feature.
    pub intercept: bool,
    pub c: f64,
    pub radius: f64,
}

impl Default for SyntheticFairnessConfig {
    fn default() -> Self {
        Self {
            n_samples: 4000,
            mean_pos: vec![2.0, 2.0],
            cov_pos: vec![vec![5.0, 1.0], vec![1.0, 5.0]],
            mean_neg: vec![-2.0, -2.0],
            cov_neg: vec![vec![10.0, 1.0], vec![1.0, 3.0]],
            phi: PI / 4.0,
            intercept: true,
            c: 0.05,
            radius: 10.0,
        }
    }
}

struct Gaussian {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl Gaussian {
    fn new(mean: &[f64], cov: &[Vec<f64>], what: &str) -> Result<Self> {
        let m = mean.len();
        if cov.len() != m || cov.iter().any(|r| r.len() != m) {
            return Err(Error::invalid(format!("{what} covariance must be {m}x{m}")));
        }
        let sigma = DMatrix::from_fn(m, m, |i, j| cov[i][j]);
        if (0..m).any(|i| (0..m).any(|j| sigma[(i, j)] != sigma[(j, i)])) {
            return Err(Error::invalid(format!("{what} covariance must be symmetric")));
        }
        let chol = sigma
            .cholesky()
            .ok_or_else(|| Error::invalid(format!("{what} covariance is not positive definite")))?
            .l();
        let log_det = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            log_norm: -0.5 * (log_det + m as f64 * (2.0 * PI).ln()),
            chol,
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| StandardNormal.sample(rng));
        (&self.mean + &self.chol * z).iter().copied().collect()
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let w = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        self.log_norm - 0.5 * w.norm_squared()
    }
}

/// Two-Gaussian classification data whose sensitive attribute depends on a
/// rotated copy of the features.
pub fn synthetic_fairness_data(cfg: &SyntheticFairnessConfig, seed: u64) -> Result<FairData> {
    if cfg.n_samples == 0 {
        return Err(Error::invalid("n_samples must be positive"));
    }
    if cfg.mean_pos.len() != 2 || cfg.mean_neg.len() != 2 {
        return Err(Error::invalid("synthetic fairness data is two-dimensional"));
    }
    let pos = Gaussian::new(&cfg.mean_pos, &cfg.cov_pos, "positive-class")?;
    let neg = Gaussian::new(&cfg.mean_neg, &cfg.cov_neg, "negative-class")?;
    let (sin, cos) = cfg.phi.sin_cos();
    let mut rng = stream_rng(seed, STREAM_DATA);
    let width = if cfg.intercept { 3 } else { 2 };
    let mut features = Vec::with_capacity(cfg.n_samples * width);
    let mut labels = Vec::with_capacity(cfg.n_samples);
    let mut sensitive = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        let y = rng.random_bool(0.5);
        let x = if y { pos.sample(&mut rng) } else { neg.sample(&mut rng) };
        let rotated = [x[0] * cos + x[1] * sin, -x[0] * sin + x[1] * cos];
        let p = 1.0 / (1.0 + (neg.log_pdf(&rotated) - pos.log_pdf(&rotated)).exp());
        let s = rng.random::<f64>() < p;
        features.extend_from_slice(&x);
        if cfg.intercept {
            features.push(1.0);
        }
        labels.push(if y { 1.0 } else { 0.0 });
        sensitive.push(if s { 1.0 } else { 0.0 });
    }
    let mut names = vec!["x1".to_string(), "x2".to_string()];
    if cfg.intercept {
        names.push("intercept".into());
    }
    FairData::new(features, width, labels, sensitive, names)
}

/// [`synthetic_fairness_data`] wrapped as a problem over all generated rows.
pub fn gen_synthetic_fairness(
    cfg: &SyntheticFairnessConfig,
    seed: u64,
) -> Result<FairClassificationProblem> {
    FairClassificationProblem::new(synthetic_fairness_data(cfg, seed)?, cfg.c, cfg.radius)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticMcConfig {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    /// Noise level relative to `|X*|_F`.
    pub gamma: f64,
    /// Probability that a left / right factor entry is zero.
    pub sparsity_left: f64,
    pub sparsity_right: f64,
    /// Fractions of zero / nonzero cells of `X*` that are observed.
    pub observe_zero: f64,
    pub observe_nonzero: f64,
    pub batch: usize,
}

impl Default for SyntheticMcConfig {
    fn default() -> Self {
        Self {
            rows: 200,
            cols: 300,
            rank: 10,
            gamma: 1e-3,
            sparsity_left: 0.7,
            sparsity_right: 0.5,
            observe_zero: 0.01,
            observe_nonzero: 0.9,
            batch: 200,
        }
    }
}

const MAX_ATTEMPTS: u64 = 10;

/// A generated completion instance together with its full ground truth and
/// noise matrices (row-major).
#[derive(Debug, Clone)]
pub struct McInstance {
    pub problem: MatrixCompletionProblem,
    pub truth: Vec<f64>,
    pub noise: Vec<f64>,
}

/// [`synthetic_mc_instance`] without the generating matrices.
pub fn gen_synthetic_mc(cfg: &SyntheticMcConfig, seed: u64) -> Result<MatrixCompletionProblem> {
    Ok(synthetic_mc_instance(cfg, seed)?.problem)
}

/// Sparse low-rank ground truth with partially observed noisy entries.
///
/// The observation counts are exactly `round(observe_zero * #zeros)` and
/// `round(observe_nonzero * #nonzeros)`. `alpha` is the nuclear norm of the
/// ground truth and `beta` its energy on the unobserved cells.
pub fn synthetic_mc_instance(cfg: &SyntheticMcConfig, seed: u64) -> Result<McInstance> {
    let (m, n, r) = (cfg.rows, cfg.cols, cfg.rank);
    if m == 0 || n == 0 || r == 0 || r > m.min(n) {
        return Err(Error::invalid(format!("rank {r} must lie in [1, min({m}, {n})]")));
    }
    for (name, p) in [
        ("sparsity_left", cfg.sparsity_left),
        ("sparsity_right", cfg.sparsity_right),
        ("observe_zero", cfg.observe_zero),
        ("observe_nonzero", cfg.observe_nonzero),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    if !(cfg.gamma.is_finite() && cfg.gamma >= 0.0) {
        return Err(Error::invalid("gamma must be nonnegative"));
    }

    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream_rng(seed, STREAM_DATA + attempt);
        let mut factor = |rows: usize, cols: usize, zero: f64| {
            DMatrix::from_fn(rows, cols, |_, _| {
                if rng.random::<f64>() < zero {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
        };
        let left = factor(m, r, cfg.sparsity_left);
        let right = factor(r, n, cfg.sparsity_right);
        let truth = &left * &right;
        let truth_norm = truth.norm();
        if truth_norm == 0.0 {
            log::warn!("generated an all-zero ground truth (attempt {}); regenerating", attempt + 1);
            continue;
        }

        // row-major flat layout
        let flat: Vec<f64> = (0..m * n).map(|k| truth[(k / n, k % n)]).collect();
        let zeros: Vec<usize> = (0..m * n).filter(|&k| flat[k] == 0.0).collect();
        let nonzeros: Vec<usize> = (0..m * n).filter(|&k| flat[k] != 0.0).collect();
        let take_zero = (cfg.observe_zero * zeros.len() as f64).round() as usize;
        let take_nonzero = (cfg.observe_nonzero * nonzeros.len() as f64).round() as usize;
        let mut observed_cells: Vec<usize> = sample(&mut rng, zeros.len(), take_zero)
            .into_iter()
            .map(|i| zeros[i])
            .chain(
                sample(&mut rng, nonzeros.len(), take_nonzero)
                    .into_iter()
                    .map(|i| nonzeros[i]),
            )
            .collect();
        observed_cells.sort_unstable();
        assert_eq!(observed_cells.len(), take_zero + take_nonzero);

        let z: Vec<f64> = (0..m * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z_norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = cfg.gamma * truth_norm / z_norm;
        let noise: Vec<f64> = z.iter().map(|v| scale * v).collect();
        let observed: Vec<(usize, f64)> = observed_cells
            .iter()
            .map(|&k| (k, flat[k] + noise[k]))
            .collect();

        let alpha: f64 = truth.singular_values().iter().sum();
        let mut is_obs = vec![false; m * n];
        observed_cells.iter().for_each(|&k| is_obs[k] = true);
        let beta = 0.5
            * crate::linalg::kahan_sum(
                (0..m * n).filter(|&k| !is_obs[k]).map(|k| flat[k] * flat[k]),
            );
        let problem = MatrixCompletionProblem::new(m, n, observed, alpha, beta, cfg.batch)?
            .with_ground_truth(flat.clone())?;
        return Ok(McInstance {
            problem,
            truth: flat,
            noise,
        });
    }
    Err(Error::Data(format!(
        "ground truth was all zero in {MAX_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::StochasticProblem;

    #[test]
    fn fairness_generation_is_deterministic() {
        let cfg = SyntheticFairnessConfig {
            n_samples: 300,
            ..Default::default()
        };
        let a = synthetic_fairness_data(&cfg, 9).unwrap();
        let b = synthetic_fairness_data(&cfg, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_features, 3);
        assert!(a.row(0)[2] == 1.0);
    }

    #[test]
    fn indefinite_covariance_rejected() {
        let cfg = SyntheticFairnessConfig {
            cov_pos: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            ..Default::default()
        };
        assert!(synthetic_fairness_data(&cfg, 0).is_err());
    }

    #[test]
    fn noiseless_mc_observes_truth() {
        let cfg = SyntheticMcConfig {
            rows: 20,
            cols: 30,
            rank: 3,
            gamma: 0.0,
            batch: 5,
            ..Default::default()
        };
        let p = gen_synthetic_mc(&cfg, 4).unwrap();
        let truth = p.ground_truth().unwrap();
        for &(k, v) in p.observed() {
            assert_eq!(v, truth[k]);
        }
        assert_eq!(p.observed().len() + p.unobserved().len(), 600);
        assert!(p.constraints(truth)[0].abs() < 1e-12);
    }

    #[test]
    fn all_zero_factors_exhaust_attempts() {
        let cfg = SyntheticMcConfig {
            rows: 4,
            cols: 4,
            rank: 1,
            sparsity_left: 1.0,
            batch: 1,
            ..Default::default()
        };
        assert!(matches!(gen_synthetic_mc(&cfg, 0), Err(Error::Data(_))));
    }
}
