use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, kahan_sum};
use crate::model::{OracleEval, SampleContext};
use crate::problem::StochasticProblem;
use crate::rng::stream_rng;
use crate::sets::L2BallSet;

/// Row-major feature matrix with binary labels and sensitive attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairData {
    pub features: Vec<f64>,
    pub n_features: usize,
    pub labels: Vec<f64>,
    pub sensitive: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl FairData {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<f64>,
        sensitive: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n_features == 0 || features.len() != n * n_features {
            return Err(Error::dim("feature matrix", n * n_features, features.len()));
        }
        if sensitive.len() != n {
            return Err(Error::dim("sensitive attribute", n, sensitive.len()));
        }
        if feature_names.len() != n_features {
            return Err(Error::dim("feature names", n_features, feature_names.len()));
        }
        for (what, col) in [("label", &labels), ("sensitive attribute", &sensitive)] {
            if let Some(i) = col.iter().position(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::Data(format!("{what} of row {i} is {} (expected 0 or 1)", col[i])));
            }
        }
        Ok(Self {
            features,
            n_features,
            labels,
            sensitive,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Rows selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.n_features);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            n_features: self.n_features,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            sensitive: idx.iter().map(|&i| self.sensitive[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Logistic regression with a two-sided bound on the covariance between the
/// sensitive attribute and the signed distance to the decision boundary,
/// encoded as `cov - c <= 0` and `-cov - c <= 0`.
#[derive(Debug, Clone)]
pub struct FairClassificationProblem {
    data: FairData,
    centered_s: Vec<f64>,
    s_bar: f64,
    c: f64,
    radius: f64,
    batch: usize,
    constrained: bool,
}

impl FairClassificationProblem {
    /// `s_bar` is computed from `data` once and frozen.
    pub fn new(data: FairData, c: f64, radius: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("fairness dataset is empty".into()));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(format!("covariance budget must be positive, got {c}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("weight ball radius must be positive, got {radius}")));
        }
        let s_bar = kahan_sum(data.sensitive.iter().copied()) / data.len() as f64;
        Ok(Self {
            centered_s: data.sensitive.iter().map(|s| s - s_bar).collect(),
            data,
            s_bar,
            c,
            radius,
            batch: 1,
            constrained: true,
        })
    }

    pub fn with_batch(mut self, batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(Error::invalid("minibatch size must be at least 1"));
        }
        self.batch = batch;
        Ok(self)
    }

    /// Same data and objective with the covariance constraints dropped.
    pub fn unconstrained(&self) -> Self {
        Self {
            constrained: false,
            ..self.clone()
        }
    }

    pub fn data(&self) -> &FairData {
        &self.data
    }

    pub fn s_bar(&self) -> f64 {
        self.s_bar
    }

    pub fn budget(&self) -> f64 {
        self.c
    }

    pub fn set(&self) -> L2BallSet {
        L2BallSet::centered(self.data.n_features, self.radius).expect("validated radius")
    }

    /// `(1/n) sum (s_i - s_bar) <theta, x_i>`.
    pub fn covariance(&self, theta: &[f64]) -> f64 {
        kahan_sum(
            (0..self.data.len()).map(|i| self.centered_s[i] * dot(theta, self.data.row(i))),
        ) / self.data.len() as f64
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.data.n_features {
            return Err(Error::dim("fairness weights", self.data.n_features, x.len()));
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y log s(z) + (1 - y) log(1 - s(z))] = softplus(z) - y z`.
fn logistic_loss(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

impl StochasticProblem for FairClassificationProblem {
    /// Row indices, drawn with replacement.
    type Sample = Vec<usize>;

    fn dim(&self) -> usize {
        self.data.n_features
    }

    fn num_constraints(&self) -> usize {
        if self.constrained {
            2
        } else {
            0
        }
    }

    fn draw(&self, ctx: &SampleContext) -> Result<Vec<usize>> {
        let mut rng = stream_rng(ctx.rng_tag, 0);
        let n = self.data.len();
        Ok((0..self.batch).map(|_| rng.random_range(0..n)).collect())
    }

    fn evaluate(&self, x: &[f64], sample: &Vec<usize>) -> Result<OracleEval> {
        self.check_point(x)?;
        let m = self.data.n_features;
        let k = sample.len() as f64;
        let mut grad = vec![0.0; m];
        let mut slope = vec![0.0; m];
        let mut cov = 0.0;
        for &i in sample {
            let row = self.data.row(i);
            let z = dot(x, row);
            let r = (sigmoid(z) - self.data.labels[i]) / k;
            let w = self.centered_s[i] / k;
            for j in 0..m {
                grad[j] += r * row[j];
                slope[j] += w * row[j];
            }
            cov += w * z;
        }
        let (constr_vals, constr_jac) = if self.constrained {
            let neg: Vec<f64> = slope.iter().map(|v| -v).collect();
            (vec![cov - self.c, -cov - self.c], vec![slope, neg])
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(OracleEval {
            obj_grad: grad,
            constr_vals,
            constr_jac,
        })
    }

    fn sampled_values(&self, x: &[f64], sample: &Vec<usize>) -> Result<(f64, Vec<f64>)> {
        self.check_point(x)?;
        let k = sample.len() as f64;
        let mut f = 0.0;
        let mut cov = 0.0;
        for &i in sample {
            let z = dot(x, self.data.row(i));
            f += logistic_loss(z, self.data.labels[i]) / k;
            cov += self.centered_s[i] * z / k;
        }
        let h = if self.constrained {
            vec![cov - self.c, -cov - self.c]
        } else {
            Vec::new()
        };
        Ok((f, h))
    }

    fn objective(&self, x: &[f64]) -> f64 {
        kahan_sum(
            (0..self.data.len()).map(|i| logistic_loss(dot(x, self.data.row(i)), self.data.labels[i])),
        ) / self.data.len() as f64
    }

    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        if !self.constrained {
            return Vec::new();
        }
        let cov = self.covariance(x);
        vec![cov - self.c, -cov - self.c]
    }

    fn full_gradients(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let all: Vec<usize> = (0..self.data.len()).collect();
        let eval = self.evaluate(x, &all).expect("dimension checked by caller");
        (eval.obj_grad, eval.constr_jac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FairClassificationProblem {
        let data = FairData::new(
            vec![1.0, 2.0, -1.0, 0.5, 0.0, 1.0, 2.0, -2.0],
            2,
            vec![1.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        FairClassificationProblem::new(data, 0.05, 10.0).unwrap()
    }

    #[test]
    fn zero_weights() {
        let p = toy();
        let e = p.evaluate(&[0.0, 0.0], &vec![0]).unwrap();
        assert_eq!(e.obj_grad, vec![-0.5, -1.0]);
        assert_eq!(e.constr_vals, vec![-0.05, -0.05]);
        // s_bar = 0.5, s = 1 row: slope 0.5 x_i
        assert_eq!(e.constr_jac[0], vec![0.5, 1.0]);
    }

    #[test]
    fn constraint_symmetry() {
        let p = toy();
        let h = p.constraints(&[0.3, -1.2]);
        assert!((h[0] + h[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn unconstrained_has_no_constraints() {
        let p = toy().unconstrained();
        assert_eq!(p.num_constraints(), 0);
        assert!(p.evaluate(&[0.1, 0.1], &vec![1, 2]).unwrap().constr_vals.is_empty());
    }

    #[test]
    fn non_binary_labels_rejected() {
        let r = FairData::new(vec![1.0], 1, vec![2.0], vec![0.0], vec!["a".into()]);
        assert!(matches!(r, Err(Error::Data(_))));
    }

    #[test]
    fn loss_is_stable_for_large_margins() {
        assert!((logistic_loss(800.0, 1.0)).abs() < 1e-12);
        assert!((logistic_loss(-800.0, 1.0) - 800.0).abs() < 1e-9);
    }
}
