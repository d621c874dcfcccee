use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kahan_sum, KahanSum};
use crate::model::{OracleEval, SampleContext};
use crate::problem::StochasticProblem;
use crate::rng::stream_rng;
use crate::sets::{NuclearBallSet, PowerIterationConfig};

/// Scaling of the minibatch oracle.
///
/// `Sum` targets `f = 1/2 sum_I (X - M)^2` and `h = 1/2 sum_Ic X^2 - beta`;
/// `Mean` divides both by the size of their index set, which leaves the
/// minimizer unchanged but puts step sizes on a per-entry scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Sum,
    Mean,
}

/// Nuclear-norm constrained completion with an energy budget on the
/// unobserved cells. Matrices are `rows x cols`, row-major.
#[derive(Debug, Clone)]
pub struct MatrixCompletionProblem {
    rows: usize,
    cols: usize,
    /// `(flat index, value)` for observed cells.
    observed: Vec<(usize, f64)>,
    unobserved: Vec<usize>,
    alpha: f64,
    beta: f64,
    batch: usize,
    normalization: Normalization,
    power: PowerIterationConfig,
    ground_truth: Option<Vec<f64>>,
}

/// Sampled cells: positions into the observed and unobserved lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McSample {
    pub observed: Vec<usize>,
    pub unobserved: Vec<usize>,
}

impl MatrixCompletionProblem {
    pub fn new(
        rows: usize,
        cols: usize,
        observed: Vec<(usize, f64)>,
        alpha: f64,
        beta: f64,
        batch: usize,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix shape must be positive"));
        }
        let cells = rows * cols;
        let mut seen = vec![false; cells];
        for &(k, v) in &observed {
            if k >= cells {
                return Err(Error::invalid(format!("observed cell {k} outside {rows}x{cols}")));
            }
            if seen[k] {
                return Err(Error::invalid(format!("observed cell {k} listed twice")));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("observed matrix entry"));
            }
            seen[k] = true;
        }
        let unobserved: Vec<usize> = (0..cells).filter(|&k| !seen[k]).collect();
        if observed.is_empty() || unobserved.is_empty() {
            return Err(Error::invalid("both observed and unobserved cell sets must be nonempty"));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!("nuclear radius must be positive, got {alpha}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid(format!("energy budget must be nonnegative, got {beta}")));
        }
        let p = Self {
            rows,
            cols,
            observed,
            unobserved,
            alpha,
            beta,
            batch,
            normalization: Normalization::Sum,
            power: PowerIterationConfig::default(),
            ground_truth: None,
        };
        p.check_batch(batch)?;
        Ok(p)
    }

    fn check_batch(&self, b: usize) -> Result<()> {
        if b == 0 || b > self.observed.len() || b > self.unobserved.len() {
            return Err(Error::invalid(format!(
                "minibatch size {b} must lie in [1, min(|I| = {}, |Ic| = {})]",
                self.observed.len(),
                self.unobserved.len()
            )));
        }
        Ok(())
    }

    pub fn with_batch(mut self, batch: usize) -> Result<Self> {
        self.check_batch(batch)?;
        self.batch = batch;
        Ok(self)
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_power_config(mut self, power: PowerIterationConfig) -> Self {
        self.power = power;
        self
    }

    pub fn with_ground_truth(mut self, truth: Vec<f64>) -> Result<Self> {
        if truth.len() != self.rows * self.cols {
            return Err(Error::dim("ground truth", self.rows * self.cols, truth.len()));
        }
        self.ground_truth = Some(truth);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn observed(&self) -> &[(usize, f64)] {
        &self.observed
    }

    pub fn unobserved(&self) -> &[usize] {
        &self.unobserved
    }

    pub fn ground_truth(&self) -> Option<&[f64]> {
        self.ground_truth.as_deref()
    }

    pub fn set(&self) -> NuclearBallSet {
        NuclearBallSet::new(self.rows, self.cols, self.alpha, self.power).expect("validated radius")
    }

    /// `1/2 sum_Ic X^2 - beta`, independent of the normalization.
    pub fn energy_violation(&self, x: &[f64]) -> f64 {
        0.5 * kahan_sum(self.unobserved.iter().map(|&k| x[k] * x[k])) - self.beta
    }

    /// Converts a constraint value reported by this problem back to
    /// `1/2 sum_Ic X^2 - beta` units.
    pub fn to_sum_units(&self, h: f64) -> f64 {
        match self.normalization {
            Normalization::Sum => h,
            Normalization::Mean => h * self.unobserved.len() as f64,
        }
    }

    fn scales(&self) -> (f64, f64) {
        let b = self.batch as f64;
        match self.normalization {
            Normalization::Sum => (self.observed.len() as f64 / b, self.unobserved.len() as f64 / b),
            Normalization::Mean => (1.0 / b, 1.0 / b),
        }
    }

    fn full_scales(&self) -> (f64, f64) {
        match self.normalization {
            Normalization::Sum => (1.0, 1.0),
            Normalization::Mean => (
                1.0 / self.observed.len() as f64,
                1.0 / self.unobserved.len() as f64,
            ),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.rows * self.cols {
            return Err(Error::dim("matrix iterate", self.rows * self.cols, x.len()));
        }
        Ok(())
    }
}

impl StochasticProblem for MatrixCompletionProblem {
    type Sample = McSample;

    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn num_constraints(&self) -> usize {
        1
    }

    /// `b` observed and `b` unobserved cells, each without replacement.
    fn draw(&self, ctx: &SampleContext) -> Result<McSample> {
        let mut rng = stream_rng(ctx.rng_tag, 0);
        let observed = sample(&mut rng, self.observed.len(), self.batch).into_vec();
        let unobserved = sample(&mut rng, self.unobserved.len(), self.batch).into_vec();
        Ok(McSample {
            observed,
            unobserved,
        })
    }

    fn evaluate(&self, x: &[f64], s: &McSample) -> Result<OracleEval> {
        self.check_point(x)?;
        let (so, su) = self.scales();
        let mut grad = vec![0.0; x.len()];
        for &p in &s.observed {
            let (k, m) = self.observed[p];
            grad[k] = (x[k] - m) * so;
        }
        let mut jac = vec![0.0; x.len()];
        let mut energy = 0.0;
        for &p in &s.unobserved {
            let k = self.unobserved[p];
            jac[k] = x[k] * su;
            energy += x[k] * x[k];
        }
        let beta = match self.normalization {
            Normalization::Sum => self.beta,
            Normalization::Mean => self.beta / self.unobserved.len() as f64,
        };
        Ok(OracleEval {
            obj_grad: grad,
            constr_vals: vec![su * 0.5 * energy - beta],
            constr_jac: vec![jac],
        })
    }

    fn sampled_values(&self, x: &[f64], s: &McSample) -> Result<(f64, Vec<f64>)> {
        self.check_point(x)?;
        let (so, su) = self.scales();
        let fit: f64 = s
            .observed
            .iter()
            .map(|&p| {
                let (k, m) = self.observed[p];
                (x[k] - m) * (x[k] - m)
            })
            .sum();
        let energy: f64 = s.unobserved.iter().map(|&p| x[self.unobserved[p]].powi(2)).sum();
        let beta = match self.normalization {
            Normalization::Sum => self.beta,
            Normalization::Mean => self.beta / self.unobserved.len() as f64,
        };
        Ok((so * 0.5 * fit, vec![su * 0.5 * energy - beta]))
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let mut acc = KahanSum::new();
        for &(k, m) in &self.observed {
            acc.add((x[k] - m) * (x[k] - m));
        }
        0.5 * acc.value() * self.full_scales().0
    }

    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        vec![self.energy_violation(x) * self.full_scales().1]
    }

    fn full_gradients(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let (so, su) = self.full_scales();
        let mut grad = vec![0.0; x.len()];
        for &(k, m) in &self.observed {
            grad[k] = (x[k] - m) * so;
        }
        let mut jac = vec![0.0; x.len()];
        for &k in &self.unobserved {
            jac[k] = x[k] * su;
        }
        (grad, vec![jac])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(batch: usize) -> MatrixCompletionProblem {
        // 2x2, observed (0,0)=1 and (1,1)=2
        MatrixCompletionProblem::new(2, 2, vec![(0, 1.0), (3, 2.0)], 3.0, 0.5, batch).unwrap()
    }

    #[test]
    fn zero_iterate() {
        let p = tiny(1);
        let s = McSample {
            observed: vec![1],
            unobserved: vec![0],
        };
        let e = p.evaluate(&[0.0; 4], &s).unwrap();
        assert_eq!(e.obj_grad, vec![0.0, 0.0, 0.0, -4.0]);
        assert_eq!(e.constr_vals, vec![-0.5]);
    }

    #[test]
    fn full_batch_is_exact() {
        let p = tiny(2);
        let x = [0.3, -1.0, 2.0, 0.7];
        let s = p.draw(&SampleContext::for_iteration(1, 1)).unwrap();
        let e = p.evaluate(&x, &s).unwrap();
        let (g, j) = p.full_gradients(&x);
        assert_eq!(e.obj_grad, g);
        assert_eq!(e.constr_jac, j);
        assert!((e.constr_vals[0] - p.constraints(&x)[0]).abs() < 1e-15);
    }

    #[test]
    fn oversized_batch_rejected() {
        assert!(MatrixCompletionProblem::new(2, 2, vec![(0, 1.0), (3, 2.0)], 3.0, 0.5, 3).is_err());
    }

    #[test]
    fn mean_normalization_rescales() {
        let p = tiny(2).with_normalization(Normalization::Mean);
        let x = [0.3, -1.0, 2.0, 0.7];
        let h = p.constraints(&x)[0];
        assert!((p.to_sum_units(h) - p.energy_violation(&x)).abs() < 1e-15);
    }
}
