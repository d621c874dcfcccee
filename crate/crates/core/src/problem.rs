use crate::error::Result;
use crate::model::{OracleEval, SampleContext};

/// A stochastic program `min F(x) s.t. H(x) <= 0` with `F = E f(., theta)` and
/// `H = E h(., theta)`.
///
/// Implementations hold immutable data and must be usable from several runs
/// at once; all randomness flows through [`SampleContext`].
pub trait StochasticProblem: Send + Sync {
    /// One realization of `theta` (a data row, a minibatch of indices, ...).
    type Sample: Send + Sync;

    fn dim(&self) -> usize;

    fn num_constraints(&self) -> usize;

    /// Materializes the sample identified by `ctx`. Must be a pure function of
    /// `ctx.rng_tag`.
    fn draw(&self, ctx: &SampleContext) -> Result<Self::Sample>;

    fn evaluate(&self, x: &[f64], sample: &Self::Sample) -> Result<OracleEval>;

    /// Sampled values `(f(x, theta), h(x, theta))`; used for finite-difference
    /// checks of [`evaluate`](Self::evaluate).
    fn sampled_values(&self, x: &[f64], sample: &Self::Sample) -> Result<(f64, Vec<f64>)>;

    /// Full-data (or closed-form) estimate of `F(x)`.
    fn objective(&self, x: &[f64]) -> f64;

    /// Full-data (or closed-form) estimate of `H(x)`.
    fn constraints(&self, x: &[f64]) -> Vec<f64>;

    /// `(grad F(x), rows grad H_i(x))`.
    fn full_gradients(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>);

    fn oracle(&self, x: &[f64], ctx: &SampleContext) -> Result<OracleEval> {
        let sample = self.draw(ctx)?;
        self.evaluate(x, &sample)
    }
}
