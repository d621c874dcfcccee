use super::dual_update;
use crate::error::{Error, Result};
use crate::lagrangian::primal_grad;
use crate::linalg::{all_finite, axpy};
use crate::model::{HyperParams, SampleContext, SolverState};
use crate::problem::StochasticProblem;
use crate::sets::FeasibleSet;

/// One projected primal-dual step.
///
/// Draws `theta_t` from `(hp.seed, state.t)`, then
/// `x_{t+1} = P(x_t - eta (grad f + J^T lambda_t))` and the clipped dual
/// update, both evaluated at the pre-update `x_t` under the same sample.
pub fn csoa_step<P, S>(
    state: &SolverState,
    hp: &HyperParams,
    problem: &P,
    set: &S,
) -> Result<SolverState>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    let ctx = SampleContext::for_iteration(hp.seed, state.t as u64);
    let eval = problem.oracle(&state.x, &ctx)?;
    eval.validate(problem.dim(), problem.num_constraints())?;

    let g = primal_grad(&eval, &state.lambda)?;
    let mut y = state.x.clone();
    axpy(-hp.eta, &g, &mut y);
    let x = set.project(&y)?;
    if !all_finite(&x) {
        return Err(Error::NonFinite("projected iterate"));
    }
    let lambda = dual_update(&state.lambda, &eval.constr_vals, hp);

    Ok(SolverState {
        x,
        lambda,
        d: Vec::new(),
        t: state.t + 1,
        x_prev: Vec::new(),
        lambda_prev: Vec::new(),
    })
}
