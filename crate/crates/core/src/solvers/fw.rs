use super::dual_update;
use crate::error::{Error, Result};
use crate::lagrangian::primal_grad;
use crate::linalg::all_finite;
use crate::model::{HyperParams, SampleContext, SolverState};
use crate::problem::StochasticProblem;
use crate::sets::FeasibleSet;

/// One projection-free step with momentum gradient tracking.
///
/// Both Lagrangian gradients use the same `theta_t`:
///
/// ```text
/// d_t     = (1 - rho) d_{t-1} + g(x_t, lambda_t) - (1 - rho) g(x_{t-1}, lambda_{t-1})
/// s_t     = lmo(d_t)
/// x_{t+1} = x_t + eta (s_t - x_t)
/// ```
///
/// followed by the same dual update as [`csoa_step`](super::csoa_step).
pub fn fw_csoa_step<P, S>(
    state: &SolverState,
    hp: &HyperParams,
    problem: &P,
    set: &S,
) -> Result<SolverState>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    let m = problem.dim();
    let n = problem.num_constraints();
    if state.d.len() != m || state.x_prev.len() != m || state.lambda_prev.len() != n {
        return Err(Error::invalid(
            "FW-CSOA state must carry d, x_prev and lambda_prev",
        ));
    }

    let ctx = SampleContext::for_iteration(hp.seed, state.t as u64);
    let sample = problem.draw(&ctx)?;
    let cur = problem.evaluate(&state.x, &sample)?;
    cur.validate(m, n)?;
    let prev = problem.evaluate(&state.x_prev, &sample)?;
    prev.validate(m, n)?;

    let g_cur = primal_grad(&cur, &state.lambda)?;
    let g_prev = primal_grad(&prev, &state.lambda_prev)?;
    let keep = 1.0 - hp.rho;
    let d: Vec<f64> = state
        .d
        .iter()
        .zip(g_cur.iter().zip(&g_prev))
        .map(|(d, (gc, gp))| keep * d + gc - keep * gp)
        .collect();
    if !all_finite(&d) {
        return Err(Error::NonFinite("tracked gradient"));
    }

    let s = set.lmo(&d)?;
    let x: Vec<f64> = state
        .x
        .iter()
        .zip(&s)
        .map(|(xi, si)| xi + hp.eta * (si - xi))
        .collect();
    let lambda = dual_update(&state.lambda, &cur.constr_vals, hp);

    Ok(SolverState {
        x,
        lambda,
        d,
        t: state.t + 1,
        x_prev: state.x.clone(),
        lambda_prev: state.lambda.clone(),
    })
}
