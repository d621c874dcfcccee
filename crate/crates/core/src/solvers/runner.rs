use serde::{Deserialize, Serialize};

use super::{csoa_step, fw_csoa_step};
use crate::error::{Error, Result};
use crate::linalg::KahanSum;
use crate::model::{HyperParams, SolverState};
use crate::problem::StochasticProblem;
use crate::sets::{Counted, FeasibleSet, MEMBERSHIP_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Csoa,
    FwCsoa,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Csoa => "csoa",
            Algorithm::FwCsoa => "fw_csoa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceConfig {
    /// Record every `stride` iterations; 0 picks `max(1, T / 200)`.
    #[serde(default)]
    pub stride: usize,
    /// Check set membership of every iterate (costly for matrix sets).
    #[serde(default)]
    pub check_membership: bool,
}

impl TraceConfig {
    pub fn every(stride: usize) -> Self {
        Self {
            stride,
            check_membership: false,
        }
    }

    pub fn effective_stride(&self, horizon: usize) -> usize {
        if self.stride == 0 {
            (horizon / 200).max(1)
        } else {
            self.stride
        }
    }
}

/// One trace row, describing the iterate `x_t` before step `t` is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    /// Full-data estimate of `F(x_t)`.
    pub obj_est: f64,
    /// Mean of `obj_est` over the rows recorded so far.
    pub obj_avg: f64,
    /// Full-data estimates of `H_i(x_t)`.
    pub h: Vec<f64>,
    pub h_avg: Vec<f64>,
    pub lambda_norm: f64,
    pub eta: f64,
    pub upsilon: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub hyper: HyperParams,
    pub state: SolverState,
    pub trace: Vec<TraceRecord>,
    pub stride: usize,
    pub projection_calls: usize,
    pub lmo_calls: usize,
    pub max_lambda_norm: f64,
    pub min_lambda: f64,
    /// Largest membership residual seen, when checking was requested.
    pub max_membership_residual: Option<f64>,
    pub warnings: Vec<String>,
}

impl RunResult {
    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.trace.last()
    }
}

/// Runs `hp.horizon` iterations from `x0`, passing every trace row to `sink`
/// as it is produced. The returned trace holds the same rows.
pub fn run<P, S>(
    algorithm: Algorithm,
    problem: &P,
    set: &S,
    hp: &HyperParams,
    x0: Vec<f64>,
    trace_cfg: &TraceConfig,
    sink: &mut dyn FnMut(&TraceRecord) -> Result<()>,
) -> Result<RunResult>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    let caps = set.capabilities();
    match algorithm {
        Algorithm::Csoa => {
            if !caps.has_projection {
                return Err(Error::invalid("csoa needs a set with a projection"));
            }
            hp.validate()?;
        }
        Algorithm::FwCsoa => {
            if !caps.has_lmo {
                return Err(Error::invalid("fw_csoa needs a set with a linear minimization oracle"));
            }
            hp.validate_frank_wolfe()?;
        }
    }
    let m = problem.dim();
    let n = problem.num_constraints();
    if set.dim() != m {
        return Err(Error::dim("feasible set dimension", m, set.dim()));
    }
    if x0.len() != m {
        return Err(Error::dim("initial point", m, x0.len()));
    }
    let residual = set.membership_residual(&x0);
    if residual > MEMBERSHIP_TOL {
        return Err(Error::invalid(format!(
            "initial point lies outside the feasible set (residual {residual:e})"
        )));
    }

    let mut warnings = Vec::new();
    if 1.0 - hp.eta * hp.eta * hp.delta < 0.0 {
        let w = format!(
            "dual decay 1 - eta^2 delta = {:.4e} is negative and is clamped to 0",
            1.0 - hp.eta * hp.eta * hp.delta
        );
        log::warn!("{w}");
        warnings.push(w);
    }

    let counted = Counted::new(set);
    let stride = trace_cfg.effective_stride(hp.horizon);
    let mut state = match algorithm {
        Algorithm::Csoa => SolverState::new_projected(x0, n),
        Algorithm::FwCsoa => SolverState::new_frank_wolfe(x0, n),
    };
    let mut trace = Vec::with_capacity(hp.horizon / stride + 1);
    let mut obj_sum = KahanSum::new();
    let mut h_sums = vec![KahanSum::new(); n];
    let mut rows = 0usize;
    let mut max_lambda_norm = 0.0f64;
    let mut min_lambda = 0.0f64;
    let mut max_residual = trace_cfg.check_membership.then_some(residual);

    for t in 1..=hp.horizon {
        debug_assert_eq!(state.t, t);
        if (t - 1) % stride == 0 {
            let obj_est = problem.objective(&state.x);
            let h = problem.constraints(&state.x);
            rows += 1;
            obj_sum.add(obj_est);
            for (s, v) in h_sums.iter_mut().zip(&h) {
                s.add(*v);
            }
            let record = TraceRecord {
                t,
                obj_est,
                obj_avg: obj_sum.value() / rows as f64,
                h_avg: h_sums.iter().map(|s| s.value() / rows as f64).collect(),
                h,
                lambda_norm: state.lambda_norm(),
                eta: hp.eta,
                upsilon: hp.upsilon,
            };
            sink(&record)?;
            trace.push(record);
        }

        let next = match algorithm {
            Algorithm::Csoa => csoa_step(&state, hp, problem, &counted),
            Algorithm::FwCsoa => fw_csoa_step(&state, hp, problem, &counted),
        };
        state = next.map_err(|e| abort(t, e))?;

        max_lambda_norm = max_lambda_norm.max(state.lambda_norm());
        if let Some(lo) = state.lambda.iter().copied().reduce(f64::min) {
            min_lambda = min_lambda.min(lo);
        }
        if let Some(r) = max_residual.as_mut() {
            *r = r.max(set.membership_residual(&state.x));
        }
    }

    Ok(RunResult {
        algorithm,
        hyper: *hp,
        state,
        trace,
        stride,
        projection_calls: counted.projection_calls(),
        lmo_calls: counted.lmo_calls(),
        max_lambda_norm,
        min_lambda,
        max_membership_residual: max_residual,
        warnings,
    })
}

/// [`run`] without a streaming sink.
pub fn run_collect<P, S>(
    algorithm: Algorithm,
    problem: &P,
    set: &S,
    hp: &HyperParams,
    x0: Vec<f64>,
    trace_cfg: &TraceConfig,
) -> Result<RunResult>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    run(algorithm, problem, set, hp, x0, trace_cfg, &mut |_| Ok(()))
}

fn abort(iteration: usize, err: Error) -> Error {
    if err.is_numeric() {
        Error::NumericAbort {
            iteration,
            reason: err.to_string(),
        }
    } else {
        err
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::DeskQp;

    fn hp(horizon: usize) -> HyperParams {
        HyperParams {
            eta: 0.05,
            delta: 1.0,
            upsilon: 0.1,
            rho: 0.5,
            horizon,
            seed: 3,
        }
    }

    #[test]
    fn zero_horizon_gives_empty_trace() {
        let qp = DeskQp::default();
        let r = run_collect(Algorithm::Csoa, &qp, &qp.ball(), &hp(0), vec![0.0; 2], &TraceConfig::every(1))
            .unwrap();
        assert!(r.trace.is_empty());
        assert_eq!(r.state.x, vec![0.0; 2]);
    }

    #[test]
    fn stride_selects_rows() {
        let qp = DeskQp::default();
        let r = run_collect(Algorithm::Csoa, &qp, &qp.ball(), &hp(10), vec![0.0; 2], &TraceConfig::every(4))
            .unwrap();
        let ts: Vec<usize> = r.trace.iter().map(|row| row.t).collect();
        assert_eq!(ts, vec![1, 5, 9]);
        let mean = r.trace.iter().map(|row| row.obj_est).sum::<f64>() / 3.0;
        assert!((r.trace[2].obj_avg - mean).abs() <= 1e-15);
    }

    #[test]
    fn infeasible_start_and_missing_capability_rejected() {
        let qp = DeskQp::default();
        let cfg = TraceConfig::every(1);
        assert!(run_collect(Algorithm::Csoa, &qp, &qp.ball(), &hp(5), vec![2.0, 0.0], &cfg).is_err());
        assert!(run_collect(Algorithm::Csoa, &qp, &qp.l1_ball(), &hp(5), vec![0.0; 2], &cfg).is_err());
    }
}
