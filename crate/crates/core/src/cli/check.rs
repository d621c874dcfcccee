use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::bench::{finite_diff_check, DeskQp, FdConfig};
use crate::error::Result;
use crate::linalg::{dist, dot};
use crate::problem::StochasticProblem;
use crate::problems::{gen_synthetic_mc, synthetic_fairness_data, FairClassificationProblem};
use crate::problems::{SyntheticFairnessConfig, SyntheticMcConfig};
use crate::rng::{stream_rng, STREAM_CHECK};
use crate::sets::{FeasibleSet, L1BallSet, L2BallSet, NuclearBallSet, PowerIterationConfig};
use crate::solvers::{run_collect, Algorithm, TraceConfig};
use crate::HyperParams;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
        }
    }
}

const FD_TOL: f64 = 1e-4;
const TRIALS: usize = 50;

fn fd<P: StochasticProblem, S: FeasibleSet>(name: &str, p: &P, s: &S, seed: u64) -> Result<CheckOutcome> {
    let cfg = FdConfig {
        seed,
        ..Default::default()
    };
    let report = finite_diff_check(p, s, &cfg)?;
    Ok(CheckOutcome::new(
        format!("gradient vs finite differences: {name} ({})", report.worst),
        report.max_rel_err,
        FD_TOL,
    ))
}

/// Oracle and set invariants on small instances of every problem.
pub fn run_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let mut rng = stream_rng(seed, STREAM_CHECK);

    let qp = DeskQp::default();
    out.push(fd("desk_qp", &qp, &qp.ball(), seed)?);
    let fair_cfg = SyntheticFairnessConfig {
        n_samples: 500,
        ..Default::default()
    };
    let fair = FairClassificationProblem::new(synthetic_fairness_data(&fair_cfg, seed)?, 0.05, 10.0)?
        .with_batch(4)?;
    out.push(fd("fairness", &fair, &fair.set(), seed)?);
    let mc_cfg = SyntheticMcConfig {
        rows: 12,
        cols: 15,
        rank: 3,
        batch: 5,
        observe_zero: 0.2,
        ..Default::default()
    };
    let mc = gen_synthetic_mc(&mc_cfg, seed)?;
    out.push(fd("matrix_completion", &mc, &mc.set(), seed)?);

    let dim = 6;
    let l1 = L1BallSet::new(dim, 2.0)?;
    let mut lmo_err: f64 = 0.0;
    for _ in 0..TRIALS {
        let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = l1.lmo(&d)?;
        let best = (0..dim)
            .flat_map(|j| [-2.0, 2.0].map(|r| r * d[j]))
            .fold(f64::INFINITY, f64::min);
        lmo_err = lmo_err.max(dot(&s, &d) - best);
    }
    out.push(CheckOutcome::new("l1 lmo matches vertex enumeration", lmo_err, 1e-12));

    let (rows, cols) = (5, 4);
    let nuc = NuclearBallSet::new(rows, cols, 3.0, PowerIterationConfig::default())?;
    let mut svd_err: f64 = 0.0;
    for _ in 0..TRIALS {
        let d: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sigma = DMatrix::from_row_slice(rows, cols, &d).singular_values().max();
        let s = nuc.lmo(&d)?;
        svd_err = svd_err.max((dot(&s, &d) + 3.0 * sigma).abs() / (3.0 * sigma));
    }
    out.push(CheckOutcome::new("nuclear lmo matches dense svd", svd_err, 1e-6));

    let ball = L2BallSet::centered(dim, 1.5)?;
    let (mut idem, mut expand, mut member): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..TRIALS {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let px = ball.project(&x)?;
        let py = ball.project(&y)?;
        idem = idem.max(dist(&ball.project(&px)?, &px));
        expand = expand.max(dist(&px, &py) - dist(&x, &y));
        member = member.max(ball.membership_residual(&px));
    }
    out.push(CheckOutcome::new("projection is idempotent", idem, 1e-12));
    out.push(CheckOutcome::new("projection is nonexpansive", expand, 1e-12));
    out.push(CheckOutcome::new("projection lands in the set", member, 1e-9));

    for algorithm in [Algorithm::Csoa, Algorithm::FwCsoa] {
        let hp = HyperParams {
            eta: 0.05,
            delta: 1.0,
            upsilon: 0.1,
            rho: 0.5,
            horizon: 500,
            seed,
        };
        let cfg = TraceConfig {
            stride: 1,
            check_membership: true,
        };
        let r = run_collect(algorithm, &qp, &qp.ball(), &hp, vec![0.0; 2], &cfg)?;
        out.push(CheckOutcome::new(
            format!("{}: iterates stay feasible", algorithm.name()),
            r.max_membership_residual.unwrap_or(f64::INFINITY),
            1e-9,
        ));
        out.push(CheckOutcome::new(
            format!("{}: multipliers stay nonnegative", algorithm.name()),
            (-r.min_lambda).max(0.0),
            0.0,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_checks(3).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }
}
