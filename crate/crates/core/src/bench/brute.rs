use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, norm};
use crate::problem::StochasticProblem;
use crate::sets::{FeasibleSet, MEMBERSHIP_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Lattice bounding box; should contain the set.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: f64,
}

impl GridConfig {
    pub fn cube(dim: usize, half_width: f64, resolution: f64) -> Self {
        Self {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
            resolution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualConfig {
    pub step: f64,
    pub max_iters: usize,
    pub kkt_tol: f64,
    pub check_every: usize,
}

impl Default for PrimalDualConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            max_iters: 1_000_000,
            kkt_tol: 1e-6,
            check_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BruteConfig {
    Grid(GridConfig),
    PrimalDual(PrimalDualConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub lambda: Vec<f64>,
    /// KKT residual at `x` (primal-dual mode) or `None` for the grid.
    pub kkt_residual: Option<f64>,
    pub iterations: usize,
}

/// Reference optimum by exhaustive lattice search or a certified full-batch
/// primal-dual run.
pub fn brute_force_solve<P, S>(problem: &P, set: &S, cfg: &BruteConfig) -> Result<BruteSolution>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    match cfg {
        BruteConfig::Grid(g) => grid_solve(problem, set, g),
        BruteConfig::PrimalDual(pd) => {
            let x0 = set.project(&vec![0.0; problem.dim()])?;
            primal_dual_solve(problem, set, x0, pd)
        }
    }
}

pub fn grid_solve<P, S>(problem: &P, set: &S, cfg: &GridConfig) -> Result<BruteSolution>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    let m = problem.dim();
    if m == 0 || m > 3 {
        return Err(Error::invalid(format!("grid search supports 1 to 3 dimensions, got {m}")));
    }
    if cfg.lower.len() != m || cfg.upper.len() != m {
        return Err(Error::dim("grid bounds", m, cfg.lower.len().min(cfg.upper.len())));
    }
    if !(cfg.resolution.is_finite() && cfg.resolution > 0.0) {
        return Err(Error::invalid("grid resolution must be positive"));
    }
    let counts: Vec<usize> = cfg
        .lower
        .iter()
        .zip(&cfg.upper)
        .map(|(l, u)| ((u - l) / cfg.resolution).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    if total > 200_000_000 {
        return Err(Error::invalid(format!("grid has {total} points; refusing")));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut x = vec![0.0; m];
    for flat in 0..total {
        let mut rest = flat;
        for k in 0..m {
            x[k] = cfg.lower[k] + (rest % counts[k]) as f64 * cfg.resolution;
            rest /= counts[k];
        }
        if set.membership_residual(&x) > MEMBERSHIP_TOL {
            continue;
        }
        if problem.constraints(&x).iter().any(|&h| h > 0.0) {
            continue;
        }
        let f = problem.objective(&x);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, x.clone()));
        }
    }
    let (objective, x) = best.ok_or_else(|| Error::invalid("no feasible grid point"))?;
    Ok(BruteSolution {
        x,
        objective,
        lambda: Vec::new(),
        kkt_residual: None,
        iterations: total,
    })
}

/// `|x - P(x - grad F - J^T lambda)| + sum |lambda_i H_i| + |max(0, H)|`.
pub fn kkt_residual<P, S>(problem: &P, set: &S, x: &[f64], lambda: &[f64]) -> Result<f64>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    let (g, jac) = problem.full_gradients(x);
    let h = problem.constraints(x);
    let mut y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gi).collect();
    for (row, l) in jac.iter().zip(lambda) {
        crate::linalg::axpy(-l, row, &mut y);
    }
    let stationarity = dist(x, &set.project(&y)?);
    let complementarity: f64 = lambda.iter().zip(&h).map(|(l, hi)| (l * hi).abs()).sum();
    let infeasibility = norm(&h.iter().map(|v| v.max(0.0)).collect::<Vec<_>>());
    Ok(stationarity + complementarity + infeasibility)
}

/// Projected gradient descent-ascent on the exact Lagrangian with a constant
/// step, stopped once the KKT residual drops below `kkt_tol`.
pub fn primal_dual_solve<P, S>(
    problem: &P,
    set: &S,
    x0: Vec<f64>,
    cfg: &PrimalDualConfig,
) -> Result<BruteSolution>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    if !set.capabilities().has_projection {
        return Err(Error::invalid("primal-dual reference needs a projection"));
    }
    if !(cfg.step.is_finite() && cfg.step > 0.0) || cfg.check_every == 0 {
        return Err(Error::invalid("primal-dual step and check interval must be positive"));
    }
    let mut x = set.project(&x0)?;
    let mut lambda = vec![0.0; problem.num_constraints()];
    let mut residual = f64::INFINITY;
    for k in 0..=cfg.max_iters {
        if k % cfg.check_every == 0 {
            residual = kkt_residual(problem, set, &x, &lambda)?;
            if residual <= cfg.kkt_tol {
                return Ok(BruteSolution {
                    objective: problem.objective(&x),
                    x,
                    lambda,
                    kkt_residual: Some(residual),
                    iterations: k,
                });
            }
        }
        let (g, jac) = problem.full_gradients(&x);
        let h = problem.constraints(&x);
        let mut y = x.clone();
        crate::linalg::axpy(-cfg.step, &g, &mut y);
        for (row, l) in jac.iter().zip(&lambda) {
            crate::linalg::axpy(-cfg.step * l, row, &mut y);
        }
        x = set.project(&y)?;
        for (l, hi) in lambda.iter_mut().zip(&h) {
            *l = (*l + cfg.step * hi).max(0.0);
        }
        if !crate::linalg::all_finite(&x) {
            return Err(Error::NonFinite("primal-dual reference iterate"));
        }
    }
    Err(Error::NumericAbort {
        iteration: cfg.max_iters,
        reason: format!("KKT residual {residual:e} above {:e}", cfg.kkt_tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::DeskQp;

    #[test]
    fn grid_finds_axis_aligned_optimum() {
        let qp = DeskQp::default();
        let set = qp.ball();
        let sol = grid_solve(&qp, &set, &GridConfig::cube(2, 1.0, 1e-3)).unwrap();
        let exact = qp.solution(0.0).unwrap();
        assert!(dist(&sol.x, &exact.x_star) <= 2e-3);
    }

    #[test]
    fn primal_dual_certifies_desk_qp() {
        let qp = DeskQp::default();
        let set = qp.ball();
        let sol = primal_dual_solve(&qp, &set, vec![0.0, 0.0], &PrimalDualConfig::default()).unwrap();
        let exact = qp.solution(0.0).unwrap();
        assert!(dist(&sol.x, &exact.x_star) < 1e-5);
        assert!((sol.lambda[0] - 0.375).abs() < 1e-4);
    }
}
