//! Domain types shared by the oracles and both solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::all_finite;

/// Identifies one draw of the random data `theta`.
///
/// Oracles must derive all of their randomness from `rng_tag`, so evaluating
/// the same context at the same point is bitwise reproducible. This is what
/// lets the Frank-Wolfe variant evaluate two points under one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleContext {
    pub sample_id: u64,
    pub rng_tag: u64,
}

impl SampleContext {
    /// Context for iteration `t` of a run seeded with `seed`.
    pub fn for_iteration(seed: u64, t: u64) -> Self {
        Self {
            sample_id: t,
            rng_tag: crate::rng::derive_seed(seed, t),
        }
    }
}

/// Sampled objective gradient, constraint values and constraint Jacobian at a
/// single query point.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEval {
    /// `grad_x f(x, theta)`, length `m`.
    pub obj_grad: Vec<f64>,
    /// `h(x, theta)`, length `N`.
    pub constr_vals: Vec<f64>,
    /// Rows are `grad_x h_i(x, theta)`; `N` rows of length `m`.
    pub constr_jac: Vec<Vec<f64>>,
}

impl OracleEval {
    pub fn dim(&self) -> usize {
        self.obj_grad.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constr_vals.len()
    }

    /// Checks shape consistency against `(m, N)` and finiteness of every entry.
    pub fn validate(&self, dim: usize, n_constraints: usize) -> Result<()> {
        if self.obj_grad.len() != dim {
            return Err(Error::dim("oracle gradient", dim, self.obj_grad.len()));
        }
        if self.constr_vals.len() != n_constraints {
            return Err(Error::dim(
                "oracle constraint values",
                n_constraints,
                self.constr_vals.len(),
            ));
        }
        if self.constr_jac.len() != n_constraints {
            return Err(Error::dim(
                "oracle constraint jacobian rows",
                n_constraints,
                self.constr_jac.len(),
            ));
        }
        for row in &self.constr_jac {
            if row.len() != dim {
                return Err(Error::dim("oracle constraint jacobian row", dim, row.len()));
            }
            if !all_finite(row) {
                return Err(Error::NonFinite("oracle constraint jacobian"));
            }
        }
        if !all_finite(&self.obj_grad) {
            return Err(Error::NonFinite("oracle gradient"));
        }
        if !all_finite(&self.constr_vals) {
            return Err(Error::NonFinite("oracle constraint values"));
        }
        Ok(())
    }
}

/// Problem-dependent constants that feed the theorem schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Root second-moment bound of the sampled objective gradient.
    pub sigma_f: f64,
    /// Root second-moment bound of each sampled constraint gradient.
    pub sigma_h: f64,
    /// Root second-moment bound of each sampled constraint value.
    pub sigma_lambda: f64,
    /// Lipschitz constant of `F`.
    pub g_f: f64,
    /// Lipschitz constant of each `H_i`.
    pub g_h: f64,
    /// Smoothness of `F`.
    pub l_f: f64,
    /// Smoothness of each `H_i`.
    pub l_h: f64,
    /// Diameter bound of the feasible set.
    pub diameter: f64,
    /// Strict feasibility margin: some `x` has `H_i(x) + slater_sigma <= 0`.
    pub slater_sigma: f64,
    pub n_constraints: usize,
}

impl ProblemConstants {
    /// `B = max(sigma_f, sigma_h * sqrt(N))`.
    pub fn b(&self) -> f64 {
        self.sigma_f
            .max(self.sigma_h * (self.n_constraints as f64).sqrt())
    }

    /// Dual-norm bound `C = 2 G_f D / sigma`.
    pub fn c(&self) -> f64 {
        2.0 * self.g_f * self.diameter / self.slater_sigma
    }

    /// Every field used by a schedule must be strictly positive. `l_h` may be
    /// zero (affine constraints) and is only checked for sign.
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("sigma_f", self.sigma_f),
            ("sigma_h", self.sigma_h),
            ("sigma_lambda", self.sigma_lambda),
            ("g_f", self.g_f),
            ("g_h", self.g_h),
            ("l_f", self.l_f),
            ("diameter", self.diameter),
            ("slater_sigma", self.slater_sigma),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "problem constant {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.l_h.is_finite() && self.l_h >= 0.0) {
            return Err(Error::invalid(format!(
                "problem constant l_h must be nonnegative, got {}",
                self.l_h
            )));
        }
        if self.n_constraints == 0 {
            return Err(Error::invalid("schedules need at least one constraint"));
        }
        Ok(())
    }
}

/// Step parameters for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Primal and dual step size.
    pub eta: f64,
    /// Dual regularization weight in the augmented Lagrangian.
    pub delta: f64,
    /// Constraint tightening.
    pub upsilon: f64,
    /// Momentum weight of the gradient tracker; only read by FW-CSOA.
    pub rho: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::invalid(format!(
                "delta must be nonnegative, got {}",
                self.delta
            )));
        }
        if !(self.upsilon.is_finite() && self.upsilon >= 0.0) {
            return Err(Error::invalid(format!(
                "upsilon must be nonnegative, got {}",
                self.upsilon
            )));
        }
        Ok(())
    }

    pub fn validate_frank_wolfe(&self) -> Result<()> {
        self.validate()?;
        if self.eta > 1.0 {
            return Err(Error::invalid(format!(
                "FW-CSOA needs eta <= 1 so iterates stay in the set, got {}",
                self.eta
            )));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::invalid(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        Ok(())
    }

    /// Dual decay factor `1 - eta^2 delta`, clamped at zero.
    pub fn dual_decay(&self) -> f64 {
        (1.0 - self.eta * self.eta * self.delta).max(0.0)
    }
}

/// Iterate of either solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Tracked gradient; empty for CSOA.
    pub d: Vec<f64>,
    /// 1-based index of the iterate held in `x`.
    pub t: usize,
    pub x_prev: Vec<f64>,
    pub lambda_prev: Vec<f64>,
}

impl SolverState {
    /// Initial CSOA state: `x_1 = x0`, `lambda_1 = 0`.
    pub fn new_projected(x0: Vec<f64>, n_constraints: usize) -> Self {
        Self {
            x: x0,
            lambda: vec![0.0; n_constraints],
            d: Vec::new(),
            t: 1,
            x_prev: Vec::new(),
            lambda_prev: Vec::new(),
        }
    }

    /// Initial FW-CSOA state: `x_0 = x_1 = x0`, `lambda_0 = lambda_1 = 0`,
    /// `d_0 = 0`; the first tracker update then yields `d_1 = rho * grad`.
    pub fn new_frank_wolfe(x0: Vec<f64>, n_constraints: usize) -> Self {
        let m = x0.len();
        Self {
            x_prev: x0.clone(),
            x: x0,
            lambda: vec![0.0; n_constraints],
            d: vec![0.0; m],
            t: 1,
            lambda_prev: vec![0.0; n_constraints],
        }
    }

    pub fn lambda_norm(&self) -> f64 {
        crate::linalg::norm(&self.lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_constants() -> ProblemConstants {
        ProblemConstants {
            sigma_f: 1.0,
            sigma_h: 1.0,
            sigma_lambda: 1.0,
            g_f: 1.0,
            g_h: 1.0,
            l_f: 1.0,
            l_h: 1.0,
            diameter: 1.0,
            slater_sigma: 2.0,
            n_constraints: 1,
        }
    }

    #[test]
    fn b_and_c_are_recomputable() {
        let mut c = unit_constants();
        c.sigma_h = 3.0;
        c.n_constraints = 4;
        assert_eq!(c.b(), 6.0);
        assert_eq!(c.c(), 2.0 * 1.0 * 1.0 / 2.0);
    }

    #[test]
    fn nonpositive_constants_rejected() {
        let mut c = unit_constants();
        c.g_f = 0.0;
        assert!(c.validate().is_err());
        let mut c = unit_constants();
        c.slater_sigma = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn frank_wolfe_requires_eta_at_most_one() {
        let hp = HyperParams {
            eta: 1.5,
            delta: 0.0,
            upsilon: 0.0,
            rho: 1.0,
            horizon: 1,
            seed: 0,
        };
        assert!(hp.validate().is_ok());
        assert!(hp.validate_frank_wolfe().is_err());
    }

    #[test]
    fn dual_decay_is_clamped() {
        let hp = HyperParams {
            eta: 1.0,
            delta: 4.0,
            upsilon: 0.0,
            rho: 1.0,
            horizon: 1,
            seed: 0,
        };
        assert_eq!(hp.dual_decay(), 0.0);
    }

    #[test]
    fn oracle_eval_validation() {
        let ok = OracleEval {
            obj_grad: vec![1.0, 2.0],
            constr_vals: vec![0.5],
            constr_jac: vec![vec![0.0, 1.0]],
        };
        assert!(ok.validate(2, 1).is_ok());
        assert!(ok.validate(3, 1).is_err());
        let mut bad = ok.clone();
        bad.obj_grad[0] = f64::NAN;
        assert!(matches!(bad.validate(2, 1), Err(Error::NonFinite(_))));
    }
}
