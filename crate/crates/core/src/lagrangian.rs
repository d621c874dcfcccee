//! Gradients of the sampled augmented Lagrangian
//!
//! `L(x, lambda, theta) = f(x, theta) + <lambda, h(x, theta) + upsilon 1> - (delta eta / 2) |lambda|^2`.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy};
use crate::model::{HyperParams, OracleEval};

fn check_lambda(eval: &OracleEval, lambda: &[f64]) -> Result<()> {
    if lambda.len() != eval.num_constraints() {
        return Err(Error::dim("dual vector", eval.num_constraints(), lambda.len()));
    }
    if !all_finite(lambda) {
        return Err(Error::NonFinite("dual vector"));
    }
    if lambda.iter().any(|&l| l < 0.0) {
        return Err(Error::invalid("dual vector must be elementwise nonnegative"));
    }
    eval.validate(eval.dim(), eval.num_constraints())
}

/// `grad f + J^T lambda`.
pub fn primal_grad(eval: &OracleEval, lambda: &[f64]) -> Result<Vec<f64>> {
    check_lambda(eval, lambda)?;
    let mut g = eval.obj_grad.clone();
    for (row, &l) in eval.constr_jac.iter().zip(lambda) {
        if l != 0.0 {
            axpy(l, row, &mut g);
        }
    }
    Ok(g)
}

/// `h + upsilon 1 - delta eta lambda`.
pub fn dual_grad(eval: &OracleEval, lambda: &[f64], hp: &HyperParams) -> Result<Vec<f64>> {
    check_lambda(eval, lambda)?;
    let shrink = hp.delta * hp.eta;
    Ok(eval
        .constr_vals
        .iter()
        .zip(lambda)
        .map(|(h, l)| h + hp.upsilon - shrink * l)
        .collect())
}

/// Value of the sampled augmented Lagrangian given sampled `f` and `h` values.
pub fn value(f: f64, h: &[f64], lambda: &[f64], hp: &HyperParams) -> f64 {
    let pairing: f64 = h.iter().zip(lambda).map(|(h, l)| l * (h + hp.upsilon)).sum();
    let sq: f64 = lambda.iter().map(|l| l * l).sum();
    f + pairing - 0.5 * hp.delta * hp.eta * sq
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(eta: f64, delta: f64, upsilon: f64) -> HyperParams {
        HyperParams {
            eta,
            delta,
            upsilon,
            rho: 1.0,
            horizon: 1,
            seed: 0,
        }
    }

    fn eval_1d() -> OracleEval {
        OracleEval {
            obj_grad: vec![1.0, 0.0],
            constr_vals: vec![-0.5],
            constr_jac: vec![vec![0.0, 2.0]],
        }
    }

    #[test]
    fn zero_dual_leaves_objective_gradient() {
        let e = eval_1d();
        assert_eq!(primal_grad(&e, &[0.0]).unwrap(), e.obj_grad);
    }

    #[test]
    fn linear_combination() {
        assert_eq!(primal_grad(&eval_1d(), &[3.0]).unwrap(), vec![1.0, 6.0]);
    }

    #[test]
    fn dual_gradient_examples() {
        let e = eval_1d();
        assert_eq!(dual_grad(&e, &[0.0], &hp(0.1, 1.0, 0.0)).unwrap(), vec![-0.5]);
        // delta * eta = 0.1
        let g = dual_grad(&e, &[1.0], &hp(0.1, 1.0, 0.5)).unwrap();
        assert!((g[0] - (-0.1)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let e = eval_1d();
        assert!(matches!(
            primal_grad(&e, &[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(primal_grad(&e, &[f64::INFINITY]).is_err());
        assert!(primal_grad(&e, &[-1.0]).is_err());
        let mut bad = e.clone();
        bad.constr_vals[0] = f64::NAN;
        assert!(dual_grad(&bad, &[0.0], &hp(0.1, 1.0, 0.0)).is_err());
    }
}
