//! Empirical estimation of the problem constants that drive the theorem
//! schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, norm};
use crate::model::{ProblemConstants, SampleContext};
use crate::problem::StochasticProblem;
use crate::rng::{derive_seed, stream_rng, STREAM_CONSTANTS};
use crate::sets::FeasibleSet;

/// User-supplied values that replace the corresponding estimates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantOverrides {
    pub sigma_f: Option<f64>,
    pub sigma_h: Option<f64>,
    pub sigma_lambda: Option<f64>,
    pub g_f: Option<f64>,
    pub g_h: Option<f64>,
    pub l_f: Option<f64>,
    pub l_h: Option<f64>,
    pub diameter: Option<f64>,
    pub slater_sigma: Option<f64>,
}

impl ConstantOverrides {
    pub fn from_constants(c: &ProblemConstants) -> Self {
        Self {
            sigma_f: Some(c.sigma_f),
            sigma_h: Some(c.sigma_h),
            sigma_lambda: Some(c.sigma_lambda),
            g_f: Some(c.g_f),
            g_h: Some(c.g_h),
            l_f: Some(c.l_f),
            l_h: Some(c.l_h),
            diameter: Some(c.diameter),
            slater_sigma: Some(c.slater_sigma),
        }
    }

    fn complete(&self) -> bool {
        [
            self.sigma_f,
            self.sigma_h,
            self.sigma_lambda,
            self.g_f,
            self.g_h,
            self.l_f,
            self.l_h,
            self.diameter,
            self.slater_sigma,
        ]
        .iter()
        .all(Option::is_some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default)]
    pub seed: u64,
    /// A strictly feasible point; its margin becomes `slater_sigma`.
    #[serde(default)]
    pub slater_point: Option<Vec<f64>>,
    #[serde(default)]
    pub overrides: ConstantOverrides,
}

fn default_samples() -> usize {
    1000
}

fn default_safety() -> f64 {
    1.2
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            n_samples: default_samples(),
            safety: default_safety(),
            seed: 0,
            slater_point: None,
            overrides: ConstantOverrides::default(),
        }
    }
}

/// Slack `-max_i H_i(x)` of a declared strictly feasible point.
pub fn slater_margin<P>(problem: &P, point: &[f64]) -> Result<f64>
where
    P: StochasticProblem + ?Sized,
{
    if point.len() != problem.dim() {
        return Err(Error::dim("Slater point", problem.dim(), point.len()));
    }
    let h = problem.constraints(point);
    let (worst, value) = h
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::invalid("Slater margin needs at least one constraint"))?;
    if value >= 0.0 {
        return Err(Error::SlaterViolated {
            constraint: worst + 1,
            value,
        });
    }
    Ok(-value)
}

type Jacobian = Vec<Vec<f64>>;

/// Moment and Lipschitz estimates from `n_samples` random members of `set`.
///
/// Second-moment bounds are `safety` times the empirical root mean square of
/// `|grad f|`, `max_i |grad h_i|` and `max_i |h_i|`; `G` and `L` are the
/// largest observed gradient norms and gradient difference quotients of the
/// full-data functions.
pub fn estimate_constants<P, S>(problem: &P, set: &S, cfg: &EstimateConfig) -> Result<ProblemConstants>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    let n = problem.num_constraints();
    let o = &cfg.overrides;
    if o.complete() {
        return Ok(ProblemConstants {
            sigma_f: o.sigma_f.unwrap(),
            sigma_h: o.sigma_h.unwrap(),
            sigma_lambda: o.sigma_lambda.unwrap(),
            g_f: o.g_f.unwrap(),
            g_h: o.g_h.unwrap(),
            l_f: o.l_f.unwrap(),
            l_h: o.l_h.unwrap(),
            diameter: o.diameter.unwrap(),
            slater_sigma: o.slater_sigma.unwrap(),
            n_constraints: n,
        });
    }
    if cfg.n_samples < 100 {
        return Err(Error::invalid(format!(
            "constant estimation needs at least 100 samples, got {}",
            cfg.n_samples
        )));
    }
    if !(cfg.safety.is_finite() && cfg.safety >= 1.0) {
        return Err(Error::invalid(format!("safety factor must be >= 1, got {}", cfg.safety)));
    }
    let slater_sigma = match (o.slater_sigma, &cfg.slater_point) {
        (Some(v), _) => v,
        (None, Some(p)) => slater_margin(problem, p)?,
        (None, None) => {
            return Err(Error::invalid(
                "estimating slater_sigma needs a declared strictly feasible point",
            ))
        }
    };

    let mut rng = stream_rng(cfg.seed, STREAM_CONSTANTS);
    let sample_seed = derive_seed(cfg.seed, STREAM_CONSTANTS);
    let (mut sf, mut sh, mut sl) = (0.0, 0.0, 0.0);
    let (mut gf, mut gh, mut lf, mut lh) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut prev: Option<(Vec<f64>, Vec<f64>, Jacobian)> = None;
    for k in 0..cfg.n_samples {
        let x = set.sample_point(&mut rng);
        let eval = problem.oracle(&x, &SampleContext::for_iteration(sample_seed, k as u64))?;
        eval.validate(problem.dim(), n)?;
        sf += norm(&eval.obj_grad).powi(2);
        sh += eval.constr_jac.iter().map(|r| norm(r).powi(2)).fold(0.0, f64::max);
        sl += eval.constr_vals.iter().map(|v| v * v).fold(0.0, f64::max);

        let (g, jac) = problem.full_gradients(&x);
        gf = gf.max(norm(&g));
        gh = jac.iter().map(|r| norm(r)).fold(gh, f64::max);
        if let Some((px, pg, pjac)) = &prev {
            let step = dist(&x, px);
            if step > 0.0 {
                lf = lf.max(dist(&g, pg) / step);
                for (r, pr) in jac.iter().zip(pjac) {
                    lh = lh.max(dist(r, pr) / step);
                }
            }
        }
        prev = Some((x, g, jac));
    }
    let rms = |s: f64| cfg.safety * (s / cfg.n_samples as f64).sqrt();
    let c = ProblemConstants {
        sigma_f: o.sigma_f.unwrap_or(rms(sf)),
        sigma_h: o.sigma_h.unwrap_or(rms(sh)),
        sigma_lambda: o.sigma_lambda.unwrap_or(rms(sl)),
        g_f: o.g_f.unwrap_or(gf),
        g_h: o.g_h.unwrap_or(gh),
        l_f: o.l_f.unwrap_or(lf),
        l_h: o.l_h.unwrap_or(lh),
        diameter: o.diameter.unwrap_or(set.diameter()),
        slater_sigma,
        n_constraints: n,
    };
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::DeskQp;

    #[test]
    fn overrides_pass_through() {
        let qp = DeskQp::default();
        let exact = qp.exact_constants();
        let cfg = EstimateConfig {
            overrides: ConstantOverrides::from_constants(&exact),
            ..Default::default()
        };
        assert_eq!(estimate_constants(&qp, &qp.ball(), &cfg).unwrap(), exact);
    }

    #[test]
    fn boundary_slater_point_rejected() {
        let qp = DeskQp::default();
        match slater_margin(&qp, &[0.25, 0.0]) {
            Err(Error::SlaterViolated { constraint, .. }) => assert_eq!(constraint, 1),
            other => panic!("expected Slater error, got {other:?}"),
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let qp = DeskQp::default();
        let cfg = EstimateConfig {
            n_samples: 10,
            slater_point: Some(vec![0.0, 0.0]),
            ..Default::default()
        };
        assert!(estimate_constants(&qp, &qp.ball(), &cfg).is_err());
    }
}
