use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SampleContext;
use crate::problem::StochasticProblem;
use crate::rng::{stream_rng, STREAM_CHECK};
use crate::sets::FeasibleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    pub n_points: usize,
    pub h: f64,
    /// Coordinates differenced per point; all of them when the dimension is
    /// at most this.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            n_points: 20,
            h: 1e-5,
            max_coords: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub max_rel_err: f64,
    /// `"objective"` or `"constraint i"` at the worst point.
    pub worst: String,
    pub points: usize,
}

/// Compares oracle gradients with central differences of the sampled values
/// under the same sample, at random members of `set`.
///
/// The error for one function at one point is
/// `max_j |fd_j - g_j| / max(1, max_j |g_j|)` over the checked coordinates:
/// relative for large gradients, absolute for small ones, where the
/// difference quotient is dominated by rounding.
pub fn finite_diff_check<P, S>(problem: &P, set: &S, cfg: &FdConfig) -> Result<FdReport>
where
    P: StochasticProblem + ?Sized,
    S: FeasibleSet + ?Sized,
{
    if !(1e-7..=1e-3).contains(&cfg.h) {
        return Err(Error::invalid(format!("finite-difference step {} outside [1e-7, 1e-3]", cfg.h)));
    }
    let m = problem.dim();
    let mut rng = stream_rng(cfg.seed, STREAM_CHECK);
    let mut worst = (0.0f64, String::from("objective"));
    for k in 0..cfg.n_points {
        // shrink toward the set's interior so +-h stays meaningful
        let x: Vec<f64> = set.sample_point(&mut rng).iter().map(|v| 0.9 * v).collect();
        let ctx = SampleContext::for_iteration(cfg.seed, k as u64);
        let s = problem.draw(&ctx)?;
        let eval = problem.evaluate(&x, &s)?;
        eval.validate(m, problem.num_constraints())?;

        let coords: Vec<usize> = if m <= cfg.max_coords {
            (0..m).collect()
        } else {
            let mut c: Vec<usize> = eval
                .obj_grad
                .iter()
                .enumerate()
                .chain(eval.constr_jac.iter().flat_map(|r| r.iter().enumerate()))
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, _)| j)
                .take(cfg.max_coords / 2)
                .collect();
            c.extend(sample(&mut rng, m, cfg.max_coords - c.len()));
            c.sort_unstable();
            c.dedup();
            c
        };

        let n = problem.num_constraints();
        let mut fd_obj = Vec::with_capacity(coords.len());
        let mut fd_con = vec![Vec::with_capacity(coords.len()); n];
        let mut xp = x.clone();
        for &j in &coords {
            xp[j] = x[j] + cfg.h;
            let (fp, hp) = problem.sampled_values(&xp, &s)?;
            xp[j] = x[j] - cfg.h;
            let (fm, hm) = problem.sampled_values(&xp, &s)?;
            xp[j] = x[j];
            fd_obj.push((fp - fm) / (2.0 * cfg.h));
            for i in 0..n {
                fd_con[i].push((hp[i] - hm[i]) / (2.0 * cfg.h));
            }
        }

        let pick = |g: &[f64]| coords.iter().map(|&j| g[j]).collect::<Vec<_>>();
        let err = rel_err(&fd_obj, &pick(&eval.obj_grad));
        if err > worst.0 {
            worst = (err, "objective".into());
        }
        for (i, (fd, jac)) in fd_con.iter().zip(&eval.constr_jac).enumerate() {
            let err = rel_err(fd, &pick(jac));
            if err > worst.0 {
                worst = (err, format!("constraint {}", i + 1));
            }
        }
    }
    Ok(FdReport {
        max_rel_err: worst.0,
        worst: worst.1,
        points: cfg.n_points,
    })
}

fn rel_err(fd: &[f64], exact: &[f64]) -> f64 {
    let scale = exact.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let diff = fd
        .iter()
        .zip(exact)
        .fold(0.0f64, |a, (f, e)| a.max((f - e).abs()));
    diff / scale.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::DeskQp;

    #[test]
    fn desk_qp_gradients_match() {
        let qp = DeskQp::default();
        let rep = finite_diff_check(&qp, &qp.ball(), &FdConfig::default()).unwrap();
        assert!(rep.max_rel_err <= 1e-6, "{rep:?}");
    }

    #[test]
    fn step_outside_range_rejected() {
        let qp = DeskQp::default();
        let cfg = FdConfig {
            h: 1e-2,
            ..FdConfig::default()
        };
        assert!(finite_diff_check(&qp, &qp.ball(), &cfg).is_err());
    }
}
