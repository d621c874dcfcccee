use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::model::{OracleEval, ProblemConstants, SampleContext};
use crate::problem::StochasticProblem;
use crate::rng::stream_rng;
use crate::sets::{L1BallSet, L2BallSet};

/// `min E|x - theta|^2` s.t. `E[<a, x> - b + nu] <= 0` over a ball, with
/// `theta ~ N(mu, I)` and `nu ~ N(0, noise^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeskQp {
    pub mu: Vec<f64>,
    pub a: Vec<f64>,
    pub b: f64,
    pub radius: f64,
    /// Standard deviation of the constraint noise.
    pub noise: f64,
    /// Draws averaged per sample.
    pub batch: usize,
}

impl Default for DeskQp {
    fn default() -> Self {
        Self {
            mu: vec![1.0, 0.0],
            a: vec![4.0, 0.0],
            b: 1.0,
            radius: 1.0,
            noise: 0.5,
            batch: 1,
        }
    }
}

/// One draw: `batch` copies of `theta` and the averaged constraint noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DeskQpSample {
    pub theta_mean: Vec<f64>,
    /// Mean of `|x - theta_k|^2` is `|x - theta_mean|^2 + spread`.
    pub spread: f64,
    pub nu: f64,
}

/// Closed-form optima of the original and tightened problems.
#[derive(Debug, Clone, PartialEq)]
pub struct DeskQpSolution {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub x_upsilon: Vec<f64>,
    pub f_upsilon: f64,
}

impl DeskQp {
    pub fn new(mu: Vec<f64>, a: Vec<f64>, b: f64, radius: f64, noise: f64) -> Result<Self> {
        let qp = Self {
            mu,
            a,
            b,
            radius,
            noise,
            batch: 1,
        };
        qp.validate()?;
        Ok(qp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() {
            return Err(Error::invalid("desk QP needs dimension >= 1"));
        }
        if self.a.len() != self.mu.len() {
            return Err(Error::dim("desk QP constraint normal", self.mu.len(), self.a.len()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::invalid("desk QP radius must be positive"));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::invalid("desk QP noise must be nonnegative"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("desk QP batch must be at least 1"));
        }
        Ok(())
    }

    pub fn ball(&self) -> L2BallSet {
        L2BallSet::centered(self.mu.len(), self.radius).expect("validated radius")
    }

    /// l1 ball of the same radius, for the projection-free method.
    pub fn l1_ball(&self) -> L1BallSet {
        L1BallSet::new(self.mu.len(), self.radius).expect("validated radius")
    }

    /// Slack of the constraint at the most feasible ball point.
    pub fn slater_margin_l2(&self) -> f64 {
        self.b + self.radius * norm(&self.a)
    }

    pub fn slater_margin_l1(&self) -> f64 {
        self.b + self.radius * inf_norm(&self.a)
    }

    /// Exact constants over the l2 ball: second moments are maximized on the
    /// boundary, `G_f = 2 max |x - mu|`, `L_f = 2`, `L_h = 0`.
    pub fn exact_constants(&self) -> ProblemConstants {
        let m = self.mu.len() as f64;
        let far = self.radius + norm(&self.mu);
        let a_norm = norm(&self.a);
        let h_max = self.radius * a_norm + self.b.abs();
        self.constants_from(far, m, a_norm, h_max, 2.0 * self.radius, self.slater_margin_l2())
    }

    /// Exact constants over the l1 ball of the same radius; extremes are
    /// attained at the vertices `+-radius e_i`.
    pub fn exact_constants_l1(&self) -> ProblemConstants {
        let m = self.mu.len() as f64;
        let far = (0..self.mu.len())
            .flat_map(|i| [1.0, -1.0].map(|s| (i, s)))
            .map(|(i, s)| {
                let mut v = self.mu.clone();
                v[i] -= s * self.radius;
                norm(&v)
            })
            .fold(0.0, f64::max);
        let a_norm = norm(&self.a);
        let h_max = self.radius * inf_norm(&self.a) + self.b.abs();
        self.constants_from(far, m, a_norm, h_max, 2.0 * self.radius, self.slater_margin_l1())
    }

    fn constants_from(
        &self,
        far: f64,
        m: f64,
        a_norm: f64,
        h_max: f64,
        diameter: f64,
        slater: f64,
    ) -> ProblemConstants {
        let k = self.batch as f64;
        ProblemConstants {
            // E|2(x - theta_bar)|^2 = 4(|x - mu|^2 + m / k)
            sigma_f: (4.0 * (far * far + m / k)).sqrt(),
            sigma_h: a_norm,
            sigma_lambda: (h_max * h_max + self.noise * self.noise / k).sqrt(),
            g_f: 2.0 * far,
            g_h: a_norm,
            l_f: 2.0,
            l_h: 0.0,
            diameter,
            slater_sigma: slater,
            n_constraints: 1,
        }
    }

    /// Closed-form solution of `min |x - mu|^2` s.t. `<a, x> <= b - upsilon`,
    /// `|x| <= R`, at `upsilon = 0` and at the given `upsilon`.
    pub fn solution(&self, upsilon: f64) -> Result<DeskQpSolution> {
        let x_star = self.constrained_argmin(0.0)?;
        let x_upsilon = self.constrained_argmin(upsilon)?;
        Ok(DeskQpSolution {
            f_star: self.objective(&x_star),
            f_upsilon: self.objective(&x_upsilon),
            x_star,
            x_upsilon,
        })
    }

    fn constrained_argmin(&self, upsilon: f64) -> Result<Vec<f64>> {
        if !(upsilon.is_finite() && upsilon >= 0.0) {
            return Err(Error::invalid(format!("upsilon must be nonnegative, got {upsilon}")));
        }
        let level = self.b - upsilon;
        let a_norm = norm(&self.a);
        let r = self.radius;
        if level <= -r * a_norm {
            return Err(Error::invalid(format!(
                "upsilon = {upsilon} leaves no strictly feasible point (margin {})",
                self.slater_margin_l2()
            )));
        }
        let in_half = |x: &[f64]| dot(&self.a, x) <= level;
        let in_ball = |x: &[f64]| norm(x) <= r * (1.0 + 1e-15);

        if in_half(&self.mu) && in_ball(&self.mu) {
            return Ok(self.mu.clone());
        }
        if a_norm > 0.0 {
            let excess = (dot(&self.a, &self.mu) - level).max(0.0) / (a_norm * a_norm);
            let x: Vec<f64> = self.mu.iter().zip(&self.a).map(|(m, a)| m - excess * a).collect();
            if in_ball(&x) {
                return Ok(x);
            }
        }
        let mu_norm = norm(&self.mu);
        let radial: Vec<f64> = self.mu.iter().map(|m| r * m / mu_norm).collect();
        if in_half(&radial) {
            return Ok(radial);
        }
        // both active: closest point of the sphere-hyperplane intersection
        let foot: Vec<f64> = self.a.iter().map(|a| level * a / (a_norm * a_norm)).collect();
        let along = dot(&self.mu, &self.a) / (a_norm * a_norm);
        let mut w: Vec<f64> = self.mu.iter().zip(&self.a).map(|(m, a)| m - along * a).collect();
        let wn = norm(&w);
        if wn == 0.0 {
            // mu is parallel to a: any unit vector orthogonal to a
            let j = (0..self.a.len())
                .min_by(|&i, &k| self.a[i].abs().total_cmp(&self.a[k].abs()))
                .unwrap_or(0);
            w = vec![0.0; self.a.len()];
            w[j] = 1.0;
            let proj = dot(&w, &self.a) / (a_norm * a_norm);
            w.iter_mut().zip(&self.a).for_each(|(wi, ai)| *wi -= proj * ai);
        }
        let wn = norm(&w);
        let perp = (r * r - level * level / (a_norm * a_norm)).max(0.0).sqrt();
        Ok(foot.iter().zip(&w).map(|(f, wi)| f + perp * wi / wn).collect())
    }

    pub fn full_constraint(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }
}

/// `desk_qp_solution` with the default constraint-set geometry.
pub fn desk_qp_solution(qp: &DeskQp, upsilon: f64) -> Result<DeskQpSolution> {
    qp.solution(upsilon)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

impl StochasticProblem for DeskQp {
    type Sample = DeskQpSample;

    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn num_constraints(&self) -> usize {
        1
    }

    fn draw(&self, ctx: &SampleContext) -> Result<DeskQpSample> {
        let mut rng = stream_rng(ctx.rng_tag, 0);
        let m = self.mu.len();
        let k = self.batch as f64;
        let mut draws = Vec::with_capacity(self.batch);
        let mut theta_mean = vec![0.0; m];
        let mut nu = 0.0;
        for _ in 0..self.batch {
            let theta: Vec<f64> = self
                .mu
                .iter()
                .map(|mu| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mu + z
                })
                .collect();
            theta_mean.iter_mut().zip(&theta).for_each(|(s, t)| *s += t / k);
            draws.push(theta);
            if self.noise > 0.0 {
                nu += Normal::new(0.0, self.noise).expect("validated noise").sample(&mut rng) / k;
            }
        }
        let spread = draws
            .iter()
            .map(|th| {
                let d2: f64 = th.iter().zip(&theta_mean).map(|(t, m)| (t - m) * (t - m)).sum();
                d2 / k
            })
            .sum();
        Ok(DeskQpSample {
            theta_mean,
            spread,
            nu,
        })
    }

    fn evaluate(&self, x: &[f64], sample: &DeskQpSample) -> Result<OracleEval> {
        if x.len() != self.mu.len() {
            return Err(Error::dim("desk QP query point", self.mu.len(), x.len()));
        }
        Ok(OracleEval {
            obj_grad: x
                .iter()
                .zip(&sample.theta_mean)
                .map(|(xi, ti)| 2.0 * (xi - ti))
                .collect(),
            constr_vals: vec![dot(&self.a, x) - self.b + sample.nu],
            constr_jac: vec![self.a.clone()],
        })
    }

    fn sampled_values(&self, x: &[f64], sample: &DeskQpSample) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.mu.len() {
            return Err(Error::dim("desk QP query point", self.mu.len(), x.len()));
        }
        let d2: f64 = x
            .iter()
            .zip(&sample.theta_mean)
            .map(|(xi, ti)| (xi - ti) * (xi - ti))
            .sum();
        Ok((d2 + sample.spread, vec![dot(&self.a, x) - self.b + sample.nu]))
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.mu).map(|(xi, m)| (xi - m) * (xi - m)).sum();
        d2 + self.mu.len() as f64
    }

    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        vec![self.full_constraint(x)]
    }

    fn full_gradients(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        (
            x.iter().zip(&self.mu).map(|(xi, m)| 2.0 * (xi - m)).collect(),
            vec![self.a.clone()],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp(mu: [f64; 2], a: [f64; 2], b: f64, r: f64) -> DeskQp {
        DeskQp::new(mu.to_vec(), a.to_vec(), b, r, 0.5).unwrap()
    }

    #[test]
    fn unconstrained_optimum_feasible() {
        let s = qp([0.0, 0.0], [1.0, 0.0], 1.0, 10.0).solution(0.0).unwrap();
        assert_eq!(s.x_star, vec![0.0, 0.0]);
    }

    #[test]
    fn halfspace_projection() {
        let q = qp([2.0, 0.0], [1.0, 0.0], 1.0, 10.0);
        let s = q.solution(0.2).unwrap();
        assert_eq!(s.x_star, vec![1.0, 0.0]);
        assert!((s.x_upsilon[0] - 0.8).abs() < 1e-15);
        assert!((s.f_star - q.objective(&[2.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((s.f_upsilon - s.f_star - 0.44).abs() < 1e-12);
    }

    #[test]
    fn default_instance_constants() {
        let q = DeskQp::default();
        let c = q.exact_constants();
        assert!((c.sigma_f - 24f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.sigma_h, 4.0);
        assert!((c.sigma_lambda - 25.25f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.slater_sigma, 5.0);
        assert!((c.c() - 3.2).abs() < 1e-12);
        let s = q.solution(0.0).unwrap();
        assert!((s.x_star[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn both_constraints_active() {
        // mu far outside along a diagonal, hyperplane cuts the unit ball
        let q = qp([3.0, 3.0], [1.0, 0.0], 0.5, 1.0);
        let s = q.solution(0.0).unwrap();
        assert!((s.x_star[0] - 0.5).abs() < 1e-12);
        assert!((norm(&s.x_star) - 1.0).abs() < 1e-12);
        assert!(s.x_star[1] > 0.0);
    }

    #[test]
    fn infeasible_tightening_rejected() {
        let q = qp([0.0, 0.0], [1.0, 0.0], 1.0, 1.0);
        assert!(q.solution(2.5).is_err());
    }
}
