use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{check_input, Capabilities, FeasibleSet};
use crate::error::{Error, Result};
use crate::linalg::{dist, norm};

/// Euclidean ball `|x - center| <= radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct L2BallSet {
    center: Vec<f64>,
    radius: f64,
}

impl L2BallSet {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("ball must have positive dimension"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn centered(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], radius)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl FeasibleSet for L2BallSet {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_projection: true,
            has_lmo: true,
        }
    }

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_input(self.dim(), x, "ball projection input")?;
        let r = dist(x, &self.center);
        if r <= self.radius {
            return Ok(x.to_vec());
        }
        let scale = self.radius / r;
        Ok(x.iter()
            .zip(&self.center)
            .map(|(v, c)| c + (v - c) * scale)
            .collect())
    }

    fn lmo(&self, d: &[f64]) -> Result<Vec<f64>> {
        check_input(self.dim(), d, "ball lmo direction")?;
        let n = norm(d);
        if n == 0.0 {
            log::warn!("ball lmo called with a zero direction; returning center + radius e_0");
            let mut s = self.center.clone();
            s[0] += self.radius;
            return Ok(s);
        }
        Ok(self
            .center
            .iter()
            .zip(d)
            .map(|(c, di)| c - self.radius * di / n)
            .collect())
    }

    fn membership_residual(&self, x: &[f64]) -> f64 {
        (dist(x, &self.center) - self.radius).max(0.0)
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        // uniform in the ball: gaussian direction, radius ~ U^{1/m}
        let m = self.dim();
        let dir: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&dir).max(f64::MIN_POSITIVE);
        let u: f64 = rand::Rng::random(rng);
        let r = self.radius * u.powf(1.0 / m as f64);
        self.center
            .iter()
            .zip(&dir)
            .map(|(c, v)| c + r * v / n)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_scaling() {
        let b = L2BallSet::centered(2, 1.0).unwrap();
        let p = b.project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn interior_is_fixed() {
        let b = L2BallSet::centered(2, 1.0).unwrap();
        assert_eq!(b.project(&[0.1, -0.2]).unwrap(), vec![0.1, -0.2]);
    }

    #[test]
    fn lmo_points_against_direction() {
        let b = L2BallSet::new(vec![1.0, 1.0], 2.0).unwrap();
        assert_eq!(b.lmo(&[0.0, 5.0]).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn sampled_points_are_members() {
        let b = L2BallSet::centered(3, 2.0).unwrap();
        let mut rng = crate::rng::stream_rng(1, 0);
        for _ in 0..200 {
            assert_eq!(b.membership_residual(&b.sample_point(&mut rng)), 0.0);
        }
    }
}
