use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1};

use super::{check_input, Capabilities, FeasibleSet};
use crate::error::{Error, Result};

/// Origin-centered l1 ball `|x|_1 <= radius`. LMO only.
#[derive(Debug, Clone, PartialEq)]
pub struct L1BallSet {
    dim: usize,
    radius: f64,
}

impl L1BallSet {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("l1 ball must have positive dimension"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!(
                "l1 ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { dim, radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl FeasibleSet for L1BallSet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_projection: false,
            has_lmo: true,
        }
    }

    fn lmo(&self, d: &[f64]) -> Result<Vec<f64>> {
        check_input(self.dim, d, "l1 ball lmo direction")?;
        // first index of the largest magnitude
        let mut best = 0;
        for (i, v) in d.iter().enumerate() {
            if v.abs() > d[best].abs() {
                best = i;
            }
        }
        let mut s = vec![0.0; self.dim];
        if d[best] == 0.0 {
            log::warn!("l1 ball lmo called with a zero direction; returning +radius e_0");
            s[0] = self.radius;
        } else {
            s[best] = -self.radius * d[best].signum();
        }
        Ok(s)
    }

    fn membership_residual(&self, x: &[f64]) -> f64 {
        (x.iter().map(|v| v.abs()).sum::<f64>() - self.radius).max(0.0)
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        // uniform on the ball: exponential spacings with random signs, scaled
        // by U^{1/m}
        let e: Vec<f64> = (0..self.dim).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = e.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let u: f64 = rng.random();
        let r = self.radius * u.powf(1.0 / self.dim as f64);
        e.iter()
            .map(|v| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * r * v / total
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_largest_magnitude_coordinate() {
        let b = L1BallSet::new(3, 1.0).unwrap();
        assert_eq!(b.lmo(&[0.2, -3.0, 1.0]).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let b = L1BallSet::new(3, 2.0).unwrap();
        assert_eq!(b.lmo(&[1.0, -1.0, 1.0]).unwrap(), vec![-2.0, 0.0, 0.0]);
    }

    #[test]
    fn no_projection() {
        let b = L1BallSet::new(2, 1.0).unwrap();
        assert!(matches!(b.project(&[0.0, 0.0]), Err(Error::Unsupported { .. })));
    }
}
