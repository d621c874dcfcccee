use rand::{Rng, RngCore};

use super::{check_input, Capabilities, FeasibleSet};
use crate::error::{Error, Result};

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("box bounds", lower.len(), upper.len()));
        }
        if lower.is_empty() {
            return Err(Error::invalid("box must have positive dimension"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::invalid(format!(
                    "box coordinate {i}: need finite lower <= upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
}

impl FeasibleSet for BoxSet {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn diameter(&self) -> f64 {
        crate::linalg::dist(&self.upper, &self.lower)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_projection: true,
            has_lmo: true,
        }
    }

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_input(self.dim(), x, "box projection input")?;
        Ok(x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect())
    }

    fn lmo(&self, d: &[f64]) -> Result<Vec<f64>> {
        check_input(self.dim(), d, "box lmo direction")?;
        if d.iter().all(|&v| v == 0.0) {
            log::warn!("box lmo called with a zero direction; returning the upper corner");
        }
        Ok(d.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(di, (l, u))| if *di > 0.0 { *l } else { *u })
            .collect())
    }

    fn membership_residual(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps() {
        let b = BoxSet::uniform(2, -1.0, 1.0).unwrap();
        assert_eq!(b.project(&[2.0, 0.5]).unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn lmo_sign_rule() {
        let b = BoxSet::uniform(2, 0.0, 1.0).unwrap();
        assert_eq!(b.lmo(&[1.0, -1.0]).unwrap(), vec![0.0, 1.0]);
        // ties go to the upper bound
        assert_eq!(b.lmo(&[0.0, 0.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(BoxSet::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn diameter_is_diagonal() {
        let b = BoxSet::new(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(b.diameter(), 5.0);
    }
}
