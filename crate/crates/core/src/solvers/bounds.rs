use super::TheoremSchedule;
use crate::error::{Error, Result};
use crate::model::ProblemConstants;

/// The constant `Q(r)` of the optimality-gap lower bound, with `C_hat` the
/// step-size coefficient of the schedule and `delta` its dual weight.
pub fn lower_bound_q(c: &ProblemConstants, schedule: &TheoremSchedule, r: f64) -> Result<f64> {
    c.validate()?;
    let (c_hat, delta) = match schedule {
        TheoremSchedule::T1(s) => (s.c1, s.delta()),
        TheoremSchedule::T2(s) => (s.c1_hat, s.delta),
    };
    q_value(c_hat, delta, c.c(), c.diameter, r)
}

pub(crate) fn q_value(c_hat: f64, delta: f64, c: f64, d: f64, r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(format!("r must be positive, got {r}")));
    }
    let ch2 = c_hat * c_hat;
    Ok(((ch2 + 4.0 * delta) * (c + r).powi(2) + d * d * ch2 + 5.0 * delta * c * c)
        / (2.0 * c_hat * r))
}

/// `-C (Q + C2) T^{-1/2}` for the projected schedule, `-C (Q + C2_hat) T^{-1/4}`
/// for the projection-free one.
pub fn lower_bound(c: &ProblemConstants, schedule: &TheoremSchedule, r: f64) -> Result<f64> {
    let q = lower_bound_q(c, schedule, r)?;
    let cc = c.c();
    Ok(match schedule {
        TheoremSchedule::T1(s) => -cc * (q + s.c2) / (s.horizon as f64).sqrt(),
        TheoremSchedule::T2(s) => -cc * (q + s.c2_hat) * (s.horizon as f64).powf(-0.25),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_inputs_give_thirteen() {
        assert_eq!(q_value(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 13.0);
    }

    #[test]
    fn blows_up_near_zero() {
        let small = q_value(1.0, 1.0, 1.0, 1.0, 1e-6).unwrap();
        assert!(small > 1e5);
        assert!(q_value(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(q_value(1.0, 1.0, 1.0, 1.0, -1.0).is_err());
    }
}
