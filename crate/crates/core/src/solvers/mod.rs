//! CSOA and FW-CSOA iterations, the outer run loop, theorem schedules and the
//! optimality-gap lower bound.

mod bounds;
mod csoa;
mod fw;
mod runner;
mod schedule;

pub use bounds::{lower_bound, lower_bound_q};
pub use csoa::csoa_step;
pub use fw::fw_csoa_step;
pub use runner::{run, run_collect, Algorithm, RunResult, TraceConfig, TraceRecord};
pub use schedule::{Schedule, ScheduleT1, ScheduleT2, TheoremSchedule};

/// `lambda_{t+1} = [(1 - eta^2 delta) lambda_t + eta (h + upsilon)]_+`, with
/// the decay factor clamped at zero.
pub(crate) fn dual_update(lambda: &[f64], h: &[f64], hp: &crate::HyperParams) -> Vec<f64> {
    let decay = hp.dual_decay();
    lambda
        .iter()
        .zip(h)
        .map(|(l, hi)| (decay * l + hp.eta * (hi + hp.upsilon)).max(0.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::HyperParams;

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

    #[test]
    fn negative_dual_step_clips_at_zero() {
        assert_eq!(dual_update(&[1.0], &[-5.0], &hp(0.5, 0.0, 0.0)), vec![0.0]);
    }

    #[test]
    fn dual_step_decays_and_adds_tightened_value() {
        // (1 - 0.25 * 2) * 2 + 0.5 * (0.4 + 0.1) = 1.25
        let l = dual_update(&[2.0, 0.0], &[0.4, -0.2], &hp(0.5, 2.0, 0.1));
        assert_eq!(l, vec![1.25, 0.0]);
    }

    #[test]
    fn decay_is_clamped_for_large_steps() {
        assert_eq!(dual_update(&[3.0], &[1.0], &hp(2.0, 1.0, 0.0)), vec![2.0]);
    }
}
