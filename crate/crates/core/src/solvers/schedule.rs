use serde::{Deserialize, Serialize};

use super::Algorithm;
use crate::error::{Error, Result};
use crate::model::{HyperParams, ProblemConstants};

fn check_horizon(horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::invalid("schedule horizon must be at least 1"));
    }
    Ok(horizon as f64)
}

/// Parameters of the projected method for a fixed horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleT1 {
    pub p: f64,
    pub k1: f64,
    pub k2: f64,
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
    pub b: f64,
    pub c: f64,
    pub sigma_lambda: f64,
    pub horizon: usize,
    pub warnings: Vec<String>,
}

impl ScheduleT1 {
    pub fn new(c: &ProblemConstants, horizon: usize) -> Result<Self> {
        c.validate()?;
        let t = check_horizon(horizon)?;
        let n = c.n_constraints as f64;
        let b = c.b();
        let cc = c.c();
        let d = c.diameter;
        let p = 2.0 * b * b + 8.0 * n * c.sigma_lambda * c.sigma_lambda;
        let k1 = (d * d + 1.0 + cc * cc) * (1.0 + cc);
        let k2 = (p + 4.0 * b * b * (1.0 + cc * cc)) * (1.0 + cc);
        let ratio = (k1 / k2).sqrt();
        let mut s = Self {
            p,
            k1,
            k2,
            k: (k1 * k2).sqrt(),
            c1: ratio,
            c2: (k1 + k2) / (2.0 * (1.0 + cc)) * ratio,
            b,
            c: cc,
            sigma_lambda: c.sigma_lambda,
            horizon,
            warnings: Vec::new(),
        };
        if s.eta() >= 1.0 / (4.0 * b) {
            s.warnings.push(format!(
                "horizon too short: eta = {:.4e} is not below 1/(4B) = {:.4e} at T = {t}",
                s.eta(),
                1.0 / (4.0 * b)
            ));
        }
        if s.upsilon() >= c.sigma_lambda {
            s.warnings.push(format!(
                "upsilon = {:.4e} is not below sigma_lambda = {:.4e} at T = {t}",
                s.upsilon(),
                c.sigma_lambda
            ));
        }
        for w in &s.warnings {
            log::warn!("{w}");
        }
        Ok(s)
    }

    pub fn eta(&self) -> f64 {
        self.c1 / (self.horizon as f64).sqrt()
    }

    pub fn upsilon(&self) -> f64 {
        self.c2 / (self.horizon as f64).sqrt()
    }

    pub fn delta(&self) -> f64 {
        4.0 * self.b * self.b
    }

    /// Upper bound on the optimality gap, `K / sqrt(T)`.
    pub fn gap_bound(&self) -> f64 {
        self.k / (self.horizon as f64).sqrt()
    }
}

/// Parameters of the projection-free method for a fixed horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleT2 {
    pub l: f64,
    pub a: f64,
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub k_hat: f64,
    pub b: f64,
    pub c: f64,
    pub delta: f64,
    pub horizon: usize,
    pub warnings: Vec<String>,
}

impl ScheduleT2 {
    /// `delta = None` selects `18 L^2 D^2`.
    pub fn new(c: &ProblemConstants, horizon: usize, delta: Option<f64>) -> Result<Self> {
        c.validate()?;
        let t = check_horizon(horizon)?;
        let n = c.n_constraints as f64;
        let b = c.b();
        let cc = c.c();
        let d = c.diameter;
        let l = c.l_f.max(c.l_h * n.sqrt()).max(1.0);
        let ld = l * d;
        let a = ld / 16.0 * (96.0 * c.g_f + 24.0 * c.sigma_f * c.sigma_f + 11.0)
            + n * c.sigma_lambda * c.sigma_lambda / (3.0 * ld)
                * (17.0 / 24.0 + 2.0 * n * c.sigma_h * c.sigma_h)
            + 1.0 / (3.0 * l) * (n * c.g_h * c.g_h * d + 4.0 * d * b);
        let c2_hat = a + 15.0 * ld / 4.0 * (1.0 + cc * cc);
        let delta = delta.unwrap_or(18.0 * ld * ld);
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::invalid(format!("delta must be nonnegative, got {delta}")));
        }
        let mut s = Self {
            l,
            a,
            c1_hat: 1.0 / (6.0 * ld),
            c2_hat,
            k_hat: a + cc * c2_hat,
            b,
            c: cc,
            delta,
            horizon,
            warnings: Vec::new(),
        };
        if s.eta() > 1.0 {
            s.warnings.push(format!("eta = {:.4e} exceeds 1 at T = {t}", s.eta()));
        }
        if s.upsilon() >= c.sigma_lambda {
            s.warnings.push(format!(
                "upsilon = {:.4e} is not below sigma_lambda = {:.4e} at T = {t}",
                s.upsilon(),
                c.sigma_lambda
            ));
        }
        for w in &s.warnings {
            log::warn!("{w}");
        }
        Ok(s)
    }

    pub fn eta(&self) -> f64 {
        self.c1_hat * (self.horizon as f64).powf(-0.75)
    }

    pub fn upsilon(&self) -> f64 {
        self.c2_hat * (self.horizon as f64).powf(-0.25)
    }

    pub fn rho(&self) -> f64 {
        (self.horizon as f64).powf(-0.5) / (8.0 * self.b)
    }

    /// Upper bound on the optimality gap, `K_hat / T^{1/4}`.
    pub fn gap_bound(&self) -> f64 {
        self.k_hat * (self.horizon as f64).powf(-0.25)
    }
}

/// Either theorem schedule, as consumed by the lower bound.
#[derive(Debug, Clone, PartialEq)]
pub enum TheoremSchedule {
    T1(ScheduleT1),
    T2(ScheduleT2),
}

/// How step parameters are chosen for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// Constants-driven schedule for CSOA.
    Theorem1,
    /// Constants-driven schedule for FW-CSOA.
    Theorem2 {
        #[serde(default)]
        delta: Option<f64>,
    },
    /// Tuned constants. CSOA: `eta = eta0 / sqrt(T)`. FW-CSOA:
    /// `eta = eta0 / T^{3/4}`, `rho = min(1, rho0 / sqrt(T))`. Both:
    /// `upsilon = upsilon0 / T^{upsilon_exponent}` (exponent 1/2 by default).
    Manual {
        eta0: f64,
        delta: f64,
        upsilon0: f64,
        #[serde(default)]
        rho0: Option<f64>,
        #[serde(default)]
        upsilon_exponent: Option<f64>,
    },
    /// Constant parameters, used as given.
    Fixed {
        eta: f64,
        delta: f64,
        upsilon: f64,
        #[serde(default = "one")]
        rho: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Schedule {
    /// Resolves to concrete parameters plus any schedule warnings.
    pub fn resolve(
        &self,
        algorithm: Algorithm,
        constants: Option<&ProblemConstants>,
        horizon: usize,
        seed: u64,
    ) -> Result<(HyperParams, Vec<String>)> {
        let need = |name: &str| {
            constants.ok_or_else(|| {
                Error::invalid(format!("the {name} schedule needs problem constants"))
            })
        };
        let t = horizon.max(1) as f64;
        let (eta, delta, upsilon, rho, warnings) = match self {
            Schedule::Theorem1 => {
                if algorithm != Algorithm::Csoa {
                    return Err(Error::invalid("the theorem1 schedule applies to csoa"));
                }
                let s = ScheduleT1::new(need("theorem1")?, horizon.max(1))?;
                (s.eta(), s.delta(), s.upsilon(), 1.0, s.warnings)
            }
            Schedule::Theorem2 { delta } => {
                if algorithm != Algorithm::FwCsoa {
                    return Err(Error::invalid("the theorem2 schedule applies to fw_csoa"));
                }
                let s = ScheduleT2::new(need("theorem2")?, horizon.max(1), *delta)?;
                (s.eta(), s.delta, s.upsilon(), s.rho(), s.warnings)
            }
            Schedule::Manual {
                eta0,
                delta,
                upsilon0,
                rho0,
                upsilon_exponent,
            } => {
                let ups = upsilon0 * t.powf(-upsilon_exponent.unwrap_or(0.5));
                match algorithm {
                    Algorithm::Csoa => (eta0 / t.sqrt(), *delta, ups, 1.0, Vec::new()),
                    Algorithm::FwCsoa => {
                        let rho0 = rho0.ok_or_else(|| {
                            Error::invalid("manual fw_csoa schedule needs rho0")
                        })?;
                        let rho = (rho0 / t.sqrt()).min(1.0);
                        (eta0 * t.powf(-0.75), *delta, ups, rho, Vec::new())
                    }
                }
            }
            Schedule::Fixed {
                eta,
                delta,
                upsilon,
                rho,
            } => (*eta, *delta, *upsilon, *rho, Vec::new()),
        };
        let hp = HyperParams {
            eta,
            delta,
            upsilon,
            rho,
            horizon,
            seed,
        };
        match algorithm {
            Algorithm::Csoa => hp.validate()?,
            Algorithm::FwCsoa => hp.validate_frank_wolfe()?,
        }
        Ok((hp, warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_constants() -> ProblemConstants {
        ProblemConstants {
            sigma_f: 1.0,
            sigma_h: 1.0,
            sigma_lambda: 1.0,
            g_f: 1.0,
            g_h: 1.0,
            l_f: 0.5,
            l_h: 0.5,
            diameter: 1.0,
            slater_sigma: 2.0,
            n_constraints: 1,
        }
    }

    #[test]
    fn theorem1_hand_values() {
        let s = ScheduleT1::new(&hand_constants(), 100).unwrap();
        assert_eq!(s.p, 10.0);
        assert_eq!(s.k1, 6.0);
        assert_eq!(s.k2, 36.0);
        assert!((s.k - 216f64.sqrt()).abs() < 1e-12);
        assert!((s.c1 - (1.0f64 / 6.0).sqrt()).abs() < 1e-12);
        assert!(((s.k * s.k) / (s.k1 * s.k2) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn theorem1_eta_power_law() {
        let c = hand_constants();
        let a = ScheduleT1::new(&c, 1000).unwrap();
        let b = ScheduleT1::new(&c, 2000).unwrap();
        assert!((b.eta() / a.eta() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn short_horizon_is_flagged() {
        let s = ScheduleT1::new(&hand_constants(), 1).unwrap();
        assert!(s.warnings.iter().any(|w| w.contains("horizon too short")));
    }

    #[test]
    fn theorem2_smoothness_floor() {
        let s = ScheduleT2::new(&hand_constants(), 10, None).unwrap();
        assert_eq!(s.l, 1.0);
        assert_eq!(s.delta, 18.0);
        let s = ScheduleT2::new(&hand_constants(), 10, Some(9.0)).unwrap();
        assert_eq!(s.delta, 9.0);
    }

    #[test]
    fn zero_horizon_rejected() {
        assert!(ScheduleT1::new(&hand_constants(), 0).is_err());
    }

    #[test]
    fn manual_fw_clamps_rho() {
        let s = Schedule::Manual {
            eta0: 1.0,
            delta: 0.1,
            upsilon0: 1.0,
            rho0: Some(5.0),
            upsilon_exponent: Some(0.25),
        };
        let (hp, _) = s.resolve(Algorithm::FwCsoa, None, 16, 3).unwrap();
        assert_eq!(hp.rho, 1.0);
        assert!((hp.eta - 0.125).abs() < 1e-15);
        assert!((hp.upsilon - 0.5).abs() < 1e-15);
    }

    #[test]
    fn schedule_algorithm_mismatch_is_an_error() {
        let c = hand_constants();
        assert!(Schedule::Theorem1
            .resolve(Algorithm::FwCsoa, Some(&c), 10, 0)
            .is_err());
        assert!(Schedule::Theorem1.resolve(Algorithm::Csoa, None, 10, 0).is_err());
    }
}
