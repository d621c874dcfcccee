//! Evaluation metrics and convergence-rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, KahanSum};
use crate::problems::FairData;
use crate::solvers::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PPercent {
    pub value: f64,
    pub positive_rate_s1: f64,
    pub positive_rate_s0: f64,
    /// A group had no positive predictions, so the ratio is undefined.
    pub degenerate: bool,
}

/// p%-rule of the classifier `theta^T x >= 0` on `data`.
pub fn p_percent(weights: &[f64], data: &FairData) -> Result<PPercent> {
    if weights.len() != data.n_features {
        return Err(Error::dim("classifier weights", data.n_features, weights.len()));
    }
    let (mut pos, mut cnt) = ([0usize; 2], [0usize; 2]);
    for i in 0..data.len() {
        let g = data.sensitive[i] as usize;
        cnt[g] += 1;
        if dot(weights, data.row(i)) >= 0.0 {
            pos[g] += 1;
        }
    }
    if cnt[0] == 0 || cnt[1] == 0 {
        return Err(Error::Data("p% needs both sensitive groups to be nonempty".into()));
    }
    let r1 = pos[1] as f64 / cnt[1] as f64;
    let r0 = pos[0] as f64 / cnt[0] as f64;
    Ok(p_percent_from_rates(r1, r0))
}

pub fn p_percent_from_rates(rate_s1: f64, rate_s0: f64) -> PPercent {
    let degenerate = rate_s1 == 0.0 || rate_s0 == 0.0;
    let value = if degenerate {
        0.0
    } else {
        let r = rate_s1 / rate_s0;
        100.0 * r.min(1.0 / r)
    };
    PPercent {
        value,
        positive_rate_s1: rate_s1,
        positive_rate_s0: rate_s0,
        degenerate,
    }
}

/// Fraction of rows whose prediction matches the label.
pub fn accuracy(weights: &[f64], data: &FairData) -> f64 {
    let hits = (0..data.len())
        .filter(|&i| (dot(weights, data.row(i)) >= 0.0) == (data.labels[i] == 1.0))
        .count();
    hits as f64 / data.len().max(1) as f64
}

/// `sum_I (X - M)^2 / sum_I M^2` with compensated sums.
pub fn normalized_error(x: &[f64], observed: &[(usize, f64)]) -> Result<f64> {
    let mut num = KahanSum::new();
    let mut den = KahanSum::new();
    for &(k, m) in observed {
        let xk = *x.get(k).ok_or_else(|| Error::invalid(format!("observed cell {k} outside iterate")))?;
        num.add((xk - m) * (xk - m));
        den.add(m * m);
    }
    if den.value() <= 0.0 {
        return Err(Error::Data("observed entries are all zero".into()));
    }
    Ok(num.value() / den.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub running_avg_final: f64,
    pub max_instantaneous: f64,
    pub fraction_violated: f64,
}

/// Per-constraint averages over the recorded rows.
pub fn violation_summary(trace: &[TraceRecord]) -> Vec<ConstraintViolation> {
    let n = trace.first().map_or(0, |r| r.h.len());
    (0..n)
        .map(|i| {
            let mut sum = KahanSum::new();
            let mut max = f64::NEG_INFINITY;
            let mut violated = 0usize;
            for r in trace {
                let h = r.h[i];
                sum.add(h);
                max = max.max(h);
                if h > 0.0 {
                    violated += 1;
                }
            }
            ConstraintViolation {
                running_avg_final: sum.value() / trace.len() as f64,
                max_instantaneous: max,
                fraction_violated: violated as f64 / trace.len() as f64,
            }
        })
        .collect()
}

/// True when every running average is at most `tol`.
pub fn certifies_zero_violation(summary: &[ConstraintViolation], tol: f64) -> bool {
    summary.iter().all(|c| c.running_avg_final <= tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub horizons: Vec<f64>,
    pub gaps: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Indices of nonpositive gaps left out of the fit.
    pub excluded: Vec<usize>,
}

/// Least-squares line through `(ln T, ln gap)`.
pub fn fit_rate(horizons: &[f64], gaps: &[f64]) -> Result<RateFit> {
    if horizons.len() != gaps.len() {
        return Err(Error::dim("rate fit gaps", horizons.len(), gaps.len()));
    }
    if horizons.windows(2).any(|w| w[1] <= w[0]) || horizons.iter().any(|&t| t <= 0.0) {
        return Err(Error::invalid("horizons must be positive and strictly increasing"));
    }
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for (i, (&t, &g)) in horizons.iter().zip(gaps).enumerate() {
        if g > 0.0 && g.is_finite() {
            pts.push((t.ln(), g.ln()));
        } else {
            log::warn!("excluding nonpositive gap {g:e} at T = {t}");
            excluded.push(i);
        }
    }
    if pts.len() < 3 {
        return Err(Error::invalid(format!("rate fit needs 3 usable points, got {}", pts.len())));
    }
    let span = pts.last().unwrap().0 - pts[0].0;
    if span < 2.0 * std::f64::consts::LN_10 - 1e-12 {
        return Err(Error::invalid("rate fit horizons must span at least two decades"));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit {
        horizons: horizons.to_vec(),
        gaps: gaps.to_vec(),
        slope,
        intercept,
        r2,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(h: f64) -> TraceRecord {
        TraceRecord {
            t: 1,
            obj_est: 0.0,
            obj_avg: 0.0,
            h: vec![h],
            h_avg: vec![h],
            lambda_norm: 0.0,
            eta: 0.1,
            upsilon: 0.0,
        }
    }

    #[test]
    fn p_percent_rates() {
        assert_eq!(p_percent_from_rates(0.3, 0.3).value, 100.0);
        assert!((p_percent_from_rates(0.4, 0.5).value - 80.0).abs() < 1e-12);
        assert!(p_percent_from_rates(0.0, 0.5).degenerate);
    }

    #[test]
    fn empty_group_is_an_error() {
        let d = FairData::new(vec![1.0, 2.0], 1, vec![1.0, 0.0], vec![0.0, 0.0], vec!["a".into()]).unwrap();
        assert!(p_percent(&[1.0], &d).is_err());
    }

    #[test]
    fn normalized_error_cases() {
        let obs = [(0, 1.0), (2, -2.0)];
        assert_eq!(normalized_error(&[1.0, 9.0, -2.0], &obs).unwrap(), 0.0);
        assert_eq!(normalized_error(&[0.0; 3], &obs).unwrap(), 1.0);
        assert_eq!(normalized_error(&[2.0, 0.0, -4.0], &obs).unwrap(), 1.0);
        assert!(normalized_error(&[0.0; 3], &[(0, 0.0)]).is_err());
    }

    #[test]
    fn violation_cases() {
        let s = violation_summary(&vec![record(-0.1); 4]);
        assert!((s[0].running_avg_final + 0.1).abs() < 1e-15);
        assert_eq!(s[0].fraction_violated, 0.0);
        let alt: Vec<_> = (0..6).map(|i| record(if i % 2 == 0 { 1.0 } else { -1.0 })).collect();
        assert_eq!(violation_summary(&alt)[0].running_avg_final, 0.0);
    }

    #[test]
    fn exact_power_laws() {
        let t = [1e2, 1e3, 1e4, 1e5];
        let half: Vec<f64> = t.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((fit_rate(&t, &half).unwrap().slope + 0.5).abs() < 1e-10);
        let quarter: Vec<f64> = t.iter().map(|x: &f64| 3.0 * x.powf(-0.25)).collect();
        assert!((fit_rate(&t, &quarter).unwrap().slope + 0.25).abs() < 1e-10);
        assert!(fit_rate(&t, &[2.0; 4]).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn nonpositive_gaps_excluded() {
        let t = [1e1, 1e2, 1e3, 1e4];
        let fit = fit_rate(&t, &[1.0, -1.0, 0.1, 0.01]).unwrap();
        assert_eq!(fit.excluded, vec![1]);
        assert!(fit_rate(&t, &[1.0, -1.0, 0.0, 0.01]).is_err());
        assert!(fit_rate(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).is_err());
    }
}
