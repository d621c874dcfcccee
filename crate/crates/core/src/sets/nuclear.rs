use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_input, Capabilities, FeasibleSet};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::rng::{derive_seed, hash_f64s, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerIterationConfig {
    /// Relative change of the singular value estimate at which to stop.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PowerIterationConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 500,
            seed: 0,
        }
    }
}

/// Leading singular triple of a row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TopSingular {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
}

/// Power iteration on `A^T A` for a `rows x cols` row-major matrix `a`.
///
/// The start vector is drawn from `start_seed`. On return `u = A v / |A v|`,
/// so `u^T A v = sigma > 0`.
pub fn top_singular_pair(
    a: &[f64],
    rows: usize,
    cols: usize,
    cfg: &PowerIterationConfig,
    start_seed: u64,
) -> Result<TopSingular> {
    if a.len() != rows * cols {
        return Err(Error::dim("power iteration matrix", rows * cols, a.len()));
    }
    let mut rng = stream_rng(start_seed, 0);
    let mut v: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    let vn = norm(&v);
    v.iter_mut().for_each(|x| *x /= vn);

    let mut av = vec![0.0; rows];
    let mut atav = vec![0.0; cols];
    let mut sigma_prev = 0.0;
    let mut residual = f64::INFINITY;
    for iter in 1..=cfg.max_iters {
        mat_vec(a, rows, cols, &v, &mut av);
        let sigma = norm(&av);
        if sigma == 0.0 {
            return Err(Error::invalid("power iteration on a zero matrix"));
        }
        residual = (sigma - sigma_prev).abs() / sigma;
        if residual <= cfg.tol {
            let u: Vec<f64> = av.iter().map(|x| x / sigma).collect();
            return Ok(TopSingular {
                sigma,
                u,
                v,
                iterations: iter,
            });
        }
        sigma_prev = sigma;
        mat_t_vec(a, rows, cols, &av, &mut atav);
        let n = norm(&atav);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NonFinite("power iteration vector"));
        }
        v.iter_mut().zip(&atav).for_each(|(vi, w)| *vi = w / n);
    }
    Err(Error::PowerIteration {
        iterations: cfg.max_iters,
        residual,
    })
}

fn mat_vec(a: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(rows) {
        *o = dot(&a[i * cols..(i + 1) * cols], v);
    }
}

fn mat_t_vec(a: &[f64], rows: usize, cols: usize, u: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, ui) in u.iter().enumerate().take(rows) {
        if *ui != 0.0 {
            crate::linalg::axpy(*ui, &a[i * cols..(i + 1) * cols], out);
        }
    }
}

/// Nuclear-norm ball `|X|_* <= radius` over `rows x cols` matrices stored
/// row-major. LMO only.
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearBallSet {
    rows: usize,
    cols: usize,
    radius: f64,
    power: PowerIterationConfig,
}

impl NuclearBallSet {
    pub fn new(rows: usize, cols: usize, radius: f64, power: PowerIterationConfig) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("nuclear ball needs positive shape"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!(
                "nuclear ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            radius,
            power,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn power_config(&self) -> &PowerIterationConfig {
        &self.power
    }
}

/// Leading singular triple from a full SVD, for nearly tied top values
/// where power iteration stalls.
pub fn dense_top_pair(a: &[f64], rows: usize, cols: usize) -> Result<TopSingular> {
    if a.len() != rows * cols {
        return Err(Error::dim("svd matrix", rows * cols, a.len()));
    }
    let svd = DMatrix::from_row_slice(rows, cols, a).svd(true, true);
    let (u, vt) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::NonFinite("svd factors")),
    };
    let k = svd.singular_values.imax();
    Ok(TopSingular {
        sigma: svd.singular_values[k],
        u: u.column(k).iter().copied().collect(),
        v: vt.row(k).iter().copied().collect(),
        iterations: 0,
    })
}

/// Sum of singular values of a row-major matrix (dense SVD).
pub fn nuclear_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    DMatrix::from_row_slice(rows, cols, a)
        .singular_values()
        .iter()
        .sum()
}

impl FeasibleSet for NuclearBallSet {
    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn diameter(&self) -> f64 {
        // |X|_F <= |X|_*
        2.0 * self.radius
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_projection: false,
            has_lmo: true,
        }
    }

    fn lmo(&self, d: &[f64]) -> Result<Vec<f64>> {
        check_input(self.dim(), d, "nuclear ball lmo direction")?;
        let mut s = vec![0.0; self.dim()];
        if d.iter().all(|&v| v == 0.0) {
            log::warn!("nuclear ball lmo called with a zero direction; returning radius e_0 e_0^T");
            s[0] = self.radius;
            return Ok(s);
        }
        // the start vector depends only on (set seed, direction), so the call
        // is a pure function of its input
        let seed = derive_seed(self.power.seed, hash_f64s(d));
        let top = match top_singular_pair(d, self.rows, self.cols, &self.power, seed) {
            Err(Error::PowerIteration { residual, .. }) => {
                log::debug!("power iteration stalled at residual {residual:e}; using dense svd");
                dense_top_pair(d, self.rows, self.cols)?
            }
            other => other?,
        };
        for (i, ui) in top.u.iter().enumerate() {
            let row = &mut s[i * self.cols..(i + 1) * self.cols];
            for (sij, vj) in row.iter_mut().zip(&top.v) {
                *sij = -self.radius * ui * vj;
            }
        }
        Ok(s)
    }

    fn membership_residual(&self, x: &[f64]) -> f64 {
        if x.len() != self.dim() {
            return f64::INFINITY;
        }
        (nuclear_norm(x, self.rows, self.cols) - self.radius).max(0.0)
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        // convex combination of a few random unit rank-one matrices, scaled
        // into the ball; nuclear norm <= radius by the triangle inequality
        const TERMS: usize = 4;
        let mut x = vec![0.0; self.dim()];
        let weights: Vec<f64> = (0..TERMS).map(|_| rng.random::<f64>()).collect();
        let wsum: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let scale = self.radius * rng.random::<f64>();
        for w in weights {
            let mut u: Vec<f64> = (0..self.rows).map(|_| StandardNormal.sample(rng)).collect();
            let mut v: Vec<f64> = (0..self.cols).map(|_| StandardNormal.sample(rng)).collect();
            let (nu, nv) = (norm(&u), norm(&v));
            u.iter_mut().for_each(|a| *a /= nu);
            v.iter_mut().for_each(|a| *a /= nv);
            let c = scale * w / wsum;
            for (i, ui) in u.iter().enumerate() {
                for (j, vj) in v.iter().enumerate() {
                    x[i * self.cols + j] += c * ui * vj;
                }
            }
        }
        x
    }
}
