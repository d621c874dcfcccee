//! Feasible sets: projections for CSOA and linear minimization oracles for
//! FW-CSOA.

mod boxset;
mod l1ball;
mod l2ball;
mod nuclear;

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::RngCore;

use crate::error::{Error, Result};

pub use boxset::BoxSet;
pub use l1ball::L1BallSet;
pub use l2ball::L2BallSet;
pub use nuclear::{dense_top_pair, nuclear_norm, top_singular_pair, NuclearBallSet, PowerIterationConfig, TopSingular};

/// Membership tolerance used throughout the crate.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub has_projection: bool,
    pub has_lmo: bool,
}

pub trait FeasibleSet: Send + Sync {
    fn dim(&self) -> usize;

    /// Upper bound on `|x - y|` over members.
    fn diameter(&self) -> f64;

    fn capabilities(&self) -> Capabilities;

    /// Euclidean projection.
    fn project(&self, _x: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Unsupported {
            operation: "projection",
        })
    }

    /// `argmin_{s in set} <s, d>`.
    fn lmo(&self, _d: &[f64]) -> Result<Vec<f64>> {
        Err(Error::Unsupported {
            operation: "linear minimization",
        })
    }

    /// How far `x` lies outside the set (0 for members).
    fn membership_residual(&self, x: &[f64]) -> f64;

    /// A random member, used to estimate problem constants.
    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

pub(crate) fn check_input(dim: usize, v: &[f64], context: &'static str) -> Result<()> {
    if v.len() != dim {
        return Err(Error::dim(context, dim, v.len()));
    }
    if !crate::linalg::all_finite(v) {
        return Err(Error::NonFinite(context));
    }
    Ok(())
}

/// Wraps a set and counts projection and LMO calls.
pub struct Counted<'a, S: ?Sized> {
    inner: &'a S,
    projections: AtomicUsize,
    lmos: AtomicUsize,
}

impl<'a, S: FeasibleSet + ?Sized> Counted<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        Self {
            inner,
            projections: AtomicUsize::new(0),
            lmos: AtomicUsize::new(0),
        }
    }

    pub fn projection_calls(&self) -> usize {
        self.projections.load(Ordering::Relaxed)
    }

    pub fn lmo_calls(&self) -> usize {
        self.lmos.load(Ordering::Relaxed)
    }
}

impl<S: FeasibleSet + ?Sized> FeasibleSet for Counted<'_, S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.projections.fetch_add(1, Ordering::Relaxed);
        self.inner.project(x)
    }

    fn lmo(&self, d: &[f64]) -> Result<Vec<f64>> {
        self.lmos.fetch_add(1, Ordering::Relaxed);
        self.inner.lmo(d)
    }

    fn membership_residual(&self, x: &[f64]) -> f64 {
        self.inner.membership_residual(x)
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.inner.sample_point(rng)
    }
}

/// Any concrete set, for callers that pick the set at runtime.
#[derive(Debug, Clone)]
pub enum AnySet {
    Box(BoxSet),
    L2Ball(L2BallSet),
    L1Ball(L1BallSet),
    NuclearBall(NuclearBallSet),
}

impl AnySet {
    fn inner(&self) -> &dyn FeasibleSet {
        match self {
            AnySet::Box(s) => s,
            AnySet::L2Ball(s) => s,
            AnySet::L1Ball(s) => s,
            AnySet::NuclearBall(s) => s,
        }
    }
}

impl FeasibleSet for AnySet {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn diameter(&self) -> f64 {
        self.inner().diameter()
    }
    fn capabilities(&self) -> Capabilities {
        self.inner().capabilities()
    }
    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner().project(x)
    }
    fn lmo(&self, d: &[f64]) -> Result<Vec<f64>> {
        self.inner().lmo(d)
    }
    fn membership_residual(&self, x: &[f64]) -> f64 {
        self.inner().membership_residual(x)
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.inner().sample_point(rng)
    }
}
