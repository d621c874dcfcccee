//! C ABI over the csoa solvers.
//!
//! Every function returns a status code and writes results through out
//! pointers. Handles are opaque and must be released with the matching
//! `*_free` function. After a nonzero status, `csoa_last_error_message`
//! describes the failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use csoa::bench::DeskQp;
use csoa::constants::{estimate_constants, EstimateConfig};
use csoa::problems::{gen_synthetic_fairness, FairClassificationProblem, SyntheticFairnessConfig};
use csoa::sets::AnySet;
use csoa::solvers::{run_collect, Algorithm, RunResult, ScheduleT1, TraceConfig};
use csoa::{Error, FeasibleSet, HyperParams, ProblemConstants, StochasticProblem};

pub const CSOA_OK: i32 = 0;
pub const CSOA_NULL_POINTER: i32 = 1;
pub const CSOA_INVALID_ARGUMENT: i32 = 2;
pub const CSOA_NUMERIC: i32 = 3;
pub const CSOA_CAPABILITY: i32 = 4;
pub const CSOA_PANIC: i32 = 5;
pub const CSOA_BUFFER_TOO_SMALL: i32 = 6;

pub const CSOA_ALGORITHM_CSOA: i32 = 0;
pub const CSOA_ALGORITHM_FW_CSOA: i32 = 1;

pub const CSOA_SET_L2_BALL: i32 = 0;
pub const CSOA_SET_L1_BALL: i32 = 1;

/// A problem together with its feasible set.
pub struct CsoaProblem {
    inner: ProblemKind,
}

enum ProblemKind {
    Desk(DeskQp, AnySet),
    Fairness(FairClassificationProblem),
}

/// A finished run.
pub struct CsoaRun {
    result: RunResult,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CsoaConstants {
    pub sigma_f: f64,
    pub sigma_h: f64,
    pub sigma_lambda: f64,
    pub g_f: f64,
    pub g_h: f64,
    pub l_f: f64,
    pub l_h: f64,
    pub diameter: f64,
    pub slater_sigma: f64,
    pub n_constraints: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CsoaHyperParams {
    pub eta: f64,
    pub delta: f64,
    pub upsilon: f64,
    pub rho: f64,
    pub horizon: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CsoaTraceRow {
    pub t: usize,
    pub obj_est: f64,
    pub obj_avg: f64,
    pub lambda_norm: f64,
    pub eta: f64,
    pub upsilon: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CsoaRunStats {
    pub dim: usize,
    pub n_constraints: usize,
    pub trace_len: usize,
    pub projection_calls: usize,
    pub lmo_calls: usize,
    pub max_lambda_norm: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numeric() {
            CSOA_NUMERIC
        } else if matches!(e, Error::Unsupported { .. }) {
            CSOA_CAPABILITY
        } else {
            CSOA_INVALID_ARGUMENT
        };
        Failure(code, e.to_string())
    }
}

fn fail<T>(code: i32, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(code, msg.into()))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CSOA_OK,
        Ok(Err(Failure(code, msg))) => {
            set_last_error(msg);
            code
        }
        Err(_) => {
            set_last_error("internal panic");
            CSOA_PANIC
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(CSOA_NULL_POINTER, format!("{what} is null")))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(CSOA_NULL_POINTER, format!("{what} is null")))
}

unsafe fn as_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(CSOA_NULL_POINTER, format!("{what} is null"));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Copies `src` into `buf` and stores its length in `len`; reports
/// `CSOA_BUFFER_TOO_SMALL` with the needed length when `capacity` is short.
unsafe fn copy_out(src: &[f64], buf: *mut f64, capacity: usize, len: *mut usize) -> Result<(), Failure> {
    *as_mut(len, "len")? = src.len();
    if capacity < src.len() {
        return fail(
            CSOA_BUFFER_TOO_SMALL,
            format!("buffer holds {capacity} values, {} needed", src.len()),
        );
    }
    if !src.is_empty() {
        if buf.is_null() {
            return fail(CSOA_NULL_POINTER, "buf is null");
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

impl From<ProblemConstants> for CsoaConstants {
    fn from(c: ProblemConstants) -> Self {
        Self {
            sigma_f: c.sigma_f,
            sigma_h: c.sigma_h,
            sigma_lambda: c.sigma_lambda,
            g_f: c.g_f,
            g_h: c.g_h,
            l_f: c.l_f,
            l_h: c.l_h,
            diameter: c.diameter,
            slater_sigma: c.slater_sigma,
            n_constraints: c.n_constraints,
        }
    }
}

impl From<CsoaConstants> for ProblemConstants {
    fn from(c: CsoaConstants) -> Self {
        Self {
            sigma_f: c.sigma_f,
            sigma_h: c.sigma_h,
            sigma_lambda: c.sigma_lambda,
            g_f: c.g_f,
            g_h: c.g_h,
            l_f: c.l_f,
            l_h: c.l_h,
            diameter: c.diameter,
            slater_sigma: c.slater_sigma,
            n_constraints: c.n_constraints,
        }
    }
}

impl From<CsoaHyperParams> for HyperParams {
    fn from(h: CsoaHyperParams) -> Self {
        Self {
            eta: h.eta,
            delta: h.delta,
            upsilon: h.upsilon,
            rho: h.rho,
            horizon: h.horizon,
            seed: h.seed,
        }
    }
}

impl From<HyperParams> for CsoaHyperParams {
    fn from(h: HyperParams) -> Self {
        Self {
            eta: h.eta,
            delta: h.delta,
            upsilon: h.upsilon,
            rho: h.rho,
            horizon: h.horizon,
            seed: h.seed,
        }
    }
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn csoa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Quadratic test problem `min E|x - theta|^2` s.t. `E[<a, x> - b + nu] <= 0`
/// over an l2 (`CSOA_SET_L2_BALL`) or l1 (`CSOA_SET_L1_BALL`) ball.
///
/// # Safety
/// `mu` and `a` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csoa_problem_desk_qp(
    mu: *const f64,
    a: *const f64,
    dim: usize,
    b: f64,
    radius: f64,
    noise: f64,
    batch: usize,
    set_kind: i32,
    out: *mut *mut CsoaProblem,
) -> i32 {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        if dim == 0 {
            return fail(CSOA_INVALID_ARGUMENT, "dim must be positive");
        }
        let mu = as_slice(mu, dim, "mu")?.to_vec();
        let a = as_slice(a, dim, "a")?.to_vec();
        let mut qp = DeskQp::new(mu, a, b, radius, noise)?;
        qp.batch = batch;
        qp.validate()?;
        let set = match set_kind {
            CSOA_SET_L2_BALL => AnySet::L2Ball(qp.ball()),
            CSOA_SET_L1_BALL => AnySet::L1Ball(qp.l1_ball()),
            k => return fail(CSOA_INVALID_ARGUMENT, format!("unknown set kind {k}")),
        };
        *out = Box::into_raw(Box::new(CsoaProblem {
            inner: ProblemKind::Desk(qp, set),
        }));
        Ok(())
    })
}

/// Fairness-constrained logistic regression on generated two-class Gaussian
/// data with covariance budget `c` and an l2 ball of `radius`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csoa_problem_fairness_synthetic(
    n_samples: usize,
    c: f64,
    radius: f64,
    batch: usize,
    data_seed: u64,
    out: *mut *mut CsoaProblem,
) -> i32 {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let cfg = SyntheticFairnessConfig {
            n_samples,
            c,
            radius,
            ..Default::default()
        };
        let problem = gen_synthetic_fairness(&cfg, data_seed)?.with_batch(batch)?;
        *out = Box::into_raw(Box::new(CsoaProblem {
            inner: ProblemKind::Fairness(problem),
        }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from a constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn csoa_problem_free(problem: *mut CsoaProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn csoa_problem_shape(
    problem: *const CsoaProblem,
    dim: *mut usize,
    n_constraints: *mut usize,
) -> i32 {
    guard(|| {
        let p = as_ref(problem, "problem")?;
        let (m, n) = match &p.inner {
            ProblemKind::Desk(qp, _) => (qp.dim(), qp.num_constraints()),
            ProblemKind::Fairness(f) => (f.dim(), f.num_constraints()),
        };
        *as_mut(dim, "dim")? = m;
        *as_mut(n_constraints, "n_constraints")? = n;
        Ok(())
    })
}

/// Exact constants for the quadratic problem; sampled estimates (with the
/// origin as Slater point) otherwise.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csoa_problem_constants(
    problem: *const CsoaProblem,
    seed: u64,
    out: *mut CsoaConstants,
) -> i32 {
    guard(|| {
        let p = as_ref(problem, "problem")?;
        let out = as_mut(out, "out")?;
        let c = match &p.inner {
            ProblemKind::Desk(qp, AnySet::L1Ball(_)) => qp.exact_constants_l1(),
            ProblemKind::Desk(qp, _) => qp.exact_constants(),
            ProblemKind::Fairness(f) => {
                let cfg = EstimateConfig {
                    seed,
                    slater_point: Some(vec![0.0; f.dim()]),
                    ..Default::default()
                };
                estimate_constants(f, &f.set(), &cfg)?
            }
        };
        *out = c.into();
        Ok(())
    })
}

/// Step parameters of the projected schedule for `horizon` iterations.
///
/// # Safety
/// `constants` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csoa_schedule_theorem1(
    constants: *const CsoaConstants,
    horizon: usize,
    seed: u64,
    out: *mut CsoaHyperParams,
) -> i32 {
    guard(|| {
        let c: ProblemConstants = (*as_ref(constants, "constants")?).into();
        let out = as_mut(out, "out")?;
        let s = ScheduleT1::new(&c, horizon)?;
        *out = CsoaHyperParams {
            eta: s.eta(),
            delta: s.delta(),
            upsilon: s.upsilon(),
            rho: 1.0,
            horizon,
            seed,
        };
        Ok(())
    })
}

fn run_on<P, S>(
    algorithm: Algorithm,
    problem: &P,
    set: &S,
    hp: &HyperParams,
    stride: usize,
) -> Result<RunResult, Failure>
where
    P: StochasticProblem,
    S: FeasibleSet,
{
    let caps = set.capabilities();
    let supported = match algorithm {
        Algorithm::Csoa => caps.has_projection,
        Algorithm::FwCsoa => caps.has_lmo,
    };
    if !supported {
        return fail(
            CSOA_CAPABILITY,
            format!("{} is not supported by this problem's set", algorithm.name()),
        );
    }
    let cfg = TraceConfig {
        stride,
        check_membership: false,
    };
    Ok(run_collect(algorithm, problem, set, hp, vec![0.0; problem.dim()], &cfg)?)
}

/// Runs `algorithm` from the origin, recording every `trace_stride`-th
/// iteration (0 picks about 200 rows).
///
/// # Safety
/// `problem` must be a live handle, `params` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csoa_run(
    problem: *const CsoaProblem,
    algorithm: i32,
    params: *const CsoaHyperParams,
    trace_stride: usize,
    out: *mut *mut CsoaRun,
) -> i32 {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = ptr::null_mut();
        let p = as_ref(problem, "problem")?;
        let hp: HyperParams = (*as_ref(params, "params")?).into();
        let algorithm = match algorithm {
            CSOA_ALGORITHM_CSOA => Algorithm::Csoa,
            CSOA_ALGORITHM_FW_CSOA => Algorithm::FwCsoa,
            k => return fail(CSOA_INVALID_ARGUMENT, format!("unknown algorithm {k}")),
        };
        let result = match &p.inner {
            ProblemKind::Desk(qp, set) => run_on(algorithm, qp, set, &hp, trace_stride)?,
            ProblemKind::Fairness(f) => run_on(algorithm, f, &f.set(), &hp, trace_stride)?,
        };
        *out = Box::into_raw(Box::new(CsoaRun { result }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from `csoa_run` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn csoa_run_free(run: *mut CsoaRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csoa_run_stats(run: *const CsoaRun, out: *mut CsoaRunStats) -> i32 {
    guard(|| {
        let r = &as_ref(run, "run")?.result;
        *as_mut(out, "out")? = CsoaRunStats {
            dim: r.state.x.len(),
            n_constraints: r.state.lambda.len(),
            trace_len: r.trace.len(),
            projection_calls: r.projection_calls,
            lmo_calls: r.lmo_calls,
            max_lambda_norm: r.max_lambda_norm,
        };
        Ok(())
    })
}

/// Scalar fields of trace row `index`.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csoa_run_trace_row(run: *const CsoaRun, index: usize, out: *mut CsoaTraceRow) -> i32 {
    guard(|| {
        let r = &as_ref(run, "run")?.result;
        let out = as_mut(out, "out")?;
        let Some(row) = r.trace.get(index) else {
            return fail(
                CSOA_INVALID_ARGUMENT,
                format!("trace row {index} out of range ({} rows)", r.trace.len()),
            );
        };
        *out = CsoaTraceRow {
            t: row.t,
            obj_est: row.obj_est,
            obj_avg: row.obj_avg,
            lambda_norm: row.lambda_norm,
            eta: row.eta,
            upsilon: row.upsilon,
        };
        Ok(())
    })
}

/// Running constraint averages at trace row `index`.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `capacity` doubles and `len`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn csoa_run_trace_h_avg(
    run: *const CsoaRun,
    index: usize,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> i32 {
    guard(|| {
        let r = &as_ref(run, "run")?.result;
        let Some(row) = r.trace.get(index) else {
            return fail(
                CSOA_INVALID_ARGUMENT,
                format!("trace row {index} out of range ({} rows)", r.trace.len()),
            );
        };
        copy_out(&row.h_avg, buf, capacity, len)
    })
}

/// Final iterate `x_{T+1}`.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `capacity` doubles and `len`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn csoa_run_final_x(
    run: *const CsoaRun,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> i32 {
    guard(|| {
        let r = &as_ref(run, "run")?.result;
        copy_out(&r.state.x, buf, capacity, len)
    })
}
