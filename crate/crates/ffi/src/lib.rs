//! C interface to `skeleton-dae`.
//!
//! Every function returns an [`SkdStatus`]. On failure a description is kept
//! in thread-local storage and can be copied out with
//! [`skd_last_error_message`]. Matrices are dense, row-major `double` arrays.
//! Handles are opaque and must be released with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use skeleton_dae::chain::{build_chain, ChainError, ChainKind, SkeletonChain};
use skeleton_dae::linalg::{LinalgError, Matrix};
use skeleton_dae::signal::{parse_signal, Signal, SignalError};
use skeleton_dae::solver::{
    check_classical_consistency, check_stability, solve_degenerate, solve_regular,
    DegenerateProblem, RegularizedIVP, SolveError, Stability, TimeGrid, Trajectory,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    WrongChainKind = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkdChainKind {
    Regular = 0,
    Degenerate = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkdStability {
    Stable = 0,
    Unstable = 1,
    Indeterminate = 2,
}

/// Skeleton chain of a square operator.
pub struct SkdChain(SkeletonChain);

/// Vector-valued forcing term.
pub struct SkdSignal(Signal);

/// Sampled solution.
pub struct SkdTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(SkdStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(SkdStatus::NullPointer, format!("{what} is null"))
    }

    fn invalid(msg: impl Into<String>) -> Self {
        Failure(SkdStatus::InvalidArgument, msg.into())
    }
}

impl From<LinalgError> for Failure {
    fn from(e: LinalgError) -> Self {
        let status = match e {
            LinalgError::NoConvergence(_) | LinalgError::Singular { .. } => SkdStatus::Numerical,
            _ => SkdStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<ChainError> for Failure {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Linalg(inner) => inner.into(),
            other => Failure::invalid(other.to_string()),
        }
    }
}

impl From<SignalError> for Failure {
    fn from(e: SignalError) -> Self {
        let status = match e {
            SignalError::Parse(_) => SkdStatus::ParseError,
            _ => SkdStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let status = match &e {
            SolveError::WrongChainKind { .. } => SkdStatus::WrongChainKind,
            SolveError::Dimension { .. }
            | SolveError::ChainMismatch(_)
            | SolveError::InvalidGrid(_)
            | SolveError::Signal(_) => SkdStatus::InvalidArgument,
            SolveError::Linalg(inner) => return inner.clone().into(),
            _ => SkdStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SkdStatus {
    let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure(SkdStatus::Panic, format!("internal panic: {msg}")))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            SkdStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn input_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies `data` into `buf`; `*len` receives the number of values required.
unsafe fn copy_out<T: Copy>(
    data: &[T],
    buf: *mut T,
    cap: usize,
    len: *mut usize,
) -> Result<(), Failure> {
    if let Some(len) = len.as_mut() {
        *len = data.len();
    }
    if data.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(Failure::null("output buffer"));
    }
    if cap < data.len() {
        return Err(Failure(
            SkdStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} required", data.len()),
        ));
    }
    ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
    Ok(())
}

unsafe fn square_matrix(b: *const f64, n: usize) -> Result<Matrix, Failure> {
    let data = input_slice(
        b,
        n.checked_mul(n)
            .ok_or_else(|| Failure::invalid("n overflows"))?,
        "b",
    )?;
    Ok(Matrix::new(n, n, data.to_vec())?)
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating if needed. Returns the length of the
/// full message excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn skd_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds the skeleton chain of the `n × n` row-major matrix `b`.
///
/// # Safety
/// `b` must point to `n*n` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn skd_chain_build(
    b: *const f64,
    n: usize,
    tol: f64,
    out: *mut *mut SkdChain,
) -> SkdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let chain = build_chain(&square_matrix(b, n)?, tol)?;
        *out = Box::into_raw(Box::new(SkdChain(chain)));
        Ok(())
    })
}

/// # Safety
/// `chain` must be null or a handle from [`skd_chain_build`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn skd_chain_free(chain: *mut SkdChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Chain length `p` and classification.
///
/// # Safety
/// `chain` must be a live handle; `length` and `kind` may be null.
#[no_mangle]
pub unsafe extern "C" fn skd_chain_info(
    chain: *const SkdChain,
    length: *mut usize,
    kind: *mut SkdChainKind,
) -> SkdStatus {
    guard(|| {
        let chain = &reference(chain, "chain")?.0;
        if let Some(l) = length.as_mut() {
            *l = chain.len();
        }
        if let Some(k) = kind.as_mut() {
            *k = match chain.kind() {
                ChainKind::Regular => SkdChainKind::Regular,
                ChainKind::Degenerate => SkdChainKind::Degenerate,
            };
        }
        Ok(())
    })
}

/// Dimensions `n₀ > n₁ > … > n_p` of the chain spaces.
///
/// # Safety
/// `chain` must be a live handle; `buf` must be valid for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn skd_chain_dims(
    chain: *const SkdChain,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> SkdStatus {
    guard(|| {
        let chain = &reference(chain, "chain")?.0;
        copy_out(chain.dims(), buf, cap, len)
    })
}

/// The `n_p × n` regularizing map, row-major.
///
/// # Safety
/// `chain` must be a live handle; `buf` must be valid for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn skd_chain_projector(
    chain: *const SkdChain,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> SkdStatus {
    guard(|| {
        let chain = &reference(chain, "chain")?.0;
        copy_out(chain.projector().as_slice(), buf, cap, len)
    })
}

/// Stability of the reduced flow. Fails with `WrongChainKind` for
/// degenerate chains.
///
/// # Safety
/// `chain` must be a live handle; `verdict` must be valid; `abscissa` may be null.
#[no_mangle]
pub unsafe extern "C" fn skd_chain_stability(
    chain: *const SkdChain,
    verdict: *mut SkdStability,
    abscissa: *mut f64,
) -> SkdStatus {
    guard(|| {
        let chain = &reference(chain, "chain")?.0;
        let verdict = out_ref(verdict, "verdict")?;
        let report = check_stability(chain)?;
        *verdict = match report.verdict {
            Stability::Stable => SkdStability::Stable,
            Stability::Unstable => SkdStability::Unstable,
            Stability::Indeterminate => SkdStability::Indeterminate,
        };
        if let Some(a) = abscissa.as_mut() {
            *a = report.abscissa;
        }
        Ok(())
    })
}

/// Parses a forcing expression with `dim` components separated by `;`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn skd_signal_parse(
    text: *const c_char,
    dim: usize,
    out: *mut *mut SkdSignal,
) -> SkdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if text.is_null() {
            return Err(Failure::null("text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| Failure(SkdStatus::ParseError, "text is not valid UTF-8".into()))?;
        let signal =
            parse_signal(text, dim).map_err(|e| Failure(SkdStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(SkdSignal(signal)));
        Ok(())
    })
}

/// # Safety
/// `signal` must be null or a handle from [`skd_signal_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn skd_signal_free(signal: *mut SkdSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// Writes the `order`-th derivative at `t` into `buf[0..dim]`.
///
/// # Safety
/// `signal` must be a live handle; `buf` must be valid for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn skd_signal_eval(
    signal: *const SkdSignal,
    t: f64,
    order: usize,
    buf: *mut f64,
    cap: usize,
) -> SkdStatus {
    guard(|| {
        let signal = &reference(signal, "signal")?.0;
        let values = signal.eval(t, order)?;
        copy_out(&values, buf, cap, ptr::null_mut())
    })
}

/// Solves `B·x′ = x + f(t)` on `[0, t_end]` for the operator the chain was
/// built from. Regular chains need `c0` with `n_p` entries; degenerate
/// chains ignore it and accept null.
///
/// # Safety
/// `chain` and `signal` must be live handles; `c0` must be valid for
/// `c0_len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn skd_solve(
    chain: *const SkdChain,
    signal: *const SkdSignal,
    c0: *const f64,
    c0_len: usize,
    t_end: f64,
    step: f64,
    out: *mut *mut SkdTrajectory,
) -> SkdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let chain = &reference(chain, "chain")?.0;
        let f = reference(signal, "signal")?.0.clone();
        let grid = TimeGrid::new(t_end, step)?;
        let b = chain.b0().clone();
        let traj = match chain.kind() {
            ChainKind::Regular => {
                let c0 = input_slice(c0, c0_len, "c0")?.to_vec();
                solve_regular(&RegularizedIVP::new(b, f, c0, grid), chain)?
            }
            ChainKind::Degenerate => solve_degenerate(&DegenerateProblem { b, f, grid }, chain)?,
        };
        *out = Box::into_raw(Box::new(SkdTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle from [`skd_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn skd_trajectory_free(traj: *mut SkdTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples, state dimension and the largest equation residual.
///
/// # Safety
/// `traj` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn skd_trajectory_info(
    traj: *const SkdTrajectory,
    points: *mut usize,
    dim: *mut usize,
    residual_max: *mut f64,
) -> SkdStatus {
    guard(|| {
        let traj = &reference(traj, "trajectory")?.0;
        if let Some(p) = points.as_mut() {
            *p = traj.len();
        }
        if let Some(d) = dim.as_mut() {
            *d = traj.dim();
        }
        if let Some(r) = residual_max.as_mut() {
            *r = traj.residual_max;
        }
        Ok(())
    })
}

/// # Safety
/// `traj` must be a live handle; `buf` must be valid for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn skd_trajectory_times(
    traj: *const SkdTrajectory,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> SkdStatus {
    guard(|| {
        let traj = &reference(traj, "trajectory")?.0;
        copy_out(&traj.times, buf, cap, len)
    })
}

/// States as a `points × dim` row-major array.
///
/// # Safety
/// `traj` must be a live handle; `buf` must be valid for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn skd_trajectory_states(
    traj: *const SkdTrajectory,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> SkdStatus {
    guard(|| {
        let traj = &reference(traj, "trajectory")?.0;
        let flat: Vec<f64> = traj.states.iter().flatten().copied().collect();
        copy_out(&flat, buf, cap, len)
    })
}

/// Classical consistency of `x0` for `B·x′ = x + f`: `*consistent` is 1 when
/// `x0 + f(0)` is orthogonal to `ker Bᵀ` within `tol`.
///
/// # Safety
/// `b` must point to `n*n` doubles and `x0` to `n`; `signal` must be a live
/// handle; `consistent` must be valid; `defect` may be null.
#[no_mangle]
pub unsafe extern "C" fn skd_check_consistency(
    b: *const f64,
    n: usize,
    x0: *const f64,
    signal: *const SkdSignal,
    tol: f64,
    consistent: *mut i32,
    defect: *mut f64,
) -> SkdStatus {
    guard(|| {
        let consistent = out_ref(consistent, "consistent")?;
        let b = square_matrix(b, n)?;
        let x0 = input_slice(x0, n, "x0")?;
        let f = &reference(signal, "signal")?.0;
        let report = check_classical_consistency(&b, x0, f, tol)?;
        *consistent = report.is_consistent() as i32;
        if let Some(d) = defect.as_mut() {
            *d = report.defect;
        }
        Ok(())
    })
}
