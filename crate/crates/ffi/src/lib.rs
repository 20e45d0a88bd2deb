//! C ABI for `veccontract`.
//!
//! Every function returns a [`VcStatus`]; results come back through out
//! pointers. Objects are opaque handles created by `vc_*_new` (or a producing
//! call) and released with the matching `vc_*_free`. Text results are copied
//! into caller-owned buffers, so no string returned by this library ever needs
//! freeing. The message of the last failure on the calling thread is available
//! from [`vc_last_error_message`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use veccontract::cli::{self, Failure};
use veccontract::comparison::check_qm_affine;
use veccontract::cone::{Classification, ConeError, PolyhedralCone};
use veccontract::dynamics::{
    DynamicalSystem, DynamicsError, IntegratorConfig, JacobianMode, Trajectory,
};
use veccontract::expr::{self, Expr, ExprError};
use veccontract::scenario::Scenario;
use veccontract::vnorm::{GainMatrix, NormError};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    DimensionMismatch = 5,
    DomainError = 6,
    NumericalFailure = 7,
    ConfigError = 8,
    BufferTooSmall = 9,
    /// The analysis ran and reported a violation or counterexample.
    Violated = 10,
    Panic = 99,
}

/// Position of a vector relative to a cone.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcConePosition {
    Interior = 0,
    Boundary = 1,
    Outside = 2,
}

/// Analyses available through [`vc_scenario_run_json`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcCommand {
    Verify = 0,
    CheckQm = 1,
    CheckConeQm = 2,
}

/// Validated non-negative gain matrix `A`.
pub struct VcGain(GainMatrix);

/// Parsed expression.
pub struct VcExpr(Expr);

/// Dynamical system `ẋ = f(t, x)` with its Jacobian.
pub struct VcSystem(DynamicalSystem);

/// Integrated trajectory.
pub struct VcTrajectory(Trajectory);

/// Polyhedral cone `{x : G·x ≥ 0}`.
pub struct VcCone(PolyhedralCone);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: VcStatus, msg: impl std::fmt::Display) -> VcStatus {
    set_error(msg.to_string());
    status
}

type FfiResult<T> = Result<T, VcStatus>;

fn guard<F: FnOnce() -> FfiResult<()>>(f: F) -> VcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            VcStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(VcStatus::Panic, "internal panic"),
    }
}

fn expr_status(e: &ExprError) -> VcStatus {
    match e {
        ExprError::Syntax { .. }
        | ExprError::UnknownIdentifier { .. }
        | ExprError::NonConstantExponent { .. }
        | ExprError::InvalidVariable(..) => VcStatus::ParseError,
        ExprError::Domain { .. } => VcStatus::DomainError,
        ExprError::DimensionMismatch { .. } => VcStatus::DimensionMismatch,
        _ => VcStatus::InvalidArgument,
    }
}

fn from_expr(e: ExprError) -> VcStatus {
    fail(expr_status(&e), e)
}

fn from_norm(e: NormError) -> VcStatus {
    let s = match e {
        NormError::DimensionMismatch { .. } => VcStatus::DimensionMismatch,
        NormError::NegativeSquare { .. } => VcStatus::NumericalFailure,
        _ => VcStatus::InvalidArgument,
    };
    fail(s, e)
}

fn from_dynamics(e: DynamicsError) -> VcStatus {
    let s = match &e {
        DynamicsError::Expr { source, .. } => expr_status(source),
        DynamicsError::Evaluation { source, .. } => expr_status(source),
        DynamicsError::DimensionMismatch { .. } | DynamicsError::ZeroDimension => {
            VcStatus::DimensionMismatch
        }
        DynamicsError::NonFiniteState { .. } | DynamicsError::StepLimit { .. } => {
            VcStatus::NumericalFailure
        }
        _ => VcStatus::InvalidArgument,
    };
    fail(s, e)
}

fn from_cone(e: ConeError) -> VcStatus {
    let s = match e {
        ConeError::DimensionMismatch { .. } => VcStatus::DimensionMismatch,
        _ => VcStatus::InvalidArgument,
    };
    fail(s, e)
}

fn from_failure(f: Failure) -> VcStatus {
    let s = if f.code == cli::EXIT_NUMERICAL {
        VcStatus::NumericalFailure
    } else {
        VcStatus::ConfigError
    };
    fail(s, f.message)
}

unsafe fn input<'a>(p: *const f64, len: usize) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(VcStatus::NullPointer, "null input array"));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize) -> FfiResult<&'a mut [f64]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(VcStatus::NullPointer, "null output array"));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| fail(VcStatus::NullPointer, "null handle"))
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> FfiResult<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| fail(VcStatus::NullPointer, "null out pointer"))
}

unsafe fn text<'a>(p: *const c_char) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(fail(VcStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(VcStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn texts<'a>(p: *const *const c_char, len: usize) -> FfiResult<Vec<&'a str>> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(fail(VcStatus::NullPointer, "null string array"));
    }
    slice::from_raw_parts(p, len)
        .iter()
        .map(|&s| text(s))
        .collect()
}

fn copy_out(dst: &mut [f64], src: &[f64]) -> FfiResult<()> {
    if dst.len() != src.len() {
        return Err(fail(
            VcStatus::DimensionMismatch,
            format!("output has length {}, result has {}", dst.len(), src.len()),
        ));
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// Copies `s` plus a terminating NUL into `buf`, truncating if needed.
/// `needed` receives the full size including the NUL.
unsafe fn copy_text(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> FfiResult<()> {
    let bytes = s.as_bytes();
    if let Some(n) = needed.as_mut() {
        *n = bytes.len() + 1;
    }
    if len > 0 && !buf.is_null() {
        let k = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), k);
        *buf.add(k) = 0;
    }
    if len < bytes.len() + 1 {
        return Err(fail(VcStatus::BufferTooSmall, "buffer too small"));
    }
    Ok(())
}

fn matrix(entries: &[f64], rows: usize, cols: usize) -> Vec<Vec<f64>> {
    entries
        .chunks(cols.max(1))
        .take(rows)
        .map(<[f64]>::to_vec)
        .collect()
}

/// Copies the last error message of the calling thread into `buf` (NUL
/// terminated, truncated to `len`). `needed`, if non-null, receives the size
/// required including the NUL. Returns the number of bytes required.
#[no_mangle]
pub unsafe extern "C" fn vc_last_error_message(
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> usize {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    let _ = copy_text(&msg, buf, len, needed);
    msg.len() + 1
}

/// Library version as a NUL-terminated static string.
#[no_mangle]
pub extern "C" fn vc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds `A` from `rows × cols` row-major entries.
#[no_mangle]
pub unsafe extern "C" fn vc_gain_new(
    entries: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut VcGain,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let e = input(entries, rows * cols)?;
        let g = GainMatrix::new(&matrix(e, rows, cols)).map_err(from_norm)?;
        *out = Box::into_raw(Box::new(VcGain(g)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_gain_free(gain: *mut VcGain) {
    if !gain.is_null() {
        drop(Box::from_raw(gain));
    }
}

/// Whether every column of `A` has a positive entry.
#[no_mangle]
pub unsafe extern "C" fn vc_gain_is_definite(gain: *const VcGain, out: *mut bool) -> VcStatus {
    guard(|| {
        *out_ptr(out)? = handle(gain)?.0.is_definite();
        Ok(())
    })
}

/// `‖dx‖_v`; `dx` has `n` entries, `out` has `m` (rows of `A`).
#[no_mangle]
pub unsafe extern "C" fn vc_gain_norm(
    gain: *const VcGain,
    dx: *const f64,
    n: usize,
    out: *mut f64,
    m: usize,
) -> VcStatus {
    guard(|| {
        let v = handle(gain)?.0.norm(input(dx, n)?).map_err(from_norm)?;
        copy_out(output(out, m)?, v.components())
    })
}

/// `A·dvec(diag(dx)²)`.
#[no_mangle]
pub unsafe extern "C" fn vc_gain_norm_squared(
    gain: *const VcGain,
    dx: *const f64,
    n: usize,
    out: *mut f64,
    m: usize,
) -> VcStatus {
    guard(|| {
        let v = handle(gain)?
            .0
            .norm_squared(input(dx, n)?)
            .map_err(from_norm)?;
        copy_out(output(out, m)?, &v)
    })
}

/// `2A·dvec(diag(dx)·diag(dxdot))`.
#[no_mangle]
pub unsafe extern "C" fn vc_gain_norm_squared_rate(
    gain: *const VcGain,
    dx: *const f64,
    dxdot: *const f64,
    n: usize,
    out: *mut f64,
    m: usize,
) -> VcStatus {
    guard(|| {
        let v = handle(gain)?
            .0
            .norm_squared_rate(input(dx, n)?, input(dxdot, n)?)
            .map_err(from_norm)?;
        copy_out(output(out, m)?, &v)
    })
}

/// `2A·diag(dx)·h`.
#[no_mangle]
pub unsafe extern "C" fn vc_gain_frechet_apply(
    gain: *const VcGain,
    dx: *const f64,
    h: *const f64,
    n: usize,
    out: *mut f64,
    m: usize,
) -> VcStatus {
    guard(|| {
        let v = handle(gain)?
            .0
            .frechet_apply(input(dx, n)?, input(h, n)?)
            .map_err(from_norm)?;
        copy_out(output(out, m)?, &v)
    })
}

/// Parses `source` over the variable names `vars[0..nvars]`.
#[no_mangle]
pub unsafe extern "C" fn vc_expr_parse(
    source: *const c_char,
    vars: *const *const c_char,
    nvars: usize,
    out: *mut *mut VcExpr,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let e = expr::parse(text(source)?, &texts(vars, nvars)?).map_err(from_expr)?;
        *out = Box::into_raw(Box::new(VcExpr(e)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_expr_free(e: *mut VcExpr) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Evaluates with `values[i]` bound to the `i`-th declared variable.
#[no_mangle]
pub unsafe extern "C" fn vc_expr_eval(
    e: *const VcExpr,
    values: *const f64,
    n: usize,
    out: *mut f64,
) -> VcStatus {
    guard(|| {
        *out_ptr(out)? = handle(e)?.0.eval_at(input(values, n)?).map_err(from_expr)?;
        Ok(())
    })
}

/// Symbolic partial derivative with respect to `var`.
#[no_mangle]
pub unsafe extern "C" fn vc_expr_differentiate(
    e: *const VcExpr,
    var: *const c_char,
    out: *mut *mut VcExpr,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let d = expr::differentiate(&handle(e)?.0, text(var)?);
        *out = Box::into_raw(Box::new(VcExpr(d)));
        Ok(())
    })
}

/// Infix rendering into `buf`; see [`vc_last_error_message`] for the buffer
/// convention.
#[no_mangle]
pub unsafe extern "C" fn vc_expr_render(
    e: *const VcExpr,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> VcStatus {
    guard(|| copy_text(&handle(e)?.0.to_string(), buf, len, needed))
}

/// Builds a system from `n` right-hand sides over `t, x1 .. xn`.
#[no_mangle]
pub unsafe extern "C" fn vc_system_new(
    sources: *const *const c_char,
    n: usize,
    finite_difference: bool,
    out: *mut *mut VcSystem,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let mode = if finite_difference {
            JacobianMode::FiniteDifference
        } else {
            JacobianMode::Symbolic
        };
        let sys = DynamicalSystem::new(&texts(sources, n)?, n, mode).map_err(from_dynamics)?;
        *out = Box::into_raw(Box::new(VcSystem(sys)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_system_free(sys: *mut VcSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

#[no_mangle]
pub unsafe extern "C" fn vc_system_dim(sys: *const VcSystem, out: *mut usize) -> VcStatus {
    guard(|| {
        *out_ptr(out)? = handle(sys)?.0.dim();
        Ok(())
    })
}

/// `f(t, x)` into `out[0..n]`.
#[no_mangle]
pub unsafe extern "C" fn vc_system_field(
    sys: *const VcSystem,
    t: f64,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> VcStatus {
    guard(|| {
        let v = handle(sys)?
            .0
            .field(t, input(x, n)?)
            .map_err(from_dynamics)?;
        copy_out(output(out, n)?, &v)
    })
}

/// Row-major Jacobian into `out[0..n*n]`.
#[no_mangle]
pub unsafe extern "C" fn vc_system_jacobian(
    sys: *const VcSystem,
    t: f64,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> VcStatus {
    guard(|| {
        let j = handle(sys)?
            .0
            .jacobian_at(t, input(x, n)?)
            .map_err(from_dynamics)?;
        copy_out(output(out, n * n)?, &j.concat())
    })
}

/// Largest eigenvalue of the symmetric part of the Jacobian.
#[no_mangle]
pub unsafe extern "C" fn vc_system_max_symmetric_eig(
    sys: *const VcSystem,
    t: f64,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> VcStatus {
    guard(|| {
        *out_ptr(out)? = handle(sys)?
            .0
            .max_symmetric_jacobian_eig(t, input(x, n)?)
            .map_err(from_dynamics)?;
        Ok(())
    })
}

/// Fixed-step RK4 from `x0`; integrates the variational system too when
/// `dx0` is non-null.
#[no_mangle]
pub unsafe extern "C" fn vc_system_integrate(
    sys: *const VcSystem,
    x0: *const f64,
    dx0: *const f64,
    n: usize,
    dt: f64,
    t0: f64,
    t_end: f64,
    out: *mut *mut VcTrajectory,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let sys = &handle(sys)?.0;
        let cfg = IntegratorConfig::new(dt, t0, t_end).map_err(from_dynamics)?;
        let x0 = input(x0, n)?;
        let tr = if dx0.is_null() {
            sys.integrate(x0, &cfg)
        } else {
            sys.integrate_variational(x0, input(dx0, n)?, &cfg)
        }
        .map_err(from_dynamics)?;
        *out = Box::into_raw(Box::new(VcTrajectory(tr)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_trajectory_free(tr: *mut VcTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

/// Number of grid points.
#[no_mangle]
pub unsafe extern "C" fn vc_trajectory_len(tr: *const VcTrajectory, out: *mut usize) -> VcStatus {
    guard(|| {
        *out_ptr(out)? = handle(tr)?.0.len();
        Ok(())
    })
}

/// Grid times into `out[0..len]`.
#[no_mangle]
pub unsafe extern "C" fn vc_trajectory_times(
    tr: *const VcTrajectory,
    out: *mut f64,
    len: usize,
) -> VcStatus {
    guard(|| copy_out(output(out, len)?, handle(tr)?.0.times()))
}

fn sample(rows: Option<&[Vec<f64>]>, k: usize) -> FfiResult<&[f64]> {
    let rows = rows.ok_or_else(|| fail(VcStatus::InvalidArgument, "channel not integrated"))?;
    rows.get(k)
        .map(Vec::as_slice)
        .ok_or_else(|| fail(VcStatus::InvalidArgument, format!("index {k} out of range")))
}

/// State at grid index `k` into `out[0..n]`.
#[no_mangle]
pub unsafe extern "C" fn vc_trajectory_state(
    tr: *const VcTrajectory,
    k: usize,
    out: *mut f64,
    n: usize,
) -> VcStatus {
    guard(|| {
        let tr = &handle(tr)?.0;
        copy_out(output(out, n)?, sample(Some(tr.states()), k)?)
    })
}

/// Variational state at grid index `k` into `out[0..n]`.
#[no_mangle]
pub unsafe extern "C" fn vc_trajectory_variational(
    tr: *const VcTrajectory,
    k: usize,
    out: *mut f64,
    n: usize,
) -> VcStatus {
    guard(|| {
        let tr = &handle(tr)?.0;
        copy_out(output(out, n)?, sample(tr.variational(), k)?)
    })
}

/// Builds `K = {x : G·x ≥ 0}` from `rows × cols` row-major entries of `G`.
#[no_mangle]
pub unsafe extern "C" fn vc_cone_new(
    g: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut VcCone,
) -> VcStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let k =
            PolyhedralCone::new(&matrix(input(g, rows * cols)?, rows, cols)).map_err(from_cone)?;
        *out = Box::into_raw(Box::new(VcCone(k)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_cone_free(k: *mut VcCone) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

#[no_mangle]
pub unsafe extern "C" fn vc_cone_classify(
    k: *const VcCone,
    x: *const f64,
    n: usize,
    out: *mut VcConePosition,
) -> VcStatus {
    guard(|| {
        let c = handle(k)?.0.classify(input(x, n)?).map_err(from_cone)?;
        *out_ptr(out)? = match c {
            Classification::Interior => VcConePosition::Interior,
            Classification::Boundary { .. } => VcConePosition::Boundary,
            Classification::Outside => VcConePosition::Outside,
        };
        Ok(())
    })
}

/// `x ≤_K y`.
#[no_mangle]
pub unsafe extern "C" fn vc_cone_leq(
    k: *const VcCone,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut bool,
) -> VcStatus {
    guard(|| {
        *out_ptr(out)? = handle(k)?
            .0
            .leq(input(x, n)?, input(y, n)?)
            .map_err(from_cone)?;
        Ok(())
    })
}

/// Membership of `phi` in the dual cone.
#[no_mangle]
pub unsafe extern "C" fn vc_cone_dual_contains(
    k: *const VcCone,
    phi: *const f64,
    n: usize,
    out: *mut bool,
) -> VcStatus {
    guard(|| {
        *out_ptr(out)? = handle(k)?
            .0
            .dual_contains(input(phi, n)?)
            .map_err(from_cone)?;
        Ok(())
    })
}

/// Metzler test on an `n × n` row-major matrix.
#[no_mangle]
pub unsafe extern "C" fn vc_check_qm_affine(m: *const f64, n: usize, out: *mut bool) -> VcStatus {
    guard(|| {
        let rows = matrix(input(m, n * n)?, n, n);
        *out_ptr(out)? = check_qm_affine(&rows).map_err(|e| fail(VcStatus::InvalidArgument, e))?;
        Ok(())
    })
}

/// Runs an analysis on a JSON scenario and writes the JSON report to `buf`.
///
/// Returns [`VcStatus::Ok`] when dominance holds or no counterexample is found
/// and [`VcStatus::Violated`] otherwise; in both cases the report is written.
/// `seed` is used unless the scenario sets its own.
#[no_mangle]
pub unsafe extern "C" fn vc_scenario_run_json(
    json: *const c_char,
    command: VcCommand,
    seed: u64,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> VcStatus {
    let mut violated = false;
    let status = guard(|| {
        let scenario =
            Scenario::from_json(text(json)?).map_err(|e| fail(VcStatus::ConfigError, e))?;
        let seed = scenario.seed.unwrap_or(seed);
        let p = scenario
            .prepare()
            .map_err(|e| fail(VcStatus::ConfigError, e))?;
        let (report, ok) = match command {
            VcCommand::Verify => {
                let (_, r) = cli::run_verify(&p).map_err(from_failure)?;
                let ok = r.dominance.holds();
                (serde_json::to_string(&r), ok)
            }
            VcCommand::CheckQm => {
                let r = cli::run_check_qm(&p, seed).map_err(from_failure)?;
                let ok = r.sampled.counterexample.is_none()
                    && r.metzler.as_ref().is_none_or(|m| m.holds);
                (serde_json::to_string(&r), ok)
            }
            VcCommand::CheckConeQm => {
                let r = cli::run_check_cone_qm(&p, seed).map_err(from_failure)?;
                let ok = r.counterexample.is_none();
                (serde_json::to_string(&r), ok)
            }
        };
        let report = report.map_err(|e| fail(VcStatus::NumericalFailure, e))?;
        violated = !ok;
        copy_text(&report, buf, len, needed)
    });
    if status == VcStatus::Ok && violated {
        return fail(VcStatus::Violated, "analysis reported a violation");
    }
    status
}
