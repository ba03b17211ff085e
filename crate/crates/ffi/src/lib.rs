//! C interface to the simulator.
//!
//! Objects are opaque handles created by `sw_*_new`/`sw_*_from_*` and released
//! with the matching `sw_*_free`. Every call returns an [`SwStatus`]; on
//! failure [`sw_last_error_message`] describes the error for the calling
//! thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use skewwalk::coefficients::MeshRule;
use skewwalk::walk::{Batch, RunMode, SatelliteRule};
use skewwalk::{Boundary, Coefficients, Error, ExitLaw, Side, Simulator, SimulatorOptions};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidCoefficients = 3,
    Parse = 4,
    LocalizationRequired = 5,
    Numerical = 6,
    Simulation = 7,
    StepBudget = 8,
    Io = 9,
    Panic = 10,
}

/// Boundary condition codes for [`sw_coefficients_piecewise_constant`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwBoundary {
    Dirichlet = 0,
    Neumann = 1,
    Open = 2,
    Barrier = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwMesh {
    Uniform = 0,
    ScaleUniform = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwSatellites {
    HalfGap = 0,
    FullGap = 1,
}

/// Simulator settings. Enumerations are passed as `int32_t` codes of
/// [`SwMesh`] and [`SwSatellites`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwSimulatorOptions {
    pub delta: f64,
    pub mesh: i32,
    pub satellites: i32,
    /// Total step budget of an exit-mode batch.
    pub step_cap: u64,
}

/// Terminal state of one path. `exit_side` is -1 (left), +1 (right) or 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SwPath {
    pub t_final: f64,
    pub y_final: f64,
    pub x_final: f64,
    pub exited: i32,
    pub exit_side: i32,
    pub hit_barrier: i32,
    pub n_steps: u64,
}

pub struct SwCoefficients(Coefficients);
pub struct SwSimulator(Simulator);
pub struct SwBatch(Batch);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|e| {
        let mut v = e.into_vec();
        v.retain(|&b| b != 0);
        CString::new(v).expect("nul bytes removed")
    });
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SwStatus {
    match e {
        Error::InvalidArgument(_) => SwStatus::InvalidArgument,
        Error::InvalidCoefficients(_) => SwStatus::InvalidCoefficients,
        Error::Parse(_) | Error::Json(_) => SwStatus::Parse,
        Error::LocalizationRequired => SwStatus::LocalizationRequired,
        Error::Quadrature { .. } | Error::SeriesDivergence { .. } | Error::NullEvent(_) | Error::Inversion { .. } => {
            SwStatus::Numerical
        }
        Error::Simulation(_) => SwStatus::Simulation,
        Error::StepBudget(_) => SwStatus::StepBudget,
        Error::Io(_) => SwStatus::Io,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), SwStatusError>) -> SwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SwStatus::Ok,
        Ok(Err(SwStatusError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SwStatus::Panic
        }
    }
}

struct SwStatusError(SwStatus, String);

impl From<Error> for SwStatusError {
    fn from(e: Error) -> Self {
        SwStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> SwStatusError {
    SwStatusError(SwStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: String) -> SwStatusError {
    SwStatusError(SwStatus::InvalidArgument, msg)
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, SwStatusError> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), SwStatusError> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn boundary(code: i32) -> Result<Boundary, SwStatusError> {
    Ok(match code {
        0 => Boundary::Dirichlet,
        1 => Boundary::Neumann,
        2 => Boundary::Open,
        3 => Boundary::Barrier,
        other => return Err(invalid(format!("unknown boundary code {other}"))),
    })
}

fn options(o: &SwSimulatorOptions) -> Result<SimulatorOptions, SwStatusError> {
    let mesh = match o.mesh {
        0 => MeshRule::Uniform,
        1 => MeshRule::ScaleUniform,
        other => return Err(invalid(format!("unknown mesh code {other}"))),
    };
    let satellites = match o.satellites {
        0 => SatelliteRule::HalfGap,
        1 => SatelliteRule::FullGap,
        other => return Err(invalid(format!("unknown satellite code {other}"))),
    };
    Ok(SimulatorOptions { delta: o.delta, mesh, satellites, step_cap: o.step_cap, ..SimulatorOptions::default() })
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn sw_simulator_options_default() -> SwSimulatorOptions {
    let d = SimulatorOptions::default();
    SwSimulatorOptions {
        delta: d.delta,
        mesh: match d.mesh {
            MeshRule::Uniform => SwMesh::Uniform as i32,
            MeshRule::ScaleUniform => SwMesh::ScaleUniform as i32,
        },
        satellites: match d.satellites {
            SatelliteRule::HalfGap => SwSatellites::HalfGap as i32,
            SatelliteRule::FullGap => SwSatellites::FullGap as i32,
        },
        step_cap: d.step_cap,
    }
}

/// Parse a coefficient document (UTF-8 JSON).
#[no_mangle]
pub unsafe extern "C" fn sw_coefficients_from_json(json: *const c_char, out: *mut *mut SwCoefficients) -> SwStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let s = CStr::from_ptr(json).to_str().map_err(|e| SwStatusError(SwStatus::Parse, e.to_string()))?;
        let c = Coefficients::from_json_str(s)?;
        write(out, Box::into_raw(Box::new(SwCoefficients(c))), "out")
    })
}

/// Piecewise-constant `a`, `rho` with `n` pieces starting at `starts[0..n]`
/// (`starts[0]` must equal `left`). Infinite ends are allowed.
#[no_mangle]
pub unsafe extern "C" fn sw_coefficients_piecewise_constant(
    left: f64,
    right: f64,
    bc_left: i32,
    bc_right: i32,
    starts: *const f64,
    a: *const f64,
    rho: *const f64,
    n: usize,
    out: *mut *mut SwCoefficients,
) -> SwStatus {
    guard(|| {
        if n == 0 {
            return Err(invalid("need at least one piece".into()));
        }
        if starts.is_null() || a.is_null() || rho.is_null() {
            return Err(null("coefficient array"));
        }
        let (s, av, rv) =
            (std::slice::from_raw_parts(starts, n), std::slice::from_raw_parts(a, n), std::slice::from_raw_parts(rho, n));
        let c = Coefficients::piecewise_constant(left, right, (boundary(bc_left)?, boundary(bc_right)?), s, av, rv)?;
        write(out, Box::into_raw(Box::new(SwCoefficients(c))), "out")
    })
}

/// Number of validation problems (0 when the coefficients are usable).
#[no_mangle]
pub unsafe extern "C" fn sw_coefficients_validate(c: *const SwCoefficients, violations: *mut usize) -> SwStatus {
    guard(|| {
        let c = deref(c, "coefficients")?;
        let report = c.0.validate();
        if let Some(v) = report.violations.first() {
            set_error(v.message.clone());
        }
        write(violations, report.violations.len(), "violations")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sw_coefficients_free(c: *mut SwCoefficients) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Compile a simulator for bounded coefficients.
#[no_mangle]
pub unsafe extern "C" fn sw_simulator_new(
    c: *const SwCoefficients,
    opts: *const SwSimulatorOptions,
    out: *mut *mut SwSimulator,
) -> SwStatus {
    guard(|| {
        let c = deref(c, "coefficients")?;
        let o = options(deref(opts, "options")?)?;
        let sim = Simulator::new(&c.0, o)?;
        write(out, Box::into_raw(Box::new(SwSimulator(sim))), "out")
    })
}

/// Compile a simulator for starts in `[x_lo, x_hi]` up to `horizon`,
/// localizing infinite ends.
#[no_mangle]
pub unsafe extern "C" fn sw_simulator_for_horizon(
    c: *const SwCoefficients,
    opts: *const SwSimulatorOptions,
    x_lo: f64,
    x_hi: f64,
    horizon: f64,
    out: *mut *mut SwSimulator,
) -> SwStatus {
    guard(|| {
        let c = deref(c, "coefficients")?;
        let o = options(deref(opts, "options")?)?;
        let sim = Simulator::for_horizon(&c.0, o, x_lo, x_hi, horizon)?;
        write(out, Box::into_raw(Box::new(SwSimulator(sim))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sw_simulator_domain(s: *const SwSimulator, lo: *mut f64, hi: *mut f64) -> SwStatus {
    guard(|| {
        let (l, h) = deref(s, "simulator")?.0.domain();
        write(lo, l, "lo")?;
        write(hi, h, "hi")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sw_simulator_free(s: *mut SwSimulator) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Run `n` paths from `x0` up to time `t`; path `i` uses stream `i` of `seed`.
#[no_mangle]
pub unsafe extern "C" fn sw_simulator_run_horizon(
    s: *const SwSimulator,
    x0: f64,
    t: f64,
    n: usize,
    seed: u64,
    out: *mut *mut SwBatch,
) -> SwStatus {
    guard(|| {
        let b = deref(s, "simulator")?.0.run_batch(x0, RunMode::Horizon(t), n, seed)?;
        write(out, Box::into_raw(Box::new(SwBatch(b))), "out")
    })
}

/// Run `n` paths from `x0` until absorption.
#[no_mangle]
pub unsafe extern "C" fn sw_simulator_run_exit(
    s: *const SwSimulator,
    x0: f64,
    n: usize,
    seed: u64,
    out: *mut *mut SwBatch,
) -> SwStatus {
    guard(|| {
        let b = deref(s, "simulator")?.0.run_batch(x0, RunMode::Exit, n, seed)?;
        write(out, Box::into_raw(Box::new(SwBatch(b))), "out")
    })
}

/// Number of paths in the batch (0 for NULL).
#[no_mangle]
pub unsafe extern "C" fn sw_batch_len(b: *const SwBatch) -> usize {
    b.as_ref().map_or(0, |b| b.0.paths.len())
}

#[no_mangle]
pub unsafe extern "C" fn sw_batch_total_steps(b: *const SwBatch) -> u64 {
    b.as_ref().map_or(0, |b| b.0.total_steps())
}

#[no_mangle]
pub unsafe extern "C" fn sw_batch_get(b: *const SwBatch, i: usize, out: *mut SwPath) -> SwStatus {
    guard(|| {
        let b = deref(b, "batch")?;
        let p = b.0.paths.get(i).ok_or_else(|| invalid(format!("path {i} out of range {}", b.0.paths.len())))?;
        let path = SwPath {
            t_final: p.t_final,
            y_final: p.y_final,
            x_final: p.x_final,
            exited: i32::from(p.exited),
            exit_side: match p.exit_side {
                Some(Side::Left) => -1,
                Some(Side::Right) => 1,
                None => 0,
            },
            hit_barrier: i32::from(p.hit_barrier),
            n_steps: p.n_steps,
        };
        write(out, path, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sw_batch_free(b: *mut SwBatch) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// `P_x[tau < t]` for Brownian motion started at `x` in `[-1, 1]`.
#[no_mangle]
pub unsafe extern "C" fn sw_exit_time_cdf(t: f64, x: f64, out: *mut f64) -> SwStatus {
    guard(|| write(out, ExitLaw::default().exit_time_cdf(t, x)?, "out"))
}

/// `P_x[B_t < y, t < tau]` for Brownian motion on `[-1, 1]`.
#[no_mangle]
pub unsafe extern "C" fn sw_killed_cdf(t: f64, x: f64, y: f64, out: *mut f64) -> SwStatus {
    guard(|| write(out, ExitLaw::default().killed_cdf(t, x, y)?, "out"))
}
