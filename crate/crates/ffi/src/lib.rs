//! C ABI over the sizing optimizer.
//!
//! Every function returns a [`PvsStatus`]; on failure the message is
//! available from [`pvs_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pvsmooth::config::{CaseSelector, ConfigError, RunConfig};
use pvsmooth::formulation::{build_baseline, build_case, extract_solution, DispatchSolution, FormulationError};
use pvsmooth::lp;
use pvsmooth::pipeline::{self, PipelineError};
use pvsmooth::timeseries::Horizon;
use pvsmooth::validation::check_dispatch;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PvsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Input = 4,
    /// The LP did not reach an optimum.
    Solver = 5,
    /// The dispatch failed validation.
    Invalid = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Series selector for [`pvs_solution_series`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PvsSeries {
    Pv = 0,
    Grid = 1,
    Battery = 2,
    Energy = 3,
    Curtailed = 4,
    Diesel = 5,
}

/// Ratings of a solved case. Absent components are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PvsSizing {
    /// kW
    pub battery_power: f64,
    /// kWh
    pub battery_energy: f64,
    /// kW
    pub diesel_power: f64,
    /// kW
    pub max_curtailed: f64,
}

/// Opaque run configuration.
pub struct PvsConfig {
    inner: RunConfig,
}

/// Opaque solved case.
pub struct PvsSolution {
    dispatch: DispatchSolution,
    valid: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(PvsStatus, String);

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let status = match e {
            ConfigError::Io { .. } => PvsStatus::Io,
            _ => PvsStatus::Config,
        };
        Failure(status, e.to_string())
    }
}

impl From<FormulationError> for Failure {
    fn from(e: FormulationError) -> Self {
        let status = match e {
            FormulationError::NotOptimal(_) => PvsStatus::Solver,
            _ => PvsStatus::Input,
        };
        Failure(status, e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => c.into(),
            PipelineError::Formulation(f) => f.into(),
            PipelineError::Io { .. } => Failure(PvsStatus::Io, e.to_string()),
            other => Failure(PvsStatus::Input, other.to_string()),
        }
    }
}

/// Runs `f` behind a panic guard and records any error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PvsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PvsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PvsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(PvsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PvsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(PvsStatus::NullPointer, format!("{what} is null")))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(PvsStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn parse_case(name: &str) -> Result<CaseSelector, Failure> {
    match name.parse::<CaseSelector>() {
        Ok(CaseSelector::BatterySelect) | Err(_) => Err(Failure(
            PvsStatus::Input,
            format!("unknown case {name:?}, expected A, B, C, D or baseline"),
        )),
        Ok(c) => Ok(c),
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn pvs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pvs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Configuration with every field at its default.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pvs_config_default(out: *mut *mut PvsConfig) -> PvsStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(PvsConfig {
            inner: RunConfig::default(),
        }));
        Ok(())
    })
}

/// Parses a TOML configuration. Relative weather paths resolve against the
/// working directory.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pvs_config_from_toml(toml: *const c_char, out: *mut *mut PvsConfig) -> PvsStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(toml, "toml")?;
        let inner = RunConfig::from_toml_str(text, Path::new("."))?;
        *out = Box::into_raw(Box::new(PvsConfig { inner }));
        Ok(())
    })
}

/// Loads a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pvs_config_load(path: *const c_char, out: *mut *mut PvsConfig) -> PvsStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let inner = RunConfig::load(path)?;
        *out = Box::into_raw(Box::new(PvsConfig { inner }));
        Ok(())
    })
}

/// Overrides the synthetic weather seed.
///
/// # Safety
/// `config` must come from a `pvs_config_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn pvs_config_set_seed(config: *mut PvsConfig, seed: u64) -> PvsStatus {
    guard(|| {
        let cfg = config
            .as_mut()
            .ok_or_else(|| Failure(PvsStatus::NullPointer, "config is null".into()))?;
        cfg.inner.weather.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or come from a `pvs_config_*` constructor, and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pvs_config_free(config: *mut PvsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Solves one case on the configured weather.
///
/// # Safety
/// `config` must be a live handle, `case_name` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pvs_solve_case(
    config: *const PvsConfig,
    case_name: *const c_char,
    out: *mut *mut PvsSolution,
) -> PvsStatus {
    guard(|| {
        out_arg(out, "out")?;
        let cfg = &ref_arg(config, "config")?.inner;
        let which = parse_case(str_arg(case_name, "case_name")?)?;
        let inputs = pipeline::prepare_inputs(cfg)?;
        let run = pipeline::solve_one(cfg, &inputs, which, None)?;
        let dispatch = run.dispatch.ok_or_else(|| {
            Failure(PvsStatus::Solver, format!("case {which}: {}", run.summary.status))
        })?;
        *out = Box::into_raw(Box::new(PvsSolution {
            dispatch,
            valid: run.summary.ok,
        }));
        Ok(())
    })
}

/// Solves one case on a caller-supplied contiguous PV series (kW, one value
/// per step of the configured length).
///
/// # Safety
/// `p_pv` must point to `len` doubles; other pointers as for
/// [`pvs_solve_case`].
#[no_mangle]
pub unsafe extern "C" fn pvs_solve_series(
    config: *const PvsConfig,
    case_name: *const c_char,
    p_pv: *const f64,
    len: usize,
    out: *mut *mut PvsSolution,
) -> PvsStatus {
    guard(|| {
        out_arg(out, "out")?;
        let cfg = &ref_arg(config, "config")?.inner;
        let which = parse_case(str_arg(case_name, "case_name")?)?;
        if p_pv.is_null() {
            return Err(Failure(PvsStatus::NullPointer, "p_pv is null".into()));
        }
        let values = std::slice::from_raw_parts(p_pv, len).to_vec();
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Failure(PvsStatus::Input, format!("p_pv[{k}] must be finite and non-negative")));
        }
        let horizon = Horizon::contiguous(cfg.constraints.step_hours, values);
        let f = match which.case_id() {
            None => build_baseline(&horizon, &cfg.battery, &cfg.econ, &cfg.constraints)?,
            Some(c) => build_case(c, &horizon, &cfg.battery, Some(&cfg.diesel), &cfg.econ, &cfg.constraints)?,
        };
        let s = lp::solve(&f.problem, &cfg.solver.options());
        let dispatch = extract_solution(&f, &s)?;
        let report = check_dispatch(
            &dispatch,
            &horizon,
            &f.config,
            &cfg.battery,
            f.case_id.has_diesel().then_some(&cfg.diesel),
        )
        .map_err(|e| Failure(PvsStatus::Input, e.to_string()))?;
        *out = Box::into_raw(Box::new(PvsSolution {
            dispatch,
            valid: report.pass,
        }));
        Ok(())
    })
}

/// Number of optimized steps.
///
/// # Safety
/// `solution` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pvs_solution_len(solution: *const PvsSolution, out: *mut usize) -> PvsStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ref_arg(solution, "solution")?.dispatch.len();
        Ok(())
    })
}

/// Discounted net benefit, $.
///
/// # Safety
/// `solution` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pvs_solution_net_benefit(solution: *const PvsSolution, out: *mut f64) -> PvsStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ref_arg(solution, "solution")?.dispatch.net_benefit;
        Ok(())
    })
}

/// # Safety
/// `solution` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pvs_solution_sizing(solution: *const PvsSolution, out: *mut PvsSizing) -> PvsStatus {
    guard(|| {
        out_arg(out, "out")?;
        let d = &ref_arg(solution, "solution")?.dispatch;
        *out = PvsSizing {
            battery_power: d.p_batt_max,
            battery_energy: d.e_batt_max,
            diesel_power: d.p_diesel_max.unwrap_or(f64::NAN),
            max_curtailed: if d.case_id.has_curtailment() {
                d.max_curtailment()
            } else {
                f64::NAN
            },
        };
        Ok(())
    })
}

/// 1 if every constraint check passed, else 0.
///
/// # Safety
/// `solution` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pvs_solution_is_valid(solution: *const PvsSolution, out: *mut i32) -> PvsStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = i32::from(ref_arg(solution, "solution")?.valid);
        Ok(())
    })
}

/// Copies a series into `buf`. `*written` receives the series length, which
/// is 0 for series absent from the case. Fails with `BufferTooSmall` (and
/// still sets `*written`) when `capacity` is short.
///
/// # Safety
/// `buf` must hold `capacity` doubles (may be null when `capacity` is 0);
/// other pointers as above.
#[no_mangle]
pub unsafe extern "C" fn pvs_solution_series(
    solution: *const PvsSolution,
    which: PvsSeries,
    buf: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> PvsStatus {
    guard(|| {
        out_arg(written, "written")?;
        let d = &ref_arg(solution, "solution")?.dispatch;
        let series: &[f64] = match which {
            PvsSeries::Pv => &d.p_pv,
            PvsSeries::Grid => &d.p_grid,
            PvsSeries::Battery => &d.p_batt,
            PvsSeries::Energy => &d.e_batt,
            PvsSeries::Curtailed => &d.p_curt,
            PvsSeries::Diesel => &d.p_diesel,
        };
        *written = series.len();
        if series.is_empty() {
            return Ok(());
        }
        if capacity < series.len() {
            return Err(Failure(
                PvsStatus::BufferTooSmall,
                format!("series has {} values, buffer holds {capacity}", series.len()),
            ));
        }
        out_arg(buf, "buf")?;
        ptr::copy_nonoverlapping(series.as_ptr(), buf, series.len());
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a live handle, and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn pvs_solution_free(solution: *mut PvsSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Full run: solves the configured cases and writes every output file into
/// `output_dir`. Returns `Invalid` when a case failed to solve or validate;
/// the files are written either way.
///
/// # Safety
/// `config` must be a live handle and `output_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pvs_run(config: *const PvsConfig, output_dir: *const c_char) -> PvsStatus {
    guard(|| {
        let cfg = &ref_arg(config, "config")?.inner;
        let dir = str_arg(output_dir, "output_dir")?;
        let outcome = pipeline::run(cfg)?;
        pipeline::write_outputs(&outcome, Path::new(dir))?;
        if outcome.ok() {
            Ok(())
        } else {
            let msg = outcome
                .comparison_error
                .clone()
                .unwrap_or_else(|| "a case failed to solve or validate".into());
            Err(Failure(PvsStatus::Invalid, msg))
        }
    })
}
