//! C interface to the rhp-hqp solver.
//!
//! A problem is an opaque handle holding a task library under construction
//! and a priority matrix. Matrices cross the boundary as row-major `double`
//! arrays. Every fallible call returns an [`RhpStatus`]; the message of the
//! most recent failure on the calling thread is available from
//! [`rhp_last_error_message`]. Panics are caught and reported as
//! `RHP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use rhp_hqp::baseline::solve_strict_hierarchy;
use rhp_hqp::error::{Error, ErrorCategory};
use rhp_hqp::hqp::{solve_hierarchy, SolverConfig};
use rhp_hqp::projection::compute_rhp;
use rhp_hqp::scenario::{emit_outputs, run_scenario, summarize, Mode, Scenario};
use rhp_hqp::task_model::{validate_priority_matrix, Constraint, PriorityMatrix, Task, TaskLibrary};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhpStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    Invalid = 3,
    Solver = 4,
    Config = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhpMode {
    /// Use the mode named in the scenario file (scenario runs only).
    FromConfig = 0,
    RhpHqp = 1,
    StrictBaseline = 2,
}

/// Scalar results of a scenario run. Absent values are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RhpRunSummary {
    pub cycles: usize,
    pub max_position_error: f64,
    pub max_orientation_error: f64,
    pub final_position_error: f64,
    pub integrated_position_error: f64,
    pub min_d_min: f64,
    pub max_velocity_jump: f64,
    pub max_psi_step: f64,
    pub transition_cycles: usize,
    /// Seconds.
    pub mean_solve_time: f64,
    /// Seconds.
    pub max_solve_time: f64,
}

/// Opaque problem handle.
pub struct RhpProblem {
    n: usize,
    tasks: Vec<Task>,
    constraints: Vec<Constraint>,
    psi: Option<PriorityMatrix>,
    config: SolverConfig,
}

impl RhpProblem {
    fn library(&self) -> Result<TaskLibrary, Failure> {
        Ok(TaskLibrary::new(self.n, self.tasks.clone(), self.constraints.clone())?)
    }

    fn priority(&self) -> Result<&PriorityMatrix, Failure> {
        self.psi
            .as_ref()
            .ok_or_else(|| Failure::new(RhpStatus::Invalid, "priority matrix not set"))
    }
}

struct Failure {
    status: RhpStatus,
    message: String,
}

impl Failure {
    fn new(status: RhpStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let status = match err.category() {
            ErrorCategory::Dimension => RhpStatus::Dimension,
            ErrorCategory::Invalid => RhpStatus::Invalid,
            ErrorCategory::Solver => RhpStatus::Solver,
            ErrorCategory::Config => RhpStatus::Config,
            ErrorCategory::Io => RhpStatus::Io,
        };
        Failure::new(status, err.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RhpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RhpStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {message}"));
            RhpStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(RhpStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `ptr` must be null or point to `len` readable doubles.
unsafe fn doubles<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or point to `len` writable doubles.
unsafe fn doubles_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// # Safety
/// `problem` must be null or a live handle from [`rhp_problem_new`].
unsafe fn problem_mut<'a>(problem: *mut RhpProblem) -> Result<&'a mut RhpProblem, Failure> {
    problem.as_mut().ok_or_else(|| null("problem"))
}

fn area(rows: usize, cols: usize) -> Result<usize, Failure> {
    rows.checked_mul(cols)
        .ok_or_else(|| Failure::new(RhpStatus::Dimension, format!("{rows} x {cols} overflows")))
}

fn check_len(len: usize, expected: usize, what: &str) -> Result<(), Failure> {
    if len == expected {
        Ok(())
    } else {
        Err(Failure::new(
            RhpStatus::Dimension,
            format!("{what} has {len} entries, expected {expected}"),
        ))
    }
}

fn finite(values: &[f64], what: &str) -> Result<(), Failure> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Failure::new(RhpStatus::Invalid, format!("{what} has non-finite entries")))
    }
}

fn strict_mode(mode: RhpMode) -> Result<bool, Failure> {
    match mode {
        RhpMode::RhpHqp => Ok(false),
        RhpMode::StrictBaseline => Ok(true),
        RhpMode::FromConfig => Err(Failure::new(
            RhpStatus::Invalid,
            "a problem solve needs an explicit mode",
        )),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rhp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failing call on this thread, or an empty
/// string. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rhp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// New problem over `n_joints` joint velocities, or null if `n_joints` is 0.
#[no_mangle]
pub extern "C" fn rhp_problem_new(n_joints: usize) -> *mut RhpProblem {
    if n_joints == 0 {
        set_last_error("problem needs at least one joint");
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(RhpProblem {
        n: n_joints,
        tasks: Vec::new(),
        constraints: Vec::new(),
        psi: None,
        config: SolverConfig::default(),
    }))
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `problem` must be null or a handle from [`rhp_problem_new`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn rhp_problem_free(problem: *mut RhpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Appends a task `A x ≈ b` as the next priority-matrix column.
///
/// `a` is `rows × n_joints` row-major, `b` has `rows` entries, and `w` is a
/// `rows × rows` symmetric positive definite weight, or null for identity.
///
/// # Safety
/// Pointers must be valid for the sizes above; `problem` must be a live
/// handle.
#[no_mangle]
pub unsafe extern "C" fn rhp_problem_add_task(
    problem: *mut RhpProblem,
    id: u32,
    rows: usize,
    a: *const f64,
    b: *const f64,
    w: *const f64,
) -> RhpStatus {
    guard(|| {
        let problem = problem_mut(problem)?;
        let n = problem.n;
        let a = doubles(a, area(rows, n)?, "a")?;
        let b = doubles(b, rows, "b")?;
        finite(a, "a")?;
        finite(b, "b")?;
        let w = if w.is_null() {
            DMatrix::identity(rows, rows)
        } else {
            let w = doubles(w, area(rows, rows)?, "w")?;
            finite(w, "w")?;
            DMatrix::from_row_slice(rows, rows, w)
        };
        let task = Task::new(
            id,
            format!("task{id}"),
            DMatrix::from_row_slice(rows, n, a),
            DVector::from_column_slice(b),
            w,
        )?;
        problem.tasks.push(task);
        problem.psi = None;
        Ok(())
    })
}

/// Adds `lower ≤ C x ≤ upper`, first enforced at `level` (0 makes it hard
/// for every task level).
///
/// # Safety
/// `c` must hold `rows × n_joints` doubles, `lower` and `upper` `rows`
/// each; `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rhp_problem_add_constraint(
    problem: *mut RhpProblem,
    id: u32,
    rows: usize,
    c: *const f64,
    lower: *const f64,
    upper: *const f64,
    level: usize,
) -> RhpStatus {
    guard(|| {
        let problem = problem_mut(problem)?;
        let n = problem.n;
        let c = doubles(c, area(rows, n)?, "c")?;
        let lower = doubles(lower, rows, "lower")?;
        let upper = doubles(upper, rows, "upper")?;
        finite(c, "c")?;
        let constraint = Constraint::new(
            id,
            DMatrix::from_row_slice(rows, n, c),
            DVector::from_column_slice(lower),
            DVector::from_column_slice(upper),
            level,
        )?;
        problem.constraints.push(constraint);
        Ok(())
    })
}

/// Sets the `n_levels × n_tasks` priority matrix (row-major). `n_tasks` must
/// equal the number of tasks added so far; adding a task clears it.
///
/// # Safety
/// `psi` must hold `n_levels × n_tasks` doubles; `problem` must be a live
/// handle.
#[no_mangle]
pub unsafe extern "C" fn rhp_problem_set_priority(
    problem: *mut RhpProblem,
    n_levels: usize,
    n_tasks: usize,
    psi: *const f64,
) -> RhpStatus {
    guard(|| {
        let problem = problem_mut(problem)?;
        let values = doubles(psi, area(n_levels, n_tasks)?, "psi")?;
        let psi = PriorityMatrix::from_matrix(DMatrix::from_row_slice(n_levels, n_tasks, values));
        validate_priority_matrix(&psi, &problem.library()?)?;
        problem.psi = Some(psi);
        Ok(())
    })
}

/// Sets the weight of the `ε‖u‖²` term added to every level.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rhp_problem_set_regularization(problem: *mut RhpProblem, epsilon: f64) -> RhpStatus {
    guard(|| {
        let problem = problem_mut(problem)?;
        let config = SolverConfig {
            regularization: epsilon,
            ..problem.config
        };
        config.validate()?;
        problem.config = config;
        Ok(())
    })
}

/// Solves the hierarchy and writes the `n_joints` joint velocities to `x`.
///
/// # Safety
/// `x` must hold `len` writable doubles; `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rhp_problem_solve(
    problem: *mut RhpProblem,
    mode: RhpMode,
    x: *mut f64,
    len: usize,
) -> RhpStatus {
    guard(|| {
        let problem = problem_mut(problem)?;
        check_len(len, problem.n, "x")?;
        let out = doubles_mut(x, len, "x")?;
        let library = problem.library()?;
        let psi = problem.priority()?;
        let sol = if strict_mode(mode)? {
            solve_strict_hierarchy(psi, &library, &problem.config)?
        } else {
            solve_hierarchy(psi, &library, &problem.config)?
        };
        out.copy_from_slice(sol.x.as_slice());
        Ok(())
    })
}

/// Writes the projector `P_level` of the upper `level` levels to `p`
/// (`n_joints × n_joints`, row-major). Level 0 gives the identity.
///
/// # Safety
/// `p` must hold `len` writable doubles; `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rhp_problem_projection(
    problem: *mut RhpProblem,
    level: usize,
    p: *mut f64,
    len: usize,
) -> RhpStatus {
    guard(|| {
        let problem = problem_mut(problem)?;
        let n = problem.n;
        check_len(len, area(n, n)?, "p")?;
        let out = doubles_mut(p, len, "p")?;
        let library = problem.library()?;
        let psi = problem.priority()?;
        if level > psi.n_levels() {
            return Err(Failure::new(
                RhpStatus::Dimension,
                format!("level {level} exceeds the {} levels", psi.n_levels()),
            ));
        }
        let mut projector = DMatrix::identity(n, n);
        for l in 1..=level {
            projector = compute_rhp(psi, &library, l, &projector, problem.config.rank_tol)?.p;
        }
        for (k, v) in out.iter_mut().enumerate() {
            *v = projector[(k / n, k % n)];
        }
        Ok(())
    })
}

/// Runs a scenario file. With a non-null `out_dir` the log, summary and
/// timing files are written there. `summary` may be null.
///
/// # Safety
/// `config_path` and `out_dir` must be null or NUL-terminated strings;
/// `summary` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rhp_run_scenario(
    config_path: *const c_char,
    mode: RhpMode,
    out_dir: *const c_char,
    summary: *mut RhpRunSummary,
) -> RhpStatus {
    guard(|| {
        let path = path_arg(config_path, "config_path")?.ok_or_else(|| null("config_path"))?;
        let mut scenario = Scenario::from_path(path)?;
        match mode {
            RhpMode::FromConfig => {}
            RhpMode::RhpHqp => scenario.mode = Mode::RhpHqp,
            RhpMode::StrictBaseline => scenario.mode = Mode::StrictHqpBaseline,
        }
        let log = run_scenario(&scenario)?;
        if let Some(dir) = path_arg(out_dir, "out_dir")? {
            emit_outputs(&log, dir)?;
        }
        if let Some(out) = summary.as_mut() {
            let s = summarize(&log);
            let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
            *out = RhpRunSummary {
                cycles: s.cycles,
                max_position_error: nan(s.max_position_error),
                max_orientation_error: nan(s.max_orientation_error),
                final_position_error: nan(s.final_position_error),
                integrated_position_error: s.integrated_position_error,
                min_d_min: nan(s.min_d_min),
                max_velocity_jump: s.max_velocity_jump,
                max_psi_step: s.max_psi_step,
                transition_cycles: s.transition_cycles,
                mean_solve_time: nan(s.mean_solve_time),
                max_solve_time: nan(s.max_solve_time),
            };
        }
        Ok(())
    })
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn path_arg<'a>(ptr: *const c_char, what: &str) -> Result<Option<&'a Path>, Failure> {
    if ptr.is_null() {
        return Ok(None);
    }
    let text = CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure::new(RhpStatus::Invalid, format!("{what} is not UTF-8")))?;
    Ok(Some(Path::new(text)))
}
