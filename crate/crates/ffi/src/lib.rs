//! C ABI for the hps solver.
//!
//! Solvers and solutions are opaque heap handles released with their `_free`
//! functions. Every call returns an [`HpsStatus`]; on failure a description
//! is available from [`hps_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hps::{
    build, build_tree, catalogue, evaluate_at, solve, BuildOptions, Field, HpsError, OperatorCache,
    Params, Problem, Rect, Solution,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotElliptic = 3,
    Singular = 4,
    MissingBodyOperators = 5,
    PointOutsideDomain = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Scalar field `f(x, y, user_data)`, or the constant `value` when `func`
/// is null. Callbacks may run concurrently from several threads.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HpsField {
    pub func: Option<extern "C" fn(x: f64, y: f64, user_data: *mut c_void) -> f64>,
    pub value: f64,
    pub user_data: *mut c_void,
}

/// `-c11 u_xx - 2 c12 u_xy - c22 u_yy + c1 u_x + c2 u_y + c u = g` on
/// `[x0, x1] x [y0, y1]` with `u = f` on the boundary.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HpsProblem {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub c11: HpsField,
    pub c12: HpsField,
    pub c22: HpsField,
    pub c1: HpsField,
    pub c2: HpsField,
    pub c: HpsField,
    pub f: HpsField,
    pub g: HpsField,
}

/// Leaf grid and discretization of a solver.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HpsGridOptions {
    pub leaves_x: usize,
    pub leaves_y: usize,
    /// Gauss nodes per leaf edge.
    pub q: usize,
    /// Chebyshev nodes per leaf side; `0` selects `q + 1`.
    pub p: usize,
    /// Build the operators needed for nonzero body loads.
    pub with_body: bool,
}

/// Built operators for one problem and grid.
pub struct HpsSolver {
    cache: OperatorCache,
}

/// Solution values at the global Gauss nodes.
pub struct HpsSolution {
    solution: Solution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

struct Failure(HpsStatus, String);

impl From<HpsError> for Failure {
    fn from(e: HpsError) -> Self {
        let status = match e {
            HpsError::NotElliptic { .. } => HpsStatus::NotElliptic,
            HpsError::SingularInteriorBlock { .. } | HpsError::SingularInterfaceOperator { .. } => {
                HpsStatus::Singular
            }
            HpsError::CacheMissingBodyOperators => HpsStatus::MissingBodyOperators,
            HpsError::PointOutsideDomain { .. } => HpsStatus::PointOutsideDomain,
            _ => HpsStatus::InvalidArgument,
        };
        Failure(status, format!("{}: {e}", e.code()))
    }
}

fn null(what: &str) -> Failure {
    Failure(
        HpsStatus::NullPointer,
        format!("null-pointer: {what} is null"),
    )
}

/// Runs `f`, turning errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HpsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("panic: internal error".into());
            HpsStatus::Panic
        }
    }
}

/// A C callback with its user data; the caller guarantees thread safety.
struct Callback {
    func: extern "C" fn(f64, f64, *mut c_void) -> f64,
    user_data: *mut c_void,
}

unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Callback {
    fn call(&self, x: f64, y: f64) -> f64 {
        (self.func)(x, y, self.user_data)
    }
}

impl From<HpsField> for Field {
    fn from(f: HpsField) -> Self {
        match f.func {
            None => Field::Constant(f.value),
            Some(func) => {
                let cb = Callback {
                    func,
                    user_data: f.user_data,
                };
                Field::new(move |x, y| cb.call(x, y))
            }
        }
    }
}

fn build_solver(problem: &Problem, opts: &HpsGridOptions) -> Result<Box<HpsSolver>, Failure> {
    let (tree, grid) = build_tree(problem.domain, opts.leaves_x, opts.leaves_y, opts.q)?;
    let mut build_opts = BuildOptions::for_q(opts.q).with_body(opts.with_body);
    if opts.p != 0 {
        build_opts = build_opts.p(opts.p);
    }
    let cache = build(problem, tree, grid, build_opts)?;
    Ok(Box::new(HpsSolver { cache }))
}

/// Builds a solver for a problem described by fields.
///
/// # Safety
/// `problem` and `options` must point to valid structs and `out` to writable
/// storage for one pointer. Callbacks and their user data must stay valid
/// and thread-safe for the lifetime of the solver.
#[no_mangle]
pub unsafe extern "C" fn hps_solver_new(
    problem: *const HpsProblem,
    options: *const HpsGridOptions,
    out: *mut *mut HpsSolver,
) -> HpsStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        let options = options.as_ref().ok_or_else(|| null("options"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = problem;
        let domain = Rect::new(p.x0, p.x1, p.y0, p.y1)?;
        let problem = Problem {
            domain,
            c11: p.c11.into(),
            c12: p.c12.into(),
            c22: p.c22.into(),
            c1: p.c1.into(),
            c2: p.c2.into(),
            c: p.c.into(),
            f: p.f.into(),
            g: p.g.into(),
            exact: None,
        };
        *out = Box::into_raw(build_solver(&problem, options)?);
        Ok(())
    })
}

/// Builds a solver for a named manufactured case on the unit square, with
/// `n_params` optional `name = value` parameter overrides.
///
/// # Safety
/// `name` must be a NUL-terminated string; `param_names` and `param_values`
/// must hold `n_params` entries (they may be null when `n_params` is 0);
/// `options` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hps_solver_new_case(
    name: *const c_char,
    param_names: *const *const c_char,
    param_values: *const f64,
    n_params: usize,
    options: *const HpsGridOptions,
    out: *mut *mut HpsSolver,
) -> HpsStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let options = options.as_ref().ok_or_else(|| null("options"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let utf8 = |s: *const c_char| {
            CStr::from_ptr(s).to_str().map_err(|_| {
                Failure(
                    HpsStatus::InvalidArgument,
                    "invalid-argument: string is not UTF-8".into(),
                )
            })
        };
        let mut params = Params::new();
        if n_params > 0 {
            if param_names.is_null() || param_values.is_null() {
                return Err(null("parameter arrays"));
            }
            let names = std::slice::from_raw_parts(param_names, n_params);
            let values = std::slice::from_raw_parts(param_values, n_params);
            for (&n, &v) in names.iter().zip(values) {
                if n.is_null() {
                    return Err(null("parameter name"));
                }
                params.insert(utf8(n)?.to_string(), v);
            }
        }
        let case = catalogue(utf8(name)?, &params)?;
        *out = Box::into_raw(build_solver(&case.problem, options)?);
        Ok(())
    })
}

/// Releases a solver. Null is ignored.
///
/// # Safety
/// `solver` must come from a constructor of this library and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn hps_solver_free(solver: *mut HpsSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Number of global Gauss nodes, or 0 for a null solver.
///
/// # Safety
/// `solver` must be null or a live solver.
#[no_mangle]
pub unsafe extern "C" fn hps_solver_node_count(solver: *const HpsSolver) -> usize {
    solver.as_ref().map_or(0, |s| s.cache.grid().len())
}

/// Writes the Gauss node coordinates as interleaved `x, y` pairs into `xy`,
/// which must hold `2 * node_count` values.
///
/// # Safety
/// `solver` must be live and `xy` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hps_solver_points(
    solver: *const HpsSolver,
    xy: *mut f64,
    len: usize,
) -> HpsStatus {
    guard(|| {
        let s = solver.as_ref().ok_or_else(|| null("solver"))?;
        let pts = s.cache.grid().points();
        let dst = output(xy, len, 2 * pts.len())?;
        for (d, p) in dst.chunks_exact_mut(2).zip(pts) {
            d.copy_from_slice(p);
        }
        Ok(())
    })
}

unsafe fn output<'a>(buf: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if buf.is_null() {
        return Err(null("output buffer"));
    }
    if len < needed {
        return Err(Failure(
            HpsStatus::BufferTooSmall,
            format!("buffer-too-small: need {needed} values, got {len}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(buf, needed))
}

/// Solves for Dirichlet data `f` and body load `g`. A null `f` or `g`
/// selects the solver problem's own field.
///
/// # Safety
/// `solver` must be live, `f` and `g` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hps_solve(
    solver: *const HpsSolver,
    f: *const HpsField,
    g: *const HpsField,
    out: *mut *mut HpsSolution,
) -> HpsStatus {
    guard(|| {
        let s = solver.as_ref().ok_or_else(|| null("solver"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let problem = s.cache.problem();
        let f = f.as_ref().map_or_else(|| problem.f.clone(), |&f| f.into());
        let g = g.as_ref().map_or_else(|| problem.g.clone(), |&g| g.into());
        let solution = solve(&s.cache, &f, &g)?;
        *out = Box::into_raw(Box::new(HpsSolution { solution }));
        Ok(())
    })
}

/// Copies the solution at the Gauss nodes (in [`hps_solver_points`] order)
/// into `values`.
///
/// # Safety
/// `solution` must be live and `values` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hps_solution_values(
    solution: *const HpsSolution,
    values: *mut f64,
    len: usize,
) -> HpsStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let u = &s.solution.u;
        output(values, len, u.len())?.copy_from_slice(u);
        Ok(())
    })
}

/// Evaluates the solution at `n` points given as interleaved `x, y` pairs.
///
/// # Safety
/// `solver` must be the solver that produced `solution`; `xy` must hold
/// `2n` doubles and `values` must be writable for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn hps_solution_evaluate(
    solver: *const HpsSolver,
    solution: *const HpsSolution,
    xy: *const f64,
    n: usize,
    values: *mut f64,
) -> HpsStatus {
    guard(|| {
        let s = solver.as_ref().ok_or_else(|| null("solver"))?;
        let sol = solution.as_ref().ok_or_else(|| null("solution"))?;
        if n == 0 {
            return Ok(());
        }
        if xy.is_null() {
            return Err(null("xy"));
        }
        if sol.solution.u.len() != s.cache.grid().len() {
            return Err(Failure(
                HpsStatus::InvalidArgument,
                "invalid-argument: solution belongs to a different solver".into(),
            ));
        }
        let pts: Vec<[f64; 2]> = std::slice::from_raw_parts(xy, 2 * n)
            .chunks_exact(2)
            .map(|c| [c[0], c[1]])
            .collect();
        let dst = output(values, n, n)?;
        dst.copy_from_slice(&evaluate_at(&s.cache, &sol.solution, &pts)?);
        Ok(())
    })
}

/// Releases a solution. Null is ignored.
///
/// # Safety
/// `solution` must come from [`hps_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hps_solution_free(solution: *mut HpsSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}
