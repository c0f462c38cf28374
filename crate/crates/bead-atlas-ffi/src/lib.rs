//! C interface to the bead-atlas library. Handles are opaque pointers
//! released with their matching `_free`; fallible calls return [`BaStatus`]
//! and leave a description for [`ba_last_error_message`] on failure. Every
//! entry point catches panics, so nothing unwinds across the C boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use bead_atlas::entropy::{self, Slope, WeightParams};
use bead_atlas::shapes::{boundary_from_profile, profile_from_partitions, DiagramProfile};
use bead_atlas::solver::{self, GridHeightField, SolveOptions, SolveReport};
use bead_atlas::tableaux::{BeadConfiguration, SytSampler, Tableau};
use bead_atlas::{dimer, io, tableaux};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result of a fallible call. Anything but `Ok` leaves a description in
/// [`ba_last_error_message`].
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A scalar or string argument was outside its documented domain.
    InvalidArgument = 2,
    /// The arguments do not describe a valid diagram shape.
    InvalidShape = 3,
    /// The computation failed; the message has details.
    ComputeFailed = 4,
    /// An output buffer was shorter than the data it must hold.
    BufferTooSmall = 5,
    /// A panic was caught at the boundary.
    Panic = 6,
}

/// Skew diagram shape: outer and inner partition pair with a grid scale.
pub struct BaShape(DiagramProfile);

/// Standard filling of a shape: ranks 1..=N placed on threads.
pub struct BaTableau(Tableau);

/// Bead positions on vertical threads, from the tableau bijection.
pub struct BaBeads(BeadConfiguration);

/// Seeded stream of uniform draws from one shape. Not thread-safe; use one
/// sampler per thread.
pub struct BaSampler {
    sampler: SytSampler,
    rng: ChaCha8Rng,
}

/// Height field maximizing the bead entropy functional, with its solve
/// report.
pub struct BaSolution {
    field: GridHeightField,
    report: SolveReport,
    feasibility: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).expect("nul filtered"));
}

/// Runs an entry point body, converting panics into a status.
fn guarded<F: FnOnce() -> BaStatus>(f: F) -> BaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .copied()
                .or_else(|| p.downcast_ref::<String>().map(String::as_str))
                .unwrap_or("unknown panic");
            set_error(&format!("internal panic: {msg}"));
            BaStatus::Panic
        }
    }
}

fn opt_slice<'a>(ptr: *const u64, len: usize) -> &'a [u64] {
    if len == 0 {
        &[]
    } else {
        unsafe { slice::from_raw_parts(ptr, len) }
    }
}

/// Library version as a static string; never free it.
#[no_mangle]
pub extern "C" fn ba_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on the calling thread. The pointer
/// stays valid until the next failing call on the same thread; never free
/// it.
#[no_mangle]
pub extern "C" fn ba_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ba_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Shapes.

/// Builds a shape from outer and inner partition row lengths, both scaled by
/// `scale`. `inner` may be empty (pass null with length 0) and must fit
/// inside `outer`. On success stores a new handle in `*out`.
#[no_mangle]
pub unsafe extern "C" fn ba_shape_from_partitions(
    outer: *const u64,
    outer_len: usize,
    inner: *const u64,
    inner_len: usize,
    scale: u64,
    out: *mut *mut BaShape,
) -> BaStatus {
    guarded(|| {
        if out.is_null() || (outer.is_null() && outer_len > 0) || (inner.is_null() && inner_len > 0)
        {
            set_error("null pointer argument");
            return BaStatus::NullPointer;
        }
        let outer = opt_slice(outer, outer_len);
        let inner = opt_slice(inner, inner_len);
        match profile_from_partitions(outer, inner, scale) {
            Ok(p) => {
                ptr::write(out, Box::into_raw(Box::new(BaShape(p))));
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::InvalidShape
            }
        }
    })
}

/// Parses a shape from its JSON form (see [`ba_shape_to_json`]).
#[no_mangle]
pub unsafe extern "C" fn ba_shape_from_json(
    json: *const c_char,
    out: *mut *mut BaShape,
) -> BaStatus {
    guarded(|| {
        if json.is_null() || out.is_null() {
            set_error("null pointer argument");
            return BaStatus::NullPointer;
        }
        let s = match CStr::from_ptr(json).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("shape JSON is not valid UTF-8");
                return BaStatus::InvalidArgument;
            }
        };
        match io::profile_from_json(s) {
            Ok(p) => {
                ptr::write(out, Box::into_raw(Box::new(BaShape(p))));
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::InvalidShape
            }
        }
    })
}

/// Serializes the shape to JSON; free the string with [`ba_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ba_shape_to_json(
    shape: *const BaShape,
    out: *mut *mut c_char,
) -> BaStatus {
    guarded(|| {
        let Some(shape) = shape.as_ref() else {
            set_error("null shape");
            return BaStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return BaStatus::NullPointer;
        }
        match io::profile_to_json(&shape.0) {
            Ok(s) => {
                let c = CString::new(s).expect("JSON has no nul");
                ptr::write(out, c.into_raw());
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::ComputeFailed
            }
        }
    })
}

/// Releases a shape handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ba_shape_free(shape: *mut BaShape) {
    if !shape.is_null() {
        drop(Box::from_raw(shape));
    }
}

/// Number of threads the shape's boxes sit on; 0 for null.
#[no_mangle]
pub unsafe extern "C" fn ba_shape_n_threads(shape: *const BaShape) -> usize {
    shape.as_ref().map_or(0, |s| s.0.n_threads())
}

/// Number of boxes of the shape; 0 for null.
#[no_mangle]
pub unsafe extern "C" fn ba_shape_n_boxes(shape: *const BaShape) -> usize {
    shape.as_ref().map_or(0, |s| s.0.n_boxes())
}

// ---------------------------------------------------------------------------
// Exact counting.

/// Exact number of standard fillings as a decimal string; free it with
/// [`ba_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ba_count_fillings(
    shape: *const BaShape,
    out: *mut *mut c_char,
) -> BaStatus {
    guarded(|| {
        let Some(shape) = shape.as_ref() else {
            set_error("null shape");
            return BaStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return BaStatus::NullPointer;
        }
        match tableaux::count_syt(&shape.0) {
            Ok(c) => {
                let s = CString::new(c.to_string()).expect("digits");
                ptr::write(out, s.into_raw());
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::ComputeFailed
            }
        }
    })
}

/// Natural log of the number of standard fillings.
#[no_mangle]
pub unsafe extern "C" fn ba_count_fillings_log(
    shape: *const BaShape,
    out: *mut f64,
) -> BaStatus {
    guarded(|| {
        let Some(shape) = shape.as_ref() else {
            set_error("null shape");
            return BaStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return BaStatus::NullPointer;
        }
        match tableaux::count_syt(&shape.0) {
            Ok(c) => {
                ptr::write(out, entropy::ln_biguint(&c));
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::ComputeFailed
            }
        }
    })
}

/// Exact number of bead configurations of the shape's tall region with
/// `extra` spare levels per thread, as a decimal string; free it with
/// [`ba_string_free`]. At `extra = 0` every thread is frozen and the count
/// is one.
#[no_mangle]
pub unsafe extern "C" fn ba_count_tall(
    shape: *const BaShape,
    extra: u64,
    out: *mut *mut c_char,
) -> BaStatus {
    guarded(|| {
        let Some(shape) = shape.as_ref() else {
            set_error("null shape");
            return BaStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return BaStatus::NullPointer;
        }
        match dimer::count_tilings_tall_region(&shape.0, extra) {
            Ok(c) => {
                let s = CString::new(c.to_string()).expect("digits");
                ptr::write(out, s.into_raw());
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::ComputeFailed
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Uniform sampling.

/// Creates a sampler drawing uniform standard fillings of `shape`. The seed
/// fixes the whole stream: equal seeds give equal draw sequences.
#[no_mangle]
pub unsafe extern "C" fn ba_sampler_new(
    shape: *const BaShape,
    seed: u64,
    out: *mut *mut BaSampler,
) -> BaStatus {
    guarded(|| {
        let Some(shape) = shape.as_ref() else {
            set_error("null shape");
            return BaStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return BaStatus::NullPointer;
        }
        match SytSampler::new(&shape.0) {
            Ok(sampler) => {
                let rng = ChaCha8Rng::seed_from_u64(seed);
                ptr::write(out, Box::into_raw(Box::new(BaSampler { sampler, rng })));
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::InvalidShape
            }
        }
    })
}

/// Releases a sampler. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ba_sampler_free(sampler: *mut BaSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Draws the next uniform standard filling into a new tableau handle.
#[no_mangle]
pub unsafe extern "C" fn ba_sampler_next_tableau(
    sampler: *mut BaSampler,
    out: *mut *mut BaTableau,
) -> BaStatus {
    guarded(|| {
        let Some(s) = sampler.as_mut() else {
            set_error("null sampler");
            return BaStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return BaStatus::NullPointer;
        }
        match s.sampler.sample(&mut s.rng) {
            Ok(t) => {
                ptr::write(out, Box::into_raw(Box::new(BaTableau(t))));
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::ComputeFailed
            }
        }
    })
}

/// Draws the next uniform filling and pushes it through the bead bijection:
/// positions on the shape's threads.
#[no_mangle]
pub unsafe extern "C" fn ba_sampler_next_beads(
    sampler: *mut BaSampler,
    out: *mut *mut BaBeads,
) -> BaStatus {
    guarded(|| {
        let Some(s) = sampler.as_mut() else {
            set_error("null sampler");
            return BaStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return BaStatus::NullPointer;
        }
        match s.sampler.sample(&mut s.rng) {
            Ok(t) => {
                let b = tableaux::tableau_to_beads(&t, &mut s.rng);
                ptr::write(out, Box::into_raw(Box::new(BaBeads(b))));
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::ComputeFailed
            }
        }
    })
}

/// Releases a tableau. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ba_tableau_free(tableau: *mut BaTableau) {
    if !tableau.is_null() {
        drop(Box::from_raw(tableau));
    }
}

/// Number of threads of the tableau's shape; 0 for null.
#[no_mangle]
pub unsafe extern "C" fn ba_tableau_n_threads(tableau: *const BaTableau) -> usize {
    tableau.as_ref().map_or(0, |t| t.0.entries().len())
}

/// Number of boxes on one thread; 0 for null or an out-of-range thread.
#[no_mangle]
pub unsafe extern "C" fn ba_tableau_thread_len(
    tableau: *const BaTableau,
    thread: usize,
) -> usize {
    tableau
        .as_ref()
        .and_then(|t| t.0.entries().get(thread))
        .map_or(0, Vec::len)
}

/// Copies the entry ranks of one thread, ordered along the thread, into
/// `buf`. `buf_len` must be at least [`ba_tableau_thread_len`].
#[no_mangle]
pub unsafe extern "C" fn ba_tableau_entries(
    tableau: *const BaTableau,
    thread: usize,
    buf: *mut u32,
    buf_len: usize,
) -> BaStatus {
    guarded(|| {
        let Some(t) = tableau.as_ref() else {
            set_error("null tableau");
            return BaStatus::NullPointer;
        };
        if buf.is_null() {
            set_error("null buffer");
            return BaStatus::NullPointer;
        }
        let Some(row) = t.0.entries().get(thread) else {
            set_error(&format!(
                "thread {thread} out of range for {} threads",
                t.0.entries().len()
            ));
            return BaStatus::InvalidArgument;
        };
        if buf_len < row.len() {
            set_error(&format!("buffer holds {buf_len} of {} entries", row.len()));
            return BaStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(row.as_ptr(), buf, row.len());
        BaStatus::Ok
    })
}

/// Releases a bead configuration. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ba_beads_free(beads: *mut BaBeads) {
    if !beads.is_null() {
        drop(Box::from_raw(beads));
    }
}

/// Number of threads carrying beads; 0 for null.
#[no_mangle]
pub unsafe extern "C" fn ba_beads_n_threads(beads: *const BaBeads) -> usize {
    beads.as_ref().map_or(0, |b| b.0.threads().len())
}

/// Number of beads on one thread; 0 for null or an out-of-range thread.
#[no_mangle]
pub unsafe extern "C" fn ba_beads_thread_len(beads: *const BaBeads, thread: usize) -> usize {
    beads
        .as_ref()
        .and_then(|b| b.0.threads().get(thread))
        .map_or(0, Vec::len)
}

/// Copies the ascending bead positions of one thread into `buf`. `buf_len`
/// must be at least [`ba_beads_thread_len`].
#[no_mangle]
pub unsafe extern "C" fn ba_beads_positions(
    beads: *const BaBeads,
    thread: usize,
    buf: *mut f64,
    buf_len: usize,
) -> BaStatus {
    guarded(|| {
        let Some(b) = beads.as_ref() else {
            set_error("null bead configuration");
            return BaStatus::NullPointer;
        };
        if buf.is_null() {
            set_error("null buffer");
            return BaStatus::NullPointer;
        }
        let Some(row) = b.0.threads().get(thread) else {
            set_error(&format!(
                "thread {thread} out of range for {} threads",
                b.0.threads().len()
            ));
            return BaStatus::InvalidArgument;
        };
        if buf_len < row.len() {
            set_error(&format!("buffer holds {buf_len} of {} beads", row.len()));
            return BaStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(row.as_ptr(), buf, row.len());
        BaStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// Limit-shape solver.

/// Maximizes the bead entropy functional over admissible height fields on an
/// `nx` by `ny` cell grid with the shape's boundary values. Pass 0 iterations
/// or a non-positive tolerance for the defaults. A solution is returned even
/// when the iteration budget runs out; check [`ba_solution_converged`].
#[no_mangle]
pub unsafe extern "C" fn ba_solve_limit_shape(
    shape: *const BaShape,
    nx: usize,
    ny: usize,
    max_iters: usize,
    tol: f64,
    out: *mut *mut BaSolution,
) -> BaStatus {
    guarded(|| {
        let Some(shape) = shape.as_ref() else {
            set_error("null shape");
            return BaStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return BaStatus::NullPointer;
        }
        let mut opts = SolveOptions::default();
        if max_iters > 0 {
            opts.max_iters = max_iters;
        }
        if tol > 0.0 {
            opts.tol = tol;
        }
        let bc = boundary_from_profile(&shape.0);
        match solver::maximize_entropy(&bc, nx, ny, &opts) {
            Ok((field, report)) => {
                let feasibility = solver::feasibility_residual(&field, &bc);
                ptr::write(
                    out,
                    Box::into_raw(Box::new(BaSolution { field, report, feasibility })),
                );
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::ComputeFailed
            }
        }
    })
}

/// Releases a solution. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ba_solution_free(solution: *mut BaSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Cells along x of the solution grid; 0 for null.
#[no_mangle]
pub unsafe extern "C" fn ba_solution_nx(solution: *const BaSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.field.nx())
}

/// Cells along y of the solution grid; 0 for null.
#[no_mangle]
pub unsafe extern "C" fn ba_solution_ny(solution: *const BaSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.field.ny())
}

/// Final value of the entropy functional; NaN for null.
#[no_mangle]
pub unsafe extern "C" fn ba_solution_objective(solution: *const BaSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.report.objective)
}

/// Update passes the solve spent; 0 for null.
#[no_mangle]
pub unsafe extern "C" fn ba_solution_iterations(solution: *const BaSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.report.iterations)
}

/// Whether the solve certified a stationary point within its budget.
#[no_mangle]
pub unsafe extern "C" fn ba_solution_converged(solution: *const BaSolution) -> bool {
    solution.as_ref().is_some_and(|s| s.report.converged)
}

/// Worst boundary, monotonicity, or slope-bound violation of the returned
/// field; NaN for null.
#[no_mangle]
pub unsafe extern "C" fn ba_solution_feasibility(solution: *const BaSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.feasibility)
}

/// Bilinear height at (x, y) in the unit square; NaN for null.
#[no_mangle]
pub unsafe extern "C" fn ba_solution_eval(solution: *const BaSolution, x: f64, y: f64) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.field.eval(x, y))
}

/// Copies all node heights into `buf` in row-major order: node (i, j) at
/// position x = i/nx, y = j/ny lands at index `j * (nx + 1) + i`. `buf_len`
/// must be at least `(nx + 1) * (ny + 1)`.
#[no_mangle]
pub unsafe extern "C" fn ba_solution_values(
    solution: *const BaSolution,
    buf: *mut f64,
    buf_len: usize,
) -> BaStatus {
    guarded(|| {
        let Some(s) = solution.as_ref() else {
            set_error("null solution");
            return BaStatus::NullPointer;
        };
        if buf.is_null() {
            set_error("null buffer");
            return BaStatus::NullPointer;
        }
        let v = s.field.values();
        if buf_len < v.len() {
            set_error(&format!("buffer holds {buf_len} of {} nodes", v.len()));
            return BaStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        BaStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// Closed forms.

/// Entropy density at slope (s, t): 0 for t <= 0, negative infinity on the
/// walls |s| >= 1/2 with t > 0.
#[no_mangle]
pub extern "C" fn ba_bead_entropy(s: f64, t: f64) -> f64 {
    entropy::ent(Slope::new(s, t))
}

/// Free energy of the weighted bead model at parameters (alpha, gamma);
/// requires alpha > 0 and -1 < gamma < 1.
#[no_mangle]
pub unsafe extern "C" fn ba_free_energy(alpha: f64, gamma: f64, out: *mut f64) -> BaStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return BaStatus::NullPointer;
        }
        match WeightParams::new(alpha, gamma) {
            Ok(w) => {
                ptr::write(out, entropy::free_energy(&w));
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::InvalidArgument
            }
        }
    })
}

/// Log partition function of the p by q torus dimer model with edge weights
/// (a, b, c); requires positive dimensions and weights.
#[no_mangle]
pub unsafe extern "C" fn ba_torus_log_partition(
    p: usize,
    q: usize,
    a: f64,
    b: f64,
    c: f64,
    out: *mut f64,
) -> BaStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return BaStatus::NullPointer;
        }
        match dimer::torus_log_partition(p, q, a, b, c) {
            Ok(v) => {
                ptr::write(out, v);
                BaStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                BaStatus::InvalidArgument
            }
        }
    })
}

/// Closed-form limit height of the unit square's uniform bead model at
/// (x, y) in the unit square.
#[no_mangle]
pub extern "C" fn ba_square_height(x: f64, y: f64) -> f64 {
    solver::square_oracle_height(x, y)
}
