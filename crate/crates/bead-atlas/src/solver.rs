//! Variational solver: maximize the integrated bead entropy over admissible
//! height fields on a rectangular grid, plus the exact square-region height
//! function used as a reference, level lines, and the limit surface.

use crate::entropy::{ent, grad_ent, Slope, T_FLOOR};
use crate::shapes::BoundaryCondition;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("grid must have nx >= 1, ny >= 1 and (nx+1)(ny+1) values, got nx={nx} ny={ny} len={len}")]
    BadGrid { nx: usize, ny: usize, len: usize },
    #[error("boundary is degenerate: top <= bottom near x={x}")]
    DegenerateBoundary { x: f64 },
    #[error("field violates admissibility: {0}")]
    NotAdmissible(String),
    #[error("level {alpha} outside [0, 1]")]
    LevelOutOfRange { alpha: f64 },
}

/// Height values on the nodes of a regular grid over the unit square,
/// node (i, j) at (i/nx, j/ny). Admissible fields are 1/(2nx)-Lipschitz
/// across columns and nondecreasing up each column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeightField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl GridHeightField {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self, SolverError> {
        if nx < 1 || ny < 1 || values.len() != (nx + 1) * (ny + 1) {
            return Err(SolverError::BadGrid { nx, ny, len: values.len() });
        }
        Ok(GridHeightField { nx, ny, values })
    }

    pub fn zeros(nx: usize, ny: usize) -> Self {
        GridHeightField { nx, ny, values: vec![0.0; (nx + 1) * (ny + 1)] }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut g = Self::zeros(nx, ny);
        for j in 0..=ny {
            for i in 0..=nx {
                let v = f(i as f64 / nx as f64, j as f64 / ny as f64);
                g.set(i, j, v);
            }
        }
        g
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.nx + 1) + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * (self.nx + 1) + i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bilinear interpolation at (x, y) in the unit square.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let fx = (x.clamp(0.0, 1.0) * self.nx as f64).min(self.nx as f64 - 1e-12);
        let fy = (y.clamp(0.0, 1.0) * self.ny as f64).min(self.ny as f64 - 1e-12);
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        let (u, v) = (fx - i as f64, fy - j as f64);
        (1.0 - u) * (1.0 - v) * self.get(i, j)
            + u * (1.0 - v) * self.get(i + 1, j)
            + (1.0 - u) * v * self.get(i, j + 1)
            + u * v * self.get(i + 1, j + 1)
    }

    /// First violated admissibility constraint, if any.
    pub fn check_admissible(&self) -> Result<(), SolverError> {
        let lip = 0.5 / self.nx as f64 + 1e-12;
        for j in 0..=self.ny {
            for i in 0..self.nx {
                let d = self.get(i + 1, j) - self.get(i, j);
                if d.abs() > lip {
                    return Err(SolverError::NotAdmissible(format!(
                        "horizontal step {d:.3e} at ({i},{j}) exceeds {lip:.3e}"
                    )));
                }
            }
        }
        for i in 0..=self.nx {
            for j in 0..self.ny {
                let d = self.get(i, j + 1) - self.get(i, j);
                if d < -1e-12 {
                    return Err(SolverError::NotAdmissible(format!(
                        "column decrease {d:.3e} at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Scalar values attached to grid cells, cell (i, j) centered at
/// ((i+1/2)/nx, (j+1/2)/ny).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl CellGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Residual movement (max node displacement of a sweep, or displacement
    /// per unit step of a gradient iteration) treated as negligible.
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_iters: 50_000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual movement of the last update pass (see [`SolveOptions::tol`]).
    pub pg_norm: f64,
    /// Worst boundary/Lipschitz/monotonicity violation of the final field.
    pub feasibility: f64,
    pub objective_trace: Vec<f64>,
}

/// Average slope of the cell with lower-left node (ci, cj).
pub fn cell_slope(h: &GridHeightField, ci: usize, cj: usize) -> Slope {
    let nx = h.nx() as f64;
    let ny = h.ny() as f64;
    let (a, b) = (h.get(ci, cj), h.get(ci + 1, cj));
    let (c, d) = (h.get(ci, cj + 1), h.get(ci + 1, cj + 1));
    Slope { s: (b - a + d - c) * nx / 2.0, t: (c - a + d - b) * ny / 2.0 }
}

/// Integrated entropy of a height field: cell areas times [`ent`] at the cell
/// slope. Cells with vertical slope at or below [`T_FLOOR`] are frozen and
/// contribute zero, so a flat field scores exactly 0.
pub fn ent_functional(h: &GridHeightField) -> f64 {
    let area = 1.0 / (h.nx() as f64 * h.ny() as f64);
    let mut acc = 0.0;
    for cj in 0..h.ny() {
        for ci in 0..h.nx() {
            acc += cell_term(h, ci, cj, area);
        }
    }
    acc
}

/// One cell's contribution to [`ent_functional`].
fn cell_term(h: &GridHeightField, ci: usize, cj: usize, area: f64) -> f64 {
    let sl = cell_slope(h, ci, cj);
    if sl.t <= T_FLOOR {
        return 0.0;
    }
    area * ent(Slope { s: sl.s.clamp(-0.5, 0.5), t: sl.t })
}

/// Gradient of [`ent_functional`] with respect to node heights.
fn functional_gradient(h: &GridHeightField) -> Vec<f64> {
    let (nx, ny) = (h.nx(), h.ny());
    let area = 1.0 / (nx as f64 * ny as f64);
    let (cs, ct) = (nx as f64 / 2.0, ny as f64 / 2.0);
    let mut g = vec![0.0; (nx + 1) * (ny + 1)];
    for cj in 0..ny {
        for ci in 0..nx {
            let (es, et) = grad_ent(cell_slope(h, ci, cj));
            let (ps, pt) = (area * es * cs, area * et * ct);
            g[cj * (nx + 1) + ci] += -ps - pt;
            g[cj * (nx + 1) + ci + 1] += ps - pt;
            g[(cj + 1) * (nx + 1) + ci] += -ps + pt;
            g[(cj + 1) * (nx + 1) + ci + 1] += ps + pt;
        }
    }
    g
}

/// The up-to-four cells touching node (i, j), with the sign pattern of
/// d(s, t)/dv for that cell when the node value moves by dv. Signs follow the
/// corner roles in [`cell_slope`].
fn node_cells(nx: usize, ny: usize, i: usize, j: usize) -> [Option<(usize, usize, f64, f64)>; 4] {
    let mut out = [None; 4];
    if i > 0 && j > 0 {
        out[0] = Some((i - 1, j - 1, 1.0, 1.0));
    }
    if i < nx && j > 0 {
        out[1] = Some((i, j - 1, -1.0, 1.0));
    }
    if i > 0 && j < ny {
        out[2] = Some((i - 1, j, 1.0, -1.0));
    }
    if i < nx && j < ny {
        out[3] = Some((i, j, -1.0, -1.0));
    }
    out
}

/// Objective restricted to the cells around node (i, j), at the current value.
fn node_value(h: &GridHeightField, cells: &[Option<(usize, usize, f64, f64)>; 4], area: f64) -> f64 {
    let mut acc = 0.0;
    for c in cells.iter().flatten() {
        acc += cell_term(h, c.0, c.1, area);
    }
    acc
}

/// d/dv of [`node_value`]; frozen cells contribute zero, matching the value.
fn node_deriv(
    h: &GridHeightField,
    cells: &[Option<(usize, usize, f64, f64)>; 4],
    area: f64,
    cs: f64,
    ct: f64,
) -> f64 {
    let mut acc = 0.0;
    for &(ci, cj, sgn_s, sgn_t) in cells.iter().flatten() {
        let sl = cell_slope(h, ci, cj);
        if sl.t <= T_FLOOR {
            continue;
        }
        let (es, et) = grad_ent(sl);
        acc += area * (es * sgn_s * cs + et * sgn_t * ct);
    }
    acc
}

/// Exact line search for one interior node over its feasible interval. The
/// column and row constraints are all pairwise, so with the neighbors held
/// fixed the feasible set is an interval and the restricted objective is
/// concave on it; bisection on the derivative finds the maximizer. Accepts
/// only a strict improvement. Returns (objective gain, |displacement|).
fn update_node(h: &mut GridHeightField, i: usize, j: usize, lip: f64, area: f64) -> (f64, f64) {
    let (nx, ny) = (h.nx(), h.ny());
    let old = h.get(i, j);
    let mut lo = h.get(i, j - 1);
    let mut hi = h.get(i, j + 1);
    if i > 0 {
        let l = h.get(i - 1, j);
        lo = lo.max(l - lip);
        hi = hi.min(l + lip);
    }
    if i < nx {
        let r = h.get(i + 1, j);
        lo = lo.max(r - lip);
        hi = hi.min(r + lip);
    }
    // Roundoff guard: the current value is admissible by invariant.
    lo = lo.min(old);
    hi = hi.max(old);
    if hi - lo < 1e-14 {
        return (0.0, 0.0);
    }
    let cells = node_cells(nx, ny, i, j);
    let (cs, ct) = (nx as f64 / 2.0, ny as f64 / 2.0);
    let before = node_value(h, &cells, area);
    // Bisection converges to an endpoint when the derivative never changes
    // sign, so no endpoint special cases are needed.
    let (mut a, mut b) = (lo, hi);
    for _ in 0..32 {
        let m = 0.5 * (a + b);
        h.set(i, j, m);
        if node_deriv(h, &cells, area, cs, ct) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let v = 0.5 * (a + b);
    h.set(i, j, v);
    let gain = node_value(h, &cells, area) - before;
    if gain > 0.0 {
        (gain, (v - old).abs())
    } else {
        h.set(i, j, old);
        (0.0, 0.0)
    }
}

/// One sweep of per-node maximization: a forward then a backward pass over
/// the free nodes. Returns (total objective gain, max node displacement).
fn gs_sweep(h: &mut GridHeightField, sb: &SampledBoundary) -> (f64, f64) {
    let (nx, ny) = (h.nx(), h.ny());
    let lip = 0.5 / nx as f64;
    let area = 1.0 / (nx as f64 * ny as f64);
    let i_lo = if sb.pinch_left { 1 } else { 0 };
    let i_hi = if sb.pinch_right { nx.saturating_sub(1) } else { nx };
    let mut gain = 0.0;
    let mut moved = 0.0f64;
    for j in 1..ny {
        for i in i_lo..=i_hi {
            let (g, m) = update_node(h, i, j, lip, area);
            gain += g;
            moved = moved.max(m);
        }
    }
    for j in (1..ny).rev() {
        for i in (i_lo..=i_hi).rev() {
            let (g, m) = update_node(h, i, j, lip, area);
            gain += g;
            moved = moved.max(m);
        }
    }
    (gain, moved)
}

// ---------------------------------------------------------------------------
// Projection onto the admissible set.

/// Pool-adjacent-violators: the L2 projection of `v` onto nondecreasing
/// sequences, written back in place.
pub(crate) fn isotonic(v: &mut [f64]) {
    let n = v.len();
    // (mean, count) blocks.
    let mut means = Vec::with_capacity(n);
    let mut counts: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        means.push(v[i]);
        counts.push(1);
        while means.len() > 1 && means[means.len() - 2] > means[means.len() - 1] {
            let (m2, c2) = (means.pop().unwrap(), counts.pop().unwrap());
            let k = means.len() - 1;
            let c1 = counts[k];
            means[k] = (means[k] * c1 as f64 + m2 * c2 as f64) / (c1 + c2) as f64;
            counts[k] = c1 + c2;
        }
    }
    let mut idx = 0;
    for (m, c) in means.iter().zip(&counts) {
        for _ in 0..*c {
            v[idx] = *m;
            idx += 1;
        }
    }
}

/// Boundary data sampled on the grid, precomputed for projection.
struct SampledBoundary {
    bottom: Vec<f64>,
    top: Vec<f64>,
    pinch_left: bool,
    pinch_right: bool,
}

fn sample_boundary(bc: &BoundaryCondition, nx: usize) -> SampledBoundary {
    let bottom: Vec<f64> = (0..=nx).map(|i| bc.eval_bottom(i as f64 / nx as f64)).collect();
    let top: Vec<f64> = (0..=nx).map(|i| bc.eval_top(i as f64 / nx as f64)).collect();
    let pinch_left = (top[0] - bottom[0]).abs() < 1e-12;
    let pinch_right = (top[nx] - bottom[nx]).abs() < 1e-12;
    SampledBoundary { bottom, top, pinch_left, pinch_right }
}

fn project_boundary(h: &mut GridHeightField, sb: &SampledBoundary) {
    let (nx, ny) = (h.nx(), h.ny());
    for i in 0..=nx {
        h.set(i, 0, sb.bottom[i]);
        h.set(i, ny, sb.top[i]);
    }
    if sb.pinch_left {
        for j in 0..=ny {
            h.set(0, j, sb.bottom[0]);
        }
    }
    if sb.pinch_right {
        for j in 0..=ny {
            h.set(nx, j, sb.bottom[nx]);
        }
    }
}

fn project_columns(h: &mut GridHeightField) {
    let (nx, ny) = (h.nx(), h.ny());
    let mut col = vec![0.0; ny + 1];
    for i in 0..=nx {
        for j in 0..=ny {
            col[j] = h.get(i, j);
        }
        isotonic(&mut col);
        for j in 0..=ny {
            h.set(i, j, col[j]);
        }
    }
}

/// Projects each row onto one-sided slope constraints. With `upper` true the
/// constraint is h[i+1]-h[i] <= L (shift by -iL, then antitonic); otherwise
/// h[i+1]-h[i] >= -L (shift by +iL, then isotonic).
fn project_rows_one_sided(h: &mut GridHeightField, upper: bool) {
    let (nx, ny) = (h.nx(), h.ny());
    let lip = 0.5 / nx as f64;
    let mut row = vec![0.0; nx + 1];
    for j in 0..=ny {
        if upper {
            // y_i = -(h_i - i L) must be nondecreasing.
            for i in 0..=nx {
                row[i] = -(h.get(i, j) - i as f64 * lip);
            }
            isotonic(&mut row);
            for i in 0..=nx {
                h.set(i, j, -row[i] + i as f64 * lip);
            }
        } else {
            // y_i = h_i + i L must be nondecreasing.
            for i in 0..=nx {
                row[i] = h.get(i, j) + i as f64 * lip;
            }
            isotonic(&mut row);
            for i in 0..=nx {
                h.set(i, j, row[i] - i as f64 * lip);
            }
        }
    }
}

/// Dykstra's alternating projection onto the intersection of the boundary
/// equalities, column monotonicity, and the two one-sided row slope cones.
/// Runs until the per-cycle movement drops below `tol`.
pub fn project_admissible(h: &mut GridHeightField, bc: &BoundaryCondition, tol: f64) {
    let sb = sample_boundary(bc, h.nx());
    let n = h.values.len();
    let mut corr = vec![vec![0.0; n]; 4];
    let mut prev = h.values.clone();
    for _cycle in 0..600 {
        for (k, c) in corr.iter_mut().enumerate() {
            for (v, ci) in h.values.iter_mut().zip(c.iter()) {
                *v += *ci;
            }
            let before = h.values.clone();
            match k {
                0 => project_boundary(h, &sb),
                1 => project_columns(h),
                2 => project_rows_one_sided(h, true),
                _ => project_rows_one_sided(h, false),
            }
            for ((ci, b), v) in c.iter_mut().zip(&before).zip(&h.values) {
                *ci = b - v;
            }
        }
        let moved = h
            .values
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if moved < tol {
            break;
        }
        prev.copy_from_slice(&h.values);
    }
}

/// Worst violation of boundary equality, Lipschitz, or monotonicity.
pub fn feasibility_residual(h: &GridHeightField, bc: &BoundaryCondition) -> f64 {
    let (nx, ny) = (h.nx(), h.ny());
    let sb = sample_boundary(bc, nx);
    let mut worst = 0.0f64;
    for i in 0..=nx {
        worst = worst.max((h.get(i, 0) - sb.bottom[i]).abs());
        worst = worst.max((h.get(i, ny) - sb.top[i]).abs());
    }
    let lip = 0.5 / nx as f64;
    for j in 0..=ny {
        for i in 0..nx {
            worst = worst.max((h.get(i + 1, j) - h.get(i, j)).abs() - lip);
        }
    }
    for i in 0..=nx {
        for j in 0..ny {
            worst = worst.max(h.get(i, j) - h.get(i, j + 1));
        }
    }
    worst.max(0.0)
}

/// Initial field: the boundary midline bent upward by the widest column gap,
/// clamped between bottom and top. Admissible by construction.
pub fn init_tent(
    bc: &BoundaryCondition,
    nx: usize,
    ny: usize,
) -> Result<GridHeightField, SolverError> {
    let sb = sample_boundary(bc, nx);
    let mut gap_max = 0.0f64;
    for i in 0..=nx {
        let gap = sb.top[i] - sb.bottom[i];
        if gap < -1e-12 {
            return Err(SolverError::DegenerateBoundary { x: i as f64 / nx as f64 });
        }
        gap_max = gap_max.max(gap);
    }
    if gap_max <= 1e-12 {
        return Err(SolverError::DegenerateBoundary { x: 0.5 });
    }
    for i in 1..nx {
        if sb.top[i] - sb.bottom[i] <= 1e-12 {
            return Err(SolverError::DegenerateBoundary { x: i as f64 / nx as f64 });
        }
    }
    // Midline, shrunk to strictly sub-maximal slope so interior cells start
    // off the entropy walls.
    let lip = 0.5 / nx as f64;
    let shrink = lip * (1.0 - 0.5 / ny as f64);
    let mut mid: Vec<f64> = (0..=nx).map(|i| 0.5 * (sb.bottom[i] + sb.top[i])).collect();
    for _ in 0..2 {
        for i in 1..=nx {
            mid[i] = mid[i].clamp(mid[i - 1] - shrink, mid[i - 1] + shrink);
        }
        for i in (0..nx).rev() {
            mid[i] = mid[i].clamp(mid[i + 1] - shrink, mid[i + 1] + shrink);
        }
    }
    let mut h = GridHeightField::zeros(nx, ny);
    for j in 0..=ny {
        let y = j as f64 / ny as f64;
        for i in 0..=nx {
            let v = (mid[i] + gap_max * (y - 0.5)).clamp(sb.bottom[i], sb.top[i]);
            h.set(i, j, v);
        }
    }
    project_boundary(&mut h, &sb);
    h.check_admissible()
        .map_err(|e| SolverError::NotAdmissible(format!("tent construction: {e}")))?;
    Ok(h)
}

/// Maximizes the integrated entropy over admissible fields with the given
/// boundary. Large even grids are solved coarse-to-fine: each halved grid is
/// solved first and its interpolant warm-starts the next level, which removes
/// the smooth error modes that decay slowly on the fine grid. The report
/// describes the final level; `max_iters` applies per level.
pub fn maximize_entropy(
    bc: &BoundaryCondition,
    nx: usize,
    ny: usize,
    opts: &SolveOptions,
) -> Result<(GridHeightField, SolveReport), SolverError> {
    let mut plan = vec![(nx, ny)];
    let (mut cx, mut cy) = (nx, ny);
    while cx % 2 == 0 && cy % 2 == 0 && cx.min(cy) >= 24 {
        cx /= 2;
        cy /= 2;
        plan.push((cx, cy));
    }
    plan.reverse();
    let start = init_tent(bc, plan[0].0, plan[0].1)?;
    let mut solved = solve_from(start, bc, opts)?;
    for &(lx, ly) in &plan[1..] {
        let prev = solved.0;
        let next = GridHeightField::from_fn(lx, ly, |x, y| prev.eval(x, y));
        solved = solve_from(next, bc, opts)?;
    }
    Ok(solved)
}

/// Ascent from a caller-supplied admissible start. Alternates sweeps of
/// exact per-node line search with short projected-gradient phases: the
/// sweeps give fast local convergence, while the joint gradient steps move
/// whole blocks along active constraints that single-node moves cannot
/// slide, and a negligible gradient-phase gain certifies convergence.
/// The trace records the objective after every sweep or gradient iteration
/// and never decreases; only strict improvements are accepted anywhere.
pub fn solve_from(
    start: GridHeightField,
    bc: &BoundaryCondition,
    opts: &SolveOptions,
) -> Result<(GridHeightField, SolveReport), SolverError> {
    let mut h = start;
    project_admissible(&mut h, bc, 1e-11);
    let sb = sample_boundary(bc, h.nx());
    let mut obj = ent_functional(&h);
    let mut trace = vec![obj];
    let mut step = 1.0f64;
    let mut pg_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    'outer: while iterations < opts.max_iters {
        // Sweep phase: run until node movement is negligible or the
        // objective stalls, then hand over to the gradient phase.
        let mut sweeps = 0;
        while iterations < opts.max_iters && sweeps < 2_000 {
            iterations += 1;
            sweeps += 1;
            let (gain, moved) = gs_sweep(&mut h, &sb);
            // A start on the slope walls scores -inf; incremental accounting
            // is meaningless until the sweep moves every cell off the walls,
            // so recompute until the total is finite again.
            obj = if (obj + gain).is_finite() { obj + gain } else { ent_functional(&h) };
            trace.push(obj);
            pg_norm = moved;
            if moved < opts.tol {
                break;
            }
            let window = 10;
            if sweeps > window {
                let earlier = trace[trace.len() - 1 - window];
                if obj - earlier <= 1e-13 * obj.abs().max(1.0) {
                    break;
                }
            }
        }
        if iterations >= opts.max_iters {
            break;
        }
        // Gradient phase.
        let phase_start = obj;
        let mut stationary = false;
        for _ in 0..30 {
            if iterations >= opts.max_iters {
                break;
            }
            iterations += 1;
            let g = functional_gradient(&h);
            let mut accepted = false;
            for _ in 0..60 {
                let mut trial = h.clone();
                for (v, gi) in trial.values.iter_mut().zip(&g) {
                    *v += step * gi;
                }
                project_admissible(&mut trial, bc, 1e-11);
                let tobj = ent_functional(&trial);
                if tobj > obj {
                    pg_norm = trial
                        .values
                        .iter()
                        .zip(&h.values)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max)
                        / step;
                    h = trial;
                    obj = tobj;
                    step = (step * 2.0).min(1e3);
                    accepted = true;
                    break;
                }
                step *= 0.5;
                if step < 1e-14 {
                    break;
                }
            }
            trace.push(obj);
            if !accepted {
                // No improving joint step at machine precision.
                stationary = true;
                break;
            }
        }
        if stationary || obj - phase_start <= 1e-10 * obj.abs().max(1.0) {
            converged = true;
            break 'outer;
        }
    }
    project_admissible(&mut h, bc, 1e-13);
    let feasibility = feasibility_residual(&h, bc);
    let objective = ent_functional(&h);
    Ok((
        h,
        SolveReport { objective, iterations, converged, pg_norm, feasibility, objective_trace: trace },
    ))
}

/// Cell-centered vertical slope (local bead density) of a height field.
pub fn density(h: &GridHeightField) -> CellGrid {
    let (nx, ny) = (h.nx(), h.ny());
    let mut values = Vec::with_capacity(nx * ny);
    for cj in 0..ny {
        for ci in 0..nx {
            values.push(cell_slope(h, ci, cj).t);
        }
    }
    CellGrid { nx, ny, values }
}

// ---------------------------------------------------------------------------
// Exact reference solution on the square region.

/// Exact limiting height over the unit square, normalized so the boundary
/// tent is -1/4 + |x - 1/2|/2 at the bottom and its negative on top.
pub fn square_oracle_height(x: f64, y: f64) -> f64 {
    let cap_x = 2.0 * x - 1.0;
    let cap_y = 2.0 * y - 1.0;
    cap_h(cap_x, cap_y) / (2.0 * std::f64::consts::PI)
}

/// Slope (s, t) of [`square_oracle_height`] at (x, y); t is set to 0 outside
/// the inscribed disc.
pub fn square_oracle_slope(x: f64, y: f64) -> Slope {
    let pi = std::f64::consts::PI;
    let cap_x = 2.0 * x - 1.0;
    let cap_y = 2.0 * y - 1.0;
    let rr = 1.0 - cap_x * cap_x - cap_y * cap_y;
    if rr <= 0.0 {
        let s = if cap_y > 0.0 {
            -0.5 * cap_x.signum()
        } else {
            0.5 * cap_x.signum()
        };
        return Slope { s, t: 0.0 };
    }
    let r = rr.sqrt();
    Slope {
        s: -(cap_x * cap_y / r).atan() / pi,
        t: r / (pi * (1.0 - cap_y * cap_y)),
    }
}

/// Frozen-region analysis of the centered height: inside the unit disc an
/// arctan expression, outside the continuation along the tangent tent.
fn cap_h(cap_x: f64, cap_y: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let rr = 1.0 - cap_x * cap_x - cap_y * cap_y;
    if rr <= 0.0 {
        return if cap_y >= 0.0 {
            (pi / 2.0) * (1.0 - cap_x.abs())
        } else {
            (pi / 2.0) * (cap_x.abs() - 1.0)
        };
    }
    let r = rr.sqrt();
    (cap_y / r).atan() - cap_x * (cap_x * cap_y / r).atan()
}

/// The oracle sampled on a grid.
pub fn square_oracle(nx: usize, ny: usize) -> GridHeightField {
    GridHeightField::from_fn(nx, ny, square_oracle_height)
}

// ---------------------------------------------------------------------------
// Euler-Lagrange residual.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElResidual {
    pub median: f64,
    pub p95: f64,
    pub n_liquid: usize,
}

/// Pointwise residual of the entropy Euler-Lagrange equation at interior
/// nodes in the liquid region (t > 0.02, |s| < 0.48), by central differences.
/// Summarized as median and 95th percentile of absolute values.
pub fn euler_lagrange_residual(h: &GridHeightField) -> ElResidual {
    let pi = std::f64::consts::PI;
    let (nx, ny) = (h.nx(), h.ny());
    let (fx, fy) = (nx as f64, ny as f64);
    let mut vals = Vec::new();
    for j in 1..ny {
        for i in 1..nx {
            let hx = (h.get(i + 1, j) - h.get(i - 1, j)) * fx / 2.0;
            let hy = (h.get(i, j + 1) - h.get(i, j - 1)) * fy / 2.0;
            if hy <= 0.02 || hx.abs() >= 0.48 {
                continue;
            }
            let hxx = (h.get(i + 1, j) - 2.0 * h.get(i, j) + h.get(i - 1, j)) * fx * fx;
            let hyy = (h.get(i, j + 1) - 2.0 * h.get(i, j) + h.get(i, j - 1)) * fy * fy;
            let hxy = (h.get(i + 1, j + 1) - h.get(i + 1, j - 1) - h.get(i - 1, j + 1)
                + h.get(i - 1, j - 1))
                * fx
                * fy
                / 4.0;
            let tan = (pi * hx).tan();
            let res = pi * pi * (1.0 + tan * tan) * hy * hxx + hyy / hy + 2.0 * pi * hxy * tan;
            vals.push(res.abs());
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = vals.len();
    if n == 0 {
        return ElResidual { median: 0.0, p95: 0.0, n_liquid: 0 };
    }
    ElResidual {
        median: vals[n / 2],
        p95: vals[((n as f64 * 0.95) as usize).min(n - 1)],
        n_liquid: n,
    }
}

// ---------------------------------------------------------------------------
// Level lines and the limit surface.

/// The alpha-level line of a solved field, in boundary-profile units:
/// z_alpha(x) = f_low(x) + 2 (h(x, alpha) - h(x, 0)), clipped to the region.
/// Returns (x, z) pairs at `samples+1` uniform abscissae.
pub fn level_line(
    h: &GridHeightField,
    bc: &BoundaryCondition,
    alpha: f64,
    samples: usize,
) -> Result<Vec<(f64, f64)>, SolverError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SolverError::LevelOutOfRange { alpha });
    }
    let mut out = Vec::with_capacity(samples + 1);
    for k in 0..=samples {
        let x = k as f64 / samples as f64;
        let f_low = 2.0 * bc.eval_bottom(x);
        let f_up = 2.0 * bc.eval_top(x);
        let z = f_low + 2.0 * (h.eval(x, alpha) - h.eval(x, 0.0));
        out.push((x, z.clamp(f_low, f_up)));
    }
    Ok(out)
}

/// Inverse of the height in its vertical argument: the level (in [0, 1]) at
/// which the column through `x` passes height `e`; columns are monotone.
fn column_inverse(h: &GridHeightField, x: f64, e: f64) -> f64 {
    let ny = h.ny();
    let mut lo_val = h.eval(x, 0.0);
    if e <= lo_val {
        return 0.0;
    }
    for j in 1..=ny {
        let y = j as f64 / ny as f64;
        let v = h.eval(x, y);
        if v >= e {
            let y0 = (j - 1) as f64 / ny as f64;
            if v - lo_val <= 1e-300 {
                return y;
            }
            return y0 + (e - lo_val) / (v - lo_val) / ny as f64;
        }
        lo_val = v;
    }
    1.0
}

/// The limit surface through the solved field: for (x, z) with z in region
/// units, the normalized level at which the height passes the linear
/// interpolation between the boundary heights at z- and z+.
pub fn limit_surface(
    h: &GridHeightField,
    bc: &BoundaryCondition,
    x: f64,
    z: f64,
) -> f64 {
    let z_lo = 2.0 * bc.eval_bottom(x);
    let z_hi = 2.0 * bc.eval_top(x);
    if z_hi - z_lo <= 1e-12 {
        return 0.5;
    }
    let zc = z.clamp(z_lo, z_hi);
    let b = h.eval(x, 0.0);
    let t = h.eval(x, 1.0);
    let e = (b * (z_hi - zc) + t * (zc - z_lo)) / (z_hi - z_lo);
    column_inverse(h, x, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{boundary_from_profile, profile_from_partitions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_bc() -> BoundaryCondition {
        let p = profile_from_partitions(&[4, 4, 4, 4], &[], 1).unwrap();
        boundary_from_profile(&p)
    }

    #[test]
    fn isotonic_matches_hand_cases() {
        let mut v = vec![3.0, 1.0, 2.0];
        isotonic(&mut v);
        assert_eq!(v, vec![2.0, 2.0, 2.0]);
        let mut v = vec![1.0, 3.0, 2.0, 4.0];
        isotonic(&mut v);
        assert_eq!(v, vec![1.0, 2.5, 2.5, 4.0]);
        let mut v = vec![1.0, 2.0, 3.0];
        isotonic(&mut v);
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn tent_is_admissible_and_matches_boundary() {
        for (outer, inner) in [(&[4u64, 4, 4, 4][..], &[][..]), (&[3, 2][..], &[1u64][..])] {
            let p = profile_from_partitions(outer, inner, 1).unwrap();
            let bc = boundary_from_profile(&p);
            let h = init_tent(&bc, 16, 16).unwrap();
            h.check_admissible().unwrap();
            assert!(feasibility_residual(&h, &bc) < 1e-12);
            // Strictly positive column mass somewhere.
            let mass: f64 = (0..=16)
                .map(|i| h.get(i, 16) - h.get(i, 0))
                .fold(0.0, f64::max);
            assert!(mass > 0.1);
        }
    }

    #[test]
    fn projection_is_idempotent_and_repairs() {
        let bc = square_bc();
        let h0 = init_tent(&bc, 12, 12).unwrap();
        let mut h = h0.clone();
        project_admissible(&mut h, &bc, 1e-12);
        for (a, b) in h.values().iter().zip(h0.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        // Break it thoroughly, then repair.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut broken = h0.clone();
        for j in 0..=12 {
            for i in 0..=12 {
                let v = broken.get(i, j) + rng.gen_range(-0.2..0.2);
                broken.set(i, j, v);
            }
        }
        project_admissible(&mut broken, &bc, 1e-12);
        broken.check_admissible().unwrap();
        assert!(feasibility_residual(&broken, &bc) < 1e-9);
    }

    /// Consensus ADMM on the same four constraint sets, as an independent
    /// check that Dykstra lands on the true projection.
    fn admm_project(v: &GridHeightField, bc: &BoundaryCondition) -> GridHeightField {
        let n = v.values().len();
        let sb = sample_boundary(bc, v.nx());
        let mut z = v.clone();
        let mut us = vec![vec![0.0; n]; 4];
        let rho = 1.0f64;
        for _ in 0..4000 {
            let mut xs = Vec::with_capacity(4);
            for (k, u) in us.iter().enumerate() {
                let mut x = z.clone();
                for (xv, uv) in x.values.iter_mut().zip(u) {
                    *xv -= *uv;
                }
                match k {
                    0 => project_boundary(&mut x, &sb),
                    1 => project_columns(&mut x),
                    2 => project_rows_one_sided(&mut x, true),
                    _ => project_rows_one_sided(&mut x, false),
                }
                xs.push(x);
            }
            // z-update: average of (x_k + u_k) pulled toward v.
            for i in 0..n {
                let mut s = v.values[i] / rho;
                for (x, u) in xs.iter().zip(&us) {
                    s += x.values[i] + u[i];
                }
                z.values[i] = s / (4.0 + 1.0 / rho);
            }
            for (x, u) in xs.iter().zip(us.iter_mut()) {
                for i in 0..n {
                    u[i] += x.values[i] - z.values[i];
                }
            }
        }
        z
    }

    #[test]
    fn dykstra_agrees_with_admm_on_small_grids() {
        let p = profile_from_partitions(&[2, 2], &[], 1).unwrap();
        let bc = boundary_from_profile(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3 {
            let mut v = GridHeightField::zeros(8, 8);
            for j in 0..=8 {
                for i in 0..=8 {
                    v.set(i, j, rng.gen_range(-0.3..0.3));
                }
            }
            let mut dyk = v.clone();
            project_admissible(&mut dyk, &bc, 1e-13);
            let adm = admm_project(&v, &bc);
            for (a, b) in dyk.values().iter().zip(adm.values()) {
                assert!((a - b).abs() < 5e-4, "dykstra {a} vs admm {b}");
            }
        }
    }

    #[test]
    fn cell_slope_of_linear_field() {
        let h = GridHeightField::from_fn(10, 10, |x, y| 0.3 * x + 0.2 * y + 0.05);
        for cj in 0..10 {
            for ci in 0..10 {
                let sl = cell_slope(&h, ci, cj);
                assert!((sl.s - 0.3).abs() < 1e-12);
                assert!((sl.t - 0.2).abs() < 1e-12);
            }
        }
        let v = ent_functional(&h);
        assert!((v - ent(Slope { s: 0.3, t: 0.2 })).abs() < 1e-12);
        let flat = GridHeightField::from_fn(6, 6, |_, _| 0.25);
        assert_eq!(ent_functional(&flat), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = GridHeightField::from_fn(5, 5, |x, y| {
            0.1 * x + 0.15 * y + 0.02 * (2.0 * std::f64::consts::PI * x).sin() * y
        });
        let g = functional_gradient(&h);
        let mut hp = h.clone();
        let eps = 1e-7;
        for j in 0..=5 {
            for i in 0..=5 {
                let base = hp.get(i, j);
                hp.set(i, j, base + eps);
                let up = ent_functional(&hp);
                hp.set(i, j, base - eps);
                let dn = ent_functional(&hp);
                hp.set(i, j, base);
                let fd = (up - dn) / (2.0 * eps);
                let gi = g[j * 6 + i];
                assert!((fd - gi).abs() < 1e-5, "node ({i},{j}): fd {fd} vs {gi}");
            }
        }
    }

    #[test]
    fn small_square_solve_improves_and_stays_feasible() {
        let bc = square_bc();
        let opts = SolveOptions { max_iters: 4000, ..Default::default() };
        let (h, report) = maximize_entropy(&bc, 16, 16, &opts).unwrap();
        h.check_admissible().unwrap();
        assert!(report.feasibility <= 1e-9, "feasibility {}", report.feasibility);
        // Ascent: the recorded trace never decreases.
        for w in report.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
        let init = report.objective_trace[0];
        assert!(report.objective > init + 0.01);
        // Center height of the square solution is 0 by symmetry.
        assert!(h.get(8, 8).abs() < 5e-3);
        // Mirror symmetry in x survives the solve.
        for j in 0..=16 {
            for i in 0..=16 {
                assert!((h.get(i, j) - h.get(16 - i, j)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn square_oracle_seam_is_continuous() {
        for k in 0..200 {
            let th = std::f64::consts::PI * 2.0 * k as f64 / 200.0;
            let (cx, cy) = (th.cos(), th.sin());
            let inside = cap_h(cx * (1.0 - 1e-13), cy * (1.0 - 1e-13));
            let outside = cap_h(cx * (1.0 + 1e-13), cy * (1.0 + 1e-13));
            assert!((inside - outside).abs() < 1e-6, "theta={th}");
        }
    }

    #[test]
    fn square_oracle_pins_and_gradient() {
        // Center: h = 0, t = 1/pi.
        assert!(square_oracle_height(0.5, 0.5).abs() < 1e-15);
        let c = square_oracle_slope(0.5, 0.5);
        assert!(c.s.abs() < 1e-15);
        assert!((c.t - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        // Bottom mid-edge: the tangent case H(0, -1) = -pi/2.
        assert!((square_oracle_height(0.5, 0.0) + 0.25).abs() < 1e-12);
        // Boundary tent along the bottom.
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let want = -0.25 + 0.5 * (x - 0.5).abs();
            assert!((square_oracle_height(x, 0.0) - want).abs() < 1e-10, "x={x}");
            assert!((square_oracle_height(x, 1.0) + want).abs() < 1e-10, "x={x}");
        }
        // Analytic slope vs finite differences, inside the disc.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let x: f64 = rng.gen_range(0.15..0.85);
            let y: f64 = rng.gen_range(0.15..0.85);
            if (2.0 * x - 1.0).powi(2) + (2.0 * y - 1.0).powi(2) > 0.9 {
                continue;
            }
            let sl = square_oracle_slope(x, y);
            let e = 1e-6;
            let fs = (square_oracle_height(x + e, y) - square_oracle_height(x - e, y)) / (2.0 * e);
            let ft = (square_oracle_height(x, y + e) - square_oracle_height(x, y - e)) / (2.0 * e);
            assert!((sl.s - fs).abs() < 1e-7);
            assert!((sl.t - ft).abs() < 1e-7);
        }
    }

    #[test]
    fn square_oracle_grid_is_admissible() {
        let h = square_oracle(33, 33);
        h.check_admissible().unwrap();
        let bc = square_bc();
        assert!(feasibility_residual(&h, &bc) < 1e-9);
    }

    #[test]
    fn el_residual_small_on_oracle() {
        let h = square_oracle(64, 64);
        let r = euler_lagrange_residual(&h);
        assert!(r.n_liquid > 500);
        assert!(r.median < 0.01, "median {}", r.median);
        assert!(r.p95 < 10.0, "p95 {}", r.p95);
        // Second-order decay of the interior residual under refinement.
        let coarse = euler_lagrange_residual(&square_oracle(32, 32));
        let fine = euler_lagrange_residual(&square_oracle(128, 128));
        assert!(fine.median < 0.3 * coarse.median);
    }

    #[test]
    fn level_lines_of_oracle() {
        let h = square_oracle(64, 64);
        let bc = square_bc();
        // alpha = 0 gives the lower boundary.
        let line = level_line(&h, &bc, 0.0, 32).unwrap();
        for &(x, z) in &line {
            assert!((z - (-0.5 + (x - 0.5).abs())).abs() < 1e-9);
        }
        // Interior level line stays inside and hits the frozen tent outside
        // the tangency window.
        let line = level_line(&h, &bc, 0.25, 64).unwrap();
        for &(x, z) in &line {
            let f_low = -0.5 + (x - 0.5).abs();
            assert!(z >= f_low - 1e-9 && z <= -f_low + 1e-9);
        }
        let frozen = (1.0f64 - 2.0 * 0.05).powi(2) + (1.0f64 - 2.0 * 0.25).powi(2);
        assert!(frozen > 1.0);
        let z_at = line.iter().find(|(x, _)| (x - 0.046875).abs() < 1e-9);
        if let Some(&(x, z)) = z_at {
            assert!((z - ((x - 0.5).abs() - 0.5)).abs() < 1e-3);
        }
        assert!(level_line(&h, &bc, 1.5, 8).is_err());
    }

    #[test]
    fn limit_surface_inverts_levels() {
        let h = square_oracle(96, 96);
        let bc = square_bc();
        for &alpha in &[0.2, 0.5, 0.8] {
            for k in 1..10 {
                let x = k as f64 / 10.0;
                // z of the alpha level line at x, then invert.
                let z = 2.0 * bc.eval_bottom(x)
                    + 2.0 * (h.eval(x, alpha) - h.eval(x, 0.0));
                let got = limit_surface(&h, &bc, x, z);
                // Inversion is exact only where the column is strictly
                // increasing; frozen columns snap to an endpoint.
                let t_here = square_oracle_slope(x, alpha).t;
                if t_here > 0.05 {
                    assert!((got - alpha).abs() < 0.02, "x={x} alpha={alpha} got={got}");
                }
            }
        }
    }
}
