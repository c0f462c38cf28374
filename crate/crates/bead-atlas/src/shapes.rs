//! Diagram profiles: the boundary data a (skew) Young diagram induces on the
//! strip [0,1] x [0,1] when drawn in the Russian convention.
//!
//! A diagram with `n` occupied diagonals ("threads") is stored at exact
//! lattice resolution: per thread the lower staircase value (in half-integer
//! units) and the box count. The continuous profile places thread `i`
//! (1-based) at x = i/(n+1), the two pinch corners at x = 0 and x = 1, and
//! scales heights by 2/(n+1) so every boundary segment has slope exactly +-1.

use thiserror::Error;

/// Twice the lower staircase value and the box count for each thread.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Lattice {
    /// `2 * b_i` where `b_i` is the bottom of thread i's box stack.
    b2: Vec<i64>,
    /// Boxes on thread i.
    m: Vec<i64>,
}

/// Russian-convention profile of a skew diagram, normalized into [0,1].
///
/// `f_low`/`f_up` are the lower/upper boundary staircases sampled at
/// `x_knots`; both are 1-Lipschitz, agree at the two ends, and satisfy
/// `f_up > f_low` strictly between the corners.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramProfile {
    n_threads: usize,
    x_knots: Vec<f64>,
    f_low: Vec<f64>,
    f_up: Vec<f64>,
    lattice: Option<Lattice>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("parts must be weakly decreasing and positive: {0:?}")]
    NotAPartition(Vec<u64>),
    #[error("inner shape not contained in outer shape")]
    InnerNotContained,
    #[error("outer/inner difference is empty")]
    EmptyShape,
    #[error("diagram is disconnected: diagonal {content} carries no boxes")]
    Disconnected { content: i64 },
    #[error("scale factor must be >= 1")]
    BadScale,
    #[error("profile is not a lattice staircase (knot {0} off-lattice)")]
    NotLattice(usize),
    #[error("invalid profile: {0:?}")]
    InvalidProfile(Vec<Violation>),
}

/// A single failed profile invariant, reported by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    KnotOrder { index: usize },
    KnotRange { index: usize },
    LengthMismatch,
    Ordering { index: usize },
    InteriorPinch { index: usize },
    CornerGap { right: bool },
    Lipschitz { index: usize, slope: f64 },
    ThreadCount { expected: usize, actual: usize },
}

/// Piecewise-linear evaluation of `(knots, vals)` at `x`, clamped to the ends.
pub(crate) fn pl_eval(knots: &[f64], vals: &[f64], x: f64) -> f64 {
    debug_assert_eq!(knots.len(), vals.len());
    if x <= knots[0] {
        return vals[0];
    }
    if x >= knots[knots.len() - 1] {
        return vals[vals.len() - 1];
    }
    let j = match knots.binary_search_by(|k| k.partial_cmp(&x).unwrap()) {
        Ok(j) => return vals[j],
        Err(j) => j,
    };
    let (x0, x1) = (knots[j - 1], knots[j]);
    let w = (x - x0) / (x1 - x0);
    vals[j - 1] * (1.0 - w) + vals[j] * w
}

fn check_partition(p: &[u64]) -> Result<(), ShapeError> {
    for w in p.windows(2) {
        if w[1] > w[0] {
            return Err(ShapeError::NotAPartition(p.to_vec()));
        }
    }
    if p.iter().any(|&x| x == 0) {
        return Err(ShapeError::NotAPartition(p.to_vec()));
    }
    Ok(())
}

/// `scale`-fold dilation: each row repeated `scale` times, parts times `scale`.
fn dilate(p: &[u64], scale: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(p.len() * scale as usize);
    for &part in p {
        for _ in 0..scale {
            out.push(part * scale);
        }
    }
    out
}

/// Builds the profile of `outer/inner`, dilated by `scale`.
///
/// Rejects malformed partitions, inner not contained in outer, empty
/// differences, and diagrams whose occupied diagonals are not contiguous
/// (such skew shapes split into independent components).
pub fn profile_from_partitions(
    outer: &[u64],
    inner: &[u64],
    scale: u64,
) -> Result<DiagramProfile, ShapeError> {
    if scale == 0 {
        return Err(ShapeError::BadScale);
    }
    check_partition(outer)?;
    check_partition(inner)?;
    if inner.len() > outer.len() {
        return Err(ShapeError::InnerNotContained);
    }
    for (i, &mu) in inner.iter().enumerate() {
        if mu > outer[i] {
            return Err(ShapeError::InnerNotContained);
        }
    }
    let outer = dilate(outer, scale);
    let inner = dilate(inner, scale);
    DiagramProfile::from_rows(&outer, &inner)
}

impl DiagramProfile {
    /// Builds from validated row data (`inner[r] <= outer[r]`, 1-based rows).
    fn from_rows(outer: &[u64], inner: &[u64]) -> Result<Self, ShapeError> {
        let mu = |r: usize| -> i64 {
            if r < inner.len() {
                inner[r] as i64
            } else {
                0
            }
        };
        // Content range over all cells (r, c) with mu_r < c <= lambda_r.
        let mut c_min = i64::MAX;
        let mut c_max = i64::MIN;
        for (r0, &lam) in outer.iter().enumerate() {
            let m = mu(r0);
            if (lam as i64) > m {
                let r = r0 as i64 + 1;
                c_min = c_min.min(m + 1 - r);
                c_max = c_max.max(lam as i64 - r);
            }
        }
        if c_min > c_max {
            return Err(ShapeError::EmptyShape);
        }
        let n = (c_max - c_min + 1) as usize;
        let mut b2 = vec![0i64; n];
        let mut m_cnt = vec![0i64; n];
        for (idx, content) in (c_min..=c_max).enumerate() {
            // Rows r whose interval ]mu_r, lambda_r] contains column content + r.
            let mut r_lo = i64::MAX;
            let mut r_hi = i64::MIN;
            for (r0, &lam) in outer.iter().enumerate() {
                let r = r0 as i64 + 1;
                let col = content + r;
                if col > mu(r0) && col <= lam as i64 {
                    r_lo = r_lo.min(r);
                    r_hi = r_hi.max(r);
                }
            }
            if r_lo > r_hi {
                return Err(ShapeError::Disconnected { content });
            }
            // Cell (r, c) spans z in [r + (content-2)/2, r + content/2].
            b2[idx] = 2 * r_lo + content - 2;
            m_cnt[idx] = r_hi - r_lo + 1;
        }
        Ok(Self::from_lattice(Lattice { b2, m: m_cnt }))
    }

    fn from_lattice(lat: Lattice) -> Self {
        let n = lat.b2.len();
        let denom = (n + 1) as f64;
        // Left pinch corner sits half a box above the first thread's bottom.
        let z0_2 = lat.b2[0] + 1;
        let mut x_knots = Vec::with_capacity(n + 2);
        let mut f_low = Vec::with_capacity(n + 2);
        let mut f_up = Vec::with_capacity(n + 2);
        x_knots.push(0.0);
        f_low.push(0.0);
        f_up.push(0.0);
        for i in 0..n {
            x_knots.push((i + 1) as f64 / denom);
            f_low.push((lat.b2[i] - z0_2) as f64 / denom);
            f_up.push((lat.b2[i] + 2 * lat.m[i] - z0_2) as f64 / denom);
        }
        let right = (lat.b2[n - 1] + 1 - z0_2) as f64 / denom;
        x_knots.push(1.0);
        f_low.push(right);
        f_up.push(right);
        DiagramProfile {
            n_threads: n,
            x_knots,
            f_low,
            f_up,
            lattice: Some(lat),
        }
    }

    /// Builds from raw sampled arrays (the second JSON document form).
    ///
    /// The arrays must pass [`validate`]; lattice-resolution data is
    /// reconstructed when the knots sit on the i/(n+1) grid, which the exact
    /// counting and sampling operations require.
    pub fn from_raw(
        x_knots: Vec<f64>,
        f_low: Vec<f64>,
        f_up: Vec<f64>,
        n_threads: usize,
    ) -> Result<Self, ShapeError> {
        let mut p = DiagramProfile {
            n_threads,
            x_knots,
            f_low,
            f_up,
            lattice: None,
        };
        let violations = validate(&p);
        if !violations.is_empty() {
            return Err(ShapeError::InvalidProfile(violations));
        }
        p.lattice = p.reconstruct_lattice().ok();
        Ok(p)
    }

    fn reconstruct_lattice(&self) -> Result<Lattice, ShapeError> {
        let n = self.n_threads;
        let denom = (n + 1) as f64;
        let tol = 1e-6;
        let snap = |v: f64, idx: usize| -> Result<i64, ShapeError> {
            let scaled = v * denom;
            let r = scaled.round();
            if (scaled - r).abs() > tol {
                return Err(ShapeError::NotLattice(idx));
            }
            Ok(r as i64)
        };
        for (i, &x) in self.x_knots.iter().enumerate() {
            if (x - i as f64 / denom).abs() > tol / denom {
                return Err(ShapeError::NotLattice(i));
            }
        }
        // f_low thread value = (b2_i - b2_0 - 1)/(n+1); recover b2 up to the
        // (irrelevant) global offset by anchoring b2_0 = 0.
        let mut b2 = Vec::with_capacity(n);
        let mut m = Vec::with_capacity(n);
        for i in 0..n {
            let lo2 = snap(self.f_low[i + 1], i + 1)?;
            let up2 = snap(self.f_up[i + 1], i + 1)?;
            let gap = up2 - lo2;
            if gap <= 0 || gap % 2 != 0 {
                return Err(ShapeError::NotLattice(i + 1));
            }
            b2.push(lo2);
            m.push(gap / 2);
        }
        Ok(Lattice { b2, m })
    }

    pub fn n_threads(&self) -> usize {
        self.n_threads
    }

    /// Total box count.
    pub fn n_boxes(&self) -> usize {
        match &self.lattice {
            Some(l) => l.m.iter().sum::<i64>() as usize,
            None => {
                let denom = (self.n_threads + 1) as f64;
                let sum: f64 = (0..self.n_threads)
                    .map(|i| (self.f_up[i + 1] - self.f_low[i + 1]) * denom / 2.0)
                    .sum();
                sum.round() as usize
            }
        }
    }

    pub fn x_knots(&self) -> &[f64] {
        &self.x_knots
    }

    pub fn f_low(&self) -> &[f64] {
        &self.f_low
    }

    pub fn f_up(&self) -> &[f64] {
        &self.f_up
    }

    pub fn eval_low(&self, x: f64) -> f64 {
        pl_eval(&self.x_knots, &self.f_low, x)
    }

    pub fn eval_up(&self, x: f64) -> f64 {
        pl_eval(&self.x_knots, &self.f_up, x)
    }

    /// Twice the lower staircase value per thread, on the half-integer lattice.
    pub(crate) fn thread_b2(&self) -> Result<&[i64], ShapeError> {
        self.lattice
            .as_ref()
            .map(|l| l.b2.as_slice())
            .ok_or(ShapeError::NotLattice(0))
    }

    /// Boxes per thread.
    pub(crate) fn thread_counts(&self) -> Result<&[i64], ShapeError> {
        self.lattice
            .as_ref()
            .map(|l| l.m.as_slice())
            .ok_or(ShapeError::NotLattice(0))
    }

    /// Recovers `(outer, inner)` row lengths, columns shifted so inner >= 0.
    ///
    /// The cell poset is invariant under the column shift, so counts and
    /// samplers built on the result are exact for the original diagram.
    pub fn to_partitions(&self) -> Result<(Vec<u64>, Vec<u64>), ShapeError> {
        let lat = self
            .lattice
            .as_ref()
            .ok_or(ShapeError::NotLattice(0))?;
        let n = self.n_threads as i64;
        // Content baseline: any shift works (the cell poset is invariant),
        // but row indices (z2 - c + 1)/2 must stay integral.
        let parity = lat.b2[0].rem_euclid(2);
        // Cell on thread i, k-th box: z2 = b2 + 1 + 2k, row r = (z2 - c + 1)/2,
        // column c + r.
        let mut rows: std::collections::BTreeMap<i64, (i64, i64)> = std::collections::BTreeMap::new();
        for i in 0..n {
            let c = i + parity;
            let b2 = lat.b2[i as usize];
            for k in 0..lat.m[i as usize] {
                let z2 = b2 + 1 + 2 * k;
                debug_assert_eq!((z2 - c + 1) % 2, 0);
                let r = (z2 - c + 1) / 2;
                let col = c + r;
                let e = rows.entry(r).or_insert((col, col));
                e.0 = e.0.min(col);
                e.1 = e.1.max(col);
            }
        }
        let col_shift = 1 - rows.values().map(|&(lo, _)| lo).min().unwrap();
        let r_first = *rows.keys().next().unwrap();
        let r_last = *rows.keys().last().unwrap();
        let mut outer = Vec::new();
        let mut inner = Vec::new();
        let mut prev_hi = i64::MAX;
        let mut prev_lo = i64::MAX;
        for r in r_first..=r_last {
            let &(lo, hi) = rows.get(&r).ok_or(ShapeError::Disconnected { content: r })?;
            let (lo, hi) = (lo + col_shift, hi + col_shift);
            debug_assert!(hi <= prev_hi && lo <= prev_lo, "rows must nest");
            prev_hi = hi;
            prev_lo = lo;
            outer.push(hi as u64);
            inner.push((lo - 1) as u64);
        }
        inner.retain(|&x| x > 0);
        Ok((outer, inner))
    }
}

/// Boundary data for the variational problem: `bottom = f_low/2`,
/// `top = f_up/2`, pinned to `left_value`/`right_value` at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    pub x_knots: Vec<f64>,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    pub left_value: f64,
    pub right_value: f64,
}

impl BoundaryCondition {
    pub fn eval_bottom(&self, x: f64) -> f64 {
        pl_eval(&self.x_knots, &self.bottom, x)
    }

    pub fn eval_top(&self, x: f64) -> f64 {
        pl_eval(&self.x_knots, &self.top, x)
    }

    /// Largest column gap `top - bottom`.
    pub fn max_gap(&self) -> f64 {
        self.x_knots
            .iter()
            .zip(self.top.iter().zip(self.bottom.iter()))
            .map(|(_, (t, b))| t - b)
            .fold(0.0, f64::max)
    }
}

/// Halves the profile into the height-function boundary condition.
pub fn boundary_from_profile(p: &DiagramProfile) -> BoundaryCondition {
    let bottom: Vec<f64> = p.f_low.iter().map(|v| v / 2.0).collect();
    let top: Vec<f64> = p.f_up.iter().map(|v| v / 2.0).collect();
    BoundaryCondition {
        x_knots: p.x_knots.clone(),
        left_value: bottom[0],
        right_value: *bottom.last().unwrap(),
        bottom,
        top,
    }
}

/// Checks every profile invariant, returning all violations found.
pub fn validate(p: &DiagramProfile) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = &p.x_knots;
    if k.len() != p.f_low.len() || k.len() != p.f_up.len() {
        out.push(Violation::LengthMismatch);
        return out;
    }
    if k.len() != p.n_threads + 2 {
        out.push(Violation::ThreadCount {
            expected: p.n_threads + 2,
            actual: k.len(),
        });
    }
    for (i, w) in k.windows(2).enumerate() {
        if w[1] <= w[0] {
            out.push(Violation::KnotOrder { index: i + 1 });
        }
    }
    if k[0] != 0.0 || (k[k.len() - 1] - 1.0).abs() > 1e-12 {
        out.push(Violation::KnotRange {
            index: if k[0] != 0.0 { 0 } else { k.len() - 1 },
        });
    }
    let eps = 1e-9;
    for i in 0..k.len() {
        let gap = p.f_up[i] - p.f_low[i];
        if gap < -eps {
            out.push(Violation::Ordering { index: i });
        } else if i > 0 && i + 1 < k.len() && gap <= eps {
            out.push(Violation::InteriorPinch { index: i });
        }
    }
    if (p.f_up[0] - p.f_low[0]).abs() > eps {
        out.push(Violation::CornerGap { right: false });
    }
    if (p.f_up[k.len() - 1] - p.f_low[k.len() - 1]).abs() > eps {
        out.push(Violation::CornerGap { right: true });
    }
    for f in [&p.f_low, &p.f_up] {
        for i in 0..k.len() - 1 {
            let dx = k[i + 1] - k[i];
            if dx <= 0.0 {
                continue;
            }
            let slope = (f[i + 1] - f[i]) / dx;
            if slope.abs() > 1.0 + 1e-9 {
                out.push(Violation::Lipschitz {
                    index: i,
                    slope,
                });
            }
        }
    }
    out
}
