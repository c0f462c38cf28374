//! Standard tableaux on staircase diagrams, exact counting and uniform
//! sampling, and the rank bijection between tableaux with iid uniform heights
//! and bead configurations.

use crate::shapes::{DiagramProfile, ShapeError};
use crate::solver::{CellGrid, GridHeightField};
use num_bigint::{BigInt, BigUint, RandBigInt};
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableauError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("entries are not a bijection onto 1..=N")]
    NotBijective,
    #[error("entry order violated above thread {thread}, box {index}")]
    NotIncreasing { thread: usize, index: usize },
    #[error("thread {thread} has {got} beads/entries, shape wants {want}")]
    CountMismatch { thread: usize, got: usize, want: usize },
    #[error("bead heights must be strictly increasing inside (0, 1) on thread {thread}")]
    BadHeights { thread: usize },
    #[error("two beads share the same height")]
    DuplicateHeight,
    #[error("level {k} outside 0..={max}")]
    LevelOutOfRange { k: usize, max: usize },
    #[error("empirical grid needs at least 2 threads, shape has {n_threads}")]
    GridUnsupported { n_threads: usize },
    #[error("enumeration limit {limit} exceeded")]
    EnumerationTooLarge { limit: usize },
}

/// A standard filling of a diagram: `entries[i][k]` is the rank (1-based,
/// out of N) of the k-th box from the bottom of thread i. Ranks increase
/// upward along every covering pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Tableau {
    shape: DiagramProfile,
    entries: Vec<Vec<u32>>,
}

impl Tableau {
    pub fn new(shape: DiagramProfile, entries: Vec<Vec<u32>>) -> Result<Self, TableauError> {
        let t = Tableau { shape, entries };
        validate_tableau(&t)?;
        Ok(t)
    }

    pub fn shape(&self) -> &DiagramProfile {
        &self.shape
    }

    pub fn entries(&self) -> &[Vec<u32>] {
        &self.entries
    }

    pub fn n_boxes(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }
}

/// Bead heights per thread, strictly increasing inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct BeadConfiguration {
    shape: DiagramProfile,
    threads: Vec<Vec<f64>>,
}

impl BeadConfiguration {
    pub fn new(
        shape: DiagramProfile,
        threads: Vec<Vec<f64>>,
    ) -> Result<Self, TableauError> {
        let b = BeadConfiguration { shape, threads };
        validate_beads(&b)?;
        Ok(b)
    }

    pub fn shape(&self) -> &DiagramProfile {
        &self.shape
    }

    pub fn threads(&self) -> &[Vec<f64>] {
        &self.threads
    }
}

/// Boxes on threads j = i +- 1 directly below box (i, k), as (j, k').
fn lower_covers(b2: &[i64], m: &[i64], i: usize, k: i64) -> Vec<(usize, i64)> {
    let mut out = Vec::with_capacity(2);
    for j in [i.wrapping_sub(1), i + 1] {
        if j >= b2.len() {
            continue;
        }
        // Solve b2[j] + 1 + 2k' = b2[i] + 2k for k'; adjacent b2 differ by 1.
        let kp = if b2[j] == b2[i] + 1 { k - 1 } else { k };
        if kp >= 0 && kp < m[j] {
            out.push((j, kp));
        }
    }
    out
}

/// Checks bijectivity onto 1..=N and that ranks increase along covers.
pub fn validate_tableau(t: &Tableau) -> Result<(), TableauError> {
    let b2 = t.shape.thread_b2()?;
    let m = t.shape.thread_counts()?;
    if t.entries.len() != m.len() {
        return Err(TableauError::CountMismatch {
            thread: t.entries.len().min(m.len()),
            got: t.entries.len(),
            want: m.len(),
        });
    }
    for (i, row) in t.entries.iter().enumerate() {
        if row.len() != m[i] as usize {
            return Err(TableauError::CountMismatch {
                thread: i,
                got: row.len(),
                want: m[i] as usize,
            });
        }
    }
    let n: usize = t.entries.iter().map(Vec::len).sum();
    let mut seen = vec![false; n + 1];
    for row in &t.entries {
        for &e in row {
            if e == 0 || e as usize > n || seen[e as usize] {
                return Err(TableauError::NotBijective);
            }
            seen[e as usize] = true;
        }
    }
    for (i, row) in t.entries.iter().enumerate() {
        for (k, &e) in row.iter().enumerate() {
            for (j, kp) in lower_covers(b2, m, i, k as i64) {
                if t.entries[j][kp as usize] >= e {
                    return Err(TableauError::NotIncreasing { thread: i, index: k });
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Exact counting.

pub(crate) fn factorial_big(n: u64) -> BigUint {
    let mut acc = BigUint::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

/// Hook-length count for a straight partition.
fn hook_count(outer: &[u64]) -> BigUint {
    let n: u64 = outer.iter().sum();
    let cols = outer[0] as usize;
    let mut transpose = vec![0u64; cols];
    for &row in outer {
        for c in 0..row as usize {
            transpose[c] += 1;
        }
    }
    let mut hooks = BigUint::one();
    for (r, &row) in outer.iter().enumerate() {
        for c in 0..row as usize {
            hooks *= (row - c as u64) + (transpose[c] - r as u64 - 1);
        }
    }
    let fact = factorial_big(n);
    let (q, rem) = num_integer::Integer::div_rem(&fact, &hooks);
    debug_assert!(rem.is_zero(), "hook product must divide N!");
    q
}

/// Determinantal count for a skew pair: `N! det[1/(outer_i - inner_j - i + j)!]`.
fn aitken_count(outer: &[u64], inner: &[u64]) -> BigUint {
    let r = outer.len();
    let n: u64 = outer.iter().sum::<u64>() - inner.iter().sum::<u64>();
    let inner_at = |j: usize| -> i64 {
        if j < inner.len() {
            inner[j] as i64
        } else {
            0
        }
    };
    let mut mat = vec![vec![Ratio::<BigInt>::zero(); r]; r];
    for (i, row) in mat.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let a = outer[i] as i64 - inner_at(j) - i as i64 + j as i64;
            if a >= 0 {
                *cell = Ratio::new(
                    BigInt::one(),
                    BigInt::from(factorial_big(a as u64)),
                );
            }
        }
    }
    let det = rational_det(mat);
    let f = det * Ratio::from_integer(BigInt::from(factorial_big(n)));
    debug_assert!(f.is_integer() && !f.is_negative());
    f.to_integer().to_biguint().expect("count is nonnegative")
}

fn rational_det(mut m: Vec<Vec<Ratio<BigInt>>>) -> Ratio<BigInt> {
    let n = m.len();
    let mut det = Ratio::<BigInt>::one();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero());
        let Some(p) = pivot else {
            return Ratio::zero();
        };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        let pv = m[col][col].clone();
        det *= pv.clone();
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone() / pv.clone();
            for c in col..n {
                let sub = factor.clone() * m[col][c].clone();
                m[r][c] -= sub;
            }
        }
    }
    det
}

/// Number of standard fillings, by hook lengths for straight shapes and the
/// determinantal formula for skew ones.
pub fn count_syt(shape: &DiagramProfile) -> Result<BigUint, TableauError> {
    let (outer, inner) = shape.to_partitions()?;
    if inner.is_empty() {
        Ok(hook_count(&outer))
    } else {
        Ok(aitken_count(&outer, &inner))
    }
}

/// Backtracking over all standard fillings in rank order; `visit` receives
/// each complete entry table. Reference implementation, exponential time.
fn visit_syt<F: FnMut(&[Vec<u32>])>(b2: &[i64], m: &[i64], visit: &mut F) {
    let n: i64 = m.iter().sum();
    let mut entries: Vec<Vec<u32>> = m.iter().map(|&c| vec![0; c as usize]).collect();
    let mut filled = vec![0i64; m.len()];
    fn rec<F: FnMut(&[Vec<u32>])>(
        b2: &[i64],
        m: &[i64],
        entries: &mut Vec<Vec<u32>>,
        filled: &mut Vec<i64>,
        rank: u32,
        n: i64,
        visit: &mut F,
    ) {
        if rank as i64 > n {
            visit(entries);
            return;
        }
        for i in 0..m.len() {
            let k = filled[i];
            if k >= m[i] {
                continue;
            }
            if lower_covers(b2, m, i, k)
                .iter()
                .any(|&(j, kp)| filled[j] <= kp)
            {
                continue;
            }
            entries[i][k as usize] = rank;
            filled[i] += 1;
            rec(b2, m, entries, filled, rank + 1, n, visit);
            filled[i] -= 1;
            entries[i][k as usize] = 0;
        }
    }
    rec(b2, m, &mut entries, &mut filled, 1, n, visit);
}

/// Exhaustive count of standard fillings. Independent of [`count_syt`]; meant
/// for cross-checks at small N.
pub fn count_syt_brute(shape: &DiagramProfile) -> Result<BigUint, TableauError> {
    let b2 = shape.thread_b2()?;
    let m = shape.thread_counts()?;
    let mut count: u64 = 0;
    visit_syt(b2, m, &mut |_| count += 1);
    Ok(BigUint::from(count))
}

/// All standard fillings of a small shape, erroring beyond `limit`.
pub fn enumerate_syt(
    shape: &DiagramProfile,
    limit: usize,
) -> Result<Vec<Tableau>, TableauError> {
    let b2 = shape.thread_b2()?;
    let m = shape.thread_counts()?;
    let mut out = Vec::new();
    let mut over = false;
    visit_syt(b2, m, &mut |entries| {
        if out.len() >= limit {
            over = true;
        } else {
            out.push(Tableau { shape: shape.clone(), entries: entries.to_vec() });
        }
    });
    if over {
        return Err(TableauError::EnumerationTooLarge { limit });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Uniform sampling.

/// Cells of the skew pair in row coordinates with assigned ranks.
type RankedCells = Vec<(usize, usize, u32)>;

/// Repeated uniform sampling from a fixed shape. Skew shapes price each peel
/// step with subdiagram counts; the sampler caches those across draws, so
/// build one sampler per shape when drawing in bulk.
pub struct SytSampler {
    shape: DiagramProfile,
    outer: Vec<u64>,
    inner: Vec<u64>,
    counts: HashMap<Vec<u64>, BigUint>,
}

impl SytSampler {
    pub fn new(shape: &DiagramProfile) -> Result<Self, TableauError> {
        let (outer, inner) = shape.to_partitions()?;
        Ok(SytSampler { shape: shape.clone(), outer, inner, counts: HashMap::new() })
    }

    /// One uniform standard filling.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Tableau, TableauError> {
        let cells = if self.inner.is_empty() {
            sample_straight_hook_walk(&self.outer, rng)
        } else {
            sample_skew_peel(&self.outer, &self.inner, &mut self.counts, rng)
        };
        cells_to_tableau(&self.shape, cells)
    }
}

/// Uniform standard filling. Straight shapes use the hook walk; skew shapes
/// peel outer corners with exact big-integer probabilities. One-shot
/// convenience over [`SytSampler`].
pub fn sample_syt<R: Rng + ?Sized>(
    shape: &DiagramProfile,
    rng: &mut R,
) -> Result<Tableau, TableauError> {
    SytSampler::new(shape)?.sample(rng)
}

/// Greene-Nijenhuis-Wilf hook walk on a straight partition; rows shrink as
/// ranks N..1 are placed at the walk's terminal corners.
fn sample_straight_hook_walk<R: Rng + ?Sized>(outer: &[u64], rng: &mut R) -> RankedCells {
    let mut rows: Vec<usize> = outer.iter().map(|&x| x as usize).collect();
    let n: usize = rows.iter().sum();
    let mut out = Vec::with_capacity(n);
    for rank in (1..=n as u32).rev() {
        // Uniform start cell among the remaining ones.
        let mut idx = rng.gen_range(0..rank as usize);
        let mut r = 0;
        while idx >= rows[r] {
            idx -= rows[r];
            r += 1;
        }
        let mut c = idx;
        loop {
            let arm = rows[r] - 1 - c;
            let leg = rows[r + 1..].iter().take_while(|&&len| len > c).count();
            if arm + leg == 0 {
                break;
            }
            let pick = rng.gen_range(0..arm + leg);
            if pick < arm {
                c += pick + 1;
            } else {
                r += pick - arm + 1;
            }
        }
        rows[r] -= 1;
        out.push((r, c, rank));
        while rows.last() == Some(&0) {
            rows.pop();
        }
    }
    out
}

/// Removable outer corners of `o` relative to fixed `inner`.
fn corners(o: &[u64], inner: &[u64]) -> Vec<usize> {
    let inner_at = |r: usize| -> u64 {
        if r < inner.len() {
            inner[r]
        } else {
            0
        }
    };
    (0..o.len())
        .filter(|&r| o[r] > inner_at(r) && (r + 1 == o.len() || o[r + 1] < o[r]))
        .collect()
}

/// Skew count with memoization on the shrinking outer partition.
fn memo_count(
    o: &[u64],
    inner: &[u64],
    memo: &mut HashMap<Vec<u64>, BigUint>,
) -> BigUint {
    if let Some(v) = memo.get(o) {
        return v.clone();
    }
    let trimmed: Vec<u64> = {
        let mut t = o.to_vec();
        while t.last() == Some(&0) {
            t.pop();
        }
        t
    };
    let v = if trimmed.iter().sum::<u64>() == inner.iter().sum::<u64>() {
        BigUint::one()
    } else {
        aitken_count(&trimmed, inner)
    };
    memo.insert(o.to_vec(), v.clone());
    v
}

/// Top-down corner peeling: rank N sits at an outer corner with probability
/// proportional to the count of the diagram with that corner removed.
fn sample_skew_peel<R: Rng + ?Sized>(
    outer: &[u64],
    inner: &[u64],
    memo: &mut HashMap<Vec<u64>, BigUint>,
    rng: &mut R,
) -> RankedCells {
    let n: u64 = outer.iter().sum::<u64>() - inner.iter().sum::<u64>();
    let mut o = outer.to_vec();
    let mut out = Vec::with_capacity(n as usize);
    for rank in (1..=n as u32).rev() {
        let cs = corners(&o, inner);
        let weights: Vec<BigUint> = cs
            .iter()
            .map(|&r| {
                let mut o2 = o.clone();
                o2[r] -= 1;
                memo_count(&o2, inner, memo)
            })
            .collect();
        let total: BigUint = weights.iter().sum();
        debug_assert_eq!(total, memo_count(&o, inner, memo));
        let mut draw = rng.gen_biguint_below(&total);
        let mut chosen = cs[cs.len() - 1];
        for (r, w) in cs.iter().zip(&weights) {
            if draw < *w {
                chosen = *r;
                break;
            }
            draw -= w;
        }
        o[chosen] -= 1;
        out.push((chosen, o[chosen] as usize, rank));
    }
    out
}

/// Converts ranked row-coordinate cells to thread-indexed entries.
fn cells_to_tableau(shape: &DiagramProfile, cells: RankedCells) -> Result<Tableau, TableauError> {
    let n_threads = shape.n_threads();
    let m = shape.thread_counts()?;
    let c_min = cells
        .iter()
        .map(|&(r, c, _)| c as i64 - r as i64)
        .min()
        .expect("nonempty shape");
    let mut per_thread: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n_threads];
    for &(r, c, rank) in &cells {
        let thread = (c as i64 - r as i64 - c_min) as usize;
        per_thread[thread].push((r, rank));
    }
    let mut entries = Vec::with_capacity(n_threads);
    for (i, mut cellranks) in per_thread.into_iter().enumerate() {
        if cellranks.len() != m[i] as usize {
            return Err(TableauError::CountMismatch {
                thread: i,
                got: cellranks.len(),
                want: m[i] as usize,
            });
        }
        cellranks.sort_unstable();
        entries.push(cellranks.into_iter().map(|(_, rank)| rank).collect());
    }
    let t = Tableau { shape: shape.clone(), entries };
    debug_assert!(validate_tableau(&t).is_ok());
    Ok(t)
}

// ---------------------------------------------------------------------------
// The rank bijection.

/// Assigns heights to a tableau: N iid uniforms, sorted, matched to ranks.
/// Within each thread heights automatically increase with the box index.
pub fn tableau_to_beads<R: Rng + ?Sized>(t: &Tableau, rng: &mut R) -> BeadConfiguration {
    let n = t.n_boxes();
    let mut ys: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let threads = t
        .entries
        .iter()
        .map(|row| row.iter().map(|&e| ys[e as usize - 1]).collect())
        .collect();
    BeadConfiguration { shape: t.shape.clone(), threads }
}

/// Recovers the tableau from bead heights by global rank. Errors on repeated
/// heights and on configurations whose ranks do not interlace.
pub fn beads_to_tableau(b: &BeadConfiguration) -> Result<Tableau, TableauError> {
    let mut all: Vec<(f64, usize, usize)> = Vec::new();
    for (i, ys) in b.threads.iter().enumerate() {
        for (k, &y) in ys.iter().enumerate() {
            if !y.is_finite() {
                return Err(TableauError::BadHeights { thread: i });
            }
            all.push((y, i, k));
        }
    }
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in all.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(TableauError::DuplicateHeight);
        }
    }
    let mut entries: Vec<Vec<u32>> = b.threads.iter().map(|v| vec![0; v.len()]).collect();
    for (rank0, &(_, i, k)) in all.iter().enumerate() {
        entries[i][k] = rank0 as u32 + 1;
    }
    Tableau::new(b.shape.clone(), entries)
}

/// Structural validity of a bead configuration: per-thread counts, strict
/// vertical order inside (0, 1), and interlacing of ranks.
pub fn validate_beads(b: &BeadConfiguration) -> Result<(), TableauError> {
    let m = b.shape.thread_counts()?;
    if b.threads.len() != m.len() {
        return Err(TableauError::CountMismatch {
            thread: 0,
            got: b.threads.len(),
            want: m.len(),
        });
    }
    for (i, ys) in b.threads.iter().enumerate() {
        if ys.len() != m[i] as usize {
            return Err(TableauError::CountMismatch {
                thread: i,
                got: ys.len(),
                want: m[i] as usize,
            });
        }
        for w in ys.windows(2) {
            if !(w[1] > w[0]) {
                return Err(TableauError::BadHeights { thread: i });
            }
        }
        if ys.iter().any(|&y| !(0.0..1.0).contains(&y)) {
            return Err(TableauError::BadHeights { thread: i });
        }
    }
    beads_to_tableau(b).map(|_| ())
}

// ---------------------------------------------------------------------------
// Empirical fields.

/// Height field of one configuration on the (n-1) x (n-1) node grid spanned
/// by the threads: bead counts below each node on the thread's staircase
/// anchor. Admissible by construction for valid configurations.
pub fn empirical_height(b: &BeadConfiguration) -> Result<GridHeightField, TableauError> {
    let n = b.shape.n_threads();
    if n < 2 {
        return Err(TableauError::GridUnsupported { n_threads: n });
    }
    let b2 = b.shape.thread_b2()?;
    let scale = (n - 1) as f64;
    let mut h = GridHeightField::zeros(n - 1, n - 1);
    for i in 0..n {
        let anchor = (b2[i] - b2[0] - 1) as f64 / (2.0 * scale);
        for j in 0..n {
            let y = j as f64 / scale;
            let count = b.threads[i].iter().take_while(|&&v| v <= y).count();
            h.set(i, j, anchor + count as f64 / scale);
        }
    }
    Ok(h)
}

/// Cell-centered bead density averaged over samples, in the same chart as
/// [`empirical_height`]: expected value approaches the vertical slope of the
/// limiting height. Beads on interior cell boundaries split evenly.
pub fn empirical_density(
    shape: &DiagramProfile,
    samples: &[BeadConfiguration],
    gx: usize,
    gy: usize,
) -> Result<CellGrid, TableauError> {
    let n = shape.n_threads();
    if n < 2 {
        return Err(TableauError::GridUnsupported { n_threads: n });
    }
    let scale = (n - 1) as f64;
    let mut acc = vec![0.0f64; gx * gy];
    for b in samples {
        if b.shape.n_threads() != n {
            return Err(TableauError::CountMismatch {
                thread: 0,
                got: b.shape.n_threads(),
                want: n,
            });
        }
        for (i, ys) in b.threads.iter().enumerate() {
            let pos = i as f64 / scale * gx as f64;
            let nearest = pos.round();
            let cols: Vec<(usize, f64)> = if (pos - nearest).abs() < 1e-9 {
                let c = nearest as usize;
                if c == 0 {
                    vec![(0, 1.0)]
                } else if c >= gx {
                    vec![(gx - 1, 1.0)]
                } else {
                    vec![(c - 1, 0.5), (c, 0.5)]
                }
            } else {
                vec![(pos.floor() as usize, 1.0)]
            };
            for &y in ys {
                let row = ((y * gy as f64).floor() as usize).min(gy - 1);
                for &(c, w) in &cols {
                    acc[row * gx + c] += w;
                }
            }
        }
    }
    let norm = gx as f64 * gy as f64 / (samples.len() as f64 * scale * scale);
    Ok(CellGrid {
        nx: gx,
        ny: gy,
        values: acc.into_iter().map(|v| v * norm).collect(),
    })
}

/// The sub-diagram carved out by the lowest `k` ranks, with its upper
/// boundary as a polyline at the parent's knots.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiagram {
    /// Boxes of the sub-diagram per thread.
    pub counts: Vec<usize>,
    /// (x, f) pairs at the parent knots, corners included.
    pub polyline: Vec<(f64, f64)>,
}

pub fn level_diagram(t: &Tableau, k: usize) -> Result<LevelDiagram, TableauError> {
    let n_boxes = t.n_boxes();
    if k > n_boxes {
        return Err(TableauError::LevelOutOfRange { k, max: n_boxes });
    }
    let n = t.shape.n_threads();
    let counts: Vec<usize> = t
        .entries
        .iter()
        .map(|row| row.iter().take_while(|&&e| (e as usize) <= k).count())
        .collect();
    let knots = t.shape.x_knots();
    let f_low = t.shape.f_low();
    let denom = (n + 1) as f64;
    let mut polyline = Vec::with_capacity(n + 2);
    polyline.push((knots[0], f_low[0]));
    for (c, &cnt) in counts.iter().enumerate() {
        polyline.push((knots[c + 1], f_low[c + 1] + 2.0 * cnt as f64 / denom));
    }
    polyline.push((knots[n + 1], f_low[n + 1]));
    Ok(LevelDiagram { counts, polyline })
}
