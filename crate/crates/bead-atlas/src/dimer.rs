//! Weighted dimer partition functions for the periodic bead graph and exact
//! tiling counts for tall regions above a fixed diagram.
//!
//! The periodic side works on the torus quotient of the bead graph: a
//! fundamental domain of two black and two white sites, six edge families
//! with weights `(a, b, c)`, tiled `p` times in one direction and `q` times
//! in the other.  The weighted matching sum is assembled from four
//! determinant sectors of the Fourier symbol; the sector signs are frozen in
//! [`SECTOR_SIGNS`] and re-derived against exhaustive matching enumeration in
//! the test suite.
//!
//! The tall-region side counts bead configurations where every thread keeps
//! its bead count while its window of admissible slots grows, so the counts
//! approach the volume of the order polytope after rescaling.  Three routes
//! are kept deliberately separate: a transfer sweep across threads
//! (production), direct enumeration with a merged-height ballot check
//! (small regions), and the closed product formula for boxed stackings
//! (rectangular diagrams).

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::entropy::{ln_biguint, ln_factorial};
use crate::shapes::{DiagramProfile, ShapeError};
use crate::tableaux::TableauError;

/// Failures from torus evaluation or tall-region counting.
#[derive(Debug, Error)]
pub enum DimerError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error("torus dimensions must be positive, got {0}x{1}")]
    BadTorus(usize, usize),
    #[error("signed sector combination is not positive (shifted sum {0:.3e})")]
    NonPositive(f64),
    #[error("transfer sweep too large ({0} state pairs)")]
    TransferTooLarge(u128),
    #[error("enumeration budget exceeded (more than {0} configurations)")]
    EnumerationTooLarge(u128),
}

// ---------------------------------------------------------------------------
// Torus: Fourier symbol and sector combination.
// ---------------------------------------------------------------------------

/// Determinant of the 2x2 Fourier block of the weighted adjacency operator
/// at `(z, w)`: `a^2 z - (b + c w)^2 / w`.
pub fn kasteleyn_symbol(z: Complex64, w: Complex64, a: f64, b: f64, c: f64) -> Complex64 {
    let bw = Complex64::new(b, 0.0) + w * c;
    z * (a * a) - bw * bw / w
}

/// The two roots in `w` of the symbol at fixed `z`, from
/// `c^2 w^2 + (2bc - a^2 z) w + b^2 = 0`.
pub fn symbol_w_roots(z: Complex64, a: f64, b: f64, c: f64) -> [Complex64; 2] {
    let lin = Complex64::new(2.0 * b * c, 0.0) - z * (a * a);
    let disc = lin * lin - Complex64::new(4.0 * b * b * c * c, 0.0);
    let sq = disc.sqrt();
    let den = 2.0 * c * c;
    [(-lin + sq) / den, (-lin - sq) / den]
}

/// Real members of the root set `x^count = (-1)^parity`.
fn real_members(parity: u8, count: usize) -> Vec<f64> {
    let mut v = Vec::new();
    if parity == 0 {
        v.push(1.0);
        if count % 2 == 0 {
            v.push(-1.0);
        }
    } else if count % 2 == 1 {
        v.push(-1.0);
    }
    v
}

/// Sign and log magnitude of one periodicity sector: the product of the
/// symbol over all `(z, w)` with `z^p = (-1)^theta`, `w^q = (-1)^tau`.
///
/// The root sets are closed under conjugation, so non-real points pair into
/// positive factors and the overall sign is read off the real points alone.
/// A sign of `0` means some factor vanished and the sector is exactly zero.
fn sector(p: usize, q: usize, a: f64, b: f64, c: f64, theta: u8, tau: u8) -> (i8, f64) {
    let pi = std::f64::consts::PI;
    let zs: Vec<Complex64> = (0..p)
        .map(|j| Complex64::from_polar(1.0, pi * (theta as f64 + 2.0 * j as f64) / p as f64))
        .collect();
    let ws: Vec<Complex64> = (0..q)
        .map(|k| Complex64::from_polar(1.0, pi * (tau as f64 + 2.0 * k as f64) / q as f64))
        .collect();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for z in &zs {
        for w in &ws {
            let mag = kasteleyn_symbol(*z, *w, a, b, c).norm();
            if mag < 1e-280 {
                return (0, f64::NEG_INFINITY);
            }
            let term = mag.ln() - comp;
            let next = sum + term;
            comp = (next - sum) - term;
            sum = next;
        }
    }
    let mut sign = 1i8;
    for &zr in &real_members(theta, p) {
        for &wr in &real_members(tau, q) {
            let d = kasteleyn_symbol(Complex64::new(zr, 0.0), Complex64::new(wr, 0.0), a, b, c);
            if d.re < 0.0 {
                sign = -sign;
            }
        }
    }
    (sign, sum)
}

/// Sector signs by `[p mod 2][q mod 2]`, in sector order
/// `(theta, tau) = (0,0), (0,1), (1,0), (1,1)`.  The weighted matching sum
/// is half the signed sector sum.  Calibrated against exhaustive matching
/// enumeration over every parity class; the calibration is re-run in the
/// test suite and must keep matching this table.
const SECTOR_SIGNS: [[[i8; 4]; 2]; 2] = [
    [[-1, 1, 1, 1], [1, -1, 1, 1]],
    [[-1, 1, 1, 1], [-1, 1, -1, -1]],
];

fn combine_sectors(secs: &[(i8, f64); 4], eps: &[i8; 4]) -> Result<f64, DimerError> {
    let shift = secs
        .iter()
        .filter(|s| s.0 != 0)
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(DimerError::NonPositive(0.0));
    }
    let mut s = 0.0f64;
    for i in 0..4 {
        if secs[i].0 != 0 {
            s += f64::from(eps[i] * secs[i].0) * (secs[i].1 - shift).exp();
        }
    }
    if s <= 0.0 {
        return Err(DimerError::NonPositive(s));
    }
    Ok(shift + (0.5 * s).ln())
}

/// Natural log of the weighted matching sum on the torus with `p` cells in
/// the first periodic direction and `q` in the second.
pub fn torus_log_partition(p: usize, q: usize, a: f64, b: f64, c: f64) -> Result<f64, DimerError> {
    if p == 0 || q == 0 {
        return Err(DimerError::BadTorus(p, q));
    }
    let eps = SECTOR_SIGNS[p % 2][q % 2];
    let secs = [
        sector(p, q, a, b, c, 0, 0),
        sector(p, q, a, b, c, 0, 1),
        sector(p, q, a, b, c, 1, 0),
        sector(p, q, a, b, c, 1, 1),
    ];
    combine_sectors(&secs, &eps)
}

/// Weighted perfect-matching sum of the lifted torus graph by exhaustive
/// recursion.  Intended for small tori; the graph has `6 * nz * nw` edges.
pub fn torus_matching_sum(nz: usize, nw: usize, a: f64, b: f64, c: f64) -> Result<f64, DimerError> {
    if nz == 0 || nw == 0 {
        return Err(DimerError::BadTorus(nz, nw));
    }
    let cells = nz * nw;
    let cell = |x: usize, y: usize| (x % nz) * nw + (y % nw);
    // Black site t in {0, 1} of cell (x, y) has index t*cells + cell(x, y);
    // white sites are numbered the same way in their own space.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 2 * cells];
    for x in 0..nz {
        for y in 0..nw {
            let b0 = cell(x, y);
            let b1 = cells + cell(x, y);
            adj[b0].push((cell(x + 1, y), a));
            adj[b0].push((cells + cell(x, y), b));
            adj[b0].push((cells + cell(x, y + 1), c));
            adj[b1].push((cell(x, y), c));
            adj[b1].push((cell(x, y + nw - 1), b));
            adj[b1].push((cells + cell(x, y), a));
        }
    }
    fn go(k: usize, adj: &[Vec<(usize, f64)>], used: &mut [bool]) -> f64 {
        if k == adj.len() {
            return 1.0;
        }
        let mut s = 0.0;
        for &(white, weight) in &adj[k] {
            if !used[white] {
                used[white] = true;
                s += weight * go(k + 1, adj, used);
                used[white] = false;
            }
        }
        s
    }
    let mut used = vec![false; 2 * cells];
    Ok(go(0, &adj, &mut used))
}

/// `ln Z / n^2` for the `n x mn` torus at bead weights tuned to horizontal
/// scale `m`: `a = alpha/m`, `b = exp(alpha gamma / m)`, `c = 1`.
pub fn scaled_torus_free_energy(
    alpha: f64,
    gamma: f64,
    m: usize,
    n: usize,
) -> Result<f64, DimerError> {
    let a = alpha / m as f64;
    let b = (alpha * gamma / m as f64).exp();
    let lnz = torus_log_partition(n, m * n, a, b, 1.0)?;
    Ok(lnz / (n as f64 * n as f64))
}

/// Result of comparing the two iterated limits of the scaled torus free
/// energy.
#[derive(Debug, Clone, Copy)]
pub struct ExchangeReport {
    /// Accelerated limit taking n large first, then m.
    pub n_first: f64,
    /// Accelerated limit taking m large first, then n.
    pub m_first: f64,
    /// Absolute difference between the two.
    pub gap: f64,
}

/// Aitken acceleration of a three-term sequence.
fn aitken(v0: f64, v1: f64, v2: f64) -> f64 {
    let d1 = v1 - v0;
    let d2 = v2 - v1;
    let den = d2 - d1;
    if den.abs() < 1e-13 * (d1.abs() + d2.abs()).max(1e-300) {
        v2
    } else {
        v2 - d2 * d2 / den
    }
}

/// Evaluates the scaled free energy on a 3x3 grid of sizes and accelerates
/// the two iterated limits, reporting their difference.
pub fn limit_exchange_check(
    alpha: f64,
    gamma: f64,
    ms: &[usize; 3],
    ns: &[usize; 3],
) -> Result<ExchangeReport, DimerError> {
    let mut grid = [[0.0f64; 3]; 3];
    for (im, &m) in ms.iter().enumerate() {
        for (inx, &n) in ns.iter().enumerate() {
            grid[im][inx] = scaled_torus_free_energy(alpha, gamma, m, n)?;
        }
    }
    let per_m: Vec<f64> = (0..3)
        .map(|im| aitken(grid[im][0], grid[im][1], grid[im][2]))
        .collect();
    let n_first = aitken(per_m[0], per_m[1], per_m[2]);
    let per_n: Vec<f64> = (0..3)
        .map(|inx| aitken(grid[0][inx], grid[1][inx], grid[2][inx]))
        .collect();
    let m_first = aitken(per_n[0], per_n[1], per_n[2]);
    Ok(ExchangeReport {
        n_first,
        m_first,
        gap: (n_first - m_first).abs(),
    })
}

// ---------------------------------------------------------------------------
// Tall regions above a diagram.
// ---------------------------------------------------------------------------

/// Discrete tall region above a diagram: each thread keeps its bead count
/// while its window of admissible slots is extended by `extra` rows.
///
/// Slot centers on thread `i` sit at doubled heights
/// `first_center2[i] + 2j`, `j = 0..widths[i]`; adjacent threads are offset
/// by one half step, so merged heights never tie.
#[derive(Debug, Clone)]
pub struct TallRegion {
    first_center2: Vec<i64>,
    widths: Vec<usize>,
    beads: Vec<usize>,
    height2: i64,
}

impl TallRegion {
    pub fn new(shape: &DiagramProfile, extra: u64) -> Result<Self, DimerError> {
        let b2 = shape.thread_b2()?;
        let m = shape.thread_counts()?;
        let d = extra as i64;
        let first_center2: Vec<i64> = b2.iter().map(|&b| b + 1 - 2 * d).collect();
        let widths: Vec<usize> = m.iter().map(|&mi| (mi + d) as usize).collect();
        let beads: Vec<usize> = m.iter().map(|&mi| mi as usize).collect();
        let span2 = b2
            .iter()
            .zip(m)
            .map(|(&b, &mi)| b + 2 * mi)
            .max()
            .unwrap()
            - b2.iter().min().unwrap();
        Ok(TallRegion {
            first_center2,
            widths,
            beads,
            height2: span2 + 2 * d,
        })
    }

    pub fn n_threads(&self) -> usize {
        self.widths.len()
    }

    /// Doubled total height of the region's bounding box.
    pub fn height2(&self) -> i64 {
        self.height2
    }

    /// Doubled height of slot `j` on thread `i`.
    pub fn slot_center2(&self, i: usize, j: usize) -> i64 {
        self.first_center2[i] + 2 * j as i64
    }
}

/// All sorted index tuples choosing `m` of `w` slots.
fn combinations(w: usize, m: usize) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    let mut cur: Vec<u16> = (0..m as u16).collect();
    if m > w {
        return out;
    }
    loop {
        out.push(cur.clone());
        // next combination in lexicographic order
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < (w - (m - i)) as u16 {
                cur[i] += 1;
                for k in i + 1..m {
                    cur[k] = cur[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn binomial_u128(w: usize, m: usize) -> u128 {
    if m > w {
        return 0;
    }
    let m = m.min(w - m);
    let mut r: u128 = 1;
    for i in 0..m {
        r = r.saturating_mul((w - i) as u128) / (i as u128 + 1);
    }
    r
}

/// Interlacing test in index space for adjacent threads whose slot lattices
/// are offset by one half step, `lower` being the thread whose window starts
/// lower.  Requires `lower[k] <= upper[k]` and `upper[k] < lower[k+1]`.
fn interlaced(lower: &[u16], upper: &[u16]) -> bool {
    debug_assert!(lower.len() == upper.len() || lower.len() == upper.len() + 1);
    for k in 0..upper.len() {
        if lower[k] > upper[k] {
            return false;
        }
        if k + 1 < lower.len() && upper[k] >= lower[k + 1] {
            return false;
        }
    }
    true
}

/// Exact number of bead configurations of the tall region, by a transfer
/// sweep across threads.  The bounding-box height is `height2() / 2`; at
/// `extra = 0` every thread is frozen and the count is one.
pub fn count_tilings_tall_region(shape: &DiagramProfile, extra: u64) -> Result<BigUint, DimerError> {
    let reg = TallRegion::new(shape, extra)?;
    let nt = reg.n_threads();
    for i in 0..nt.saturating_sub(1) {
        let pairs = binomial_u128(reg.widths[i], reg.beads[i])
            .saturating_mul(binomial_u128(reg.widths[i + 1], reg.beads[i + 1]));
        if pairs > 600_000_000 {
            return Err(DimerError::TransferTooLarge(pairs));
        }
    }
    let mut states = combinations(reg.widths[0], reg.beads[0]);
    let mut counts: Vec<BigUint> = vec![BigUint::one(); states.len()];
    for i in 0..nt - 1 {
        let next_states = combinations(reg.widths[i + 1], reg.beads[i + 1]);
        let lower_is_cur = reg.first_center2[i] < reg.first_center2[i + 1];
        let mut next_counts = vec![BigUint::zero(); next_states.len()];
        for (si, s) in states.iter().enumerate() {
            if counts[si].is_zero() {
                continue;
            }
            for (ti, t) in next_states.iter().enumerate() {
                let ok = if lower_is_cur {
                    interlaced(s, t)
                } else {
                    interlaced(t, s)
                };
                if ok {
                    next_counts[ti] += &counts[si];
                }
            }
        }
        states = next_states;
        counts = next_counts;
    }
    Ok(counts.iter().sum())
}

/// Ballot form of the interlacing test on merged doubled heights: walking
/// upward, the number of beads seen on the lower thread minus the number
/// seen on the upper one must stay in {0, 1}.
fn ballot_ok(lower_z2: &[i64], upper_z2: &[i64]) -> bool {
    let mut i = 0;
    let mut j = 0;
    let mut diff = 0i64;
    while i < lower_z2.len() || j < upper_z2.len() {
        let take_lower = match (lower_z2.get(i), upper_z2.get(j)) {
            (Some(&l), Some(&u)) => l < u,
            (Some(_), None) => true,
            _ => false,
        };
        if take_lower {
            diff += 1;
            i += 1;
        } else {
            diff -= 1;
            j += 1;
        }
        if !(0..=1).contains(&diff) {
            return false;
        }
    }
    true
}

/// Exact count by direct enumeration over per-thread bead placements with
/// the ballot check between adjacent threads.  Independent of the transfer
/// sweep; use only for small regions.  `budget` caps the number of raw
/// placement combinations considered.
pub fn count_tall_by_enumeration(
    shape: &DiagramProfile,
    extra: u64,
    budget: u128,
) -> Result<BigUint, DimerError> {
    let reg = TallRegion::new(shape, extra)?;
    let nt = reg.n_threads();
    let mut raw: u128 = 1;
    for i in 0..nt {
        raw = raw.saturating_mul(binomial_u128(reg.widths[i], reg.beads[i]));
    }
    if raw > budget {
        return Err(DimerError::EnumerationTooLarge(budget));
    }
    let per_thread: Vec<Vec<Vec<i64>>> = (0..nt)
        .map(|i| {
            combinations(reg.widths[i], reg.beads[i])
                .into_iter()
                .map(|js| {
                    js.iter()
                        .map(|&j| reg.slot_center2(i, j as usize))
                        .collect()
                })
                .collect()
        })
        .collect();
    fn go(
        i: usize,
        prev: Option<&Vec<i64>>,
        prev_first2: i64,
        reg: &TallRegion,
        per_thread: &[Vec<Vec<i64>>],
        total: &mut BigUint,
    ) {
        if i == per_thread.len() {
            *total += 1u32;
            return;
        }
        for cand in &per_thread[i] {
            let ok = match prev {
                None => true,
                Some(p) => {
                    if prev_first2 < reg.first_center2[i] {
                        ballot_ok(p, cand)
                    } else {
                        ballot_ok(cand, p)
                    }
                }
            };
            if ok {
                go(
                    i + 1,
                    Some(cand),
                    reg.first_center2[i],
                    reg,
                    per_thread,
                    total,
                );
            }
        }
    }
    let mut total = BigUint::zero();
    go(0, None, 0, &reg, &per_thread, &mut total);
    Ok(total)
}

/// Number of stackings of unit cubes inside an `a x b x h` box: the triple
/// product `prod (i+j+k-1)/(i+j+k-2)`.  For a rectangular diagram of `a`
/// rows and `b` columns this equals the tall-region count at `extra = h`.
pub fn boxed_plane_partitions(a: u64, b: u64, h: u64) -> BigUint {
    let mut r = Ratio::<BigInt>::one();
    for i in 1..=a {
        for j in 1..=b {
            for k in 1..=h {
                r *= Ratio::new(BigInt::from(i + j + k - 1), BigInt::from(i + j + k - 2));
            }
        }
    }
    assert!(r.is_integer(), "triple product must be an integer");
    r.to_integer().to_biguint().expect("count is nonnegative")
}

/// Deviations of `ln Z - N ln(height)` from the log volume `ln(f / N!)` of
/// the order polytope, along a growing sequence of regions.
#[derive(Debug, Clone)]
pub struct VolumeReport {
    pub extras: Vec<u64>,
    /// Bounding-box heights, `height2 / 2`.
    pub heights: Vec<f64>,
    /// `|ln Z - N ln height - ln(f/N!)|` per entry.
    pub deviations: Vec<f64>,
    /// The target log volume `ln f - ln N!`.
    pub log_volume: f64,
}

/// Computes tall-region counts along `extras` and reports how fast the
/// rescaled logs approach the order-polytope volume.
pub fn volume_limit_check(
    shape: &DiagramProfile,
    extras: &[u64],
) -> Result<VolumeReport, DimerError> {
    let f = crate::tableaux::count_syt(shape)?;
    let n = shape.n_boxes();
    let log_volume = ln_biguint(&f) - ln_factorial(n);
    let mut heights = Vec::with_capacity(extras.len());
    let mut deviations = Vec::with_capacity(extras.len());
    for &e in extras {
        let z = count_tilings_tall_region(shape, e)?;
        let reg = TallRegion::new(shape, e)?;
        let l = reg.height2() as f64 / 2.0;
        let dev = (ln_biguint(&z) - n as f64 * l.ln() - log_volume).abs();
        heights.push(l);
        deviations.push(dev);
    }
    Ok(VolumeReport {
        extras: extras.to_vec(),
        heights,
        deviations,
        log_volume,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::profile_from_partitions;

    const WEIGHT_SETS: [[f64; 3]; 5] = [
        [1.0, 1.0, 1.0],
        [0.7, 1.3, 0.9],
        [2.0, 0.4, 1.1],
        [1.5, 1.5, 0.2],
        [0.3, 2.2, 1.7],
    ];

    fn shape(outer: &[u64], inner: &[u64]) -> DiagramProfile {
        profile_from_partitions(outer, inner, 1).expect("valid test shape")
    }

    #[test]
    fn symbol_factors_through_its_w_roots() {
        let cases = [
            (1.0, 1.0, 1.0, 0.3, 1.1, -0.4, 0.2),
            (0.6, 1.7, 0.9, -0.8, 0.25, 0.95, -1.4),
            (2.3, 0.5, 1.2, 1.9, -0.6, 0.33, 0.77),
        ];
        for (a, b, c, zr, zi, wr, wi) in cases {
            let z = Complex64::new(zr, zi);
            let w = Complex64::new(wr, wi);
            let [w1, w2] = symbol_w_roots(z, a, b, c);
            let direct = kasteleyn_symbol(z, w, a, b, c);
            let factored = -(c * c) / w * (w - w1) * (w - w2);
            assert!(
                (direct - factored).norm() <= 1e-12 * direct.norm().max(1.0),
                "factorization mismatch: {direct} vs {factored}"
            );
        }
    }

    #[test]
    fn w_roots_approach_minus_one_at_bead_weights() {
        // At a = alpha/m, b = exp(alpha gamma/m), c = 1 the roots behave as
        // w = -1 + (alpha/m)(-gamma +/- sqrt(-z)) up to O(1/m^2).
        let alpha = 1.3;
        let gamma = 0.25;
        let m = 1.0e6;
        let a = alpha / m;
        let b = f64::exp(alpha * gamma / m);
        for phi in [0.4, 1.3, 2.5, -2.0] {
            let z = Complex64::from_polar(1.0, phi);
            let roots = symbol_w_roots(z, a, b, 1.0);
            let sq = (-z).sqrt();
            for sgn in [1.0, -1.0] {
                let pred = Complex64::new(-1.0, 0.0) + (sq * sgn - gamma) * (alpha / m);
                let best = roots
                    .iter()
                    .map(|r| (r - pred).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    best * m / alpha <= 1e-4,
                    "root expansion off by {:.3e} at phi={phi}",
                    best * m / alpha
                );
            }
        }
    }

    #[test]
    fn single_cell_torus_matches_hand_count() {
        for [a, b, c] in WEIGHT_SETS {
            let brute = torus_matching_sum(1, 1, a, b, c).unwrap();
            let expect = a * a + (b + c) * (b + c);
            assert!((brute - expect).abs() <= 1e-12 * expect);
            let lnz = torus_log_partition(1, 1, a, b, c).unwrap();
            assert!((lnz - expect.ln()).abs() <= 1e-12);
        }
    }

    /// Re-derives the sector sign table from exhaustive matching sums and
    /// checks it against the frozen constant.
    #[test]
    fn sector_signs_match_enumeration_calibration() {
        let sizes: [(usize, usize); 11] = [
            (1, 1),
            (1, 3),
            (3, 1),
            (3, 3),
            (2, 1),
            (4, 1),
            (2, 3),
            (1, 2),
            (1, 4),
            (3, 2),
            (2, 2),
        ];
        let mut derived = [[[0i8; 4]; 2]; 2];
        let mut seen = [[false; 2]; 2];
        let mut candidates: [[Vec<[i8; 4]>; 2]; 2] = Default::default();
        for pp in 0..2 {
            for qq in 0..2 {
                for mask in 0..16u32 {
                    let eps: [i8; 4] =
                        std::array::from_fn(|i| if mask >> i & 1 == 1 { 1 } else { -1 });
                    candidates[pp][qq].push(eps);
                }
            }
        }
        for (p, q) in sizes {
            for [a, b, c] in WEIGHT_SETS {
                let brute = torus_matching_sum(p, q, a, b, c).unwrap();
                let secs = [
                    sector(p, q, a, b, c, 0, 0),
                    sector(p, q, a, b, c, 0, 1),
                    sector(p, q, a, b, c, 1, 0),
                    sector(p, q, a, b, c, 1, 1),
                ];
                candidates[p % 2][q % 2].retain(|eps| match combine_sectors(&secs, eps) {
                    Ok(lnz) => (lnz.exp() - brute).abs() <= 1e-8 * brute.max(1.0),
                    Err(_) => false,
                });
            }
            seen[p % 2][q % 2] = true;
        }
        for pp in 0..2 {
            for qq in 0..2 {
                assert!(seen[pp][qq], "parity class ({pp},{qq}) not exercised");
                assert_eq!(
                    candidates[pp][qq].len(),
                    1,
                    "sign pattern for class ({pp},{qq}) not unique: {:?}",
                    candidates[pp][qq]
                );
                derived[pp][qq] = candidates[pp][qq][0];
            }
        }
        assert_eq!(derived, SECTOR_SIGNS, "frozen table out of date");
    }

    #[test]
    fn torus_partition_matches_enumeration_on_small_tori() {
        // Every torus with at most 24 edges, five weight vectors each.
        let sizes = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1), (1, 4), (4, 1)];
        for (p, q) in sizes {
            assert!(6 * p * q <= 24);
            for [a, b, c] in WEIGHT_SETS {
                let brute = torus_matching_sum(p, q, a, b, c).unwrap();
                let lnz = torus_log_partition(p, q, a, b, c).unwrap();
                let rel = (lnz.exp() - brute).abs() / brute;
                assert!(
                    rel <= 1e-10,
                    "torus {p}x{q} weights ({a},{b},{c}): rel err {rel:.2e}"
                );
            }
        }
    }

    #[test]
    fn scaled_free_energy_approaches_closed_form() {
        let alpha = 1.0;
        let gamma = 0.3;
        let w = crate::entropy::WeightParams::new(alpha, gamma).unwrap();
        let target = crate::entropy::free_energy(&w);
        let v16 = scaled_torus_free_energy(alpha, gamma, 16, 16).unwrap();
        let v32 = scaled_torus_free_energy(alpha, gamma, 32, 32).unwrap();
        assert!((v16 - target).abs() <= 0.02, "v16={v16} target={target}");
        assert!((v32 - target).abs() <= 0.02, "v32={v32} target={target}");
    }

    #[test]
    fn iterated_limits_agree_on_small_grid() {
        let rep = limit_exchange_check(1.0, 0.3, &[6, 12, 24], &[8, 16, 32]).unwrap();
        assert!(rep.gap <= 0.05, "exchange gap {:.3e}", rep.gap);
    }

    // -- tall regions --

    #[test]
    fn frozen_region_has_one_tiling() {
        let cases: [(&[u64], &[u64]); 6] = [
            (&[1], &[]),
            (&[2, 2], &[]),
            (&[3, 1], &[]),
            (&[4, 2, 1], &[]),
            (&[2, 2], &[1]),
            (&[3, 2], &[1]),
        ];
        for (outer, inner) in cases {
            let s = shape(outer, inner);
            assert_eq!(
                count_tilings_tall_region(&s, 0).unwrap(),
                BigUint::one(),
                "shape {outer:?}/{inner:?}"
            );
        }
    }

    #[test]
    fn single_cell_count_is_window_height() {
        let s = shape(&[1], &[]);
        for extra in [0u64, 1, 5, 100] {
            let z = count_tilings_tall_region(&s, extra).unwrap();
            assert_eq!(z, BigUint::from(extra + 1));
        }
    }

    #[test]
    fn rectangles_match_boxed_product_formula() {
        let cases: [(&[u64], u64, u64); 4] = [
            (&[1], 1, 1),
            (&[2, 2], 2, 2),
            (&[3, 3], 2, 3),
            (&[2, 2, 2], 3, 2),
        ];
        for (outer, rows, cols) in cases {
            let s = shape(outer, &[]);
            for extra in 0..=5u64 {
                let transfer = count_tilings_tall_region(&s, extra).unwrap();
                let closed = boxed_plane_partitions(rows, cols, extra);
                assert_eq!(transfer, closed, "shape {outer:?} extra {extra}");
            }
        }
    }

    #[test]
    fn square_tall_counts_follow_quartic_formula() {
        let s = shape(&[2, 2], &[]);
        for extra in [0u64, 1, 2, 6, 30, 254] {
            let l = extra + 2; // span of the 2x2 diagram is 2
            let expect = BigUint::from((l - 1) * l * l * (l + 1) / 12);
            assert_eq!(count_tilings_tall_region(&s, extra).unwrap(), expect);
        }
    }

    #[test]
    fn transfer_matches_enumeration_on_catalog() {
        let cases: [(&[u64], &[u64]); 7] = [
            (&[2, 2], &[]),
            (&[3, 1], &[]),
            (&[3, 2], &[]),
            (&[4, 2, 1], &[]),
            (&[2, 2], &[1]),
            (&[3, 2], &[1]),
            (&[3, 3, 2], &[1, 1]),
        ];
        for (outer, inner) in cases {
            let s = shape(outer, inner);
            for extra in 0..=3u64 {
                let transfer = count_tilings_tall_region(&s, extra).unwrap();
                let brute = count_tall_by_enumeration(&s, extra, 50_000_000).unwrap();
                assert_eq!(transfer, brute, "shape {outer:?}/{inner:?} extra {extra}");
            }
        }
    }

    #[test]
    fn counts_are_reflection_symmetric() {
        // Transposing the diagram reflects the thread profile left-right.
        let pairs: [(&[u64], &[u64]); 3] = [
            (&[3, 1], &[2, 1, 1]),
            (&[4, 2, 1], &[3, 2, 1, 1]),
            (&[3, 3], &[2, 2, 2]),
        ];
        for (orig, transposed) in pairs {
            let s = shape(orig, &[]);
            let t = shape(transposed, &[]);
            for extra in 0..=4u64 {
                assert_eq!(
                    count_tilings_tall_region(&s, extra).unwrap(),
                    count_tilings_tall_region(&t, extra).unwrap(),
                    "transpose mismatch for {orig:?} extra {extra}"
                );
            }
        }
    }

    #[test]
    fn counts_grow_with_height() {
        let s = shape(&[3, 2], &[1]);
        let mut prev = count_tilings_tall_region(&s, 0).unwrap();
        for extra in 1..=6u64 {
            let cur = count_tilings_tall_region(&s, extra).unwrap();
            assert!(cur > prev, "no growth at extra={extra}");
            prev = cur;
        }
    }

    #[test]
    fn rescaled_counts_approach_order_polytope_volume() {
        // For the 2x2 diagram the deviation is |ln(1 - 1/l^2)|, which drops
        // by about 4x per doubling of the height.
        let s = shape(&[2, 2], &[]);
        let rep = volume_limit_check(&s, &[14, 30, 62, 126]).unwrap();
        let twelfth = (1.0f64 / 12.0).ln();
        assert!((rep.log_volume - twelfth).abs() <= 1e-9);
        for w in rep.deviations.windows(2) {
            assert!(w[1] <= 0.7 * w[0], "slow decay: {:?}", rep.deviations);
        }
        assert!(*rep.deviations.last().unwrap() <= 1e-3);

        // Same check on a three-thread staircase with half-integer span.
        let s = shape(&[2, 1], &[]);
        let rep = volume_limit_check(&s, &[7, 15, 31, 63]).unwrap();
        let third = (1.0f64 / 3.0).ln();
        assert!((rep.log_volume - third).abs() <= 1e-9);
        for w in rep.deviations.windows(2) {
            assert!(w[1] <= 0.7 * w[0], "slow decay: {:?}", rep.deviations);
        }
    }

    #[test]
    fn oversized_requests_error_cleanly() {
        let s = shape(&[3, 3, 3], &[]);
        match count_tilings_tall_region(&s, 4000) {
            Err(DimerError::TransferTooLarge(_)) => {}
            other => panic!("expected TransferTooLarge, got {other:?}"),
        }
        match count_tall_by_enumeration(&s, 3, 10) {
            Err(DimerError::EnumerationTooLarge(_)) => {}
            other => panic!("expected EnumerationTooLarge, got {other:?}"),
        }
    }
}
