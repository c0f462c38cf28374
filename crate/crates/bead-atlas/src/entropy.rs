//! Local entropy of bead configurations at fixed slope, its rotated form,
//! the honeycomb-dimer entropy built from the Lobachevsky function, free
//! energies of the weighted torus, and the Legendre-dual surface tension.

use crate::shapes::DiagramProfile;
use thiserror::Error;

/// Slope of a height function: `s` horizontal in [-1/2, 1/2], `t` vertical
/// (bead density) in [0, inf).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slope {
    pub s: f64,
    pub t: f64,
}

impl Slope {
    pub fn new(s: f64, t: f64) -> Self {
        Slope { s, t }
    }
}

/// Slope in the 45-degree-rotated chart: `s~ = s/(t+1)`, `t~ = (t-1)/(t+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedSlope {
    pub s_tilde: f64,
    pub t_tilde: f64,
}

/// Boltzmann parameters of the weighted torus; `A = ln alpha`, `B = -alpha gamma`
/// are the Legendre variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl WeightParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self, EntropyError> {
        if !(alpha > 0.0) || !(gamma > -1.0 && gamma < 1.0) {
            return Err(EntropyError::BadParams { alpha, gamma });
        }
        Ok(WeightParams { alpha, gamma })
    }

    pub fn cap_a(&self) -> f64 {
        self.alpha.ln()
    }

    pub fn cap_b(&self) -> f64 {
        -self.alpha * self.gamma
    }
}

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("parameters out of range: alpha={alpha}, gamma={gamma}")]
    BadParams { alpha: f64, gamma: f64 },
    #[error("slope ({s}, {t}) outside the dimer triangle")]
    OutsideTriangle { s: f64, t: f64 },
    #[error("slope ({s}, {t}) outside the open liquid domain")]
    OutsideDomain { s: f64, t: f64 },
    #[error("dual maximization failed to converge: |grad|={grad_norm} after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        /// (A, B, |grad|) per iterate.
        trace: Vec<(f64, f64, f64)>,
    },
}

/// Floor applied to `t` inside gradient evaluation only.
pub const T_FLOOR: f64 = 1e-8;

/// Local entropy: 0 at t=0, -inf on the |s|=1/2 walls with t>0, otherwise
/// `(1 + ln(cos(pi s)/(pi t))) t`.
pub fn ent(p: Slope) -> f64 {
    let Slope { s, t } = p;
    debug_assert!(t >= -1e-12, "negative vertical slope {t}");
    if t <= 0.0 {
        return 0.0;
    }
    if s.abs() >= 0.5 {
        return f64::NEG_INFINITY;
    }
    (1.0 + ((std::f64::consts::PI * s).cos() / (std::f64::consts::PI * t)).ln()) * t
}

/// Gradient of [`ent`], with `t` clamped at [`T_FLOOR`] so ascent directions
/// stay finite on frozen cells; `s` is nudged off the walls for the tangent.
pub fn grad_ent(p: Slope) -> (f64, f64) {
    let pi = std::f64::consts::PI;
    let s = p.s.clamp(-0.5 + 1e-9, 0.5 - 1e-9);
    let t = p.t.max(T_FLOOR);
    let ds = -pi * t * (pi * s).tan();
    let dt = ((pi * s).cos() / (pi * t)).ln();
    (ds, dt)
}

pub fn rotate(p: Slope) -> RotatedSlope {
    RotatedSlope {
        s_tilde: p.s / (p.t + 1.0),
        t_tilde: (p.t - 1.0) / (p.t + 1.0),
    }
}

/// Inverse of [`rotate`]; requires `t~ < 1`.
pub fn unrotate(q: RotatedSlope) -> Slope {
    debug_assert!(q.t_tilde < 1.0, "t~ = 1 has no finite preimage");
    Slope {
        s: 2.0 * q.s_tilde / (1.0 - q.t_tilde),
        t: (1.0 + q.t_tilde) / (1.0 - q.t_tilde),
    }
}

/// Area element of the rotated chart at `q`.
pub fn rotation_jacobian(q: RotatedSlope) -> f64 {
    (std::f64::consts::SQRT_2 / 2.0) * (1.0 - q.t_tilde)
}

/// Entropy density in the rotated chart: the Jacobian times the unrotated
/// entropy, so that cellwise integrals agree between charts.
pub fn ent_tilde(q: RotatedSlope) -> f64 {
    let RotatedSlope { s_tilde, t_tilde } = q;
    if t_tilde >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if t_tilde <= -1.0 {
        return 0.0;
    }
    // |s| >= 1/2 wall in rotated coordinates.
    if s_tilde.abs() >= (1.0 - t_tilde) / 4.0 {
        return f64::NEG_INFINITY;
    }
    let pi = std::f64::consts::PI;
    let cosine = (2.0 * pi * s_tilde / (1.0 - t_tilde)).cos();
    (std::f64::consts::SQRT_2 / 2.0)
        * (1.0 + ((1.0 - t_tilde) * cosine / (pi * (1.0 + t_tilde))).ln())
        * (1.0 + t_tilde)
}

// ---------------------------------------------------------------------------
// Quadrature: adaptive bisection on an embedded Gauss-Legendre 7/15 pair,
// nodes computed once by Newton iteration on the Legendre recurrence.

fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess for the i-th root of P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

struct GaussPair {
    n7: Vec<f64>,
    w7: Vec<f64>,
    n15: Vec<f64>,
    w15: Vec<f64>,
}

fn gauss_pair() -> &'static GaussPair {
    use std::sync::OnceLock;
    static PAIR: OnceLock<GaussPair> = OnceLock::new();
    PAIR.get_or_init(|| {
        let (n7, w7) = legendre_rule(7);
        let (n15, w15) = legendre_rule(15);
        GaussPair { n7, w7, n15, w15 }
    })
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(c + h * x);
    }
    acc * h
}

/// Integrates `f` over [a, b] to absolute tolerance `tol`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        tol: f64,
        pair: &GaussPair,
        depth: u32,
    ) -> f64 {
        let coarse = panel(f, a, b, &pair.n7, &pair.w7);
        let fine = panel(f, a, b, &pair.n15, &pair.w15);
        if (fine - coarse).abs() <= tol || depth >= 40 {
            return fine;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, tol / 2.0, pair, depth + 1) + recurse(f, m, b, tol / 2.0, pair, depth + 1)
    }
    recurse(f, a, b, tol, gauss_pair(), 0)
}

/// Lobachevsky function `-int_0^theta ln|2 sin u| du`, extended to all of R
/// by oddness and pi-periodicity; absolute accuracy 1e-10 or better.
pub fn lobachevsky(theta: f64) -> f64 {
    let pi = std::f64::consts::PI;
    // Reduce to [0, pi); the function is pi-periodic.
    let x = theta.rem_euclid(pi);
    if x <= 1e-300 {
        return 0.0;
    }
    if x > pi / 2.0 {
        return -lobachevsky_core(pi - x);
    }
    lobachevsky_core(x)
}

/// Core on [0, pi/2]: the log singularity at 0 is integrated analytically,
/// leaving the smooth remainder ln(sin u / u).
fn lobachevsky_core(x: f64) -> f64 {
    debug_assert!((0.0..=std::f64::consts::PI / 2.0 + 1e-12).contains(&x));
    let smooth = |u: f64| {
        if u < 1e-4 {
            // ln(sin u / u) = -u^2/6 - u^4/180 + O(u^6)
            -u * u / 6.0 - u.powi(4) / 180.0
        } else {
            (u.sin() / u).ln()
        }
    };
    x * (1.0 - (2.0 * x).ln()) - integrate(&smooth, 0.0, x, 1e-12)
}

/// Honeycomb-dimer entropy at slope (s, t): the Lobachevsky sum over the
/// triangle of nonnegative angle fractions (t, 1/2 - s - t/2, 1/2 + s - t/2).
pub fn ent_honeycomb(p: Slope) -> Result<f64, EntropyError> {
    let pi = std::f64::consts::PI;
    let a1 = p.t;
    let a2 = 0.5 - p.s - p.t / 2.0;
    let a3 = 0.5 + p.s - p.t / 2.0;
    let eps = 1e-12;
    if a1 < -eps || a2 < -eps || a3 < -eps {
        return Err(EntropyError::OutsideTriangle { s: p.s, t: p.t });
    }
    Ok((lobachevsky(pi * a1) + lobachevsky(pi * a2) + lobachevsky(pi * a3)) / pi)
}

/// Dimer entropy rescaled by `m`: `m ent_hc(s, t/m) - t ln m`; converges to
/// [`ent`] as m grows.
pub fn scaled_dimer_entropy(p: Slope, m: u32) -> Result<f64, EntropyError> {
    let mf = m as f64;
    let inner = ent_honeycomb(Slope::new(p.s, p.t / mf))?;
    Ok(mf * inner - p.t * mf.ln())
}

/// Per-fundamental-domain free energy of the weighted torus.
pub fn free_energy(w: &WeightParams) -> f64 {
    let g = w.gamma;
    (2.0 * w.alpha / std::f64::consts::PI) * (g * (-g).acos() + (1.0 - g * g).sqrt())
}

/// Half-domain convention of [`free_energy`].
pub fn free_energy_half_domain(w: &WeightParams) -> f64 {
    0.5 * free_energy(w)
}

/// The dual functional `F~(A, B)` of the surface-tension maximization.
fn dual_f(a: f64, b: f64) -> f64 {
    let e = a.exp();
    (1.0 / std::f64::consts::PI) * (-b * (b / e).acos() + (e * e - b * b).sqrt()) + b / 2.0
}

/// Surface tension via the dual maximization
/// `sigma(s,t) = max_{A,B} (-F~(A,B) + A t + B s)`; equals `-ent(s,t)`.
///
/// Newton iteration started at the closed-form stationary point; falls back
/// to a coarse grid search if the iterate leaves the dual domain.
pub fn legendre_surface_tension(p: Slope) -> Result<f64, EntropyError> {
    let pi = std::f64::consts::PI;
    let Slope { s, t } = p;
    if !(t > 0.0) || s.abs() >= 0.5 {
        return Err(EntropyError::OutsideDomain { s, t });
    }
    let grad = |a: f64, b: f64| -> (f64, f64) {
        let e = a.exp();
        let r = (e * e - b * b).max(0.0).sqrt();
        (-r / pi + t, (b / e).acos() / pi - 0.5 + s)
    };
    // Closed-form stationary point of the strictly concave dual objective.
    let mut a = (pi * t / (pi * s).cos()).ln();
    let mut b = pi * t * (pi * s).tan();
    let mut trace = Vec::new();
    let max_iter = 60;
    for it in 0..max_iter {
        let (ga, gb) = grad(a, b);
        let gnorm = ga.hypot(gb);
        trace.push((a, b, gnorm));
        if gnorm <= 1e-12 {
            let value = -dual_f(a, b) + a * t + b * s;
            return Ok(value);
        }
        let e = a.exp();
        let r = (e * e - b * b).max(1e-300).sqrt();
        // Hessian of the objective (negative definite).
        let haa = -e * e / (pi * r);
        let hab = b / (pi * r);
        let hbb = -1.0 / (pi * r);
        let det = haa * hbb - hab * hab;
        let (da, db) = if det.abs() > 1e-300 {
            (
                -(hbb * ga - hab * gb) / det,
                -(haa * gb - hab * ga) / det,
            )
        } else {
            (ga, gb)
        };
        let (mut na, mut nb) = (a + da, b + db);
        if !na.is_finite() || !nb.is_finite() || nb.abs() >= na.exp() {
            // Fall back to a damped gradient step inside the domain.
            na = a + 0.1 * ga;
            nb = (b + 0.1 * gb).clamp(-0.999 * na.exp(), 0.999 * na.exp());
        }
        a = na;
        b = nb;
        if it == max_iter - 1 {
            let (ga, gb) = grad(a, b);
            return Err(EntropyError::NonConvergence {
                iterations: max_iter,
                grad_norm: ga.hypot(gb),
                trace,
            });
        }
    }
    unreachable!()
}

/// Natural log of `n!` by direct summation (exact to f64 rounding).
pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Natural log of an arbitrary-precision positive integer.
pub fn ln_biguint(x: &num_bigint::BigUint) -> f64 {
    use num_traits::ToPrimitive;
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Adjusted combinatorial entropy of the uniform measure on a diagram's
/// tableaux: `ln(count) - ln(N!) + N ln(n)`.
pub fn combinatorial_entropy_uniform(shape: &DiagramProfile) -> f64 {
    let n_boxes = shape.n_boxes();
    let n_threads = shape.n_threads();
    let ln_f = match shape.to_partitions() {
        Ok((outer, inner)) if inner.is_empty() => ln_count_straight(&outer),
        _ => ln_biguint(&crate::tableaux::count_syt(shape).expect("valid shape")),
    };
    ln_f - ln_factorial(n_boxes) + n_boxes as f64 * (n_threads as f64).ln()
}

/// `ln f^lambda` for a straight shape via hook lengths in log space.
fn ln_count_straight(outer: &[u64]) -> f64 {
    let n: u64 = outer.iter().sum();
    let cols = outer[0] as usize;
    let mut transpose = vec![0u64; cols];
    for &row in outer {
        for c in 0..row as usize {
            transpose[c] += 1;
        }
    }
    let mut ln_hooks = 0.0;
    for (r0, &row) in outer.iter().enumerate() {
        for c0 in 0..row as usize {
            let hook = (row - c0 as u64) + (transpose[c0] - r0 as u64 - 1);
            ln_hooks += (hook as f64).ln();
        }
    }
    ln_factorial(n as usize) - ln_hooks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::profile_from_partitions;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn ent_pinned_values() {
        assert_eq!(ent(Slope::new(0.3, 0.0)), 0.0);
        assert_eq!(ent(Slope::new(-0.5, 0.0)), 0.0);
        let v = ent(Slope::new(0.0, 1.0 / PI));
        assert!((v - 1.0 / PI).abs() < 1e-15);
        assert_eq!(ent(Slope::new(0.5, 1.0)), f64::NEG_INFINITY);
        assert_eq!(ent(Slope::new(-0.7, 0.2)), f64::NEG_INFINITY);
    }

    #[test]
    fn ent_maximum_in_t_at_one_over_pi() {
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut t = 1e-4;
        while t < 2.0 {
            let v = ent(Slope::new(0.0, t));
            if v > best.0 {
                best = (v, t);
            }
            t += 1e-4;
        }
        assert!((best.1 - 1.0 / PI).abs() < 2e-4);
        assert!((best.0 - 1.0 / PI).abs() < 1e-7);
    }

    #[test]
    fn rotation_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let p = Slope::new(rng.gen_range(-0.49..0.49), rng.gen_range(0.0..5.0));
            let q = unrotate(rotate(p));
            assert!((p.s - q.s).abs() < 1e-14);
            assert!((p.t - q.t).abs() < 1e-14);
        }
        let q = rotate(Slope::new(0.0, 1.0));
        assert_eq!((q.s_tilde, q.t_tilde), (0.0, 0.0));
        let q = rotate(Slope::new(0.2, 0.0));
        assert!((q.s_tilde - 0.2).abs() < 1e-15 && (q.t_tilde + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotated_entropy_change_of_variables() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let p = Slope::new(rng.gen_range(-0.45..0.45), rng.gen_range(1e-3..4.0));
            let q = rotate(p);
            let want = rotation_jacobian(q) * ent(p);
            let got = ent_tilde(q);
            assert!(
                (want - got).abs() < 1e-12 * (1.0 + want.abs()),
                "p=({}, {})",
                p.s,
                p.t
            );
        }
        assert_eq!(ent_tilde(RotatedSlope { s_tilde: 0.1, t_tilde: -1.0 }), 0.0);
        assert_eq!(
            ent_tilde(RotatedSlope { s_tilde: 0.0, t_tilde: 1.0 }),
            f64::NEG_INFINITY
        );
        // Pinned value at the image of (0, 1).
        let v = ent_tilde(RotatedSlope { s_tilde: 0.0, t_tilde: 0.0 });
        assert!((v - (std::f64::consts::SQRT_2 / 2.0) * (1.0 - PI.ln())).abs() < 1e-14);
    }

    /// Series reference: L(x) = 1/2 sum sin(2nx)/n^2, truncated with a tail
    /// below 5e-7.
    fn lobachevsky_series(x: f64) -> f64 {
        let n = 2_000_000;
        let mut acc = 0.0;
        for k in (1..=n).rev() {
            let kf = k as f64;
            acc += (2.0 * kf * x).sin() / (kf * kf);
        }
        acc / 2.0
    }

    #[test]
    fn lobachevsky_pinned_and_series() {
        assert_eq!(lobachevsky(0.0), 0.0);
        assert!(lobachevsky(PI).abs() < 1e-10);
        // Value at pi/2 is exactly 0: the half-period integral vanishes.
        assert!(lobachevsky(PI / 2.0).abs() < 1e-10);
        assert!((lobachevsky(PI / 2.0) - lobachevsky_series(PI / 2.0)).abs() < 1e-5);
        for &x in &[0.1, 0.4, PI / 3.0, 1.2, PI / 2.0 - 0.01, 2.0, 3.0] {
            let q = lobachevsky(x);
            let s = lobachevsky_series(x);
            assert!((q - s).abs() < 2e-6, "x={x}: quad={q} series={s}");
        }
        // Oddness + periodicity.
        assert!((lobachevsky(-0.3) + lobachevsky(0.3)).abs() < 1e-12);
        assert!((lobachevsky(0.3 + PI) - lobachevsky(0.3)).abs() < 1e-12);
    }

    #[test]
    fn lobachevsky_identities() {
        // Duplication: L(2x) = 2 L(x) + 2 L(x + pi/2).
        for i in 1..40 {
            let x = i as f64 * PI / 80.0;
            let lhs = lobachevsky(2.0 * x);
            let rhs = 2.0 * lobachevsky(x) + 2.0 * lobachevsky(x + PI / 2.0);
            assert!((lhs - rhs).abs() < 1e-9, "x={x}");
        }
        // Consequence: L(pi/6) = (3/2) L(pi/3).
        assert!((lobachevsky(PI / 6.0) - 1.5 * lobachevsky(PI / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn honeycomb_entropy_shape() {
        // Even in s.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let t = rng.gen_range(0.0..1.0);
            let smax: f64 = (1.0 - t) / 2.0;
            let s = rng.gen_range(-smax..smax.max(1e-9));
            let a = ent_honeycomb(Slope::new(s, t)).unwrap();
            let b = ent_honeycomb(Slope::new(-s, t)).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        // Extreme point of the triangle.
        assert!(ent_honeycomb(Slope::new(0.5, 0.0)).unwrap().abs() < 1e-12);
        assert!(ent_honeycomb(Slope::new(0.3, 0.9)).is_err());
    }

    #[test]
    fn honeycomb_entropy_maximum_at_equal_angles() {
        // Grid scan of the triangle; the maximum sits at (0, 1/3), where all
        // three angle fractions equal 1/3.
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        let n = 120;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let smax: f64 = (1.0 - t) / 2.0;
            for j in -n..=n {
                let s = smax * j as f64 / n as f64;
                if let Ok(v) = ent_honeycomb(Slope::new(s, t)) {
                    if v > best.0 {
                        best = (v, s, t);
                    }
                }
            }
        }
        let peak = 3.0 / PI * lobachevsky(PI / 3.0);
        assert!(best.1.abs() < 0.01, "argmax s = {}", best.1);
        assert!((best.2 - 1.0 / 3.0).abs() < 0.01, "argmax t = {}", best.2);
        assert!((best.0 - peak).abs() < 1e-3);
        // Exact at the center...
        let center = ent_honeycomb(Slope::new(0.0, 1.0 / 3.0)).unwrap();
        assert!((center - peak).abs() < 1e-12);
        // ...and strictly above the equilateral value at (0, 2/3).
        let other = ent_honeycomb(Slope::new(0.0, 2.0 / 3.0)).unwrap();
        assert!(center > other + 0.1);
    }

    #[test]
    fn scaled_dimer_entropy_converges() {
        let p = Slope::new(0.0, 1.0 / PI);
        let target = ent(p);
        let mut last = f64::INFINITY;
        for m in [10u32, 100, 1000, 10_000] {
            let gap = (scaled_dimer_entropy(p, m).unwrap() - target).abs();
            assert!(gap < last, "m={m}: gap {gap} !< {last}");
            last = gap;
        }
        assert!(last <= 1e-3);
        assert_eq!(scaled_dimer_entropy(Slope::new(0.23, 0.0), 17).unwrap(), 0.0);
    }

    #[test]
    fn scaled_dimer_entropy_small_t_bound() {
        // scaled entropy stays below 0.01 for t <= 1e-3, m >= 1e3.
        let mut s_grid: Vec<f64> = (-9..=9).map(|i| i as f64 / 20.0).collect();
        s_grid.push(0.499);
        s_grid.push(-0.499);
        for &s in &s_grid {
            for &t in &[1e-3, 5e-4, 1e-4, 0.0] {
                for &m in &[1000u32, 10_000] {
                    let v = scaled_dimer_entropy(Slope::new(s, t), m).unwrap();
                    assert!(v < 0.01, "s={s} t={t} m={m}: {v}");
                }
            }
        }
    }

    #[test]
    fn free_energy_values() {
        let w = WeightParams::new(0.7, 0.0).unwrap();
        assert!((free_energy(&w) - 2.0 * 0.7 / PI).abs() < 1e-15);
        let w = WeightParams::new(1.0, 0.5).unwrap();
        let want = (2.0 / PI) * (0.5 * (-0.5f64).acos() + 0.75f64.sqrt());
        assert!((free_energy(&w) - want).abs() < 1e-15);
        assert!((free_energy_half_domain(&w) - want / 2.0).abs() < 1e-15);
        // One-sided limits at gamma -> +-1 stay finite.
        let hi = free_energy(&WeightParams::new(1.0, 1.0 - 1e-9).unwrap());
        assert!((hi - 2.0).abs() < 1e-3);
        let lo = free_energy(&WeightParams::new(1.0, -1.0 + 1e-9).unwrap());
        assert!(lo.abs() < 1e-3);
        assert!(WeightParams::new(-1.0, 0.0).is_err());
        assert!(WeightParams::new(1.0, 1.0).is_err());
        let w = WeightParams::new(2.0, -0.25).unwrap();
        assert!((w.cap_a() - 2.0f64.ln()).abs() < 1e-15);
        assert!((w.cap_b() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn legendre_duality() {
        let cases = [(0.0, 1.0 / PI), (0.3, 0.8), (-0.3, 0.8), (0.45, 0.05)];
        for (s, t) in cases {
            let sigma = legendre_surface_tension(Slope::new(s, t)).unwrap();
            assert!(
                (sigma + ent(Slope::new(s, t))).abs() < 1e-6,
                "(s,t)=({s},{t})"
            );
        }
        // Symmetry in s.
        for (s, t) in [(0.2, 0.5), (0.4, 1.5)] {
            let a = legendre_surface_tension(Slope::new(s, t)).unwrap();
            let b = legendre_surface_tension(Slope::new(-s, t)).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
        assert!(legendre_surface_tension(Slope::new(0.5, 1.0)).is_err());
        assert!(legendre_surface_tension(Slope::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn ent_concavity_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100_000 {
            let p = Slope::new(rng.gen_range(-0.49..0.49), rng.gen_range(1e-6..3.0));
            let q = Slope::new(rng.gen_range(-0.49..0.49), rng.gen_range(1e-6..3.0));
            let mid = Slope::new(0.5 * (p.s + q.s), 0.5 * (p.t + q.t));
            assert!(ent(mid) >= 0.5 * (ent(p) + ent(q)) - 1e-12);
        }
    }

    #[test]
    fn active_part_rearrangement() {
        // (1 + ln(cos pi s/(pi t))) t  <=  t ln(cos pi s/t) + t(1 - ln pi);
        // the two sides are algebraically equal, verified pointwise.
        for i in -8..=8 {
            let s = i as f64 / 20.0;
            for j in 1..=20 {
                let t = j as f64 / 10.0;
                let lhs = ent(Slope::new(s, t));
                let rhs = t * ((PI * s).cos() / t).ln() + t * (1.0 - PI.ln());
                assert!(lhs <= rhs + 1e-12 && (lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn combinatorial_entropy_examples() {
        let p = profile_from_partitions(&[2, 2], &[], 1).unwrap();
        let want = 2.0f64.ln() - 24.0f64.ln() + 4.0 * 3.0f64.ln();
        assert!((combinatorial_entropy_uniform(&p) - want).abs() < 1e-12);
        let single = profile_from_partitions(&[1], &[], 1).unwrap();
        assert!(combinatorial_entropy_uniform(&single).abs() < 1e-15);
    }

    #[test]
    fn combinatorial_entropy_square_trend() {
        // S/n^2 for k x k squares approaches (1/4)(3/2 - ln 2), gaps shrinking.
        let limit = 0.25 * (1.5 - 2.0f64.ln());
        let mut last_gap = f64::INFINITY;
        for k in [10u64, 20, 40] {
            let outer: Vec<u64> = vec![k; k as usize];
            let p = profile_from_partitions(&outer, &[], 1).unwrap();
            let n = p.n_threads() as f64;
            let value = combinatorial_entropy_uniform(&p) / (n * n);
            let gap = (value - limit).abs();
            assert!(gap < last_gap, "k={k}: {gap} !< {last_gap}");
            last_gap = gap;
        }
        assert!(last_gap < 5e-3);
    }
}
