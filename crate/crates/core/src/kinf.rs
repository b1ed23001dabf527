//! KL projection of a discrete distribution onto `{q : CVaR(q) >= c}` and
//! the asymptotic lower-bound regret curve built from it.
//!
//! For a distribution `p` on a fixed support and a target `c`, the quantity
//! computed here is
//!
//! ```text
//! Kinf(p, c) = inf { KL(p, q) : q on the same support, CVaR_a(q) >= c }
//! ```
//!
//! the complexity term governing how often an optimal algorithm must pull a
//! sub-optimal arm: asymptotically at least `log T / Kinf(p, c*)` times,
//! where `c*` is the best arm's CVaR. Summing `gap_k * log T / Kinf_k` over
//! sub-optimal arms gives the lower-bound curve that regret plots are
//! checked against.
//!
//! The solver uses the dual form: for each support point `y > c`, maximise
//! the concave one-dimensional function
//!
//! ```text
//! g(y, lambda) = E_p[ log(1 - lambda ((y - c) a - (y - X)^+)) ]
//! ```
//!
//! over `lambda in [0, 1/(a (y - c)))` and take the smallest maximum over
//! `y`. The maximisation runs numerically over the closed interval
//! `[0, (1 - 1e-12)/(a (y - c))]`, which also covers the case where the
//! optimum sits at the open right endpoint, so no separate boundary branch
//! is needed. The minimiser is recovered from the stationarity condition
//! `q_i = p_i / (1 - lambda ((y - c) a - (y - x_i)^+))`.

use alloc::vec::Vec;

use crate::dist::{kahan_sum, CvarLevel, DiscreteDist};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Relative margin keeping the inner maximisation away from the open end
/// of the dual interval.
const LAMBDA_GUARD: f64 = 1e-12;

/// Interval tolerance for the bisection on the derivative of `g`.
const BISECT_TOL: f64 = 1e-10;

/// Hard cap on bisection iterations; hitting it is a solver failure.
const MAX_BISECT_ITERS: usize = 500;

/// Result of a finite KL projection.
#[derive(Debug, Clone)]
pub struct KinfResult {
    /// Projection value in nats. Zero iff the constraint was already
    /// satisfied by the input.
    pub value: f64,
    /// Support value attaining the outer infimum (for a zero value, the
    /// quantile point of the input; the dual is degenerate there).
    pub y_star: f64,
    /// Optimal dual variable, zero when the constraint is already met.
    pub lambda_star: f64,
    /// Recovered minimiser: the closest distribution (in KL from the
    /// input) whose CVaR reaches the target.
    pub q_star: DiscreteDist,
}

/// Outcome of the projection: finite, or unreachable because the target
/// exceeds every distribution on the support.
#[derive(Debug, Clone)]
pub enum KinfSolution {
    /// The projection exists; see [`KinfResult`].
    Finite(KinfResult),
    /// No distribution on the support reaches the target (the target is at
    /// or above the largest support value while the input is not already
    /// there). Kept as a sentinel so lower-bound sums can skip such arms
    /// rather than absorb a large float.
    Infinite,
}

impl KinfSolution {
    /// The value as a float, `f64::INFINITY` for the unreachable case.
    pub fn value(&self) -> f64 {
        match self {
            KinfSolution::Finite(r) => r.value,
            KinfSolution::Infinite => f64::INFINITY,
        }
    }

    /// The finite result, if any.
    pub fn finite(&self) -> Option<&KinfResult> {
        match self {
            KinfSolution::Finite(r) => Some(r),
            KinfSolution::Infinite => None,
        }
    }
}

/// Errors from the dual solver.
#[derive(Debug, Clone, PartialEq)]
pub enum KinfError {
    /// The inner bisection failed to reach tolerance within its iteration
    /// budget.
    NoConvergence,
}

impl core::fmt::Display for KinfError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            KinfError::NoConvergence => write!(f, "dual maximisation did not converge"),
        }
    }
}

impl core::error::Error for KinfError {}

/// KL divergence between weight vectors on a shared support, in nats.
///
/// `0 log 0 = 0`; infinite when `p` has mass where `q` has none.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            total += pi * (pi / qi).ln();
        }
    }
    total
}

/// Solves the KL projection of `p` onto `{q : CVaR_alpha(q) >= target}` by
/// the dual formulation.
pub fn kinf_dual(
    p: &DiscreteDist,
    target: f64,
    alpha: CvarLevel,
) -> Result<KinfSolution, KinfError> {
    let a = alpha.value();
    let current = p.cvar(alpha);
    if current >= target {
        // Constraint already satisfied: projection is the identity and the
        // dual is degenerate. Report the quantile point for y.
        return Ok(KinfSolution::Finite(KinfResult {
            value: 0.0,
            y_star: quantile_point(p, alpha),
            lambda_star: 0.0,
            q_star: p.clone(),
        }));
    }
    if target >= p.max_value() {
        return Ok(KinfSolution::Infinite);
    }

    let support = p.support();
    let weights = p.weights();

    let mut best: Option<(f64, f64, usize)> = None; // (value, lambda, y index)
    let mut coeffs: Vec<f64> = Vec::with_capacity(support.len());
    for (yi, &y) in support.iter().enumerate() {
        if y <= target {
            continue;
        }
        coeffs.clear();
        coeffs.extend(
            support
                .iter()
                .map(|&x| (y - target) * a - (y - x).max(0.0)),
        );
        let lam_hi = (1.0 - LAMBDA_GUARD) / (a * (y - target));
        let lambda = maximise_inner(weights, &coeffs, lam_hi)?;
        let value = g_value(weights, &coeffs, lambda);
        if best.is_none_or(|(v, _, _)| value < v) {
            best = Some((value, lambda, yi));
        }
    }

    let (value, lambda_star, y_idx) =
        best.expect("target < max support guarantees a feasible y");
    let y_star = support[y_idx];

    // KKT recovery of the minimiser, with any mass deficit left by a
    // boundary lambda assigned to y (where it costs nothing in KL and does
    // not lower the CVaR).
    let coeffs: Vec<f64> = support
        .iter()
        .map(|&x| (y_star - target) * a - (y_star - x).max(0.0))
        .collect();
    let mut q: Vec<f64> = weights
        .iter()
        .zip(&coeffs)
        .map(|(&pi, &c)| if pi > 0.0 { pi / (1.0 - lambda_star * c) } else { 0.0 })
        .collect();
    let deficit = 1.0 - kahan_sum(q.iter().copied());
    if deficit > 0.0 {
        q[y_idx] += deficit;
    }
    let total = kahan_sum(q.iter().copied());
    for v in &mut q {
        *v /= total;
    }
    let q_star = DiscreteDist::new(support.to_vec(), q)
        .expect("renormalised KKT weights form a distribution");

    Ok(KinfSolution::Finite(KinfResult {
        value,
        y_star,
        lambda_star,
        q_star,
    }))
}

/// `g(lambda)` for fixed y: `sum_i p_i log(1 - lambda c_i)`.
fn g_value(p: &[f64], coeffs: &[f64], lambda: f64) -> f64 {
    kahan_sum(
        p.iter()
            .zip(coeffs)
            .filter(|(&pi, _)| pi > 0.0)
            .map(|(&pi, &c)| pi * (1.0 - lambda * c).ln()),
    )
}

/// `g'(lambda) = sum_i p_i (-c_i) / (1 - lambda c_i)`.
fn g_derivative(p: &[f64], coeffs: &[f64], lambda: f64) -> f64 {
    p.iter()
        .zip(coeffs)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &c)| -pi * c / (1.0 - lambda * c))
        .sum()
}

/// Maximises the concave `g` over `[0, lam_hi]` by bisection on `g'`.
fn maximise_inner(p: &[f64], coeffs: &[f64], lam_hi: f64) -> Result<f64, KinfError> {
    if g_derivative(p, coeffs, lam_hi) >= 0.0 {
        return Ok(lam_hi);
    }
    let (mut lo, mut hi) = (0.0f64, lam_hi);
    for _ in 0..MAX_BISECT_ITERS {
        if hi - lo <= BISECT_TOL * (1.0 + hi) {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if g_derivative(p, coeffs, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(KinfError::NoConvergence)
}

/// First support point where the cumulative mass reaches the level.
fn quantile_point(p: &DiscreteDist, alpha: CvarLevel) -> f64 {
    let mut cum = 0.0;
    for (&x, &w) in p.support().iter().zip(p.weights()) {
        cum += w;
        if cum >= alpha.value() {
            return x;
        }
    }
    p.max_value()
}

/// Exhaustive minimum of `KL(p, q)` over the simplex grid of mesh `step`,
/// restricted to grid points with `CVaR(q) >= target`.
///
/// Ground-truth oracle for [`kinf_dual`], independent of the dual route.
/// The grid is exponential in the support size, so this requires `M <= 4`.
/// Returns `f64::INFINITY` when no grid point is feasible. Upper-bounds
/// the true projection by `O(step)` away from the simplex boundary.
pub fn kinf_grid_search(p: &DiscreteDist, target: f64, alpha: CvarLevel, step: f64) -> f64 {
    let m = p.len();
    assert!(m <= 4, "grid search is exponential in the support size");
    assert!(step > 0.0 && step < 1.0);
    let n = (1.0 / step).round() as u64;
    let support = p.support();
    let weights = p.weights();
    let a = alpha.value();

    // ln(k/n) table so the inner loop avoids transcendentals.
    let ln_table: Vec<f64> = (0..=n).map(|k| (k as f64 / n as f64).ln()).collect();
    let ln_p: Vec<f64> = weights
        .iter()
        .map(|&w| if w > 0.0 { w.ln() } else { 0.0 })
        .collect();

    let kl_at = |counts: &[u64]| -> f64 {
        let mut total = 0.0;
        for i in 0..m {
            if weights[i] > 0.0 {
                if counts[i] == 0 {
                    return f64::INFINITY;
                }
                total += weights[i] * (ln_p[i] - ln_table[counts[i] as usize]);
            }
        }
        total
    };
    let cvar_at = |counts: &[u64]| -> f64 {
        let mut below = 0u64;
        let mut partial = 0.0;
        for i in 0..m {
            let next = below + counts[i];
            if next as f64 / n as f64 >= a || i == m - 1 {
                return partial / a + (1.0 - below as f64 / n as f64 / a) * support[i];
            }
            partial += counts[i] as f64 / n as f64 * support[i];
            below = next;
        }
        unreachable!()
    };

    let mut best = f64::INFINITY;
    let mut counts = alloc::vec![0u64; m];
    enumerate_compositions(n, m, &mut counts, 0, &mut |counts| {
        if cvar_at(counts) >= target {
            let kl = kl_at(counts);
            if kl < best {
                best = kl;
            }
        }
    });
    best
}

/// Visits every composition of `total` into `m` nonnegative parts.
fn enumerate_compositions<F: FnMut(&[u64])>(
    total: u64,
    m: usize,
    counts: &mut [u64],
    idx: usize,
    visit: &mut F,
) {
    if idx == m - 1 {
        counts[idx] = total;
        visit(counts);
        return;
    }
    for k in 0..=total {
        counts[idx] = k;
        enumerate_compositions(total - k, m, counts, idx + 1, visit);
    }
}

/// Pinsker floor `(alpha * gap)^2 / 2` on the projection value, valid for
/// supports in `[0, 1]`; a cheap sanity bound for the solver.
pub fn pinsker_floor(gap: f64, alpha: CvarLevel) -> f64 {
    let ag = alpha.value() * gap;
    0.5 * ag * ag
}

/// Contribution of one arm to the lower-bound slope.
#[derive(Debug, Clone)]
pub struct ArmComplexity {
    /// Arm position in the input list.
    pub arm: usize,
    /// CVaR gap to the best arm.
    pub gap: f64,
    /// Projection value against the best CVaR; `None` when the target is
    /// unreachable on this arm's support (the arm is skipped).
    pub kinf: Option<f64>,
}

/// The asymptotic lower-bound curve `T -> sum_k gap_k * log(T) / Kinf_k`
/// over sub-optimal arms.
#[derive(Debug, Clone)]
pub struct LowerBoundCurve {
    /// Best CVaR across arms.
    pub c_star: f64,
    /// Per-arm gaps and complexities (sub-optimal arms only).
    pub arm_terms: Vec<ArmComplexity>,
    /// `(horizon, bound)` pairs over the requested grid.
    pub points: Vec<(f64, f64)>,
}

impl LowerBoundCurve {
    /// The slope of the curve in `log T`.
    pub fn slope(&self) -> f64 {
        self.arm_terms
            .iter()
            .filter_map(|t| t.kinf.map(|k| t.gap / k))
            .sum()
    }

    /// Bound value at a given horizon.
    pub fn eval(&self, horizon: f64) -> f64 {
        self.slope() * horizon.ln()
    }
}

/// Builds the lower-bound curve for a set of multinomial arms at the given
/// level over a horizon grid.
pub fn lower_bound_curve(
    arms: &[DiscreteDist],
    alpha: CvarLevel,
    horizons: &[f64],
) -> Result<LowerBoundCurve, KinfError> {
    assert!(arms.len() >= 2, "need at least two arms");
    let cvars: Vec<f64> = arms.iter().map(|d| d.cvar(alpha)).collect();
    let c_star = cvars.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut arm_terms = Vec::new();
    for (k, arm) in arms.iter().enumerate() {
        let gap = c_star - cvars[k];
        if gap <= 0.0 {
            continue;
        }
        let kinf = match kinf_dual(arm, c_star, alpha)? {
            KinfSolution::Finite(r) => Some(r.value),
            KinfSolution::Infinite => None,
        };
        arm_terms.push(ArmComplexity { arm: k, gap, kinf });
    }
    let mut curve = LowerBoundCurve {
        c_star,
        arm_terms,
        points: Vec::new(),
    };
    curve.points = horizons.iter().map(|&t| (t, curve.eval(t))).collect();
    Ok(curve)
}
