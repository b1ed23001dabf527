//! Finite discrete distributions and exact CVaR computations.
//!
//! The conditional value at risk of a distribution at level `alpha` is the
//! expected reward over the worst `alpha`-fraction of outcomes,
//!
//! ```text
//! CVaR_a(X) = sup_x { x - (1/a) E[(x - X)^+] }
//! ```
//!
//! (reward convention: larger is better, `CVaR_1` is the mean). For a
//! discrete distribution the supremum is attained at the first support point
//! where the cumulative mass reaches `alpha`, which gives the closed form
//! implemented by [`cvar_sorted`]. Everything in this module is pure and
//! immutable after construction, so values can be shared freely across
//! threads.

use alloc::vec::Vec;
use core::fmt;

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Tolerance on `|sum(weights) - 1|` accepted at construction before
/// renormalising; anything worse is rejected as a construction error.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A CVaR level `alpha` in `(0, 1]`.
///
/// `alpha = 1` recovers the mean; small `alpha` focuses on the lower tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvarLevel(f64);

impl CvarLevel {
    /// Validates `0 < alpha <= 1`.
    pub fn new(alpha: f64) -> Result<Self, DistError> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(DistError::BadLevel(alpha))
        }
    }

    /// The raw level.
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Errors raised when constructing or combining distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum DistError {
    /// The support is empty.
    EmptySupport,
    /// Support and weight vectors have different lengths.
    LengthMismatch {
        /// Number of support points.
        support: usize,
        /// Number of weights.
        weights: usize,
    },
    /// A support value or weight is NaN or infinite.
    NonFinite,
    /// A weight is negative.
    NegativeWeight(f64),
    /// The weights sum to something too far from one.
    WeightSum(f64),
    /// A support value lies outside the declared bound `[0, B]`.
    OutOfBound {
        /// Offending support value.
        value: f64,
        /// Declared upper bound.
        bound: f64,
    },
    /// Two distributions were expected to share a support but do not.
    SupportMismatch,
    /// CVaR level outside `(0, 1]`.
    BadLevel(f64),
}

impl fmt::Display for DistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistError::EmptySupport => write!(f, "support is empty"),
            DistError::LengthMismatch { support, weights } => write!(
                f,
                "support has {support} points but {weights} weights were given"
            ),
            DistError::NonFinite => write!(f, "support values and weights must be finite"),
            DistError::NegativeWeight(w) => write!(f, "negative weight {w}"),
            DistError::WeightSum(s) => {
                write!(f, "weights sum to {s}, more than {WEIGHT_SUM_TOL} from 1")
            }
            DistError::OutOfBound { value, bound } => {
                write!(f, "support value {value} outside [0, {bound}]")
            }
            DistError::SupportMismatch => write!(f, "distributions do not share a support"),
            DistError::BadLevel(a) => write!(f, "CVaR level {a} outside (0, 1]"),
        }
    }
}

impl core::error::Error for DistError {}

/// A distribution with finite support: ascending values and the probability
/// mass carried by each.
///
/// Construction sorts the support, merges duplicate values by summing their
/// weights (CVaR is invariant under this merge) and renormalises the weights
/// when their sum drifts from one by at most [`WEIGHT_SUM_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteDist {
    /// Builds a distribution from unsorted `(value, mass)` pairs.
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self, DistError> {
        if support.is_empty() {
            return Err(DistError::EmptySupport);
        }
        if support.len() != weights.len() {
            return Err(DistError::LengthMismatch {
                support: support.len(),
                weights: weights.len(),
            });
        }
        if support.iter().chain(weights.iter()).any(|v| !v.is_finite()) {
            return Err(DistError::NonFinite);
        }
        if let Some(&w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(DistError::NegativeWeight(w));
        }
        let total = kahan_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(DistError::WeightSum(total));
        }

        let mut pairs: Vec<(f64, f64)> = support.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        // Merge duplicate support points, renormalising as we go.
        let mut merged_support = Vec::with_capacity(pairs.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match merged_support.last() {
                Some(&last) if last == x => *merged_weights.last_mut().unwrap() += w / total,
                _ => {
                    merged_support.push(x);
                    merged_weights.push(w / total);
                }
            }
        }
        Ok(Self {
            support: merged_support,
            weights: merged_weights,
        })
    }

    /// Builds a distribution and additionally checks that every support
    /// value lies in `[0, bound]`.
    pub fn new_bounded(
        support: Vec<f64>,
        weights: Vec<f64>,
        bound: f64,
    ) -> Result<Self, DistError> {
        let dist = Self::new(support, weights)?;
        if let Some(&value) = dist
            .support
            .iter()
            .find(|&&x| !(0.0..=bound).contains(&x))
        {
            return Err(DistError::OutOfBound { value, bound });
        }
        Ok(dist)
    }

    /// Point mass at `x`.
    pub fn dirac(x: f64) -> Self {
        Self {
            support: alloc::vec![x],
            weights: alloc::vec![1.0],
        }
    }

    /// Ascending support values.
    #[inline]
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// Probability mass per support value (same order as [`support`](Self::support)).
    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of support points after duplicate merging.
    #[inline]
    pub fn len(&self) -> usize {
        self.support.len()
    }

    /// Always false: construction rejects empty supports.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Largest support value.
    #[inline]
    pub fn max_value(&self) -> f64 {
        *self.support.last().unwrap()
    }

    /// Mean of the distribution.
    pub fn mean(&self) -> f64 {
        kahan_sum(
            self.support
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| x * w),
        )
    }

    /// CVaR at `level` via the discrete closed form.
    pub fn cvar(&self, level: CvarLevel) -> f64 {
        cvar_sorted(&self.support, &self.weights, level)
    }

    /// The cumulative distribution function as a step function.
    pub fn cdf(&self) -> StepCdf {
        let mut cum = Vec::with_capacity(self.weights.len());
        let mut acc = KahanSum::default();
        for &w in &self.weights {
            acc.add(w);
            cum.push(acc.value().min(1.0));
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        StepCdf {
            points: self.support.clone(),
            cumulative: cum,
        }
    }
}

/// CVaR of a weighted sample sorted ascending.
///
/// `values` must be ascending (duplicates allowed, weights need not be
/// merged) and `weights` must be normalised. The quantile index is the
/// first position where the compensated cumulative mass reaches `alpha`;
/// the comparison is exact, with no epsilon slack.
pub fn cvar_sorted(values: &[f64], weights: &[f64], level: CvarLevel) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    debug_assert!(!values.is_empty());
    let alpha = level.value();
    let mut mass = KahanSum::default();
    let mut partial = KahanSum::default();
    for (i, (&x, &w)) in values.iter().zip(weights).enumerate() {
        let below = mass.value();
        mass.add(w);
        if mass.value() >= alpha || i == values.len() - 1 {
            // Written so that a point mass returns its value exactly.
            return partial.value() / alpha + (1.0 - below / alpha) * x;
        }
        partial.add(w * x);
    }
    unreachable!("empty sample")
}

/// CVaR of sorted samples under uniform weights.
pub fn cvar_empirical(sorted: &[f64], level: CvarLevel) -> f64 {
    let alpha = level.value();
    let n = sorted.len();
    debug_assert!(n > 0);
    // ceil(alpha * n) clamped into [1, n]: the quantile index.
    let idx = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    let w = 1.0 / n as f64;
    let partial = kahan_sum(sorted[..idx - 1].iter().map(|&x| x * w));
    partial / alpha + (1.0 - (idx - 1) as f64 * w / alpha) * sorted[idx - 1]
}

/// CVaR evaluated directly from the defining supremum over the support.
///
/// O(M^2) reference implementation kept deliberately independent of
/// [`cvar_sorted`]; used by tests to cross-check the closed form.
pub fn cvar_sup(dist: &DiscreteDist, level: CvarLevel) -> f64 {
    let alpha = level.value();
    let mut best = f64::NEG_INFINITY;
    for &x in dist.support() {
        let shortfall: f64 = dist
            .support()
            .iter()
            .zip(dist.weights())
            .map(|(&xi, &w)| w * (x - xi).max(0.0))
            .sum();
        best = best.max(x - shortfall / alpha);
    }
    best
}

/// Sup-norm distance between the weight vectors of two distributions on the
/// same support.
///
/// Callers align differing supports first (see [`align_supports`]); a
/// mismatch here is an error rather than a silent answer.
pub fn sup_distance(a: &DiscreteDist, b: &DiscreteDist) -> Result<f64, DistError> {
    if a.support != b.support {
        return Err(DistError::SupportMismatch);
    }
    Ok(a.weights
        .iter()
        .zip(&b.weights)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Re-expresses two distributions on the union of their supports, padding
/// with zero weights where a value is missing.
pub fn align_supports(a: &DiscreteDist, b: &DiscreteDist) -> (DiscreteDist, DiscreteDist) {
    let mut union: Vec<f64> = a.support.iter().chain(b.support.iter()).copied().collect();
    union.sort_by(f64::total_cmp);
    union.dedup();
    let spread = |d: &DiscreteDist| {
        let weights = union
            .iter()
            .map(|&x| match d.support.binary_search_by(|v| v.total_cmp(&x)) {
                Ok(i) => d.weights[i],
                Err(_) => 0.0,
            })
            .collect();
        DiscreteDist {
            support: union.clone(),
            weights,
        }
    };
    (spread(a), spread(b))
}

/// A right-continuous step CDF on `[0, B]`: breakpoints ascending with the
/// cumulative mass attained at each.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    points: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepCdf {
    /// Builds a CDF from ascending breakpoints and the cumulative values
    /// attained there.
    pub fn new(points: Vec<f64>, cumulative: Vec<f64>) -> Result<Self, DistError> {
        if points.is_empty() {
            return Err(DistError::EmptySupport);
        }
        if points.len() != cumulative.len() {
            return Err(DistError::LengthMismatch {
                support: points.len(),
                weights: cumulative.len(),
            });
        }
        if points.windows(2).any(|w| w[0] >= w[1])
            || cumulative.windows(2).any(|w| w[0] > w[1])
            || points
                .iter()
                .chain(cumulative.iter())
                .any(|v| !v.is_finite())
        {
            return Err(DistError::NonFinite);
        }
        Ok(Self { points, cumulative })
    }

    /// `F(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        match self.points.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => self.cumulative[i],
            Err(0) => 0.0,
            Err(i) => self.cumulative[i - 1],
        }
    }

    /// Breakpoint positions.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Sup-norm distance between two step CDFs.
    pub fn sup_norm(&self, other: &StepCdf) -> f64 {
        let mut worst = 0.0f64;
        for &x in self.points.iter().chain(other.points.iter()) {
            worst = worst.max((self.eval(x) - other.eval(x)).abs());
        }
        worst
    }
}

/// Default absolute tolerance for the Levy-distance bisection.
pub const LEVY_TOL: f64 = 1e-9;

/// Levy distance between two step CDFs:
/// `inf { eps > 0 : F(x-eps)-eps <= G(x) <= F(x+eps)+eps for all x }`,
/// computed by bisection on `eps` over `[0, 1]` to absolute tolerance
/// `tol`. Always at most the sup-norm of the CDF difference.
pub fn levy_distance(f: &StepCdf, g: &StepCdf, tol: f64) -> f64 {
    // Both sides of each constraint are right-continuous step functions of
    // x, so it suffices to test at the jump points of either side.
    let feasible = |eps: f64| {
        let lower_ok = g
            .points
            .iter()
            .copied()
            .chain(f.points.iter().map(|&p| p + eps))
            .all(|x| f.eval(x - eps) - eps <= g.eval(x) + 1e-15);
        let upper_ok = g
            .points
            .iter()
            .copied()
            .chain(f.points.iter().map(|&p| p - eps))
            .all(|x| g.eval(x) <= f.eval(x + eps) + eps + 1e-15);
        lower_ok && upper_ok
    };
    if feasible(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    /// Adds a term.
    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    /// Current compensated total.
    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated sum of an iterator of terms.
pub fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}
