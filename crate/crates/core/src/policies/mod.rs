//! Bandit algorithms behind one [`Policy`] interface.
//!
//! Each round the driver asks the policy for an index per arm, plays the
//! argmax (ties broken uniformly at random through the policy's stream)
//! and feeds the observed reward back. Four algorithms are provided:
//!
//! - [`McvtsPolicy`] — Thompson Sampling for multinomial arms with known
//!   support: Dirichlet posterior over the weights, index = CVaR of a
//!   posterior sample;
//! - [`BcvtsPolicy`] — non-parametric Thompson Sampling for bounded arms:
//!   index = CVaR of the observed history (seeded with the bound) under a
//!   uniform random re-weighting;
//! - [`UucbPolicy`] — empirical CVaR plus a `(U/a) sqrt(C log t / (2 N))`
//!   bonus from CVaR concentration;
//! - [`CvarUcbPolicy`] — CVaR of an optimistic empirical CDF obtained by
//!   shifting mass inside a DKW confidence band toward the upper bound.
//!
//! One policy instance drives one replication; instances are independent
//! and never shared across threads.

mod thompson;
mod ucb;

pub use thompson::{BcvtsPolicy, McvtsPolicy};
pub use ucb::{CvarUcbPolicy, UucbPolicy, DEFAULT_UUCB_C};

use alloc::string::String;

use rand::Rng;

use crate::random::RngStream;

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// A sequential arm-selection strategy.
pub trait Policy {
    /// Short stable identifier used in reports and seed derivation.
    fn name(&self) -> String;

    /// Number of arms.
    fn num_arms(&self) -> usize;

    /// The index of one arm at round `t` (1-based). May consume
    /// randomness (Thompson policies do).
    fn index(&mut self, arm: usize, t: u64, rng: &mut RngStream) -> f64;

    /// Chooses the arm to play at round `t`: argmax of the per-arm
    /// indices with uniform random tie-breaking.
    fn select(&mut self, t: u64, rng: &mut RngStream) -> usize {
        argmax_select(self, t, rng)
    }

    /// Records the reward observed after playing `arm`.
    fn update(&mut self, arm: usize, reward: f64);
}

/// Argmax over per-arm indices with uniform random tie-breaking (a
/// reservoir step per tie, so equal indices are kept with equal
/// probability).
pub(crate) fn argmax_select<P: Policy + ?Sized>(
    policy: &mut P,
    t: u64,
    rng: &mut RngStream,
) -> usize {
    let k = policy.num_arms();
    let mut best_value = f64::NEG_INFINITY;
    let mut best_arm = 0;
    let mut ties = 0u32;
    for arm in 0..k {
        let value = policy.index(arm, t, rng);
        if value > best_value {
            best_value = value;
            best_arm = arm;
            ties = 1;
        } else if value == best_value {
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                best_arm = arm;
            }
        }
    }
    best_arm
}

/// Clamps a reward into `[0, bound]`, warning when trace noise pushes an
/// observation outside the declared range.
pub(crate) fn clamp_reward(reward: f64, bound: f64) -> f64 {
    if reward < 0.0 || reward > bound {
        log::warn!("reward {reward} outside [0, {bound}], clamping");
        reward.clamp(0.0, bound)
    } else {
        reward
    }
}

/// Both tails of the CVaR deviation bound for `n` i.i.d. samples from a
/// distribution on `[0, B]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvarDeviationBounds {
    /// Bound on `P(empirical CVaR >= CVaR + eps)`:
    /// `3 exp(-(a/5) (eps/B)^2 n)`.
    pub upper: f64,
    /// Bound on `P(empirical CVaR <= CVaR - eps)`:
    /// `exp(-2 (a eps / B)^2 n)`.
    pub lower: f64,
}

/// Brown-style deviation bounds for the empirical CVaR. Used by the
/// concentration tests, not by any policy at runtime.
pub fn cvar_deviation_bounds(
    n: u64,
    alpha: crate::dist::CvarLevel,
    epsilon: f64,
    bound: f64,
) -> CvarDeviationBounds {
    let a = alpha.value();
    let ratio = epsilon / bound;
    CvarDeviationBounds {
        upper: 3.0 * (-(a / 5.0) * ratio * ratio * n as f64).exp(),
        lower: (-2.0 * (a * ratio) * (a * ratio) * n as f64).exp(),
    }
}
