//! Optimism-based baselines: U-UCB (empirical CVaR plus a concentration
//! bonus) and CVaR-UCB (CVaR of a DKW-optimistic empirical CDF).
//!
//! Indices are undefined before an arm has a sample, so both policies
//! force one pull per arm in rounds `1..K` (round-robin) before switching
//! to their index.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dist::{cvar_empirical, CvarLevel, KahanSum};
use crate::policies::{argmax_select, clamp_reward, Policy};
use crate::random::RngStream;

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Default exploration constant in the U-UCB bonus.
pub const DEFAULT_UUCB_C: f64 = 2.0;

/// Per-arm observation history kept sorted for quantile scans.
#[derive(Debug, Clone, Default)]
struct SortedObs {
    values: Vec<f64>,
}

impl SortedObs {
    fn insert(&mut self, x: f64) {
        let pos = self.values.partition_point(|&v| v < x);
        self.values.insert(pos, x);
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// U-UCB: empirical CVaR plus the bonus `(U/a) sqrt(C log t / (2 N))`.
pub struct UucbPolicy {
    arms: Vec<SortedObs>,
    alpha: CvarLevel,
    /// Known upper bound on every arm's support.
    bound: f64,
    /// Exploration constant `C` in the bonus.
    c: f64,
}

impl UucbPolicy {
    /// Builds the policy for `num_arms` arms bounded by `bound`, with
    /// exploration constant `c` (use [`DEFAULT_UUCB_C`] by default).
    pub fn new(num_arms: usize, bound: f64, alpha: CvarLevel, c: f64) -> Self {
        assert!(num_arms > 0 && bound > 0.0 && c > 0.0);
        Self {
            arms: alloc::vec![SortedObs::default(); num_arms],
            alpha,
            bound,
            c,
        }
    }
}

impl Policy for UucbPolicy {
    fn name(&self) -> String {
        "u-ucb".to_string()
    }

    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn index(&mut self, arm: usize, t: u64, _rng: &mut RngStream) -> f64 {
        let obs = &self.arms[arm];
        debug_assert!(!obs.is_empty(), "index queried before the forced pull");
        let empirical = cvar_empirical(&obs.values, self.alpha);
        let n = obs.len() as f64;
        let bonus =
            self.bound / self.alpha.value() * (self.c * (t as f64).ln() / (2.0 * n)).sqrt();
        empirical + bonus
    }

    fn select(&mut self, t: u64, rng: &mut RngStream) -> usize {
        if let Some(arm) = self.arms.iter().position(SortedObs::is_empty) {
            return arm;
        }
        argmax_select(self, t, rng)
    }

    fn update(&mut self, arm: usize, reward: f64) {
        let reward = clamp_reward(reward, self.bound);
        self.arms[arm].insert(reward);
    }
}

/// CVaR-UCB: the index is the CVaR of an optimistic version of the
/// empirical distribution, obtained by taking mass `eps` away from the
/// smallest observations and placing it as an atom at the bound, with
/// `eps = min(1, sqrt(ln(2 t^2) / (2 N)))` from inverting the DKW band at
/// failure probability `t^-2`. The radius constant is the single tunable
/// of this baseline.
pub struct CvarUcbPolicy {
    arms: Vec<SortedObs>,
    alpha: CvarLevel,
    bound: f64,
}

impl CvarUcbPolicy {
    /// Builds the policy for `num_arms` arms bounded by `bound`.
    pub fn new(num_arms: usize, bound: f64, alpha: CvarLevel) -> Self {
        assert!(num_arms > 0 && bound > 0.0);
        Self {
            arms: alloc::vec![SortedObs::default(); num_arms],
            alpha,
            bound,
        }
    }
}

impl Policy for CvarUcbPolicy {
    fn name(&self) -> String {
        "cvar-ucb".to_string()
    }

    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn index(&mut self, arm: usize, t: u64, _rng: &mut RngStream) -> f64 {
        let obs = &self.arms[arm];
        debug_assert!(!obs.is_empty(), "index queried before the forced pull");
        let n = obs.len() as f64;
        let eps = (1.0f64).min(((2.0 * (t * t) as f64).ln() / (2.0 * n)).sqrt());
        optimistic_cvar(&obs.values, self.bound, eps, self.alpha)
    }

    fn select(&mut self, t: u64, rng: &mut RngStream) -> usize {
        if let Some(arm) = self.arms.iter().position(SortedObs::is_empty) {
            return arm;
        }
        argmax_select(self, t, rng)
    }

    fn update(&mut self, arm: usize, reward: f64) {
        let reward = clamp_reward(reward, self.bound);
        self.arms[arm].insert(reward);
    }
}

/// CVaR of the optimistic empirical distribution: remove total mass `eps`
/// greedily from the smallest of the (uniformly weighted, sorted) samples
/// and put it back as an atom at `upper`.
fn optimistic_cvar(sorted: &[f64], upper: f64, eps: f64, level: CvarLevel) -> f64 {
    if eps >= 1.0 {
        return upper;
    }
    let alpha = level.value();
    let w = 1.0 / sorted.len() as f64;
    let mut to_remove = eps;
    let mut mass = KahanSum::default();
    let mut partial = KahanSum::default();
    for &x in sorted {
        let mut wi = w;
        if to_remove > 0.0 {
            let taken = to_remove.min(wi);
            wi -= taken;
            to_remove -= taken;
            if wi == 0.0 {
                continue;
            }
        }
        let below = mass.value();
        mass.add(wi);
        if mass.value() >= alpha {
            return partial.value() / alpha + (1.0 - below / alpha) * x;
        }
        partial.add(wi * x);
    }
    // Whatever mass is left sits as the atom at the bound.
    let below = mass.value();
    partial.value() / alpha + (1.0 - below / alpha) * upper
}
