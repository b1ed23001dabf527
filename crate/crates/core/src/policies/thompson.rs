//! Thompson Sampling policies: multinomial (known support) and bounded
//! (non-parametric) variants.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dist::{cvar_sorted, CvarLevel};
use crate::policies::{clamp_reward, Policy};
use crate::random::{dirichlet, uniform_simplex_fill, RngStream};

/// Thompson Sampling for multinomial arms with known support.
///
/// Each arm keeps a Dirichlet posterior over its weight vector, starting
/// from the flat prior (all concentration parameters one). The index of an
/// arm is the CVaR of one posterior sample on the known support; at level
/// one this is exactly multinomial mean-Thompson-Sampling.
pub struct McvtsPolicy {
    arms: Vec<McvtsArm>,
    alpha: CvarLevel,
}

struct McvtsArm {
    support: Vec<f64>,
    counts: Vec<u64>,
    beta: Vec<f64>,
    bound: f64,
}

impl McvtsPolicy {
    /// Builds the policy from each arm's known support (need not be
    /// sorted; sorted internally).
    pub fn new(supports: Vec<Vec<f64>>, alpha: CvarLevel) -> Self {
        let arms = supports
            .into_iter()
            .map(|mut support| {
                support.sort_by(f64::total_cmp);
                support.dedup();
                assert!(!support.is_empty(), "arm support cannot be empty");
                let m = support.len();
                let bound = *support.last().unwrap();
                McvtsArm {
                    support,
                    counts: alloc::vec![0; m],
                    beta: alloc::vec![1.0; m],
                    bound,
                }
            })
            .collect();
        Self { arms, alpha }
    }

    /// Posterior concentration parameters of one arm (counts + 1).
    pub fn posterior(&self, arm: usize) -> &[f64] {
        &self.arms[arm].beta
    }

    /// Observation counts per support point of one arm.
    pub fn counts(&self, arm: usize) -> &[u64] {
        &self.arms[arm].counts
    }
}

impl Policy for McvtsPolicy {
    fn name(&self) -> String {
        "m-cvts".to_string()
    }

    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn index(&mut self, arm: usize, _t: u64, rng: &mut RngStream) -> f64 {
        let a = &self.arms[arm];
        if a.support.len() == 1 {
            return a.support[0];
        }
        let w = dirichlet(rng, &a.beta).expect("posterior parameters are positive");
        cvar_sorted(&a.support, &w, self.alpha)
    }

    fn update(&mut self, arm: usize, reward: f64) {
        let a = &mut self.arms[arm];
        let reward = clamp_reward(reward, a.bound);
        // Attribute to the nearest support point; multinomial rewards land
        // exactly on one.
        let j = match a.support.binary_search_by(|x| x.total_cmp(&reward)) {
            Ok(j) => j,
            Err(pos) => {
                let j = nearest_of(&a.support, pos, reward);
                log::warn!(
                    "reward {reward} not on the declared support, attributing to {}",
                    a.support[j]
                );
                j
            }
        };
        a.counts[j] += 1;
        a.beta[j] += 1.0;
    }
}

fn nearest_of(support: &[f64], insert_at: usize, value: f64) -> usize {
    match insert_at {
        0 => 0,
        pos if pos == support.len() => support.len() - 1,
        pos => {
            if value - support[pos - 1] <= support[pos] - value {
                pos - 1
            } else {
                pos
            }
        }
    }
}

/// Non-parametric Thompson Sampling for arms bounded in `[0, B_k]`.
///
/// Each arm's history starts as the single point `B_k`; the index is the
/// CVaR of the history under a fresh uniform-simplex re-weighting. No
/// explicit prior: the bound seed alone drives optimism.
pub struct BcvtsPolicy {
    arms: Vec<BcvtsArm>,
    alpha: CvarLevel,
    /// Reused weight buffer; one fresh re-weighting is drawn per index
    /// query, and histories grow with every pull.
    scratch: Vec<f64>,
}

struct BcvtsArm {
    /// Observations sorted ascending, initially `{bound}`.
    observations: Vec<f64>,
    bound: f64,
}

impl BcvtsPolicy {
    /// Builds the policy from each arm's declared upper bound.
    pub fn new(bounds: Vec<f64>, alpha: CvarLevel) -> Self {
        let arms = bounds
            .into_iter()
            .map(|bound| {
                assert!(bound > 0.0, "arm bound must be positive");
                BcvtsArm {
                    observations: alloc::vec![bound],
                    bound,
                }
            })
            .collect();
        Self {
            arms,
            alpha,
            scratch: Vec::new(),
        }
    }

    /// Stored observations of one arm, sorted ascending (includes the
    /// bound seed).
    pub fn observations(&self, arm: usize) -> &[f64] {
        &self.arms[arm].observations
    }
}

impl Policy for BcvtsPolicy {
    fn name(&self) -> String {
        "b-cvts".to_string()
    }

    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn index(&mut self, arm: usize, _t: u64, rng: &mut RngStream) -> f64 {
        let a = &self.arms[arm];
        let n = a.observations.len();
        if n == 1 {
            return a.bound;
        }
        self.scratch.resize(n, 0.0);
        uniform_simplex_fill(rng, &mut self.scratch);
        // The weights are exchangeable, so pairing them with the sorted
        // history preserves the sampling law.
        cvar_sorted(&a.observations, &self.scratch, self.alpha)
    }

    fn update(&mut self, arm: usize, reward: f64) {
        let a = &mut self.arms[arm];
        let reward = clamp_reward(reward, a.bound);
        let pos = a
            .observations
            .partition_point(|&x| x < reward);
        a.observations.insert(pos, reward);
    }
}
