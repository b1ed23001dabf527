//! Arm models, the bandit environment, and the true-CVaR oracles used to
//! score regret.
//!
//! An [`ArmModel`] is a generative description of one arm together with its
//! declared support bound. A [`BanditEnv`] fixes the CVaR level, computes
//! each arm's true CVaR once (exactly for multinomials, by quadrature for
//! truncated Gaussian mixtures, empirically for traces) and exposes the
//! per-arm gaps that pseudo-regret accounting needs.
//!
//! Environments are immutable after construction; trace replay cursors
//! live in per-replication [`EnvSampler`] values, so replications never
//! share mutable state.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::dist::{cvar_empirical, CvarLevel, DiscreteDist};
use crate::random::{sample_discrete, sample_tgm, uniform_simplex, RngStream, TgmParams};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Errors from environment construction and sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvError {
    /// A trace arm ran out of samples in sequential replay mode.
    TraceExhausted {
        /// Which arm.
        arm: usize,
    },
    /// A trace arm has no samples at all.
    EmptyTrace,
    /// A multinomial arm's support exceeds its declared bound.
    BoundViolation,
    /// Fewer than two arms.
    TooFewArms,
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::TraceExhausted { arm } => {
                write!(f, "trace for arm {arm} exhausted in sequential replay")
            }
            EnvError::EmptyTrace => write!(f, "trace arm has no samples"),
            EnvError::BoundViolation => write!(f, "arm support exceeds its declared bound"),
            EnvError::TooFewArms => write!(f, "an environment needs at least two arms"),
        }
    }
}

impl core::error::Error for EnvError {}

/// How a trace arm yields samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    /// Replay in file order; exhausting the trace is an error.
    Sequential,
    /// Draw uniformly with replacement, for horizons longer than the trace.
    WithReplacement,
}

/// Generative model of one arm.
#[derive(Debug, Clone)]
pub enum ArmKind {
    /// Known finite-support distribution.
    Multinomial(DiscreteDist),
    /// Truncated Gaussian mixture on `[0, B]`.
    Tgm(TgmParams),
    /// Recorded samples replayed as rewards.
    Trace {
        /// The recorded samples, clamped into `[0, B]`.
        samples: Vec<f64>,
        /// Replay behaviour.
        mode: ReplayMode,
    },
}

/// One arm: a generative model plus its declared support bound.
#[derive(Debug, Clone)]
pub struct ArmModel {
    kind: ArmKind,
    bound: f64,
}

impl ArmModel {
    /// Multinomial arm; the support must lie in `[0, bound]`.
    pub fn multinomial(dist: DiscreteDist, bound: f64) -> Result<Self, EnvError> {
        if dist.support().iter().any(|&x| !(0.0..=bound).contains(&x)) {
            return Err(EnvError::BoundViolation);
        }
        Ok(Self {
            kind: ArmKind::Multinomial(dist),
            bound,
        })
    }

    /// Truncated-Gaussian-mixture arm; the bound comes from the parameters.
    pub fn tgm(params: TgmParams) -> Self {
        let bound = params.bound();
        Self {
            kind: ArmKind::Tgm(params),
            bound,
        }
    }

    /// Trace-replay arm. Samples outside `[0, bound]` are clamped; the
    /// number of clamped values is returned alongside so callers can
    /// report it.
    pub fn trace(
        samples: Vec<f64>,
        bound: f64,
        mode: ReplayMode,
    ) -> Result<(Self, usize), EnvError> {
        if samples.is_empty() {
            return Err(EnvError::EmptyTrace);
        }
        let mut clamped = 0usize;
        let samples = samples
            .into_iter()
            .map(|x| {
                if (0.0..=bound).contains(&x) {
                    x
                } else {
                    clamped += 1;
                    x.clamp(0.0, bound)
                }
            })
            .collect();
        Ok((
            Self {
                kind: ArmKind::Trace { samples, mode },
                bound,
            },
            clamped,
        ))
    }

    /// The generative model.
    pub fn kind(&self) -> &ArmKind {
        &self.kind
    }

    /// Declared support bound `B_k`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// The arm's true CVaR at `level` (see [`true_cvar`]).
    pub fn true_cvar(&self, level: CvarLevel, opts: &QuadratureOpts) -> f64 {
        true_cvar(self, level, opts)
    }
}

/// Knobs of the truncated-Gaussian-mixture CVaR quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOpts {
    /// Composite-midpoint node count for the quantile integral.
    pub nodes: usize,
    /// Absolute tolerance of the quantile bisection.
    pub quantile_tol: f64,
}

impl Default for QuadratureOpts {
    fn default() -> Self {
        Self {
            nodes: 2048,
            quantile_tol: 1e-10,
        }
    }
}

/// The true CVaR of an arm: exact for multinomials, numeric
/// `(1/a) Int_0^a F^{-1}(u) du` with the analytic clipped-mixture CDF for
/// TGM arms, and the empirical CVaR of the full trace for trace arms.
pub fn true_cvar(arm: &ArmModel, level: CvarLevel, opts: &QuadratureOpts) -> f64 {
    match &arm.kind {
        ArmKind::Multinomial(dist) => dist.cvar(level),
        ArmKind::Tgm(params) => tgm_cvar(params, level, opts),
        ArmKind::Trace { samples, .. } => {
            let mut sorted = samples.clone();
            sorted.sort_by(f64::total_cmp);
            cvar_empirical(&sorted, level)
        }
    }
}

/// Standard normal CDF; a zero-sd mode degenerates to a step.
fn gauss_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        if x >= mean {
            1.0
        } else {
            0.0
        }
    } else {
        0.5 * libm::erfc(-(x - mean) / (sd * core::f64::consts::SQRT_2))
    }
}

/// CDF of the clipped mixture at `x` in `[0, B)`; the atom at `B` closes
/// it to one.
fn mixture_cdf(params: &TgmParams, x: f64) -> f64 {
    params
        .means()
        .iter()
        .zip(params.sds())
        .zip(params.mode_weights())
        .map(|((&m, &s), &w)| w * gauss_cdf(x, m, s))
        .sum()
}

/// Quantile of the clipped mixture by bisection: the leftmost `x` with
/// `F(x) >= u`.
fn mixture_quantile(params: &TgmParams, u: f64, tol: f64) -> f64 {
    let b = params.bound();
    if mixture_cdf(params, 0.0) >= u {
        return 0.0;
    }
    if mixture_cdf(params, b) < u {
        return b; // the atom at the bound carries the remaining mass
    }
    let (mut lo, mut hi) = (0.0f64, b);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mixture_cdf(params, mid) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// CVaR of a truncated Gaussian mixture by composite-midpoint quadrature
/// of the quantile function over `(0, alpha)`.
pub fn tgm_cvar(params: &TgmParams, level: CvarLevel, opts: &QuadratureOpts) -> f64 {
    let alpha = level.value();
    let n = opts.nodes.max(1);
    let h = alpha / n as f64;
    let total: f64 = (0..n)
        .map(|i| mixture_quantile(params, (i as f64 + 0.5) * h, opts.quantile_tol))
        .sum();
    total * h / alpha
}

/// A set of arms with the level they are scored at, their true CVaRs, the
/// best value and the per-arm gaps.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    arms: Vec<ArmModel>,
    alpha: CvarLevel,
    true_cvars: Vec<f64>,
    c_star: f64,
    gaps: Vec<f64>,
}

impl BanditEnv {
    /// Scores the arms at `alpha` and freezes the gap structure.
    pub fn new(arms: Vec<ArmModel>, alpha: CvarLevel) -> Result<Self, EnvError> {
        Self::with_opts(arms, alpha, &QuadratureOpts::default())
    }

    /// As [`new`](Self::new) with explicit quadrature knobs.
    pub fn with_opts(
        arms: Vec<ArmModel>,
        alpha: CvarLevel,
        opts: &QuadratureOpts,
    ) -> Result<Self, EnvError> {
        if arms.len() < 2 {
            return Err(EnvError::TooFewArms);
        }
        let true_cvars: Vec<f64> = arms.iter().map(|a| a.true_cvar(alpha, opts)).collect();
        let c_star = true_cvars.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gaps = true_cvars.iter().map(|&c| c_star - c).collect();
        Ok(Self {
            arms,
            alpha,
            true_cvars,
            c_star,
            gaps,
        })
    }

    /// Random multinomial instance: `k` arms on a common support, weight
    /// vectors drawn uniformly from the simplex.
    pub fn random_multinomial(
        rng: &mut RngStream,
        k: usize,
        support: &[f64],
        alpha: CvarLevel,
    ) -> Result<Self, EnvError> {
        if k < 2 {
            return Err(EnvError::TooFewArms);
        }
        let bound = support.iter().copied().fold(0.0f64, f64::max);
        let arms = (0..k)
            .map(|_| {
                let w = uniform_simplex(rng, support.len()).expect("non-empty support");
                let dist = DiscreteDist::new(support.to_vec(), w)
                    .expect("simplex weights form a distribution");
                ArmModel::multinomial(dist, bound)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(arms, alpha)
    }

    /// Random truncated-Gaussian-mixture instance on `[0, 1]`: per arm,
    /// `n_modes` modes with means uniform in `mean_range`, sds uniform in
    /// `sd_range` and mode weights from the uniform simplex.
    pub fn random_tgm(
        rng: &mut RngStream,
        k: usize,
        n_modes: usize,
        mean_range: (f64, f64),
        sd_range: (f64, f64),
        alpha: CvarLevel,
    ) -> Result<Self, EnvError> {
        if k < 2 {
            return Err(EnvError::TooFewArms);
        }
        assert!(n_modes >= 1);
        let arms = (0..k)
            .map(|_| {
                let means = (0..n_modes)
                    .map(|_| sample_range(rng, mean_range))
                    .collect();
                let sds = (0..n_modes).map(|_| sample_range(rng, sd_range)).collect();
                let weights = uniform_simplex(rng, n_modes).expect("n_modes >= 1");
                ArmModel::tgm(
                    TgmParams::new(means, sds, weights, 1.0)
                        .expect("generated parameters are valid"),
                )
            })
            .collect();
        Self::new(arms, alpha)
    }

    /// The arms.
    pub fn arms(&self) -> &[ArmModel] {
        &self.arms
    }

    /// Number of arms.
    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    /// The level the environment is scored at.
    pub fn alpha(&self) -> CvarLevel {
        self.alpha
    }

    /// True CVaR per arm.
    pub fn true_cvars(&self) -> &[f64] {
        &self.true_cvars
    }

    /// Best CVaR across arms.
    pub fn c_star(&self) -> f64 {
        self.c_star
    }

    /// Per-arm CVaR gaps to the best arm (at least one is zero).
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Starts a per-replication sampler holding the trace cursors.
    pub fn sampler(&self) -> EnvSampler<'_> {
        EnvSampler {
            env: self,
            cursors: alloc::vec![0; self.arms.len()],
        }
    }
}

fn sample_range(rng: &mut RngStream, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Per-replication sampling state over a shared environment.
#[derive(Debug, Clone)]
pub struct EnvSampler<'a> {
    env: &'a BanditEnv,
    cursors: Vec<usize>,
}

impl EnvSampler<'_> {
    /// Draws one reward from the arm's generative model. Sequential trace
    /// arms replay in order and report exhaustion as an error.
    pub fn pull(&mut self, arm: usize, rng: &mut RngStream) -> Result<f64, EnvError> {
        match &self.env.arms[arm].kind {
            ArmKind::Multinomial(dist) => Ok(sample_discrete(rng, dist)),
            ArmKind::Tgm(params) => Ok(sample_tgm(rng, params)),
            ArmKind::Trace { samples, mode } => match mode {
                ReplayMode::Sequential => {
                    let cursor = &mut self.cursors[arm];
                    if *cursor >= samples.len() {
                        return Err(EnvError::TraceExhausted { arm });
                    }
                    *cursor += 1;
                    Ok(samples[*cursor - 1])
                }
                ReplayMode::WithReplacement => Ok(samples[rng.gen_range(0..samples.len())]),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn level(a: f64) -> CvarLevel {
        CvarLevel::new(a).unwrap()
    }

    fn multinomial_arm(support: &[f64], weights: &[f64], bound: f64) -> ArmModel {
        ArmModel::multinomial(
            DiscreteDist::new(support.to_vec(), weights.to_vec()).unwrap(),
            bound,
        )
        .unwrap()
    }

    /// The two-mode mixtures used across the environment tests: sd 0.1,
    /// equiprobable modes, bound 1.
    fn two_mode(m1: f64, m2: f64) -> TgmParams {
        TgmParams::new(vec![m1, m2], vec![0.1, 0.1], vec![0.5, 0.5], 1.0).unwrap()
    }

    #[test]
    fn multinomial_true_cvar_is_exact() {
        let opts = QuadratureOpts::default();
        let dirac = multinomial_arm(&[0.7], &[1.0], 1.0);
        for a in [0.05, 0.5, 1.0] {
            assert_eq!(dirac.true_cvar(level(a), &opts), 0.7);
        }
        let coin = multinomial_arm(&[0.0, 1.0], &[0.25, 0.75], 1.0);
        assert!((coin.true_cvar(level(0.5), &opts) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tgm_single_mode_mean() {
        let params = TgmParams::new(vec![0.5], vec![0.1], vec![1.0], 1.0).unwrap();
        let arm = ArmModel::tgm(params);
        let cv = arm.true_cvar(level(1.0), &QuadratureOpts::default());
        // Clipping correction is negligible five sds from either end.
        assert!((cv - 0.5).abs() < 1e-3, "{cv}");
    }

    #[test]
    fn tgm_quadrature_matches_monte_carlo() {
        let arms = [
            two_mode(0.2, 0.5),
            two_mode(0.0, 1.0),
            two_mode(0.3, 0.6),
            two_mode(0.1, 0.65),
        ];
        let opts = QuadratureOpts::default();
        let mut rng = RngStream::new(40, 0);
        let n = 1_000_000usize;
        for (i, params) in arms.iter().enumerate() {
            let mut samples: Vec<f64> = (0..n).map(|_| sample_tgm(&mut rng, params)).collect();
            samples.sort_by(f64::total_cmp);
            for a in [0.1, 0.5, 1.0] {
                let quad = tgm_cvar(params, level(a), &opts);
                let mc = cvar_empirical(&samples, level(a));
                assert!(
                    (quad - mc).abs() < 3e-3,
                    "arm {i} alpha {a}: quadrature {quad} vs monte-carlo {mc}"
                );
            }
        }
    }

    #[test]
    fn tgm_cvar_ordering_features() {
        let opts = QuadratureOpts::default();
        let arms = [
            two_mode(0.2, 0.5),
            two_mode(0.0, 1.0),
            two_mode(0.3, 0.6),
            two_mode(0.1, 0.65),
        ];
        // The concentrated arm wins deep in the tail; the wide-mean arm
        // wins at level one.
        let tail: Vec<f64> = arms.iter().map(|p| tgm_cvar(p, level(0.1), &opts)).collect();
        let best_tail = tail
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(best_tail, 2);
        let means: Vec<f64> = arms.iter().map(|p| tgm_cvar(p, level(1.0), &opts)).collect();
        let best_mean = means
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(best_mean, 1);
    }

    #[test]
    fn trace_true_cvar_is_empirical() {
        let (arm, clamped) =
            ArmModel::trace(vec![0.9, 0.1, 0.5, 0.3], 1.0, ReplayMode::Sequential).unwrap();
        assert_eq!(clamped, 0);
        assert!((arm.true_cvar(level(0.5), &QuadratureOpts::default()) - 0.2).abs() < 1e-12);
        assert!(matches!(
            ArmModel::trace(vec![], 1.0, ReplayMode::Sequential),
            Err(EnvError::EmptyTrace)
        ));
        let (_, clamped) =
            ArmModel::trace(vec![1.4, -0.1, 0.5], 1.0, ReplayMode::Sequential).unwrap();
        assert_eq!(clamped, 2);
    }

    #[test]
    fn gap_structure() {
        let env = BanditEnv::new(
            vec![
                multinomial_arm(&[0.0, 1.0], &[0.5, 0.5], 1.0),
                multinomial_arm(&[0.0, 1.0], &[0.25, 0.75], 1.0),
            ],
            level(0.5),
        )
        .unwrap();
        assert_eq!(env.c_star(), 0.5);
        assert_eq!(env.gaps(), &[0.5, 0.0]);
        assert!(env.gaps().iter().all(|&g| g >= 0.0));
        assert!(env.gaps().contains(&0.0));
    }

    #[test]
    fn pull_dispatch() {
        let mut rng = RngStream::new(41, 0);
        let env = BanditEnv::new(
            vec![
                multinomial_arm(&[0.4], &[1.0], 1.0),
                multinomial_arm(&[0.0, 1.0], &[0.25, 0.75], 1.0),
            ],
            level(0.5),
        )
        .unwrap();
        let mut sampler = env.sampler();
        for _ in 0..20 {
            assert_eq!(sampler.pull(0, &mut rng).unwrap(), 0.4);
        }
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sampler.pull(1, &mut rng).unwrap() == 1.0)
            .count();
        assert!((ones as f64 / n as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn trace_replay_contract() {
        let mut rng = RngStream::new(42, 0);
        let (trace_arm, _) =
            ArmModel::trace(vec![0.1, 0.9], 1.0, ReplayMode::Sequential).unwrap();
        let env = BanditEnv::new(
            vec![trace_arm, multinomial_arm(&[0.5], &[1.0], 1.0)],
            level(0.5),
        )
        .unwrap();
        let mut sampler = env.sampler();
        assert_eq!(sampler.pull(0, &mut rng).unwrap(), 0.1);
        assert_eq!(sampler.pull(0, &mut rng).unwrap(), 0.9);
        assert!(matches!(
            sampler.pull(0, &mut rng),
            Err(EnvError::TraceExhausted { arm: 0 })
        ));
        // Fresh replication, fresh cursor.
        let mut sampler2 = env.sampler();
        assert_eq!(sampler2.pull(0, &mut rng).unwrap(), 0.1);

        let (resampling, _) =
            ArmModel::trace(vec![0.1, 0.9], 1.0, ReplayMode::WithReplacement).unwrap();
        let env = BanditEnv::new(
            vec![resampling, multinomial_arm(&[0.5], &[1.0], 1.0)],
            level(0.5),
        )
        .unwrap();
        let mut sampler = env.sampler();
        for _ in 0..100 {
            let x = sampler.pull(0, &mut rng).unwrap();
            assert!(x == 0.1 || x == 0.9);
        }
    }

    #[test]
    fn random_multinomial_instances() {
        let mut rng = RngStream::new(43, 0);
        let support: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let env = BanditEnv::random_multinomial(&mut rng, 5, &support, level(0.1)).unwrap();
        assert_eq!(env.num_arms(), 5);
        for arm in env.arms() {
            match arm.kind() {
                ArmKind::Multinomial(d) => assert_eq!(d.support(), &support[..]),
                _ => panic!("expected multinomial arms"),
            }
        }
        assert_eq!(env.gaps().iter().filter(|&&g| g == 0.0).count(), 1);

        // On {0, 1} the arm mean is the Dir(1,1) second coordinate,
        // uniform on [0, 1]: check the average of means over instances.
        let mut total = 0.0;
        let instances = 2000;
        for _ in 0..instances {
            let env =
                BanditEnv::random_multinomial(&mut rng, 2, &[0.0, 1.0], level(1.0)).unwrap();
            total += env.true_cvars().iter().sum::<f64>() / 2.0;
        }
        assert!((total / instances as f64 - 0.5).abs() < 0.02);

        assert!(matches!(
            BanditEnv::random_multinomial(&mut rng, 1, &support, level(0.1)),
            Err(EnvError::TooFewArms)
        ));
    }

    #[test]
    fn random_tgm_instances() {
        let mut rng = RngStream::new(44, 0);
        let env = BanditEnv::random_tgm(&mut rng, 30, 10, (0.25, 1.0), (0.0, 0.1), level(0.05))
            .unwrap();
        assert_eq!(env.num_arms(), 30);
        for arm in env.arms() {
            match arm.kind() {
                ArmKind::Tgm(p) => {
                    assert_eq!(p.means().len(), 10);
                    assert!(p.means().iter().all(|&m| (0.25..=1.0).contains(&m)));
                    assert!(p.sds().iter().all(|&s| (0.0..=0.1).contains(&s)));
                    assert_eq!(arm.bound(), 1.0);
                }
                _ => panic!("expected mixture arms"),
            }
        }

        // Collapsed sd range: every mode is an atom, the arm is a
        // ten-point multinomial in all but name.
        let env =
            BanditEnv::random_tgm(&mut rng, 2, 10, (0.25, 1.0), (0.0, 0.0), level(0.5)).unwrap();
        for arm in env.arms() {
            match arm.kind() {
                ArmKind::Tgm(p) => assert!(p.sds().iter().all(|&s| s == 0.0)),
                _ => unreachable!(),
            }
        }

        // Single mode: one clipped Gaussian per arm.
        let env =
            BanditEnv::random_tgm(&mut rng, 2, 1, (0.25, 1.0), (0.05, 0.1), level(0.5)).unwrap();
        for arm in env.arms() {
            match arm.kind() {
                ArmKind::Tgm(p) => assert_eq!(p.means().len(), 1),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn degenerate_tgm_true_cvar() {
        // All-atom mixture: the quadrature must agree with the exact
        // discrete CVaR of the corresponding multinomial.
        let params =
            TgmParams::new(vec![0.3, 0.6, 0.9], vec![0.0, 0.0, 0.0], vec![0.2, 0.5, 0.3], 1.0)
                .unwrap();
        let discrete =
            DiscreteDist::new(vec![0.3, 0.6, 0.9], vec![0.2, 0.5, 0.3]).unwrap();
        let opts = QuadratureOpts::default();
        for a in [0.1, 0.2, 0.5, 0.9, 1.0] {
            let quad = tgm_cvar(&params, level(a), &opts);
            let exact = discrete.cvar(level(a));
            assert!((quad - exact).abs() < 2e-3, "alpha {a}: {quad} vs {exact}");
        }
    }
}
