//! Experiment configuration: a JSON document mirroring
//! [`ExperimentConfig`] field for field, with CLI flags overriding
//! individual fields.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cvar_bandits_core::dist::{CvarLevel, DiscreteDist, DistError};
use cvar_bandits_core::env::{ArmModel, BanditEnv, EnvError, QuadratureOpts, ReplayMode};
use cvar_bandits_core::policies::{
    BcvtsPolicy, CvarUcbPolicy, McvtsPolicy, Policy, UucbPolicy, DEFAULT_UUCB_C,
};
use cvar_bandits_core::random::{stream_id, RngStream, SampleError, TgmParams};

/// Stream-id role tag for environment generation.
pub const ROLE_ENV: u64 = 1;
/// Stream-id role tag for replication runs.
pub const ROLE_RUN: u64 = 2;

/// Configuration errors (process exit code 2).
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Read(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid distribution: {0}")]
    Dist(#[from] DistError),
    #[error("invalid sampler parameters: {0}")]
    Sampler(#[from] SampleError),
    #[error("invalid environment: {0}")]
    Environment(#[from] EnvError),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// The experiment: environment, policies, horizon, replications,
/// checkpoints, master seed, thread count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Arms, fixed or generated per instance.
    pub environment: EnvironmentSpec,
    /// CVaR level regret is scored at (also the default policy level).
    pub alpha: f64,
    /// Policies to run against every instance.
    pub policies: Vec<PolicySpec>,
    /// Number of rounds per replication.
    pub horizon: u64,
    /// Replications per (instance, policy) pair.
    pub replications: u64,
    /// Rounds at which cumulative regret is recorded; defaults to a
    /// geometric grid of 32 points from 10 to the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    /// Master seed; everything downstream derives from it.
    pub seed: u64,
    /// Worker threads (0 = one per core).
    #[serde(default)]
    pub threads: usize,
    /// Numerical knobs that rarely need touching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advanced: Option<AdvancedOpts>,
}

/// Advanced numerical knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdvancedOpts {
    /// Quadrature node count for mixture true-CVaR evaluation.
    pub quadrature_nodes: usize,
    /// Quantile bisection tolerance for mixture true-CVaR evaluation.
    pub quantile_tol: f64,
}

impl Default for AdvancedOpts {
    fn default() -> Self {
        let q = QuadratureOpts::default();
        Self {
            quadrature_nodes: q.nodes,
            quantile_tol: q.quantile_tol,
        }
    }
}

impl AdvancedOpts {
    /// As core quadrature options.
    pub fn quadrature(&self) -> QuadratureOpts {
        QuadratureOpts {
            nodes: self.quadrature_nodes,
            quantile_tol: self.quantile_tol,
        }
    }
}

/// Which support grid a random multinomial environment uses when no
/// explicit support is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SupportVariant {
    /// `{0, 0.1, ..., 1}` (eleven points, the default).
    #[default]
    ElevenPoint,
    /// `{0.1, 0.2, ..., 1}` (ten points).
    TenPoint,
}

impl SupportVariant {
    fn support(self) -> Vec<f64> {
        match self {
            SupportVariant::ElevenPoint => (0..=10).map(|i| i as f64 / 10.0).collect(),
            SupportVariant::TenPoint => (1..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

/// Environment description: fixed arms or a random-instance generator
/// with an instance count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    /// Explicit arms; a single instance.
    Fixed {
        /// The arms.
        arms: Vec<ArmSpec>,
    },
    /// Arms drawn uniformly from the simplex on a common support.
    RandomMultinomial {
        /// Number of arms per instance.
        arms: usize,
        /// Number of random instances.
        instances: u64,
        /// Common support; overrides `support_variant` when present.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<Vec<f64>>,
        /// Default support grid when `support` is absent.
        #[serde(default)]
        support_variant: SupportVariant,
    },
    /// Truncated-Gaussian-mixture arms with random modes on `[0, 1]`.
    RandomTgm {
        /// Number of arms per instance.
        arms: usize,
        /// Number of random instances.
        instances: u64,
        /// Modes per arm.
        modes: usize,
        /// Uniform range for mode means.
        mean_range: (f64, f64),
        /// Uniform range for mode standard deviations.
        sd_range: (f64, f64),
    },
    /// Arms replayed from a CSV file: one column per arm, header row of
    /// arm names, numeric rows are successive samples.
    TraceCsv {
        /// Path to the trace file.
        path: String,
        /// Declared bound applied to every column (values clamped).
        bound: f64,
        /// Resample with replacement instead of sequential replay.
        #[serde(default)]
        resample: bool,
    },
}

/// One explicitly-specified arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArmSpec {
    /// Finite-support arm.
    Multinomial {
        support: Vec<f64>,
        weights: Vec<f64>,
        /// Defaults to the largest support value.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
    /// Truncated Gaussian mixture.
    Tgm {
        means: Vec<f64>,
        sds: Vec<f64>,
        mode_weights: Vec<f64>,
        bound: f64,
    },
    /// Inline recorded samples.
    Trace {
        samples: Vec<f64>,
        bound: f64,
        #[serde(default)]
        resample: bool,
    },
}

impl ArmSpec {
    fn build(&self) -> Result<ArmModel, ConfigError> {
        match self {
            ArmSpec::Multinomial {
                support,
                weights,
                bound,
            } => {
                let dist = DiscreteDist::new(support.clone(), weights.clone())?;
                let bound = bound.unwrap_or_else(|| dist.max_value());
                Ok(ArmModel::multinomial(dist, bound)?)
            }
            ArmSpec::Tgm {
                means,
                sds,
                mode_weights,
                bound,
            } => Ok(ArmModel::tgm(TgmParams::new(
                means.clone(),
                sds.clone(),
                mode_weights.clone(),
                *bound,
            )?)),
            ArmSpec::Trace {
                samples,
                bound,
                resample,
            } => {
                let mode = if *resample {
                    ReplayMode::WithReplacement
                } else {
                    ReplayMode::Sequential
                };
                let (arm, clamped) = ArmModel::trace(samples.clone(), *bound, mode)?;
                if clamped > 0 {
                    log::warn!("{clamped} inline trace values clamped into [0, {bound}]");
                }
                Ok(arm)
            }
        }
    }
}

/// One policy entry with its knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicySpec {
    /// Which algorithm.
    pub kind: PolicyKind,
    /// Report name; defaults to the algorithm's own name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Policy-side CVaR level; defaults to the experiment level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Exploration constant for U-UCB; defaults to 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Support bound override for the UCB baselines; defaults to the
    /// largest arm bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

/// The implemented algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Multinomial CVaR Thompson Sampling (needs multinomial arms).
    MCvts,
    /// Bounded-support CVaR Thompson Sampling.
    BCvts,
    /// Empirical CVaR plus concentration bonus.
    UUcb,
    /// Optimistic-CDF CVaR index.
    CvarUcb,
}

impl PolicyKind {
    fn default_name(self) -> &'static str {
        match self {
            PolicyKind::MCvts => "m-cvts",
            PolicyKind::BCvts => "b-cvts",
            PolicyKind::UUcb => "u-ucb",
            PolicyKind::CvarUcb => "cvar-ucb",
        }
    }
}

impl PolicySpec {
    /// Bare spec with defaults for everything but the kind.
    pub fn of(kind: PolicyKind) -> Self {
        Self {
            kind,
            name: None,
            alpha: None,
            c: None,
            bound: None,
        }
    }

    /// The name this policy reports under.
    pub fn name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.kind.default_name().to_string())
    }

    /// Instantiates fresh policy state for one replication against `env`.
    pub fn build(
        &self,
        env: &BanditEnv,
        experiment_alpha: CvarLevel,
    ) -> Result<Box<dyn Policy>, ConfigError> {
        let alpha = match self.alpha {
            Some(a) => CvarLevel::new(a)?,
            None => experiment_alpha,
        };
        let max_bound = env
            .arms()
            .iter()
            .map(ArmModel::bound)
            .fold(f64::NEG_INFINITY, f64::max);
        let bound = self.bound.unwrap_or(max_bound);
        Ok(match self.kind {
            PolicyKind::MCvts => {
                let supports = env
                    .arms()
                    .iter()
                    .map(|arm| match arm.kind() {
                        cvar_bandits_core::env::ArmKind::Multinomial(d) => {
                            Ok(d.support().to_vec())
                        }
                        _ => Err(invalid("m-cvts needs multinomial arms with known support")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Box::new(McvtsPolicy::new(supports, alpha))
            }
            PolicyKind::BCvts => {
                let bounds = env.arms().iter().map(ArmModel::bound).collect();
                Box::new(BcvtsPolicy::new(bounds, alpha))
            }
            PolicyKind::UUcb => Box::new(UucbPolicy::new(
                env.num_arms(),
                bound,
                alpha,
                self.c.unwrap_or(DEFAULT_UUCB_C),
            )),
            PolicyKind::CvarUcb => Box::new(CvarUcbPolicy::new(env.num_arms(), bound, alpha)),
        })
    }
}

impl ExperimentConfig {
    /// Loads and validates a JSON config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    /// Validates cross-field invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        CvarLevel::new(self.alpha)?;
        if self.policies.is_empty() {
            return Err(invalid("at least one policy is required"));
        }
        let mut names: Vec<String> = self.policies.iter().map(PolicySpec::name).collect();
        names.sort();
        names.dedup();
        if names.len() != self.policies.len() {
            return Err(invalid(
                "duplicate policy names; set an explicit \"name\" per entry",
            ));
        }
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        let k = match &self.environment {
            EnvironmentSpec::Fixed { arms } => arms.len(),
            EnvironmentSpec::RandomMultinomial { arms, .. } => *arms,
            EnvironmentSpec::RandomTgm { arms, .. } => *arms,
            EnvironmentSpec::TraceCsv { .. } => 2, // checked at load time
        };
        if k < 2 {
            return Err(invalid("an environment needs at least two arms"));
        }
        if self.horizon < k as u64 {
            return Err(invalid("horizon must be at least the number of arms"));
        }
        if let Some(cps) = &self.checkpoints {
            // An empty grid is allowed: nothing is recorded.
            if cps.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("checkpoints must be strictly increasing"));
            }
            if let (Some(&first), Some(&last)) = (cps.first(), cps.last()) {
                if first < 1 || last > self.horizon {
                    return Err(invalid("checkpoints must lie in [1, horizon]"));
                }
            }
        }
        match &self.environment {
            EnvironmentSpec::RandomMultinomial {
                instances, support, ..
            } => {
                if *instances == 0 {
                    return Err(invalid("instance count must be at least 1"));
                }
                if let Some(s) = support {
                    if s.len() < 2 {
                        return Err(invalid("support needs at least two points"));
                    }
                }
            }
            EnvironmentSpec::RandomTgm {
                instances, modes, ..
            } => {
                if *instances == 0 {
                    return Err(invalid("instance count must be at least 1"));
                }
                if *modes == 0 {
                    return Err(invalid("modes must be at least 1"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Experiment CVaR level.
    pub fn level(&self) -> CvarLevel {
        CvarLevel::new(self.alpha).expect("validated")
    }

    /// The checkpoint grid: explicit, or geometric with 32 points from 10
    /// (clamped to the horizon) up to the horizon.
    pub fn checkpoint_grid(&self) -> Vec<u64> {
        if let Some(cps) = &self.checkpoints {
            return cps.clone();
        }
        geometric_checkpoints(self.horizon, 32)
    }

    /// Quadrature knobs.
    pub fn quadrature(&self) -> QuadratureOpts {
        self.advanced.unwrap_or_default().quadrature()
    }

    /// Materialises the environment instances. Random variants derive one
    /// stream per instance from `(seed, ROLE_ENV, index)` so instances do
    /// not depend on the policy list or execution order.
    pub fn build_instances(&self) -> Result<Vec<BanditEnv>, ConfigError> {
        let alpha = self.level();
        let opts = self.quadrature();
        match &self.environment {
            EnvironmentSpec::Fixed { arms } => {
                let arms = arms
                    .iter()
                    .map(ArmSpec::build)
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(vec![BanditEnv::with_opts(arms, alpha, &opts)?])
            }
            EnvironmentSpec::RandomMultinomial {
                arms,
                instances,
                support,
                support_variant,
            } => {
                let support = support
                    .clone()
                    .unwrap_or_else(|| support_variant.support());
                (0..*instances)
                    .map(|i| {
                        let mut rng =
                            RngStream::new(self.seed, stream_id(&[ROLE_ENV, i]));
                        Ok(BanditEnv::random_multinomial(
                            &mut rng, *arms, &support, alpha,
                        )?)
                    })
                    .collect()
            }
            EnvironmentSpec::RandomTgm {
                arms,
                instances,
                modes,
                mean_range,
                sd_range,
            } => (0..*instances)
                .map(|i| {
                    let mut rng = RngStream::new(self.seed, stream_id(&[ROLE_ENV, i]));
                    Ok(BanditEnv::random_tgm(
                        &mut rng,
                        *arms,
                        *modes,
                        *mean_range,
                        *sd_range,
                        alpha,
                    )?)
                })
                .collect(),
            EnvironmentSpec::TraceCsv {
                path,
                bound,
                resample,
            } => {
                let mode = if *resample {
                    ReplayMode::WithReplacement
                } else {
                    ReplayMode::Sequential
                };
                let (arms, clamped) = load_trace_csv(path, *bound, mode)?;
                if clamped > 0 {
                    log::warn!("{clamped} trace values clamped into [0, {bound}]");
                }
                Ok(vec![BanditEnv::with_opts(arms, alpha, &opts)?])
            }
        }
    }
}

/// Geometric grid of `points` checkpoints from 10 to `horizon`
/// (deduplicated after rounding; always ends at the horizon).
pub fn geometric_checkpoints(horizon: u64, points: usize) -> Vec<u64> {
    let lo = 10.0f64.min(horizon as f64);
    let hi = horizon as f64;
    let mut grid: Vec<u64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points.max(2) - 1) as f64;
            (lo * (hi / lo).powf(t)).round() as u64
        })
        .collect();
    grid.dedup();
    grid
}

/// Loads a trace CSV: header row of arm names, one column per arm.
/// Returns the arms plus the number of values clamped into `[0, bound]`.
pub fn load_trace_csv(
    path: &str,
    bound: f64,
    mode: ReplayMode,
) -> Result<(Vec<ArmModel>, usize), ConfigError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| invalid("trace file is empty"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.len() < 2 {
        return Err(invalid("a trace file needs at least two arm columns"));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(invalid(format!(
                "trace row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                names.len()
            )));
        }
        for (col, field) in columns.iter_mut().zip(&fields) {
            let value: f64 = field.parse().map_err(|_| {
                invalid(format!("trace row {}: bad number {field:?}", lineno + 2))
            })?;
            col.push(value);
        }
    }
    let mut total_clamped = 0usize;
    let arms = columns
        .into_iter()
        .map(|samples| {
            let (arm, clamped) = ArmModel::trace(samples, bound, mode)?;
            total_clamped += clamped;
            Ok(arm)
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    Ok((arms, total_clamped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config() -> ExperimentConfig {
        ExperimentConfig {
            environment: EnvironmentSpec::RandomMultinomial {
                arms: 2,
                instances: 1,
                support: None,
                support_variant: SupportVariant::default(),
            },
            alpha: 0.5,
            policies: vec![PolicySpec::of(PolicyKind::BCvts)],
            horizon: 100,
            replications: 1,
            checkpoints: None,
            seed: 0,
            threads: 0,
            advanced: None,
        }
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut c = minimal_config();
        c.alpha = 0.0;
        assert!(c.validate().is_err());

        let mut c = minimal_config();
        c.policies.clear();
        assert!(c.validate().is_err());

        let mut c = minimal_config();
        c.horizon = 1;
        assert!(c.validate().is_err());

        let mut c = minimal_config();
        c.checkpoints = Some(vec![10, 5]);
        assert!(c.validate().is_err());

        let mut c = minimal_config();
        c.checkpoints = Some(vec![10, 200]);
        assert!(c.validate().is_err());

        let mut c = minimal_config();
        c.policies = vec![
            PolicySpec::of(PolicyKind::BCvts),
            PolicySpec::of(PolicyKind::BCvts),
        ];
        assert!(c.validate().is_err());

        assert!(minimal_config().validate().is_ok());
    }

    #[test]
    fn support_variants() {
        assert_eq!(SupportVariant::ElevenPoint.support().len(), 11);
        assert_eq!(SupportVariant::ElevenPoint.support()[0], 0.0);
        assert_eq!(SupportVariant::TenPoint.support().len(), 10);
        assert_eq!(SupportVariant::TenPoint.support()[0], 0.1);
    }

    #[test]
    fn geometric_grid_shape() {
        let grid = geometric_checkpoints(10_000, 32);
        assert_eq!(*grid.first().unwrap(), 10);
        assert_eq!(*grid.last().unwrap(), 10_000);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn instances_are_reproducible_and_policy_independent() {
        let c = minimal_config();
        let a = c.build_instances().unwrap();
        let mut c2 = minimal_config();
        c2.policies = vec![PolicySpec::of(PolicyKind::UUcb)];
        let b = c2.build_instances().unwrap();
        assert_eq!(a[0].true_cvars(), b[0].true_cvars());
    }

    #[test]
    fn mcvts_rejects_non_multinomial_arms() {
        let mut c = minimal_config();
        c.environment = EnvironmentSpec::RandomTgm {
            arms: 2,
            instances: 1,
            modes: 2,
            mean_range: (0.25, 1.0),
            sd_range: (0.05, 0.1),
        };
        c.policies = vec![PolicySpec::of(PolicyKind::MCvts)];
        let env = &c.build_instances().unwrap()[0];
        assert!(c.policies[0].build(env, c.level()).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = minimal_config();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.horizon, c.horizon);
        assert_eq!(back.policies.len(), 1);
    }
}
