//! Replication running and deterministic parallel orchestration.
//!
//! An experiment expands into a task list over (instance, policy,
//! replication) triples. Tasks run on a work-stealing pool, but every
//! task owns its random streams (derived only from the master seed, the
//! instance index, the replication index and the policy name) and results
//! are aggregated in task order, so the report is byte-identical for any
//! thread count.

use rayon::prelude::*;

use cvar_bandits_core::dist::kahan_sum;
use cvar_bandits_core::env::{BanditEnv, EnvError};
use cvar_bandits_core::policies::Policy;
use cvar_bandits_core::random::{hash_name, stream_id, RngStream};

use crate::config::{ExperimentConfig, ROLE_RUN};
use crate::report::{aggregate, ExperimentReport};
use crate::HarnessError;

/// Per-replication cumulative pseudo-regret sampled at checkpoints, plus
/// final arm-pull counts.
#[derive(Debug, Clone)]
pub struct RegretTrace {
    /// Rounds at which regret was recorded (ascending).
    pub checkpoints: Vec<u64>,
    /// Cumulative gap-weighted pseudo-regret at each checkpoint.
    pub regret: Vec<f64>,
    /// Pull count per arm after the last round.
    pub pulls: Vec<u64>,
}

impl RegretTrace {
    /// Total pulls across arms (equals the horizon).
    pub fn total_pulls(&self) -> u64 {
        self.pulls.iter().sum()
    }

    /// Gap-weighted pull counts; equals the final cumulative regret up to
    /// float accumulation order.
    pub fn regret_from_pulls(&self, gaps: &[f64]) -> f64 {
        kahan_sum(
            self.pulls
                .iter()
                .zip(gaps)
                .map(|(&n, &gap)| n as f64 * gap),
        )
    }
}

/// Plays `policy` against `env` for `horizon` rounds, accumulating
/// gap-based pseudo-regret at the given checkpoints.
pub fn run_replication(
    env: &BanditEnv,
    policy: &mut dyn Policy,
    horizon: u64,
    checkpoints: &[u64],
    rng: &mut RngStream,
) -> Result<RegretTrace, EnvError> {
    let gaps = env.gaps();
    let mut sampler = env.sampler();
    let mut pulls = vec![0u64; env.num_arms()];
    let mut regret = cvar_bandits_core::dist::KahanSum::default();
    let mut recorded = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = checkpoints.iter().copied().peekable();
    for t in 1..=horizon {
        let arm = policy.select(t, rng);
        debug_assert!(arm < env.num_arms());
        let reward = sampler.pull(arm, rng)?;
        policy.update(arm, reward);
        pulls[arm] += 1;
        regret.add(gaps[arm]);
        while next_checkpoint.peek() == Some(&t) {
            recorded.push(regret.value());
            next_checkpoint.next();
        }
    }
    Ok(RegretTrace {
        checkpoints: checkpoints.to_vec(),
        regret: recorded,
        pulls,
    })
}

/// One unit of parallel work.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Task {
    pub instance: usize,
    pub policy: usize,
    pub replication: u64,
}

/// Runs the whole experiment: every (instance, policy, replication)
/// triple, aggregated into the report. Deterministic for a fixed
/// `(config, seed)` regardless of thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let instances = config.build_instances()?;
    let checkpoints = config.checkpoint_grid();
    let alpha = config.level();

    let mut tasks = Vec::new();
    for instance in 0..instances.len() {
        for policy in 0..config.policies.len() {
            for replication in 0..config.replications {
                tasks.push(Task {
                    instance,
                    policy,
                    replication,
                });
            }
        }
    }

    let run_task = |task: &Task| -> Result<RegretTrace, HarnessError> {
        let env = &instances[task.instance];
        let spec = &config.policies[task.policy];
        let mut policy = spec.build(env, alpha)?;
        let mut rng = RngStream::new(
            config.seed,
            stream_id(&[
                ROLE_RUN,
                task.instance as u64,
                task.replication,
                hash_name(&spec.name()),
            ]),
        );
        Ok(run_replication(
            env,
            policy.as_mut(),
            config.horizon,
            &checkpoints,
            &mut rng,
        )?)
    };

    // Ordered collect keys every result to its task index, so aggregation
    // order never depends on scheduling.
    let traces: Vec<RegretTrace> = if config.threads == 1 {
        tasks
            .iter()
            .map(run_task)
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| {
                HarnessError::Config(crate::ConfigError::Invalid(format!(
                    "cannot build thread pool: {e}"
                )))
            })?;
        pool.install(|| {
            tasks
                .par_iter()
                .map(run_task)
                .collect::<Result<Vec<_>, _>>()
        })?
    };

    Ok(aggregate(config, &instances, &tasks, &traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cvar_bandits_core::dist::{CvarLevel, DiscreteDist};
    use cvar_bandits_core::env::ArmModel;
    use rand::Rng;

    fn two_arm_env(alpha: f64) -> BanditEnv {
        let arms = vec![
            ArmModel::multinomial(
                DiscreteDist::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap(),
                1.0,
            )
            .unwrap(),
            ArmModel::multinomial(
                DiscreteDist::new(vec![0.0, 1.0], vec![0.25, 0.75]).unwrap(),
                1.0,
            )
            .unwrap(),
        ];
        BanditEnv::new(arms, CvarLevel::new(alpha).unwrap()).unwrap()
    }

    /// Always plays one arm.
    struct Constant(usize, usize);

    impl Policy for Constant {
        fn name(&self) -> String {
            "constant".into()
        }
        fn num_arms(&self) -> usize {
            self.1
        }
        fn index(&mut self, arm: usize, _t: u64, _rng: &mut RngStream) -> f64 {
            if arm == self.0 {
                1.0
            } else {
                0.0
            }
        }
        fn update(&mut self, _arm: usize, _reward: f64) {}
    }

    /// Plays uniformly at random.
    struct UniformRandom(usize);

    impl Policy for UniformRandom {
        fn name(&self) -> String {
            "uniform".into()
        }
        fn num_arms(&self) -> usize {
            self.0
        }
        fn index(&mut self, _arm: usize, _t: u64, _rng: &mut RngStream) -> f64 {
            0.0
        }
        fn select(&mut self, _t: u64, rng: &mut RngStream) -> usize {
            rng.gen_range(0..self.0)
        }
        fn update(&mut self, _arm: usize, _reward: f64) {}
    }

    #[test]
    fn optimal_play_has_zero_regret() {
        let env = two_arm_env(0.5);
        let mut policy = Constant(1, 2);
        let mut rng = RngStream::new(0, 0);
        let trace =
            run_replication(&env, &mut policy, 500, &[100, 500], &mut rng).unwrap();
        assert_eq!(trace.regret, vec![0.0, 0.0]);
        assert_eq!(trace.pulls, vec![0, 500]);
    }

    #[test]
    fn fixed_suboptimal_play_has_linear_regret() {
        let env = two_arm_env(0.5); // gap of arm 0 is 0.5
        let mut policy = Constant(0, 2);
        let mut rng = RngStream::new(0, 0);
        let trace =
            run_replication(&env, &mut policy, 400, &[10, 400], &mut rng).unwrap();
        assert!((trace.regret[0] - 10.0 * 0.5).abs() < 1e-9);
        assert!((trace.regret[1] - 400.0 * 0.5).abs() < 1e-9);
        assert_eq!(trace.total_pulls(), 400);
        assert!(
            (trace.regret[1] - trace.regret_from_pulls(env.gaps())).abs() < 1e-9
        );
    }

    #[test]
    fn uniform_play_has_half_gap_rate() {
        let env = two_arm_env(0.5);
        let horizon = 20_000u64;
        let mut policy = UniformRandom(2);
        let mut rng = RngStream::new(7, 0);
        let trace =
            run_replication(&env, &mut policy, horizon, &[horizon], &mut rng).unwrap();
        let rate = trace.regret[0] / horizon as f64;
        // Expected rate gap/2; allow three binomial standard errors.
        let se = 0.5 * 0.5 / (horizon as f64).sqrt();
        assert!((rate - 0.25).abs() <= 3.0 * se, "rate {rate}");
    }

    #[test]
    fn regret_is_nondecreasing_and_pull_counted() {
        let env = two_arm_env(0.1);
        let mut policy = UniformRandom(2);
        let mut rng = RngStream::new(9, 0);
        let cps: Vec<u64> = (1..=20).map(|i| i * 50).collect();
        let trace = run_replication(&env, &mut policy, 1000, &cps, &mut rng).unwrap();
        assert!(trace.regret.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(trace.total_pulls(), 1000);
    }
}
