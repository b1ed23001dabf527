//! Aggregation of replication traces and the on-disk report formats:
//! `regret.csv`, `pulls.csv` and `meta.json`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use cvar_bandits_core::env::BanditEnv;

use crate::config::ExperimentConfig;
use crate::runner::{RegretTrace, Task};
use crate::HarnessError;

/// One `regret.csv` row: summary of cumulative regret for a policy at a
/// checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretRow {
    /// Policy name.
    pub policy: String,
    /// Round the regret was recorded at.
    pub checkpoint: u64,
    /// Mean across replications (and instances).
    pub mean: f64,
    /// Spread; see the `std_convention` field of the metadata.
    pub std: f64,
    /// Total replications contributing.
    pub n_reps: u64,
}

/// One `pulls.csv` row: average pull count of an arm under a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PullRow {
    /// Policy name.
    pub policy: String,
    /// Arm index.
    pub arm: usize,
    /// Mean pulls at the horizon.
    pub mean_pulls: f64,
}

/// Resolved experiment metadata, written as `meta.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    /// Crate version that produced the report.
    pub version: String,
    /// Master seed.
    pub seed: u64,
    /// Worker threads used (0 = one per core).
    pub threads: usize,
    /// Number of environment instances.
    pub n_instances: u64,
    /// Replications per (instance, policy).
    pub n_replications: u64,
    /// Which spread convention `regret.csv` carries: with several random
    /// instances the std is taken across per-instance means, otherwise
    /// across replications.
    pub std_convention: String,
    /// The resolved checkpoint grid.
    pub checkpoints: Vec<u64>,
    /// The full configuration the run resolved to.
    pub config: ExperimentConfig,
}

/// Aggregated experiment output.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Regret summaries, one row per (policy, checkpoint).
    pub regret: Vec<RegretRow>,
    /// Pull summaries, one row per (policy, arm).
    pub pulls: Vec<PullRow>,
    /// Run metadata.
    pub meta: Meta,
}

impl ExperimentReport {
    /// Mean regret of `policy` at the final checkpoint.
    pub fn final_mean_regret(&self, policy: &str) -> Option<f64> {
        self.regret
            .iter()
            .rev()
            .find(|r| r.policy == policy)
            .map(|r| r.mean)
    }
}

/// Sequentially folds the ordered traces into the report. Instances and
/// replications are averaged in task order, so the result is independent
/// of how tasks were scheduled.
pub(crate) fn aggregate(
    config: &ExperimentConfig,
    instances: &[BanditEnv],
    tasks: &[Task],
    traces: &[RegretTrace],
) -> ExperimentReport {
    let checkpoints = config.checkpoint_grid();
    let n_instances = instances.len();
    let n_policies = config.policies.len();
    let reps = config.replications;
    let num_arms = instances.first().map_or(0, BanditEnv::num_arms);

    // Per (policy, instance, checkpoint) means across replications.
    let mut instance_means =
        vec![vec![vec![0.0f64; checkpoints.len()]; n_instances]; n_policies];
    // Per (policy, arm) pull totals across everything.
    let mut pull_totals = vec![vec![0.0f64; num_arms]; n_policies];
    // Per (policy, checkpoint) squared-sum accumulators for the
    // single-instance std convention.
    let mut rep_sum = vec![vec![0.0f64; checkpoints.len()]; n_policies];
    let mut rep_sumsq = vec![vec![0.0f64; checkpoints.len()]; n_policies];

    for (task, trace) in tasks.iter().zip(traces) {
        for (c, &value) in trace.regret.iter().enumerate() {
            instance_means[task.policy][task.instance][c] += value / reps as f64;
            rep_sum[task.policy][c] += value;
            rep_sumsq[task.policy][c] += value * value;
        }
        for (arm, &n) in trace.pulls.iter().enumerate() {
            pull_totals[task.policy][arm] += n as f64;
        }
    }

    let total_reps = n_instances as u64 * reps;
    let mut regret = Vec::with_capacity(n_policies * checkpoints.len());
    for (p, spec) in config.policies.iter().enumerate() {
        let name = spec.name();
        for (c, &checkpoint) in checkpoints.iter().enumerate() {
            let mean = instance_means[p].iter().map(|m| m[c]).sum::<f64>()
                / n_instances as f64;
            let std = if n_instances > 1 {
                sample_std(instance_means[p].iter().map(|m| m[c]), mean)
            } else {
                let n = total_reps as f64;
                let var = (rep_sumsq[p][c] - rep_sum[p][c] * rep_sum[p][c] / n)
                    / (n - 1.0).max(1.0);
                var.max(0.0).sqrt()
            };
            regret.push(RegretRow {
                policy: name.clone(),
                checkpoint,
                mean,
                std,
                n_reps: total_reps,
            });
        }
    }

    let mut pulls = Vec::with_capacity(n_policies * num_arms);
    for (p, spec) in config.policies.iter().enumerate() {
        let name = spec.name();
        for (arm, total) in pull_totals[p].iter().enumerate() {
            pulls.push(PullRow {
                policy: name.clone(),
                arm,
                mean_pulls: total / total_reps as f64,
            });
        }
    }

    let std_convention = if n_instances > 1 {
        "sample std across per-instance replication means".to_string()
    } else {
        "sample std across replications".to_string()
    };

    ExperimentReport {
        regret,
        pulls,
        meta: Meta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            threads: config.threads,
            n_instances: n_instances as u64,
            n_replications: reps,
            std_convention,
            checkpoints,
            config: config.clone(),
        },
    }
}

fn sample_std(values: impl Iterator<Item = f64>, mean: f64) -> f64 {
    let mut sumsq = 0.0;
    let mut n = 0usize;
    for v in values {
        sumsq += (v - mean) * (v - mean);
        n += 1;
    }
    if n > 1 {
        (sumsq / (n - 1) as f64).sqrt()
    } else {
        0.0
    }
}

/// Renders `regret.csv` (float formatting is Rust's shortest round-trip
/// representation, so parsing the file reproduces the values exactly).
pub fn regret_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("policy,checkpoint,mean,std,n_reps\n");
    for r in &report.regret {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.policy, r.checkpoint, r.mean, r.std, r.n_reps
        ));
    }
    out
}

/// Renders `pulls.csv`.
pub fn pulls_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("policy,arm,mean_pulls\n");
    for r in &report.pulls {
        out.push_str(&format!("{},{},{}\n", r.policy, r.arm, r.mean_pulls));
    }
    out
}

/// Writes `regret.csv`, `pulls.csv` and `meta.json` under `dir`.
pub fn write_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<(), HarnessError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join("regret.csv"))?;
    f.write_all(regret_csv(report).as_bytes())?;
    let mut f = fs::File::create(dir.join("pulls.csv"))?;
    f.write_all(pulls_csv(report).as_bytes())?;
    let mut f = fs::File::create(dir.join("meta.json"))?;
    serde_json::to_writer_pretty(&mut f, &report.meta)
        .map_err(|e| HarnessError::Io(std::io::Error::other(e)))?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Parses a `regret.csv` body back into rows (used to check the
/// serialisation round-trip).
pub fn parse_regret_csv(text: &str) -> Result<Vec<RegretRow>, String> {
    let mut rows = Vec::new();
    let mut lines = text.lines();
    match lines.next() {
        Some("policy,checkpoint,mean,std,n_reps") => {}
        other => return Err(format!("bad header: {other:?}")),
    }
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format!("bad row: {line:?}"));
        }
        rows.push(RegretRow {
            policy: fields[0].to_string(),
            checkpoint: fields[1].parse().map_err(|e| format!("{e}"))?,
            mean: fields[2].parse().map_err(|e| format!("{e}"))?,
            std: fields[3].parse().map_err(|e| format!("{e}"))?,
            n_reps: fields[4].parse().map_err(|e| format!("{e}"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{EnvironmentSpec, PolicyKind, PolicySpec, SupportVariant};
    use crate::runner::run_experiment;

    fn small_config(checkpoints: Option<Vec<u64>>) -> ExperimentConfig {
        ExperimentConfig {
            environment: EnvironmentSpec::RandomMultinomial {
                arms: 2,
                instances: 2,
                support: None,
                support_variant: SupportVariant::default(),
            },
            alpha: 0.5,
            policies: vec![PolicySpec::of(PolicyKind::BCvts)],
            horizon: 200,
            replications: 3,
            checkpoints,
            seed: 11,
            threads: 1,
            advanced: None,
        }
    }

    #[test]
    fn row_counts_match_grid() {
        let report = run_experiment(&small_config(Some(vec![10, 100]))).unwrap();
        assert_eq!(report.regret.len(), 2);
        assert_eq!(report.pulls.len(), 2);
        let csv = regret_csv(&report);
        assert_eq!(csv.lines().count(), 3); // header + 2 rows
    }

    #[test]
    fn empty_grid_gives_header_only_csv() {
        let report = run_experiment(&small_config(Some(vec![]))).unwrap();
        assert_eq!(regret_csv(&report), "policy,checkpoint,mean,std,n_reps\n");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let report = run_experiment(&small_config(None)).unwrap();
        let rows = parse_regret_csv(&regret_csv(&report)).unwrap();
        assert_eq!(rows, report.regret);
    }

    #[test]
    fn single_replication_report_equals_trace() {
        let mut config = small_config(Some(vec![200]));
        config.replications = 1;
        config.environment = EnvironmentSpec::Fixed {
            arms: vec![
                crate::config::ArmSpec::Multinomial {
                    support: vec![0.0, 1.0],
                    weights: vec![0.5, 0.5],
                    bound: None,
                },
                crate::config::ArmSpec::Multinomial {
                    support: vec![0.0, 1.0],
                    weights: vec![0.25, 0.75],
                    bound: None,
                },
            ],
        };
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.regret.len(), 1);
        assert_eq!(report.regret[0].n_reps, 1);
        assert_eq!(report.regret[0].std, 0.0);
        // Mean pulls sum to the horizon.
        let total: f64 = report.pulls.iter().map(|p| p.mean_pulls).sum();
        assert!((total - 200.0).abs() < 1e-9);
    }

    #[test]
    fn report_files_written() {
        let report = run_experiment(&small_config(None)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_report(&report, dir.path()).unwrap();
        assert!(dir.path().join("regret.csv").exists());
        assert!(dir.path().join("pulls.csv").exists());
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap())
                .unwrap();
        assert_eq!(meta["seed"], 11);
        assert!(meta["std_convention"].is_string());
        assert!(meta["config"]["policies"].is_array());
    }
}
