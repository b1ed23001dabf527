//! `cvar-bandits`: run CVaR bandit experiments and query the numeric
//! primitives from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cvar_bandits_cli::config::ExperimentConfig;
use cvar_bandits_cli::report::write_report;
use cvar_bandits_cli::runner::run_experiment;
use cvar_bandits_cli::HarnessError;
use cvar_bandits_core::dist::{CvarLevel, DiscreteDist};
use cvar_bandits_core::kinf::{kinf_dual, lower_bound_curve, KinfSolution};

#[derive(Parser)]
#[command(
    name = "cvar-bandits",
    version,
    about = "Risk-averse bandit experiments under the CVaR criterion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config and write CSV reports.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Output directory for regret.csv, pulls.csv and meta.json.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's worker thread count (0 = one per core).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the CVaR of a discrete distribution.
    Cvar(DistArgs),
    /// Solve the KL projection onto distributions with CVaR above a target.
    Kinf {
        #[command(flatten)]
        dist: DistArgs,
        /// Target the projected distribution's CVaR must reach.
        #[arg(long)]
        target: f64,
    },
    /// Print the asymptotic lower-bound curve for a fixed-arm config.
    Lb {
        /// Path to the experiment config (fixed multinomial arms).
        config: PathBuf,
    },
}

#[derive(Args)]
struct DistArgs {
    /// Support values, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    support: Vec<f64>,
    /// Probability weights, comma separated (same length as support).
    #[arg(long, value_delimiter = ',', required = true)]
    weights: Vec<f64>,
    /// CVaR level in (0, 1].
    #[arg(long)]
    alpha: f64,
}

impl DistArgs {
    fn parse(&self) -> Result<(DiscreteDist, CvarLevel), HarnessError> {
        let dist = DiscreteDist::new(self.support.clone(), self.weights.clone())
            .map_err(cvar_bandits_cli::ConfigError::Dist)?;
        let level = CvarLevel::new(self.alpha).map_err(cvar_bandits_cli::ConfigError::Dist)?;
        Ok((dist, level))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => {
            let mut config = ExperimentConfig::load(config)?;
            if let Some(threads) = threads {
                config.threads = threads;
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let report = run_experiment(&config)?;
            write_report(&report, &out)?;
            println!("report written to {}", out.display());
            Ok(())
        }
        Command::Cvar(dist) => {
            let (dist, level) = dist.parse()?;
            println!("{}", dist.cvar(level));
            Ok(())
        }
        Command::Kinf { dist, target } => {
            let (dist, level) = dist.parse()?;
            match kinf_dual(&dist, target, level)? {
                KinfSolution::Finite(r) => {
                    println!("value {}", r.value);
                    println!("y_star {}", r.y_star);
                    println!("lambda_star {}", r.lambda_star);
                    let q: Vec<String> =
                        r.q_star.weights().iter().map(|w| w.to_string()).collect();
                    println!("q_star {}", q.join(","));
                }
                KinfSolution::Infinite => println!("value inf"),
            }
            Ok(())
        }
        Command::Lb { config } => {
            let config = ExperimentConfig::load(config)?;
            let instances = config.build_instances()?;
            let env = &instances[0];
            let arms: Vec<DiscreteDist> = env
                .arms()
                .iter()
                .map(|arm| match arm.kind() {
                    cvar_bandits_core::env::ArmKind::Multinomial(d) => Ok(d.clone()),
                    _ => Err(cvar_bandits_cli::ConfigError::Invalid(
                        "the lower bound needs fixed multinomial arms".into(),
                    )),
                })
                .collect::<Result<_, _>>()?;
            let horizons: Vec<f64> = config
                .checkpoint_grid()
                .iter()
                .map(|&t| t as f64)
                .collect();
            let curve = lower_bound_curve(&arms, config.level(), &horizons)?;
            println!("horizon,lower_bound");
            for (t, v) in &curve.points {
                println!("{t},{v}");
            }
            Ok(())
        }
    }
}
