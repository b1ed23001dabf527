//! Risk-averse multi-armed bandits under the conditional value at risk
//! (CVaR) criterion.
//!
//! The crate provides the building blocks for running and analysing CVaR
//! bandit experiments:
//!
//! - [`dist`] — exact CVaR and distance computations for finite discrete
//!   distributions, the numeric core shared by everything else;
//! - [`random`] — deterministic, splittable random streams and the samplers
//!   (Dirichlet, uniform simplex, truncated Gaussian mixtures);
//! - [`policies`] — the bandit algorithms behind one [`policies::Policy`]
//!   interface: M-CVTS and B-CVTS Thompson Sampling plus the U-UCB and
//!   CVaR-UCB baselines;
//! - [`kinf`] — a solver for the KL projection onto `{q : CVaR(q) >= c}`
//!   and the asymptotic lower-bound regret curve built from it;
//! - [`env`] — arm models (multinomial, truncated Gaussian mixture, trace
//!   replay) with true-CVaR oracles used to score regret.
//!
//! The crate is `no_std` compatible (with `alloc`); experiment
//! orchestration, file formats and the CLI live in the companion
//! `cvar-bandits-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_docs)]

extern crate alloc;

pub mod dist;
pub mod env;
pub mod kinf;
pub mod policies;
pub mod random;

pub use dist::{CvarLevel, DiscreteDist};
pub use env::{ArmModel, BanditEnv};
pub use policies::Policy;
pub use random::RngStream;
