//! Bayesian logistic regression dose finding with interval-based overdose
//! control, four add-on designs that also control underdosing, and a trial
//! simulator for comparing them.
//!
//! ## Examples
//!
//! ```text
//! examples/
//! ├── single_fit.rs                  # interval probabilities and the base recommendation
//! ├── addon_rules.rs                 # both sides of each add-on inequality
//! ├── trial_replay.rs                # one simulated trial, cohort by cohort
//! ├── fixed_scenario_simulation.rs   # five designs on a fixed curve
//! ├── scenario_generation.rs         # random monotone scenarios
//! ├── random_scenario_simulation.rs  # correct-MTD rates over random scenarios
//! └── run_config.rs                  # a TOML preset end to end
//! ```
//!
//! ```bash
//! cargo run --example single_fit
//! cargo run --release --example fixed_scenario_simulation -- sshaped 1000
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod decision;
pub mod error;
pub mod posterior;
pub mod report;
pub mod rng;
pub mod scenarios;
pub mod simulator;

pub use error::{Error, Result};
