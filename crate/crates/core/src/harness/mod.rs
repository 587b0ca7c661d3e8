//! Monte Carlo experiments and their reports.

pub mod config;
pub mod ensemble;
pub mod experiments;
pub mod identity;
pub mod report;
pub mod stats;

pub use config::{
    EstimatorKnobs, ExperimentConfig, GridSpec, ScalingSpec, SsmpSpec, TolerancePolicy,
};
pub use ensemble::{Ensemble, Kernel, PathSummary};
pub use experiments::{
    run_moment_experiment, run_occupation_suite, run_scaling_limit_i, run_scaling_limit_ii,
    run_ssmp_suite, EnsembleRun,
};
pub use identity::{run_identity_suite, run_identity_suite_with, IdentityTolerances};
pub use report::{Check, Record, StatReport};
pub use stats::{ks_two_sample, Estimate, KsResult};
