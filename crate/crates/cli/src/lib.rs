//! Experiment harness for mixed-prior diffusion models: configuration,
//! end-to-end runs, reverse-effort reports, center selection and
//! self-checks.

pub mod config;
pub mod experiment;
pub mod selfcheck;

pub use config::{ConfigError, DataSource, KPolicy, RunConfig};
pub use experiment::{cmd_cluster, cmd_reeff, cmd_run, RunSummary};
