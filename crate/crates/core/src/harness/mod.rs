//! Seeded multi-trial experiments: configuration, execution, percentile
//! aggregation and file output.

mod condnum;
mod config;
mod output;
mod runner;
mod seed;
mod stats;

pub use condnum::{run_condnum, sweep_model, write_kappa_csv, CondnumConfig, CondnumResult, KAPPA_HEADER};
pub use config::{DeflationConfig, ExperimentConfig, NoiseConfig, NoiseLevel};
pub use output::{emit_outputs, read_aggregate_csv, OutputPaths, AGGREGATE_HEADER, TRACES_HEADER};
pub use runner::{draw_instance, run_experiment, run_trial, ExperimentResult, MethodOutcome, TrialResult};
pub use seed::{stream_rng, stream_seed, Stream};
pub use stats::{aggregate, percentile, AggregateRow, AggregateStats, SuccessStats};
