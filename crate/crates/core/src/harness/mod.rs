//! Config-driven experiments: load a JSON config, build the instance and
//! topology, run or tune an algorithm, and write CSV logs.

mod config;
mod csv;
mod experiment;

pub use config::{
    load_config, parse_config, AlgorithmSection, ExperimentConfig, TopologyConfig, TunerConfig,
};
pub use csv::{write_metrics_csv, write_summary_csv, METRICS_HEADER, SUMMARY_HEADER};
pub use experiment::{
    compare, default_grid, run_experiment, tune_epsilon, tune_epsilon_for, ComparisonRow,
    ComparisonSummary, Experiment, ExperimentRun, TuneOutcome, TuneResult,
};
