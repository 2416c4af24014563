//! Benchmark harness: method comparisons over seeds, τ sweeps, result tables
//! and regret plots.

pub mod experiment;
pub mod plot;
pub mod stats;

pub use experiment::{
    default_tau_grid, prepare_corpus, run_experiment, run_experiment_with, run_method, tau_sweep, tau_sweep_with,
    write_sweep_csv, Comparison, ExperimentResult, ExperimentSpec, Method, PriorTiming, RunOutcome, SweepRow, Tau,
};
pub use stats::{wilcoxon_signed_rank, Alternative, WilcoxonResult};
