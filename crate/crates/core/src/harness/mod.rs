//! Monte-Carlo runner: per-trial pipeline, sweeps, aggregation and output.

pub mod config;
pub mod metrics;
pub mod plot;
pub mod sweep;
pub mod trial;

pub use config::{ExperimentConfig, SweepAxis, SweepConfig};
pub use metrics::{mean_ci, metric_nmse_db, metric_pe, metric_rmse_xy, nmse_ratio, Cdf, MeanCi};
pub use sweep::{read_records, run_sweep, summarize, write_results_csv, MetricSummary, PointSummary, SweepOutput};
pub use trial::{run_trial, SolverRecord, TrialInstance, TrialRecord, UserRmse};
