//! Experiment front end: configuration, task-grid evaluation with
//! density-scaled maps, nearest-k masking, greedy and random baselines, and
//! the results files.

pub mod config;
mod error;
pub mod eval;
pub mod grid;
pub mod task;

pub use config::{EvalConfig, ExperimentConfig, Mask};
pub use error::{Error, Result};
pub use eval::{
    duplicate_assignment_rate, evaluate, greedy_baseline, normalize_vs_baseline, normalized_score, random_baseline,
    run_episode, EpisodeRecord, EvalReport, EvalSettings, NetSource, Policy, RANDOM_POLICY,
};
pub use grid::{evaluate_grid, read_results, run_grid, write_results, write_summary, GridOutcome};
pub use task::{parse_grid, parse_mask, task_label, TaskSpec};
