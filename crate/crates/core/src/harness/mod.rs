//! Scripted baselines, evaluation runs and trajectory export.

pub mod evaluate;
pub mod policies;

pub use evaluate::{evaluate, evaluate_controller, run_episode, Controller, EpisodeResult, EvalReport, MetricSummary, PolicyKind, Trajectory};
pub use policies::{greedy_policy, random_policy};
