//! Prioritized N-step replay, actor/critic updates and the training loop.

pub mod config;
pub mod learner;
pub mod noise;
pub mod replay;
pub mod sum_tree;
pub mod trainer;

pub use config::TrainConfig;
pub use learner::{actor_objective_grad, critic_loss_grad, Learner, UpdateParams, UpdateStats};
pub use noise::{exploration_noise, NoiseSchedule};
pub use replay::{nstep_return, NStepItem, ReplayBuffer, Transition};
pub use sum_tree::{per_sample, per_update, priority_from_delta, SumTree};
pub use trainer::{train, train_with, EpisodeRow, TrainReport, REPORT_HEADER};
