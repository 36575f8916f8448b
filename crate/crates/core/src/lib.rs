//! Multi-UAV data collection and charging with a heterogeneous graph-attention
//! actor-critic.
//!
//! * [`world`] / [`env`]: the continuous arena, its dynamics and observations.
//! * [`reward`] / [`metrics`]: per-step rewards and episode metrics.
//! * [`hetgraph`] / [`neural`]: graph construction and the GAT actor/critic.
//! * [`training`]: prioritized N-step replay and the training loop.
//! * [`harness`]: baselines, evaluation and file export.

pub mod env;
pub mod error;
pub mod harness;
pub mod hetgraph;
pub mod metrics;
pub mod neural;
pub mod reward;
pub mod training;
pub mod world;

pub use error::{HgamError, Result};
