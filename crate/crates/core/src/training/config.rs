use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HgamError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub n_step: usize,
    /// Target networks are soft-updated during episodes divisible by this.
    pub f_soft: usize,
    /// Episodes collected before the first gradient step.
    pub e_min: usize,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub per_alpha: f64,
    pub per_epsilon: f64,
    pub lr_critic: f64,
    pub lr_actor: f64,
    pub noise_sigma0: f64,
    pub noise_decay: f64,
    pub noise_min: f64,
    pub max_episodes: usize,
    pub checkpoint_every: usize,
    /// One actor per UAV kind instead of one per UAV.
    pub share_actor_per_type: bool,
    pub use_gat: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.98,
            tau: 0.01,
            n_step: 3,
            f_soft: 50,
            e_min: 50,
            buffer_capacity: 100_000,
            batch_size: 128,
            per_alpha: 0.6,
            per_epsilon: 1e-4,
            lr_critic: 1e-3,
            lr_actor: 1e-4,
            noise_sigma0: 0.3,
            noise_decay: 0.9995,
            noise_min: 0.05,
            max_episodes: 1000,
            checkpoint_every: 100,
            share_actor_per_type: false,
            use_gat: true,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| HgamError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HgamError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(HgamError::config(msg.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail("tau must lie in (0, 1]");
        }
        if self.n_step == 0 {
            return fail("n_step must be at least 1");
        }
        if self.f_soft == 0 || self.checkpoint_every == 0 {
            return fail("f_soft and checkpoint_every must be positive");
        }
        if self.buffer_capacity == 0 || self.batch_size == 0 {
            return fail("buffer_capacity and batch_size must be positive");
        }
        if !(self.per_alpha >= 0.0 && self.per_alpha.is_finite()) || !(self.per_epsilon > 0.0) {
            return fail("per_alpha must be >= 0 and per_epsilon > 0");
        }
        if !(self.lr_critic >= 0.0 && self.lr_actor >= 0.0) {
            return fail("learning rates must be non-negative");
        }
        if !(self.noise_sigma0 >= 0.0 && self.noise_min >= 0.0 && self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return fail("noise schedule out of range");
        }
        Ok(())
    }
}
