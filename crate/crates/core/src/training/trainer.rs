use std::fmt::Write as _;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::learner::{Learner, UpdateParams};
use super::noise::{exploration_noise, NoiseSchedule};
use super::replay::{ReplayBuffer, Transition};
use crate::env::{observe_all, step, Action};
use crate::error::{HgamError, Result};
use crate::metrics::{
    charging_efficiency, charging_fairness, data_collection_ratio, energy_usage_efficiency, geographical_fairness,
    EpisodeLog,
};
use crate::reward::RewardTracker;
use crate::world::{generate_scenario, UavKind, WorldConfig};

pub const REPORT_HEADER: &str =
    "episode,steps,reward_muav_mean,reward_cuav_mean,C,omega,upsilon,D,F,sigma,loss_critic_mean";

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub episode: usize,
    pub steps: usize,
    pub reward_muav_mean: f64,
    pub reward_cuav_mean: f64,
    pub c: f64,
    pub omega: f64,
    pub upsilon: f64,
    pub d: f64,
    pub f: f64,
    /// Exploration σ used during the episode.
    pub sigma: f64,
    /// Mean critic loss over the episode's updates, 0 before learning starts.
    pub loss_critic_mean: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<EpisodeRow>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.episode,
                r.steps,
                r.reward_muav_mean,
                r.reward_cuav_mean,
                r.c,
                r.omega,
                r.upsilon,
                r.d,
                r.f,
                r.sigma,
                r.loss_critic_mean
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| HgamError::io(path, e))
    }

    /// Mean MUAV episodic reward over episodes `first..=last` (1-based).
    pub fn mean_muav_reward(&self, first: usize, last: usize) -> f64 {
        let rows: Vec<f64> =
            self.rows.iter().filter(|r| (first..=last).contains(&r.episode)).map(|r| r.reward_muav_mean).collect();
        rows.iter().sum::<f64>() / rows.len().max(1) as f64
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Runs the full training loop. See [`train_with`].
pub fn train(
    world: &WorldConfig,
    cfg: &TrainConfig,
    seed: u64,
    checkpoint_out: Option<&Path>,
) -> Result<(Learner, TrainReport)> {
    train_with(world, cfg, seed, checkpoint_out, |_| {})
}

/// Trains for `cfg.max_episodes` episodes, calling `on_episode` after each.
/// With a checkpoint path the file is written before the first episode, every
/// `checkpoint_every` episodes and at the end.
pub fn train_with(
    world: &WorldConfig,
    cfg: &TrainConfig,
    seed: u64,
    checkpoint_out: Option<&Path>,
    mut on_episode: impl FnMut(&EpisodeRow),
) -> Result<(Learner, TrainReport)> {
    world.validate()?;
    cfg.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut init_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let mut noise_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let mut sample_rng = ChaCha8Rng::seed_from_u64(master.next_u64());

    let mut learner = Learner::new(world, cfg.share_actor_per_type, cfg.use_gat, &mut init_rng);
    if let Some(path) = checkpoint_out {
        std::fs::File::create(path).map_err(|e| HgamError::io(path, e))?;
        learner.save(path)?;
    }

    let agents = world.num_uavs();
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, agents, cfg.per_alpha, cfg.per_epsilon);
    let mut noise = NoiseSchedule::new(cfg.noise_sigma0, cfg.noise_decay, cfg.noise_min);
    let params = UpdateParams { gamma: cfg.gamma, lr_actor: cfg.lr_actor, lr_critic: cfg.lr_critic };
    let mut report = TrainReport::default();

    for episode in 1..=cfg.max_episodes {
        let mut state = generate_scenario(world, master.next_u64())?;
        let mut tracker = RewardTracker::new(&state);
        let mut log = EpisodeLog::start(&state);
        let mut obs = observe_all(&state);
        let mut returns = vec![0.0; agents];
        let mut losses = Vec::new();
        let learning = episode > cfg.e_min;

        while !state.done {
            let t = state.t + 1;
            let greedy = learner.act(&state.positions(), &obs)?;
            let actions: Vec<Action> = greedy
                .iter()
                .map(|a| {
                    let [nx, ny] = exploration_noise(&mut noise_rng, noise.sigma);
                    Action::new(a.ax + nx, a.ay + ny)
                })
                .collect();
            let (next, events) = step(&state, &actions)?;
            let rewards: Vec<f64> = tracker.rewards(&next, &events).iter().map(|r| r.total).collect();
            log.record_step(&events);
            for (acc, r) in returns.iter_mut().zip(&rewards) {
                *acc += r;
            }
            let next_obs = observe_all(&next);
            buffer.push(Transition {
                obs: std::mem::take(&mut obs),
                positions: state.positions(),
                actions,
                rewards,
                next_obs: next_obs.clone(),
                next_positions: next.positions(),
                done: next.done,
                episode,
                step: t,
            })?;

            if learning {
                let indices = buffer.sample(t % agents, cfg.batch_size, &mut sample_rng)?;
                let items: Vec<_> = indices.iter().map(|&i| buffer.nstep(i, cfg.n_step, cfg.gamma)).collect();
                let weights: Vec<Vec<f64>> =
                    indices.iter().map(|&i| (0..agents).map(|u| buffer.weight(u, i)).collect()).collect();
                let stats = learner.update(&buffer, &items, &weights, params)?;
                if episode % cfg.f_soft == 0 {
                    learner.soft_update_targets(cfg.tau);
                }
                for (&i, deltas) in indices.iter().zip(&stats.td_errors) {
                    for (u, &d) in deltas.iter().enumerate() {
                        buffer.update_priority(u, i, d)?;
                    }
                }
                losses.push(stats.critic_loss);
            }

            state = next;
            obs = next_obs;
        }
        log.finish(&state);

        let kinds = state.kinds();
        let of_kind = |k: UavKind| mean(returns.iter().zip(&kinds).filter(|(_, kk)| **kk == k).map(|(r, _)| *r));
        let row = EpisodeRow {
            episode,
            steps: log.episode_len,
            reward_muav_mean: of_kind(UavKind::Muav),
            reward_cuav_mean: of_kind(UavKind::Cuav),
            c: data_collection_ratio(&log).unwrap_or(f64::NAN),
            omega: geographical_fairness(&log).unwrap_or(f64::NAN),
            upsilon: energy_usage_efficiency(&log).unwrap_or(f64::NAN),
            d: charging_efficiency(&log).unwrap_or(f64::NAN),
            f: charging_fairness(&log).unwrap_or(f64::NAN),
            sigma: noise.sigma,
            loss_critic_mean: mean(losses.into_iter()),
        };
        on_episode(&row);
        report.rows.push(row);
        noise.end_episode();

        if let Some(path) = checkpoint_out {
            if episode % cfg.checkpoint_every == 0 || episode == cfg.max_episodes {
                learner.save(path)?;
            }
        }
    }
    Ok((learner, report))
}
