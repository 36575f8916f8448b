use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policies::{greedy_policy, random_policy};
use crate::env::{observe_all, step, Action, StepEvents};
use crate::error::{HgamError, Result};
use crate::metrics::{EpisodeLog, MetricsReport};
use crate::reward::{RewardBreakdown, RewardTracker};
use crate::training::Learner;
use crate::world::{generate_scenario, WorldConfig, WorldState};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Hgam(PathBuf),
    /// Trained actors with the neighbour message forced to zero.
    HgamNoGat(PathBuf),
    Greedy,
    Random,
}

impl PolicyKind {
    /// Parses `hgam`, `hgam_no_gat`, `greedy` or `random`; the learned kinds
    /// need a checkpoint.
    pub fn parse(name: &str, checkpoint: Option<&Path>) -> Result<Self> {
        let ckpt = || {
            checkpoint
                .map(Path::to_path_buf)
                .ok_or_else(|| HgamError::config(format!("policy {name} needs --checkpoint")))
        };
        match name {
            "hgam" => Ok(PolicyKind::Hgam(ckpt()?)),
            "hgam_no_gat" | "hgam-no-gat" => Ok(PolicyKind::HgamNoGat(ckpt()?)),
            "greedy" => Ok(PolicyKind::Greedy),
            "random" => Ok(PolicyKind::Random),
            other => Err(HgamError::config(format!("unknown policy {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Hgam(_) => "hgam",
            PolicyKind::HgamNoGat(_) => "hgam_no_gat",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Random => "random",
        }
    }
}

/// A policy ready to act in episodes of one world configuration.
pub enum Controller {
    Learned(Box<Learner>),
    Greedy,
    Random(ChaCha8Rng),
}

impl Controller {
    pub fn load(kind: &PolicyKind, world: &WorldConfig) -> Result<Self> {
        Ok(match kind {
            PolicyKind::Hgam(path) => Controller::Learned(Box::new(Learner::load(path, world)?)),
            PolicyKind::HgamNoGat(path) => {
                let mut l = Learner::load(path, world)?;
                l.set_use_gat(false);
                Controller::Learned(Box::new(l))
            }
            PolicyKind::Greedy => Controller::Greedy,
            PolicyKind::Random => Controller::Random(ChaCha8Rng::seed_from_u64(0)),
        })
    }

    /// Resets per-episode randomness.
    pub fn begin_episode(&mut self, episode_seed: u64) {
        if let Controller::Random(rng) = self {
            *rng = ChaCha8Rng::seed_from_u64(episode_seed ^ 0x5EED_0F_A11);
        }
    }

    pub fn act(&mut self, state: &WorldState) -> Result<Vec<Action>> {
        let n = state.uavs.len();
        match self {
            Controller::Learned(l) => l.act(&state.positions(), &observe_all(state)),
            Controller::Greedy => Ok((0..n).map(|u| greedy_policy(state, u)).collect()),
            Controller::Random(rng) => Ok((0..n).map(|_| random_policy(rng)).collect()),
        }
    }
}

/// Per-step record of one episode, for export.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<WorldState>,
    pub events: Vec<StepEvents>,
    pub rewards: Vec<Vec<RewardBreakdown>>,
}

impl Trajectory {
    /// One row per `(t, uav)`; `t = 0` is the initial state.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,uav_id,kind,x,y,Er,Ec,Ed,collected,charged_to,reward\n");
        for (t, s) in self.states.iter().enumerate() {
            let ev = t.checked_sub(1).map(|i| &self.events[i]);
            for (u, uav) in s.uavs.iter().enumerate() {
                let collected = ev.map_or(0.0, |e| e.collected[u].as_f64());
                let charged_to = ev
                    .and_then(|e| u.checked_sub(s.config.num_muavs).map(|c| &e.charging[c]))
                    .filter(|c| c.is_effective())
                    .and_then(|c| c.target)
                    .map_or(String::new(), |m| m.to_string());
                let reward = t.checked_sub(1).map_or(0.0, |i| self.rewards[i][u].total);
                let _ = writeln!(
                    out,
                    "{t},{u},{},{},{},{},{},{},{collected},{charged_to},{reward}",
                    uav.kind.as_str(),
                    uav.pos.x,
                    uav.pos.y,
                    uav.energy_remaining,
                    uav.energy_charged,
                    uav.energy_consumed,
                );
            }
        }
        out
    }

    pub fn pois_csv(&self) -> String {
        let mut out = String::from("poi_id,x,y,m0,m_final\n");
        if let Some(s) = self.states.last() {
            for (i, p) in s.pois.iter().enumerate() {
                let _ = writeln!(out, "{i},{},{},{},{}", p.pos.x, p.pos.y, p.data_initial, p.data_remaining);
            }
        }
        out
    }

    /// `[{t, uav_id, gain, shaping, penalty, hazard, total}]` for every step.
    pub fn reward_components_json(&self) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            t: usize,
            uav_id: usize,
            kind: &'static str,
            #[serde(flatten)]
            reward: &'a RewardBreakdown,
        }
        let kinds = self.states[0].kinds();
        let rows: Vec<Row> = self
            .rewards
            .iter()
            .enumerate()
            .flat_map(|(i, rs)| {
                let kinds = &kinds;
                rs.iter().enumerate().map(move |(u, r)| Row { t: i + 1, uav_id: u, kind: kinds[u].as_str(), reward: r })
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("rewards serialize")
    }

    pub fn write(&self, dir: &Path, episode: usize) -> Result<()> {
        for (name, body) in [
            (format!("traj_ep{episode}.csv"), self.to_csv()),
            (format!("pois_ep{episode}.csv"), self.pois_csv()),
            (format!("rewards_ep{episode}.json"), self.reward_components_json()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| HgamError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Plays one noise-free episode.
pub fn run_episode(
    controller: &mut Controller,
    world: &WorldConfig,
    seed: u64,
    record: bool,
) -> Result<(MetricsReport, Option<Trajectory>)> {
    controller.begin_episode(seed);
    let mut state = generate_scenario(world, seed)?;
    let mut tracker = RewardTracker::new(&state);
    let mut log = EpisodeLog::start(&state);
    let mut traj = record.then(|| Trajectory { states: vec![state.clone()], events: Vec::new(), rewards: Vec::new() });
    while !state.done {
        let actions = controller.act(&state)?;
        let (next, events) = step(&state, &actions)?;
        let rewards = tracker.rewards(&next, &events);
        log.record_step(&events);
        if let Some(t) = traj.as_mut() {
            t.states.push(next.clone());
            t.events.push(events);
            t.rewards.push(rewards);
        }
        state = next;
    }
    log.finish(&state);
    Ok((MetricsReport::from_log(&log)?, traj))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    #[serde(rename = "C")]
    pub c: f64,
    pub omega: f64,
    pub upsilon: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "C_times_omega")]
    pub c_times_omega: f64,
    #[serde(rename = "D_times_F")]
    pub d_times_f: f64,
}

impl MetricSummary {
    fn fields(m: &MetricsReport) -> [f64; 7] {
        [m.c, m.omega, m.upsilon, m.d, m.f, m.c_times_omega, m.d_times_f]
    }

    fn from_fields(v: [f64; 7]) -> Self {
        MetricSummary { c: v[0], omega: v[1], upsilon: v[2], d: v[3], f: v[4], c_times_omega: v[5], d_times_f: v[6] }
    }

    /// Mean and population standard deviation over episodes.
    pub fn aggregate(rows: &[EpisodeResult]) -> (Self, Self) {
        let n = rows.len() as f64;
        let mut mean = [0.0; 7];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(Self::fields(&r.metrics)) {
                *m += v / n;
            }
        }
        let mut var = [0.0; 7];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(Self::fields(&r.metrics)).zip(mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        (Self::from_fields(mean), Self::from_fields(var.map(f64::sqrt)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub seed: u64,
    pub episodes: Vec<EpisodeResult>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs `episodes` noise-free episodes with scenario seeds `seed + i`. When
/// `traj_dir` is given, each episode's trajectory files are written there.
pub fn evaluate(
    policy: &PolicyKind,
    world: &WorldConfig,
    episodes: usize,
    seed: u64,
    traj_dir: Option<&Path>,
) -> Result<EvalReport> {
    let mut controller = Controller::load(policy, world)?;
    evaluate_controller(&mut controller, policy.name(), world, episodes, seed, traj_dir)
}

/// [`evaluate`] for an already constructed controller.
pub fn evaluate_controller(
    controller: &mut Controller,
    name: &str,
    world: &WorldConfig,
    episodes: usize,
    seed: u64,
    traj_dir: Option<&Path>,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(HgamError::config("episodes must be at least 1"));
    }
    let mut rows = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let ep_seed = seed.wrapping_add(i as u64);
        let (metrics, traj) = run_episode(controller, world, ep_seed, traj_dir.is_some())?;
        if let (Some(dir), Some(t)) = (traj_dir, traj) {
            t.write(dir, i)?;
        }
        rows.push(EpisodeResult { episode: i, seed: ep_seed, metrics });
    }
    let (mean, std) = MetricSummary::aggregate(&rows);
    Ok(EvalReport { policy: name.to_string(), seed, episodes: rows, mean, std })
}
