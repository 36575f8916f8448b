//! Per-agent rewards, fairness factor, CUAV penalties and rotation detection.

use std::collections::VecDeque;

use serde::Serialize;

use crate::env::{ChargeOutcome, StepEvents};
use crate::metrics::jain_index;
use crate::world::{circle_overlap_area, Quantity, UavState, Vec2, WorldConfig, WorldState};

/// Number of recent MUAV positions inspected by the rotation detector.
pub const DILEMMA_WINDOW: usize = 10;

/// Components of one agent's reward for one step.
///
/// For MUAVs `shaping` is a bonus (`total = gain + shaping - penalty - hazard`);
/// for CUAVs it is the neglect penalty (`total = gain - shaping - penalty - hazard`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub gain: f64,
    pub shaping: f64,
    pub penalty: f64,
    pub hazard: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn muav(gain: f64, bonus: f64, penalty: f64, hazard: f64) -> Self {
        RewardBreakdown { gain, shaping: bonus, penalty, hazard, total: gain + bonus - penalty - hazard }
    }

    pub fn cuav(gain: f64, neglect: f64, penalty: f64, hazard: f64) -> Self {
        RewardBreakdown { gain, shaping: neglect, penalty, hazard, total: gain - neglect - penalty - hazard }
    }
}

/// Recent positions of one MUAV, oldest first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DilemmaWindow {
    positions: VecDeque<Vec2>,
    capacity: usize,
}

impl DilemmaWindow {
    pub fn new(capacity: usize) -> Self {
        DilemmaWindow { positions: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, pos: Vec2) {
        if self.positions.len() == self.capacity {
            self.positions.pop_front();
        }
        self.positions.push_back(pos);
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = &Vec2> {
        self.positions.iter()
    }
}

impl FromIterator<Vec2> for DilemmaWindow {
    fn from_iter<I: IntoIterator<Item = Vec2>>(iter: I) -> Self {
        let positions: VecDeque<Vec2> = iter.into_iter().collect();
        let capacity = positions.len().max(DILEMMA_WINDOW);
        DilemmaWindow { positions, capacity }
    }
}

/// True when some later position in the window overlaps the oldest position's
/// sensing disk more than its immediate successor does.
pub fn detect_dilemma(window: &DilemmaWindow, sense_radius: f64) -> bool {
    if window.len() < 3 {
        return false;
    }
    let mut it = window.positions();
    let origin = *it.next().unwrap();
    let successor = *it.next().unwrap();
    let baseline = circle_overlap_area(origin, successor, sense_radius);
    it.any(|&p| circle_overlap_area(origin, p, sense_radius) > baseline)
}

fn muavs(state: &WorldState) -> &[UavState] {
    &state.uavs[..state.config.num_muavs]
}

/// Weighted blend of the Jain indices of capped charged fractions and of
/// remaining energy across MUAVs.
pub fn fairness_factor(muavs: &[UavState], cfg: &WorldConfig) -> f64 {
    let charged: Vec<f64> = muavs.iter().map(|u| (u.energy_charged.as_f64() / cfg.e_max).min(1.0)).collect();
    let remaining: Vec<f64> = muavs.iter().map(|u| u.energy_remaining.as_f64().max(0.0)).collect();
    let fc = jain_index(&charged).unwrap_or(1.0);
    let fr = jain_index(&remaining).unwrap_or(1.0);
    cfg.w_f * fc + (1.0 - cfg.w_f) * fr
}

fn hazard(events: &StepEvents, u: usize, cfg: &WorldConfig) -> f64 {
    let mut pb = 0.0;
    if events.collided[u] {
        pb += cfg.collision_penalty;
    }
    if events.min_laser[u] < cfg.laser_warn_dist {
        pb += cfg.laser_penalty;
    }
    pb
}

pub fn muav_reward(events: &StepEvents, dilemma: bool, m: usize, cfg: &WorldConfig) -> RewardBreakdown {
    let collected = events.collected[m].as_f64();
    let gain = cfg.w_c * collected;
    let bonus = cfg.w_l * events.moved[m] + cfg.discovery_bonus * events.discovered[m].len() as f64;
    let penalty = if dilemma && collected == 0.0 { cfg.rotation_penalty } else { 0.0 };
    RewardBreakdown::muav(gain, bonus, penalty, hazard(events, m, cfg))
}

/// Distance-and-urgency penalty towards the MUAV with the lowest remaining
/// energy (ties to the lowest index).
pub fn cuav_neglect_penalty(state: &WorldState, c: usize, cfg: &WorldConfig) -> f64 {
    let Some((target, _)) = muavs(state)
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, Quantity)>, (i, u)| match best {
            Some((_, e)) if e <= u.energy_remaining => best,
            _ => Some((i, u.energy_remaining)),
        })
    else {
        return 0.0;
    };
    let muav = &state.uavs[target];
    let distance = state.uavs[c].pos.dist(muav.pos);
    cfg.w_d * distance + cfg.w_e * muav.energy_remaining.as_f64()
}

pub fn cuav_hierarchical_penalty(outcome: &ChargeOutcome, cfg: &WorldConfig) -> f64 {
    let plow = cfg.plow;
    if outcome.target.is_none() {
        plow
    } else if outcome.target_energy_before >= cfg.energy_budget() {
        1.2 * plow
    } else if outcome.target_energy_before.as_f64() > outcome.fleet_mean_energy_before {
        plow / 3.0
    } else {
        plow / 4.0
    }
}

/// Reward of the CUAV at UAV index `c` (its charging record is
/// `events.charging[c - num_muavs]`). `state` is the post-step state.
pub fn cuav_reward(state: &WorldState, events: &StepEvents, c: usize, cfg: &WorldConfig) -> RewardBreakdown {
    let outcome = &events.charging[c - cfg.num_muavs];
    let effective = outcome.is_effective();
    let gain = if effective { cfg.w_e * fairness_factor(muavs(state), cfg) } else { 0.0 };
    let neglect = if effective { 0.0 } else { cuav_neglect_penalty(state, c, cfg) };
    let penalty = cuav_hierarchical_penalty(outcome, cfg);
    RewardBreakdown::cuav(gain, neglect, penalty, hazard(events, c, cfg))
}

/// Tracks MUAV position windows across an episode and turns step events into
/// per-agent rewards.
#[derive(Clone, Debug)]
pub struct RewardTracker {
    windows: Vec<DilemmaWindow>,
}

impl RewardTracker {
    pub fn new(initial: &WorldState) -> Self {
        let windows = muavs(initial)
            .iter()
            .map(|u| {
                let mut w = DilemmaWindow::new(DILEMMA_WINDOW);
                w.push(u.pos);
                w
            })
            .collect();
        RewardTracker { windows }
    }

    /// Rewards for every UAV given the state after the step and its events.
    pub fn rewards(&mut self, next: &WorldState, events: &StepEvents) -> Vec<RewardBreakdown> {
        let cfg = &next.config;
        let mut out = Vec::with_capacity(next.uavs.len());
        for m in next.muav_indices() {
            self.windows[m].push(next.uavs[m].pos);
            let dilemma = detect_dilemma(&self.windows[m], cfg.sense_radius);
            out.push(muav_reward(events, dilemma, m, cfg));
        }
        for c in next.cuav_indices() {
            out.push(cuav_reward(next, events, c, cfg));
        }
        out
    }
}
