//! Environment dynamics and per-agent observations.
//!
//! A step runs in fixed phases: move, collision check, MUAV collection, CUAV
//! charging, MUAV energy accounting, clock advance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{HgamError, Result};
use crate::world::{Quantity, Termination, UavKind, Vec2, WorldConfig, WorldState};

/// Number of peer-UAV blocks in every observation.
pub const OBS_NEIGHBOR_UAVS: usize = 2;
/// Number of PoI blocks in a MUAV observation.
pub const OBS_NEAREST_POIS: usize = 5;

/// Planar control input; both components live in `[-1, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub ax: f64,
    pub ay: f64,
}

impl Action {
    pub const IDLE: Action = Action { ax: 0.0, ay: 0.0 };

    /// Clamps both components into `[-1, 1]`; non-finite components become 0.
    pub fn new(ax: f64, ay: f64) -> Self {
        let clean = |v: f64| if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
        Action { ax: clean(ax), ay: clean(ay) }
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.ax, self.ay]
    }
}

pub fn apply_action(pos: Vec2, a: Action, step_length: f64) -> Vec2 {
    let dir = Vec2::new(a.ax, a.ay);
    let n = dir.norm();
    if n < 1e-9 {
        pos
    } else {
        pos + dir * (step_length / n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChargeOutcome {
    pub target: Option<usize>,
    pub delivered: Quantity,
    pub wasted: Quantity,
    /// Target's remaining energy before this CUAV charged it.
    pub target_energy_before: Quantity,
    /// Mean MUAV remaining energy before charging started this step.
    pub fleet_mean_energy_before: f64,
}

impl ChargeOutcome {
    fn idle(mean: f64) -> Self {
        ChargeOutcome {
            target: None,
            delivered: Quantity::ZERO,
            wasted: Quantity::ZERO,
            target_energy_before: Quantity::ZERO,
            fleet_mean_energy_before: mean,
        }
    }

    pub fn is_effective(&self) -> bool {
        self.delivered.is_positive()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoiCollection {
    pub uav: usize,
    pub poi: usize,
    pub amount: Quantity,
}

/// Everything that happened during one call to [`step`]. Per-UAV vectors are
/// indexed by UAV index; `charging` is indexed by CUAV ordinal.
#[derive(Clone, Debug, PartialEq)]
pub struct StepEvents {
    pub collected: Vec<Quantity>,
    pub collections: Vec<PoiCollection>,
    pub moved: Vec<f64>,
    pub charging: Vec<ChargeOutcome>,
    pub collided: Vec<bool>,
    pub min_laser: Vec<f64>,
    pub discovered: Vec<Vec<usize>>,
    pub terminated: Option<Termination>,
}

impl StepEvents {
    pub fn energy_delivered_to(&self, muav: usize) -> Quantity {
        self.charging.iter().filter(|c| c.target == Some(muav)).map(|c| c.delivered).sum()
    }
}

fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.dot(oc) - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = -b - disc.sqrt();
    (s >= 0.0).then_some(s)
}

fn ray_walls(origin: Vec2, dir: Vec2, w: f64, h: f64) -> f64 {
    let mut best = f64::INFINITY;
    if dir.x > 1e-12 {
        best = best.min((w - origin.x) / dir.x);
    } else if dir.x < -1e-12 {
        best = best.min(-origin.x / dir.x);
    }
    if dir.y > 1e-12 {
        best = best.min((h - origin.y) / dir.y);
    } else if dir.y < -1e-12 {
        best = best.min(-origin.y / dir.y);
    }
    best.max(0.0)
}

/// Range readings for UAV `u`; beam `k` points at angle `2πk / num_lasers`.
pub fn cast_lasers(state: &WorldState, u: usize) -> Vec<f64> {
    let cfg = &state.config;
    let origin = state.uavs[u].pos;
    let cap = cfg.effective_view_range();
    (0..cfg.num_lasers)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / cfg.num_lasers as f64;
            let dir = Vec2::new(angle.cos(), angle.sin());
            let mut d = ray_walls(origin, dir, cfg.area_width, cfg.area_height);
            for o in &state.obstacles {
                if let Some(s) = ray_circle(origin, dir, o.center, o.radius) {
                    d = d.min(s);
                }
            }
            d.min(cap)
        })
        .collect()
}

fn collides(state: &WorldState, pos: Vec2) -> bool {
    let cfg = &state.config;
    let r = cfg.uav_radius;
    if pos.x - r < 0.0 || pos.y - r < 0.0 || pos.x + r > cfg.area_width || pos.y + r > cfg.area_height {
        return true;
    }
    state.obstacles.iter().any(|o| pos.dist(o.center) < o.radius + r)
}

/// Closest MUAV to `from` within `radius`; ties go to the lower index.
fn closest_muav_within(state: &WorldState, from: Vec2, radius: f64) -> Option<usize> {
    state
        .muav_indices()
        .map(|m| (m, state.uavs[m].pos.dist(from)))
        .filter(|&(_, d)| d <= radius)
        .fold(None, |best: Option<(usize, f64)>, (m, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((m, d)),
        })
        .map(|(m, _)| m)
}

/// Advances the world by one decision interval.
pub fn step(state: &WorldState, actions: &[Action]) -> Result<(WorldState, StepEvents)> {
    if state.done {
        return Err(HgamError::contract("step called on a finished episode"));
    }
    if actions.len() != state.uavs.len() {
        return Err(HgamError::contract(format!(
            "expected {} actions, got {}",
            state.uavs.len(),
            actions.len()
        )));
    }
    let cfg: &WorldConfig = &state.config;
    let mut next = state.clone();
    let n = next.uavs.len();

    // (1) motion
    let mut moved = vec![0.0; n];
    for (i, (uav, a)) in next.uavs.iter_mut().zip(actions).enumerate() {
        let a = Action::new(a.ax, a.ay);
        let new_pos = apply_action(uav.pos, a, cfg.step_length);
        uav.velocity = new_pos - uav.pos;
        moved[i] = uav.velocity.norm();
        uav.pos = new_pos;
    }

    // (2) collisions
    let collided: Vec<bool> = next.uavs.iter().map(|u| collides(&next, u.pos)).collect();
    let min_laser: Vec<f64> =
        (0..n).map(|u| cast_lasers(&next, u).into_iter().fold(f64::INFINITY, f64::min)).collect();
    for (uav, &hit) in next.uavs.iter_mut().zip(&collided) {
        if hit {
            uav.alive = false;
        }
    }

    // (3) collection, sequential in MUAV order
    let rate = Quantity::from_f64(cfg.collect_rate);
    let mut collected = vec![Quantity::ZERO; n];
    let mut collections = Vec::new();
    let mut discovered = vec![Vec::new(); n];
    for m in next.muav_indices() {
        let pos = next.uavs[m].pos;
        for (p, poi) in next.pois.iter_mut().enumerate() {
            if pos.dist(poi.pos) > cfg.sense_radius {
                continue;
            }
            // PoIs first sensed this step count for every MUAV that senses them.
            if !state.discovered[p] {
                next.discovered[p] = true;
                discovered[m].push(p);
            }
            let amount = rate.min(poi.data_remaining);
            if amount.is_positive() {
                poi.data_remaining -= amount;
                collected[m] += amount;
                collections.push(PoiCollection { uav: m, poi: p, amount });
            }
        }
    }

    // (4) charging
    let e0 = Quantity::from_f64(cfg.charge_per_step);
    let budget = cfg.energy_budget();
    let mean_before = {
        let muavs = next.muav_indices();
        let count = muavs.len().max(1) as f64;
        muavs.map(|m| next.uavs[m].energy_remaining.as_f64()).sum::<f64>() / count
    };
    let mut charging = Vec::with_capacity(cfg.num_cuavs);
    for c in next.cuav_indices() {
        let outcome = match closest_muav_within(&next, next.uavs[c].pos, cfg.charge_radius) {
            None => ChargeOutcome::idle(mean_before),
            Some(m) => {
                let target = &mut next.uavs[m];
                let before = target.energy_remaining;
                let delivered = e0.min(budget - before).max(Quantity::ZERO);
                target.energy_remaining += delivered;
                target.energy_charged += delivered;
                ChargeOutcome {
                    target: Some(m),
                    delivered,
                    wasted: e0 - delivered,
                    target_energy_before: before,
                    fleet_mean_energy_before: mean_before,
                }
            }
        };
        charging.push(outcome);
    }

    // (5) MUAV energy
    let mut depleted = false;
    for m in next.muav_indices() {
        let uav = &mut next.uavs[m];
        let cost = Quantity::from_f64(cfg.beta * collected[m].as_f64() + cfg.kappa * moved[m]);
        let spent = cost.min(uav.energy_remaining);
        uav.energy_consumed += spent;
        uav.energy_remaining -= spent;
        if !uav.energy_remaining.is_positive() {
            uav.alive = false;
            depleted = true;
        }
    }

    // (6) clock
    next.t += 1;
    let terminated = if collided.iter().any(|&c| c) {
        Some(Termination::Collision)
    } else if depleted {
        Some(Termination::EnergyDepleted)
    } else if next.t >= cfg.max_steps {
        Some(Termination::MaxSteps)
    } else {
        None
    };
    next.done = terminated.is_some();
    next.termination = terminated;

    let events = StepEvents {
        collected,
        collections,
        moved,
        charging,
        collided,
        min_laser,
        discovered,
        terminated,
    };
    Ok((next, events))
}

/// Length of an observation vector for a UAV of `kind`.
pub fn observation_width(kind: UavKind, cfg: &WorldConfig) -> usize {
    let common = cfg.num_lasers + OBS_NEIGHBOR_UAVS * 4 + 2 + 2 + 1;
    match kind {
        UavKind::Muav => common + OBS_NEAREST_POIS * 3 + 3 + 2,
        UavKind::Cuav => common + cfg.num_muavs * 5 + 2,
    }
}

/// Widest observation over the kinds present in the fleet.
pub fn max_observation_width(cfg: &WorldConfig) -> usize {
    let mut w = observation_width(UavKind::Muav, cfg);
    if cfg.num_cuavs > 0 {
        w = w.max(observation_width(UavKind::Cuav, cfg));
    }
    w
}

fn push_direction(out: &mut Vec<f64>, from: Vec2, to: Vec2) -> f64 {
    let delta = to - from;
    let unit = delta.unit_or_zero();
    out.push(unit.x);
    out.push(unit.y);
    delta.norm()
}

/// Observation vector of UAV `u`.
///
/// Layout (MUAV): lasers, two peer blocks `(ux, uy, dist, type)` with type
/// `+1` for MUAV and `-1` for CUAV, five PoI blocks `(ux, uy, remaining)`,
/// velocity in step-length units, position scaled to `[0,1]²`, `t/max_steps`,
/// `(Er/Er0, Ec/E_max, Ed/Er0)`, type one-hot.
///
/// Layout (CUAV): lasers, peer blocks, an energy table with one
/// `(Er/Er0, Ec/E_max, ux, uy, dist)` row per MUAV, velocity, position,
/// time, type one-hot.
pub fn observe(state: &WorldState, u: usize) -> Vec<f64> {
    let cfg = &state.config;
    let me = &state.uavs[u];
    let view = cfg.effective_view_range();
    let mut out = Vec::with_capacity(observation_width(me.kind, cfg));

    out.extend(cast_lasers(state, u));

    let mut peers: Vec<(usize, f64)> =
        (0..state.uavs.len()).filter(|&v| v != u).map(|v| (v, me.pos.dist(state.uavs[v].pos))).collect();
    peers.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    for slot in 0..OBS_NEIGHBOR_UAVS {
        match peers.get(slot) {
            Some(&(v, _)) => {
                let d = push_direction(&mut out, me.pos, state.uavs[v].pos);
                out.push(d);
                out.push(match state.uavs[v].kind {
                    UavKind::Muav => 1.0,
                    UavKind::Cuav => -1.0,
                });
            }
            None => out.extend([0.0, 0.0, view, 0.0]),
        }
    }

    let budget = cfg.initial_energy;
    match me.kind {
        UavKind::Muav => {
            let mut pois: Vec<(usize, f64)> = state
                .pois
                .iter()
                .enumerate()
                .filter(|(_, p)| p.data_remaining.is_positive())
                .map(|(i, p)| (i, me.pos.dist(p.pos)))
                .filter(|&(_, d)| d <= view)
                .collect();
            pois.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            for slot in 0..OBS_NEAREST_POIS {
                match pois.get(slot) {
                    Some(&(p, _)) => {
                        push_direction(&mut out, me.pos, state.pois[p].pos);
                        out.push(state.pois[p].data_remaining.as_f64());
                    }
                    None => out.extend([0.0; 3]),
                }
            }
        }
        UavKind::Cuav => {
            for m in state.muav_indices() {
                let muav = &state.uavs[m];
                out.push(muav.energy_remaining.as_f64() / budget);
                out.push(muav.energy_charged.as_f64() / cfg.e_max);
                let d = push_direction(&mut out, me.pos, muav.pos);
                out.push(d);
            }
        }
    }

    out.push(me.velocity.x / cfg.step_length);
    out.push(me.velocity.y / cfg.step_length);
    out.push(me.pos.x / cfg.area_width);
    out.push(me.pos.y / cfg.area_height);
    out.push(state.t as f64 / cfg.max_steps as f64);
    if me.kind == UavKind::Muav {
        out.push(me.energy_remaining.as_f64() / budget);
        out.push(me.energy_charged.as_f64() / cfg.e_max);
        out.push(me.energy_consumed.as_f64() / budget);
    }
    out.extend(me.kind.one_hot());
    debug_assert_eq!(out.len(), observation_width(me.kind, cfg));
    out
}

pub fn observe_all(state: &WorldState) -> Vec<Vec<f64>> {
    (0..state.uavs.len()).map(|u| observe(state, u)).collect()
}
