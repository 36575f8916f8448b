use rand::Rng;

use crate::env::Action;
use crate::world::{UavKind, Vec2, WorldState};

fn toward(from: Vec2, to: Vec2) -> Action {
    let d = (to - from).unit_or_zero();
    Action::new(d.x, d.y)
}

/// Scripted baseline. MUAVs head for the nearest PoI that still holds data and
/// hover once one is within sensing range; CUAVs chase the MUAV with the least
/// remaining energy and hover once it is within charging range. Obstacles are
/// ignored.
pub fn greedy_policy(state: &WorldState, u: usize) -> Action {
    let cfg = &state.config;
    let me = &state.uavs[u];
    match me.kind {
        UavKind::Muav => {
            let mut best: Option<(usize, f64)> = None;
            for (i, p) in state.pois.iter().enumerate() {
                if !p.data_remaining.is_positive() {
                    continue;
                }
                let d = me.pos.dist(p.pos);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
            match best {
                Some((_, d)) if d <= cfg.sense_radius => Action::IDLE,
                Some((i, _)) => toward(me.pos, state.pois[i].pos),
                None => Action::IDLE,
            }
        }
        UavKind::Cuav => {
            let mut target: Option<usize> = None;
            for m in state.muav_indices() {
                if target.is_none_or(|t| state.uavs[m].energy_remaining < state.uavs[t].energy_remaining) {
                    target = Some(m);
                }
            }
            match target {
                Some(m) if me.pos.dist(state.uavs[m].pos) > cfg.charge_radius => toward(me.pos, state.uavs[m].pos),
                _ => Action::IDLE,
            }
        }
    }
}

/// Both components uniform on `[-1, 1]`.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R) -> Action {
    Action::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
}
