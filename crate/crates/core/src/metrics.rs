//! Episode-level evaluation metrics and Jain's fairness index.

use serde::{Deserialize, Serialize};

use crate::env::StepEvents;
use crate::error::{HgamError, Result};
use crate::world::{Termination, WorldState};

/// Jain's fairness index `(Σx)² / (n·Σx²)`. All-zero input counts as
/// perfectly fair.
pub fn jain_index(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(HgamError::contract("jain_index needs at least one value"));
    }
    if values.iter().any(|&v| !(v >= 0.0)) {
        return Err(HgamError::contract("jain_index inputs must be non-negative"));
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Ok(1.0);
    }
    Ok((sum * sum / (values.len() as f64 * sum_sq)).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoiRecord {
    pub initial: f64,
    pub remaining: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuavEnergyRecord {
    pub initial: f64,
    pub charged: f64,
    pub consumed: f64,
}

/// Final tallies of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub pois: Vec<PoiRecord>,
    pub muavs: Vec<MuavEnergyRecord>,
    /// Steps in which each CUAV delivered a positive amount of energy.
    pub cuav_active_steps: Vec<usize>,
    pub episode_len: usize,
    pub e_max: f64,
    pub terminated_by: Option<Termination>,
}

impl EpisodeLog {
    /// Starts a log for an episode beginning at `initial`.
    pub fn start(initial: &WorldState) -> Self {
        EpisodeLog {
            pois: Vec::new(),
            muavs: Vec::new(),
            cuav_active_steps: vec![0; initial.config.num_cuavs],
            episode_len: 0,
            e_max: initial.config.e_max,
            terminated_by: None,
        }
    }

    pub fn record_step(&mut self, events: &StepEvents) {
        self.episode_len += 1;
        for (count, outcome) in self.cuav_active_steps.iter_mut().zip(&events.charging) {
            if outcome.is_effective() {
                *count += 1;
            }
        }
    }

    /// Copies end-of-episode PoI and energy tallies from `state`.
    pub fn finish(&mut self, state: &WorldState) {
        self.pois = state
            .pois
            .iter()
            .map(|p| PoiRecord { initial: p.data_initial.as_f64(), remaining: p.data_remaining.as_f64() })
            .collect();
        let initial = state.config.initial_energy;
        self.muavs = state.uavs[..state.config.num_muavs]
            .iter()
            .map(|u| MuavEnergyRecord {
                initial,
                charged: u.energy_charged.as_f64(),
                consumed: u.energy_consumed.as_f64(),
            })
            .collect();
        self.terminated_by = state.termination;
    }
}

/// Share of the initial data volume that was collected.
pub fn data_collection_ratio(log: &EpisodeLog) -> Result<f64> {
    let total: f64 = log.pois.iter().map(|p| p.initial).sum();
    if total <= 0.0 {
        return Err(HgamError::UndefinedMetric("data collection ratio with no initial data"));
    }
    let collected: f64 = log.pois.iter().map(|p| p.initial - p.remaining).sum();
    Ok(collected / total)
}

/// Jain index of the remaining-data fractions; PoIs that started empty are skipped.
pub fn geographical_fairness(log: &EpisodeLog) -> Result<f64> {
    let fractions: Vec<f64> =
        log.pois.iter().filter(|p| p.initial > 0.0).map(|p| p.remaining / p.initial).collect();
    if fractions.is_empty() {
        return Err(HgamError::UndefinedMetric("geographical fairness with no non-empty PoI"));
    }
    jain_index(&fractions)
}

pub fn energy_usage_efficiency(log: &EpisodeLog) -> Result<f64> {
    if log.muavs.is_empty() {
        return Err(HgamError::UndefinedMetric("energy usage efficiency without MUAVs"));
    }
    let total: f64 = log.muavs.iter().map(|m| m.consumed / (m.initial + m.charged)).sum();
    Ok(total / log.muavs.len() as f64)
}

/// Mean fraction of the episode each CUAV spent delivering energy. A fleet
/// without CUAVs scores 0.
pub fn charging_efficiency(log: &EpisodeLog) -> Result<f64> {
    if log.episode_len == 0 {
        return Err(HgamError::UndefinedMetric("charging efficiency of an empty episode"));
    }
    if log.cuav_active_steps.is_empty() {
        return Ok(0.0);
    }
    let t = log.episode_len as f64;
    let total: f64 = log.cuav_active_steps.iter().map(|&c| c as f64 / t).sum();
    Ok(total / log.cuav_active_steps.len() as f64)
}

pub fn charging_fairness(log: &EpisodeLog) -> Result<f64> {
    if log.muavs.is_empty() {
        return Err(HgamError::UndefinedMetric("charging fairness without MUAVs"));
    }
    let fractions: Vec<f64> = log.muavs.iter().map(|m| m.charged / log.e_max).collect();
    jain_index(&fractions)
}

/// The five metrics plus the two joint objectives, as written to report JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
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
    pub episode_len: usize,
    pub terminated_by: Option<Termination>,
}

impl MetricsReport {
    pub fn from_log(log: &EpisodeLog) -> Result<Self> {
        let c = data_collection_ratio(log)?;
        let omega = geographical_fairness(log)?;
        let upsilon = energy_usage_efficiency(log)?;
        let d = charging_efficiency(log)?;
        let f = charging_fairness(log)?;
        Ok(MetricsReport {
            c,
            omega,
            upsilon,
            d,
            f,
            c_times_omega: c * omega,
            d_times_f: d * f,
            episode_len: log.episode_len,
            terminated_by: log.terminated_by,
        })
    }
}
