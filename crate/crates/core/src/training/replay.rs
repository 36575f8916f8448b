//! Shared transition ring buffer indexed by one priority tree per agent.

use rand::Rng;

use super::sum_tree::{per_sample, per_update, SumTree};
use crate::env::Action;
use crate::error::{HgamError, Result};
use crate::world::Vec2;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<Vec<f64>>,
    pub positions: Vec<Vec2>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<Vec<f64>>,
    pub next_positions: Vec<Vec2>,
    pub done: bool,
    pub episode: usize,
    pub step: usize,
}

/// Discounted sum of the first `min(N, len)` rewards and the number summed.
pub fn nstep_return(rewards: &[f64], gamma: f64, n: usize) -> (f64, usize) {
    let horizon = n.min(rewards.len());
    let mut lambda = 0.0;
    let mut discount = 1.0;
    for &r in &rewards[..horizon] {
        lambda += discount * r;
        discount *= gamma;
    }
    (lambda, horizon)
}

/// A transition expanded to its N-step window.
#[derive(Clone, Debug, PartialEq)]
pub struct NStepItem {
    /// Slot of the first transition of the window.
    pub index: usize,
    /// Slot whose `next_obs` bootstraps the return.
    pub last: usize,
    /// Per-agent partial returns.
    pub returns: Vec<f64>,
    pub horizon: usize,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    slots: Vec<Transition>,
    cursor: usize,
    trees: Vec<SumTree>,
    alpha: f64,
    epsilon: f64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, agents: usize, alpha: f64, epsilon: f64) -> Self {
        ReplayBuffer {
            capacity,
            slots: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
            trees: (0..agents).map(|_| SumTree::new(capacity)).collect(),
            alpha,
            epsilon,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn agents(&self) -> usize {
        self.trees.len()
    }

    pub fn tree(&self, agent: usize) -> &SumTree {
        &self.trees[agent]
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.slots[index]
    }

    /// Slot of the most recent insert.
    pub fn newest(&self) -> Option<usize> {
        (!self.slots.is_empty()).then(|| (self.cursor + self.capacity - 1) % self.capacity)
    }

    /// Stores `t`, overwriting the oldest slot once full. Every agent's tree
    /// gives it that tree's current maximum priority (1 for an empty tree).
    pub fn push(&mut self, t: Transition) -> Result<usize> {
        if t.rewards.len() != self.trees.len() || !t.rewards.iter().all(|r| r.is_finite()) {
            return Err(HgamError::contract("transition rewards must be finite, one per agent"));
        }
        let index = self.cursor;
        if self.slots.len() < self.capacity {
            self.slots.push(t);
        } else {
            self.slots[index] = t;
        }
        for tree in &mut self.trees {
            let p = if tree.total() > 0.0 { tree.max_priority() } else { 1.0 };
            tree.set(index, p)?;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(index)
    }

    /// Stratified sample of `k` slots from `agent`'s tree.
    pub fn sample<R: Rng + ?Sized>(&self, agent: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        Ok(per_sample(&self.trees[agent], k, rng)?.into_iter().map(|(i, _)| i).collect())
    }

    /// Normalised priority `ζ` of `index` under `agent`'s tree.
    pub fn weight(&self, agent: usize, index: usize) -> f64 {
        let tree = &self.trees[agent];
        tree.get(index) / tree.total()
    }

    pub fn update_priority(&mut self, agent: usize, index: usize, delta: f64) -> Result<()> {
        if index >= self.slots.len() {
            return Err(HgamError::contract(format!("priority update for empty slot {index}")));
        }
        per_update(&mut self.trees[agent], index, delta, self.alpha, self.epsilon)
    }

    /// Follows `index` forward through at most `n` consecutive transitions of
    /// the same episode, stopping at a terminal one or at the newest insert.
    pub fn nstep(&self, index: usize, n: usize, gamma: f64) -> NStepItem {
        let first = &self.slots[index];
        let newest = self.newest().expect("non-empty buffer");
        let mut last = index;
        let mut per_agent: Vec<Vec<f64>> = first.rewards.iter().map(|&r| vec![r]).collect();
        while per_agent[0].len() < n && !self.slots[last].done && last != newest {
            let next = (last + 1) % self.capacity;
            let t = &self.slots[next];
            if t.episode != first.episode || t.step != self.slots[last].step + 1 {
                break;
            }
            for (acc, &r) in per_agent.iter_mut().zip(&t.rewards) {
                acc.push(r);
            }
            last = next;
        }
        let mut horizon = 0;
        let returns = per_agent
            .iter()
            .map(|rs| {
                let (lambda, h) = nstep_return(rs, gamma, n);
                horizon = h;
                lambda
            })
            .collect();
        NStepItem { index, last, returns, horizon, done: self.slots[last].done }
    }
}
