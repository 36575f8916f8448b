//! Array-backed sum tree with a parallel max tree for proportional sampling.

use rand::Rng;

use crate::error::{HgamError, Result};

/// Leaves live at `[capacity, 2·capacity)`; node `i` has children `2i` and
/// `2i + 1`. Internal nodes are recomputed from their children on every
/// write, so each one is exactly the sum of its two children.
#[derive(Clone, Debug, PartialEq)]
pub struct SumTree {
    capacity: usize,
    sums: Vec<f64>,
    maxes: Vec<f64>,
}

impl SumTree {
    /// Tree able to hold at least `min_capacity` leaves (rounded up to a power of two).
    pub fn new(min_capacity: usize) -> Self {
        let capacity = min_capacity.max(1).next_power_of_two();
        SumTree { capacity, sums: vec![0.0; 2 * capacity], maxes: vec![0.0; 2 * capacity] }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.sums[1]
    }

    /// Largest leaf priority currently stored.
    pub fn max_priority(&self) -> f64 {
        self.maxes[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.sums[self.capacity + index]
    }

    pub fn set(&mut self, index: usize, priority: f64) -> Result<()> {
        if index >= self.capacity {
            return Err(HgamError::contract(format!("leaf {index} outside tree of {}", self.capacity)));
        }
        if !(priority.is_finite() && priority >= 0.0) {
            return Err(HgamError::contract(format!("invalid priority {priority}")));
        }
        let mut node = self.capacity + index;
        self.sums[node] = priority;
        self.maxes[node] = priority;
        while node > 1 {
            node /= 2;
            self.sums[node] = self.sums[2 * node] + self.sums[2 * node + 1];
            self.maxes[node] = self.maxes[2 * node].max(self.maxes[2 * node + 1]);
        }
        Ok(())
    }

    /// Leaf whose cumulative-priority interval contains `mass`. Never returns
    /// an empty leaf while the tree holds positive mass.
    pub fn find(&self, mass: f64) -> usize {
        let mut node = 1;
        let mut mass = mass;
        while node < self.capacity {
            let left = 2 * node;
            if mass < self.sums[left] || self.sums[left + 1] <= 0.0 {
                node = left;
            } else {
                mass -= self.sums[left];
                node = left + 1;
            }
        }
        node - self.capacity
    }

    /// Checks that every internal node equals the sum of its children.
    pub fn is_consistent(&self) -> bool {
        (1..self.capacity).all(|i| {
            self.sums[i] == self.sums[2 * i] + self.sums[2 * i + 1]
                && self.maxes[i] == self.maxes[2 * i].max(self.maxes[2 * i + 1])
        })
    }
}

/// Stratified proportional sampling: the total mass is cut into `k` equal
/// segments and one point is drawn uniformly inside each. Returns leaf
/// indices with their selection probabilities `p_i / Σp`.
pub fn per_sample<R: Rng + ?Sized>(tree: &SumTree, k: usize, rng: &mut R) -> Result<Vec<(usize, f64)>> {
    let total = tree.total();
    if !(total > 0.0) {
        return Err(HgamError::contract("sampling from an empty priority tree"));
    }
    let segment = total / k as f64;
    Ok((0..k)
        .map(|i| {
            let mass = ((i as f64 + rng.random::<f64>()) * segment).min(total);
            let idx = tree.find(mass);
            (idx, tree.get(idx) / total)
        })
        .collect())
}

/// Stored priority for a TD error: `(|δ| + ε)^α`.
pub fn priority_from_delta(delta: f64, alpha: f64, epsilon: f64) -> f64 {
    (delta.abs() + epsilon).powf(alpha)
}

pub fn per_update(tree: &mut SumTree, index: usize, delta: f64, alpha: f64, epsilon: f64) -> Result<()> {
    tree.set(index, priority_from_delta(delta, alpha, epsilon))
}
