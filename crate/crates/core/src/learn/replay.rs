//! Joint-transition experience replay.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The per-slot output of the inner optimizer that completes the learned
/// action: phase shifts and GU serving UAVs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizedAction {
    pub phases: Vec<f64>,
    pub serving: Vec<Option<usize>>,
}

/// One slot of experience for all agents at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub states: Vec<Vec<f64>>,
    /// Learned actions as emitted by the actors (mode logits unrounded).
    pub actions: Vec<Vec<f64>>,
    pub optimized: OptimizedAction,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
    pub done: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores `t`, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `batch` distinct stored transitions, uniformly at random; `None` when
    /// fewer are stored.
    pub fn sample(&mut self, batch: usize) -> Option<Vec<&Transition>> {
        if batch > self.items.len() {
            return None;
        }
        let idx = sample(&mut self.rng, self.items.len(), batch);
        Some(idx.iter().map(|i| &self.items[i]).collect())
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }
}
