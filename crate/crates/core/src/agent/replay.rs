use rand::seq::index;
use rand::Rng;

use crate::env::CuState;
use crate::error::{Error, Result};

pub const REPLAY_CAPACITY: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: CuState,
    pub action: usize,
    pub reward: f64,
    /// `None` for the last CU of an episode.
    pub next: Option<CuState>,
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        Ok(ReplayBuffer {
            capacity,
            items: Vec::new(),
            head: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Stores `t` and returns the slot it occupies.
    pub fn push(&mut self, t: Transition) -> usize {
        if self.items.len() < self.capacity {
            self.items.push(t);
            self.items.len() - 1
        } else {
            let slot = self.head;
            self.items[slot] = t;
            self.head = (self.head + 1) % self.capacity;
            slot
        }
    }

    pub fn get(&self, slot: usize) -> Option<&Transition> {
        self.items.get(slot)
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Slots of `k` distinct transitions drawn uniformly.
    pub fn sample_slots<R: Rng>(&self, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        if k == 0 || k > self.items.len() {
            return Err(Error::invalid(format!("cannot sample {k} of {} transitions", self.items.len())));
        }
        Ok(index::sample(rng, self.items.len(), k).into_vec())
    }

    pub fn sample<R: Rng>(&self, k: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        Ok(self.sample_slots(k, rng)?.into_iter().map(|i| &self.items[i]).collect())
    }
}
