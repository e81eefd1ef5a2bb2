//! Uniform experience replay.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub states: Array2<T>,
    pub actions: Array2<T>,
    pub rewards: Array1<T>,
    pub next_states: Array2<T>,
    pub indices: Vec<usize>,
}

/// Ring buffer of `(s, a, r, s')`. Storage grows lazily up to `capacity`,
/// after which the oldest transition is overwritten.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<T>,
    actions: Vec<T>,
    rewards: Vec<T>,
    next_states: Vec<T>,
    len: usize,
    head: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 || state_dim == 0 || action_dim == 0 {
            return Err(Error::arg("replay capacity and dimensions must be positive"));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            len: 0,
            head: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, state: &[T], action: &[T], reward: T, next_state: &[T]) -> Result<()> {
        if state.len() != self.state_dim || next_state.len() != self.state_dim || action.len() != self.action_dim {
            return Err(Error::arg("transition dimensions do not match the buffer"));
        }
        if self.len < self.capacity {
            self.states.extend_from_slice(state);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_states.extend_from_slice(next_state);
            self.len += 1;
        } else {
            let (s, a) = (self.head * self.state_dim, self.head * self.action_dim);
            self.states[s..s + self.state_dim].copy_from_slice(state);
            self.actions[a..a + self.action_dim].copy_from_slice(action);
            self.rewards[self.head] = reward;
            self.next_states[s..s + self.state_dim].copy_from_slice(next_state);
        }
        self.head = (self.head + 1) % self.capacity;
        Ok(())
    }

    /// Uniform sampling with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Result<Batch<T>> {
        if self.is_empty() {
            return Err(Error::InvalidState("cannot sample from an empty replay buffer".into()));
        }
        let indices: Vec<usize> = (0..batch).map(|_| rng.random_range(0..self.len)).collect();
        Ok(self.gather(indices))
    }

    pub fn gather(&self, indices: Vec<usize>) -> Batch<T> {
        let rows = |data: &[T], width: usize| {
            Array2::from_shape_fn((indices.len(), width), |(b, j)| data[indices[b] * width + j])
        };
        Batch {
            states: rows(&self.states, self.state_dim),
            actions: rows(&self.actions, self.action_dim),
            rewards: indices.iter().map(|&i| self.rewards[i]).collect(),
            next_states: rows(&self.next_states, self.state_dim),
            indices,
        }
    }
}
