use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A single action, discrete index or 1-D continuous value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActionValue {
    Discrete(usize),
    Continuous(f64),
}

impl ActionValue {
    pub fn index(&self) -> Option<usize> {
        match *self {
            ActionValue::Discrete(i) => Some(i),
            ActionValue::Continuous(_) => None,
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match *self {
            ActionValue::Continuous(v) => Some(v),
            ActionValue::Discrete(_) => None,
        }
    }
}

impl std::fmt::Display for ActionValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActionValue::Discrete(i) => write!(f, "{i}"),
            ActionValue::Continuous(v) => write!(f, "{v}"),
        }
    }
}

/// Action-space descriptor: `n` discrete actions or a closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActionSpace {
    Discrete { n: usize },
    Continuous { lo: f64, hi: f64 },
}

impl ActionSpace {
    pub fn contains(&self, a: &ActionValue) -> bool {
        match (*self, *a) {
            (ActionSpace::Discrete { n }, ActionValue::Discrete(i)) => i < n,
            (ActionSpace::Continuous { lo, hi }, ActionValue::Continuous(v)) => v >= lo && v <= hi,
            _ => false,
        }
    }

    /// Width of the predictor's action encoding: one-hot for discrete
    /// spaces, the raw scalar for continuous ones.
    pub fn encoding_dim(&self) -> usize {
        match *self {
            ActionSpace::Discrete { n } => n,
            ActionSpace::Continuous { .. } => 1,
        }
    }

    pub fn encode_into(&self, a: &ActionValue, out: &mut Vec<f64>) {
        match (*self, *a) {
            (ActionSpace::Discrete { n }, ActionValue::Discrete(i)) => {
                out.extend((0..n).map(|k| if k == i { 1.0 } else { 0.0 }));
            }
            (ActionSpace::Continuous { .. }, ActionValue::Continuous(v)) => out.push(v),
            _ => panic!("action {a:?} does not belong to {self:?}"),
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionValue {
        match *self {
            ActionSpace::Discrete { n } => ActionValue::Discrete(rng.random_range(0..n)),
            ActionSpace::Continuous { lo, hi } => ActionValue::Continuous(rng.random_range(lo..=hi)),
        }
    }
}

/// One environment step as stored for TD learning.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: ActionValue,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// The environment ended the episode.
    pub done: bool,
    /// Virtual stopping marked this step as an episode end.
    pub virtual_done: bool,
}

impl Transition {
    pub fn terminal(&self) -> bool {
        self.done || self.virtual_done
    }
}

/// Fixed-capacity FIFO experience store.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of `n` distinct transitions, or `None` when the buffer
    /// holds fewer than `n`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if n == 0 || self.items.len() < n {
            return None;
        }
        Some(
            index::sample(rng, self.items.len(), n)
                .into_iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(r: f64) -> Transition {
        Transition {
            state: vec![r],
            action: ActionValue::Discrete(0),
            reward: r,
            next_state: vec![r + 1.0],
            done: false,
            virtual_done: false,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(tr(i as f64));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_is_without_replacement() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..50 {
            b.push(tr(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = b.sample(50, &mut rng).unwrap();
        let mut seen: Vec<i64> = s.iter().map(|t| t.reward as i64).collect();
        seen.sort();
        assert_eq!(seen, (0..50).collect::<Vec<_>>());
        assert!(b.sample(51, &mut rng).is_none());
    }

    #[test]
    fn one_hot_encoding() {
        let sp = ActionSpace::Discrete { n: 3 };
        let mut v = vec![];
        sp.encode_into(&ActionValue::Discrete(1), &mut v);
        assert_eq!(v, vec![0.0, 1.0, 0.0]);
        assert!(sp.contains(&ActionValue::Discrete(2)));
        assert!(!sp.contains(&ActionValue::Discrete(3)));
        let c = ActionSpace::Continuous { lo: -1.0, hi: 1.0 };
        assert!(!c.contains(&ActionValue::Continuous(1.01)));
    }
}
