use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use super::label::ApLabel;
use crate::agents::ActionValue;

/// `(state, action, label)` extracted from an executed transition.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeTuple {
    pub state: Vec<f64>,
    pub action: ActionValue,
    pub label: ApLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    Train,
    Holdout,
}

impl Lane {
    pub fn as_str(self) -> &'static str {
        match self {
            Lane::Train => "train",
            Lane::Holdout => "holdout",
        }
    }
}

/// Bounded store of labeled tuples, kept per class and split into training
/// and holdout lanes.
///
/// Each insert is routed to the holdout lane with probability
/// `holdout_fraction`. At capacity, the oldest tuple of the incoming tuple's
/// class is evicted, whichever lane holds it.
#[derive(Debug, Clone)]
pub struct KnowledgeBuffer {
    capacity: usize,
    holdout_fraction: f64,
    // [class][lane], entries tagged with insertion order
    lanes: [[VecDeque<(u64, KnowledgeTuple)>; 2]; 2],
    next_seq: u64,
}

fn lane_idx(l: Lane) -> usize {
    match l {
        Lane::Train => 0,
        Lane::Holdout => 1,
    }
}

impl KnowledgeBuffer {
    pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.1;

    pub fn new(capacity: usize) -> Self {
        Self::with_holdout(capacity, Self::DEFAULT_HOLDOUT_FRACTION)
    }

    pub fn with_holdout(capacity: usize, holdout_fraction: f64) -> Self {
        assert!(capacity > 0, "knowledge buffer capacity must be positive");
        assert!((0.0..1.0).contains(&holdout_fraction));
        Self {
            capacity,
            holdout_fraction,
            lanes: Default::default(),
            next_seq: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.lanes.iter().flatten().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, label: ApLabel, lane: Lane) -> usize {
        self.lanes[label.class()][lane_idx(lane)].len()
    }

    /// Total tuples of one class across both lanes.
    pub fn class_count(&self, label: ApLabel) -> usize {
        self.lanes[label.class()].iter().map(VecDeque::len).sum()
    }

    pub fn holdout_len(&self) -> usize {
        self.count(ApLabel::Permissible, Lane::Holdout) + self.count(ApLabel::NonPermissible, Lane::Holdout)
    }

    fn evict_oldest_of(&mut self, class: usize) -> bool {
        let [train, holdout] = &mut self.lanes[class];
        let victim = match (train.front(), holdout.front()) {
            (Some(a), Some(b)) => {
                if a.0 < b.0 {
                    train
                } else {
                    holdout
                }
            }
            (Some(_), None) => train,
            (None, Some(_)) => holdout,
            (None, None) => return false,
        };
        victim.pop_front();
        true
    }

    /// Inserts a tuple; the lane is chosen by one uniform draw from `rng`.
    pub fn insert<R: Rng + ?Sized>(&mut self, tuple: KnowledgeTuple, rng: &mut R) -> Lane {
        let u: f64 = rng.random();
        let lane = if u < self.holdout_fraction { Lane::Holdout } else { Lane::Train };
        let class = tuple.label.class();
        if self.len() >= self.capacity && !self.evict_oldest_of(class) {
            // buffer is full of the other class only
            self.evict_oldest_of(1 - class);
        }
        self.lanes[class][lane_idx(lane)].push_back((self.next_seq, tuple));
        self.next_seq += 1;
        lane
    }

    /// `n_e / 2` distinct training tuples of each class, or `None` when
    /// either class has fewer than that.
    pub fn sample_balanced<R: Rng + ?Sized>(&self, n_e: usize, rng: &mut R) -> Option<Vec<KnowledgeTuple>> {
        let half = n_e / 2;
        if half == 0 {
            return None;
        }
        let pos = &self.lanes[ApLabel::Permissible.class()][0];
        let neg = &self.lanes[ApLabel::NonPermissible.class()][0];
        if pos.len() < half || neg.len() < half {
            return None;
        }
        let mut out = Vec::with_capacity(2 * half);
        for lane in [pos, neg] {
            out.extend(index::sample(rng, lane.len(), half).into_iter().map(|i| lane[i].1.clone()));
        }
        Some(out)
    }

    /// Up to `n` distinct holdout tuples drawn uniformly across both classes.
    pub fn sample_holdout<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&KnowledgeTuple> {
        let pos = &self.lanes[1][1];
        let neg = &self.lanes[0][1];
        let total = pos.len() + neg.len();
        let k = n.min(total);
        index::sample(rng, total, k)
            .into_iter()
            .map(|i| if i < pos.len() { &pos[i].1 } else { &neg[i - pos.len()].1 })
            .collect()
    }

    /// Every stored tuple with its lane, oldest first.
    pub fn entries(&self) -> Vec<(&KnowledgeTuple, Lane)> {
        let mut all: Vec<(u64, &KnowledgeTuple, Lane)> = Vec::with_capacity(self.len());
        for class in &self.lanes {
            for (li, lane) in class.iter().enumerate() {
                let l = if li == 0 { Lane::Train } else { Lane::Holdout };
                all.extend(lane.iter().map(|(s, t)| (*s, t, l)));
            }
        }
        all.sort_by_key(|e| e.0);
        all.into_iter().map(|(_, t, l)| (t, l)).collect()
    }

    /// CSV dump: `state...,action,label,lane`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        for (t, lane) in self.entries() {
            let mut rec: Vec<String> = t.state.iter().map(|v| v.to_string()).collect();
            rec.push(t.action.to_string());
            rec.push(t.label.class().to_string());
            rec.push(lane.as_str().to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}
