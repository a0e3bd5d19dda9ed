use rand::Rng;
use serde::{Deserialize, Serialize};

use super::explore::EpsilonSchedule;
use super::replay::{ActionValue, ReplayBuffer, Transition};
use crate::numkit::{adam_step, soft_update, Activation, AdamState, DenseMatrix, LayerSpec, Mlp, NumError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdqnConfig {
    /// Hidden layers; the linear action-value head is appended.
    pub hidden: Vec<LayerSpec>,
    pub gamma: f64,
    pub lr: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub epsilon: EpsilonSchedule,
}

/// Double DQN: the online net picks the bootstrap action, the target net
/// scores it.
#[derive(Debug, Clone)]
pub struct DdqnAgent {
    pub q_net: Mlp,
    pub target_net: Mlp,
    pub config: DdqnConfig,
    pub replay: ReplayBuffer,
    adam: AdamState,
    n_actions: usize,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Double-Q regression targets. Terminal and virtually stopped transitions
/// do not bootstrap.
pub fn ddqn_targets(batch: &[&Transition], q_net: &Mlp, target_net: &Mlp, gamma: f64) -> Result<Vec<f64>, NumError> {
    assert!(!batch.is_empty(), "empty batch");
    let next = DenseMatrix::from_rows(&batch.iter().map(|t| t.next_state.as_slice()).collect::<Vec<_>>())?;
    let q_next = q_net.predict_batch(&next)?;
    let t_next = target_net.predict_batch(&next)?;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.terminal() {
                t.reward
            } else {
                let a_star = argmax(q_next.row(i));
                t.reward + gamma * t_next.get(i, a_star)
            }
        })
        .collect())
}

impl DdqnAgent {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, n_actions: usize, config: DdqnConfig, init_rng: &mut R) -> Result<Self, NumError> {
        let mut layers = config.hidden.clone();
        layers.push(LayerSpec::new(n_actions, Activation::Linear));
        let q_net = Mlp::new(state_dim, &layers, init_rng)?;
        Self::from_net(q_net, config)
    }

    pub fn from_net(q_net: Mlp, config: DdqnConfig) -> Result<Self, NumError> {
        if !(config.tau > 0.0 && config.tau <= 1.0) {
            return Err(NumError::Config(format!("tau {} outside (0, 1]", config.tau)));
        }
        if config.batch_size == 0 || config.replay_capacity == 0 {
            return Err(NumError::Config("batch size and replay capacity must be positive".into()));
        }
        Ok(Self {
            target_net: q_net.clone(),
            adam: AdamState::for_net(&q_net),
            n_actions: q_net.output_dim(),
            replay: ReplayBuffer::new(config.replay_capacity),
            q_net,
            config,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn epsilon_at(&self, t: u64) -> f64 {
        self.config.epsilon.epsilon_at(t)
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, NumError> {
        self.q_net.predict(state)
    }

    pub fn greedy(&self, state: &[f64]) -> Result<ActionValue, NumError> {
        Ok(ActionValue::Discrete(argmax(&self.q_values(state)?)))
    }

    /// Epsilon-greedy action at step `t`. One uniform draw is always taken so
    /// the stream advances identically whichever branch fires.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], t: u64, rng: &mut R) -> Result<ActionValue, NumError> {
        let eps = self.epsilon_at(t);
        let u: f64 = rng.random();
        if u < eps {
            Ok(ActionValue::Discrete(rng.random_range(0..self.n_actions)))
        } else {
            self.greedy(state)
        }
    }

    /// One minibatch update. `Ok(None)` when the replay buffer is smaller
    /// than the batch size.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>, NumError> {
        let batch = match self.replay.sample(self.config.batch_size, rng) {
            Some(b) => b,
            None => return Ok(None),
        };
        let loss = train_on_batch(
            &mut self.q_net,
            &self.target_net,
            &mut self.adam,
            &batch,
            self.config.gamma,
            self.config.lr,
        )?;
        soft_update(&mut self.target_net, &self.q_net, self.config.tau)?;
        Ok(Some(loss))
    }
}

fn train_on_batch(
    q_net: &mut Mlp,
    target_net: &Mlp,
    adam: &mut AdamState,
    batch: &[&Transition],
    gamma: f64,
    lr: f64,
) -> Result<f64, NumError> {
    let y = ddqn_targets(batch, q_net, target_net, gamma)?;
    let states = DenseMatrix::from_rows(&batch.iter().map(|t| t.state.as_slice()).collect::<Vec<_>>())?;
    let q = q_net.forward_batch(&states)?;
    let n = batch.len() as f64;
    let mut grad = DenseMatrix::zeros(q.rows(), q.cols());
    let mut loss = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let a = t.action.index().expect("DDQN transitions carry discrete actions");
        let d = q.get(i, a) - y[i];
        loss += d * d;
        grad.set(i, a, 2.0 * d / n);
    }
    let (grads, _) = q_net.backward_batch(&grad)?;
    adam_step(adam, q_net, &grads, lr)?;
    Ok(loss / n)
}
