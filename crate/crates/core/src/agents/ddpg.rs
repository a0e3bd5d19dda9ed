use rand::Rng;
use serde::{Deserialize, Serialize};

use super::explore::{OuNoise, OuParams};
use super::replay::{ActionValue, ReplayBuffer, Transition};
use crate::numkit::{adam_step, soft_update, Activation, AdamState, DenseMatrix, Gradients, LayerSpec, Mlp, NumError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdpgConfig {
    /// Actor hidden layers; a tanh output unit is appended.
    pub actor_hidden: Vec<LayerSpec>,
    /// Critic hidden layers over `state ++ [action]`; a linear unit is appended.
    pub critic_hidden: Vec<LayerSpec>,
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub noise: OuParams,
    /// Noise is only added while `t <= explore_steps`.
    pub explore_steps: u64,
    /// Multiplies rewards before they enter the critic targets.
    pub reward_scale: f64,
}

/// Deterministic actor-critic with target networks and OU exploration.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    pub config: DdpgConfig,
    pub replay: ReplayBuffer,
    pub noise: OuNoise,
    lo: f64,
    hi: f64,
    adam_actor: AdamState,
    adam_critic: AdamState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpgLosses {
    pub critic_loss: f64,
    /// Mean critic value of the actor's actions on the batch.
    pub actor_objective: f64,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        bounds: (f64, f64),
        config: DdpgConfig,
        init_rng: &mut R,
    ) -> Result<Self, NumError> {
        let mut a_layers = config.actor_hidden.clone();
        a_layers.push(LayerSpec::new(1, Activation::Tanh));
        let actor = Mlp::new(state_dim, &a_layers, init_rng)?;
        let mut c_layers = config.critic_hidden.clone();
        c_layers.push(LayerSpec::new(1, Activation::Linear));
        let critic = Mlp::new(state_dim + 1, &c_layers, init_rng)?;
        Self::from_nets(actor, critic, bounds, config)
    }

    pub fn from_nets(actor: Mlp, critic: Mlp, bounds: (f64, f64), config: DdpgConfig) -> Result<Self, NumError> {
        if actor.output_dim() != 1 || critic.output_dim() != 1 || critic.input_dim() != actor.input_dim() + 1 {
            return Err(NumError::Shape("actor must emit one action and critic take state ++ action".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(bounds.0 < bounds.1) {
            return Err(NumError::Config(format!("empty action interval {bounds:?}")));
        }
        if !(config.tau > 0.0 && config.tau <= 1.0) {
            return Err(NumError::Config(format!("tau {} outside (0, 1]", config.tau)));
        }
        if config.batch_size == 0 || config.replay_capacity == 0 {
            return Err(NumError::Config("batch size and replay capacity must be positive".into()));
        }
        Ok(Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            adam_actor: AdamState::for_net(&actor),
            adam_critic: AdamState::for_net(&critic),
            noise: OuNoise::new(config.noise),
            replay: ReplayBuffer::new(config.replay_capacity),
            lo: bounds.0,
            hi: bounds.1,
            actor,
            critic,
            config,
        })
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn half_range(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    fn scale(&self, y: f64) -> f64 {
        self.lo + (y + 1.0) * self.half_range()
    }

    /// Actor output mapped from tanh range onto the action bounds.
    pub fn policy(&self, state: &[f64]) -> Result<f64, NumError> {
        Ok(self.scale(self.actor.predict(state)?[0]))
    }

    /// Actor action, plus OU noise while exploring and `t <= explore_steps`,
    /// clamped to the bounds.
    pub fn act<R: Rng + ?Sized>(&mut self, state: &[f64], t: u64, explore: bool, rng: &mut R) -> Result<ActionValue, NumError> {
        let mut a = self.policy(state)?;
        if explore && t <= self.config.explore_steps {
            a += self.noise.step(rng);
        }
        Ok(ActionValue::Continuous(a.clamp(self.lo, self.hi)))
    }

    pub fn q_value(&self, state: &[f64], action: f64) -> Result<f64, NumError> {
        let mut x = state.to_vec();
        x.push(action);
        Ok(self.critic.predict(&x)?[0])
    }

    fn critic_input(states: &DenseMatrix, actions: &[f64]) -> DenseMatrix {
        let d = states.cols();
        let mut x = DenseMatrix::zeros(states.rows(), d + 1);
        for (i, &a) in actions.iter().enumerate().take(states.rows()) {
            let row = x.row_mut(i);
            row[..d].copy_from_slice(states.row(i));
            row[d] = a;
        }
        x
    }

    /// Critic targets: `r` for terminal rows, else
    /// `r + gamma * Q'(s', mu'(s'))`, with rewards scaled by `reward_scale`.
    pub fn critic_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>, NumError> {
        let next = DenseMatrix::from_rows(&batch.iter().map(|t| t.next_state.as_slice()).collect::<Vec<_>>())?;
        let mu = self.actor_target.predict_batch(&next)?;
        let acts: Vec<f64> = mu.as_slice().iter().map(|y| self.scale(*y)).collect();
        let q = self.critic_target.predict_batch(&Self::critic_input(&next, &acts))?;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let r = t.reward * self.config.reward_scale;
                if t.terminal() {
                    r
                } else {
                    r + self.config.gamma * q.get(i, 0)
                }
            })
            .collect())
    }

    /// Gradient of `-mean_i Q(s_i, mu(s_i))` with respect to the actor
    /// parameters, chained through the critic. Returns the gradient and the
    /// mean critic value.
    pub fn actor_gradient(&mut self, states: &DenseMatrix) -> Result<(Gradients, f64), NumError> {
        let n = states.rows() as f64;
        let y = self.actor.forward_batch(states)?;
        let acts: Vec<f64> = y.as_slice().iter().map(|v| self.scale(*v)).collect();
        let q = self.critic.forward_batch(&Self::critic_input(states, &acts))?;
        let objective = q.as_slice().iter().sum::<f64>() / n;
        let seed = DenseMatrix::from_vec(q.rows(), 1, vec![-1.0 / n; q.rows()])?;
        let (_, dx) = self.critic.backward_batch(&seed)?;
        let d = states.cols();
        let half = self.half_range();
        let dy: Vec<f64> = (0..states.rows()).map(|i| dx.get(i, d) * half).collect();
        let (grads, _) = self.actor.backward_batch(&DenseMatrix::from_vec(states.rows(), 1, dy)?)?;
        Ok((grads, objective))
    }

    /// One Adam ascent step of the actor on the given states.
    pub fn actor_update(&mut self, states: &DenseMatrix) -> Result<f64, NumError> {
        let (grads, objective) = self.actor_gradient(states)?;
        adam_step(&mut self.adam_actor, &mut self.actor, &grads, self.config.lr_actor)?;
        Ok(objective)
    }

    /// Critic regression, actor ascent, then soft target updates. `Ok(None)`
    /// when the replay buffer is smaller than the batch size.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<DdpgLosses>, NumError> {
        let batch: Vec<Transition> = match self.replay.sample(self.config.batch_size, rng) {
            Some(b) => b.into_iter().cloned().collect(),
            None => return Ok(None),
        };
        let refs: Vec<&Transition> = batch.iter().collect();
        let y = self.critic_targets(&refs)?;
        let states = DenseMatrix::from_rows(&batch.iter().map(|t| t.state.as_slice()).collect::<Vec<_>>())?;
        let acts: Vec<f64> = batch
            .iter()
            .map(|t| t.action.scalar().expect("DDPG transitions carry continuous actions"))
            .collect();
        let q = self.critic.forward_batch(&Self::critic_input(&states, &acts))?;
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let grad: Vec<f64> = q
            .as_slice()
            .iter()
            .zip(&y)
            .map(|(p, t)| {
                let d = p - t;
                loss += d * d;
                2.0 * d / n
            })
            .collect();
        let (cg, _) = self.critic.backward_batch(&DenseMatrix::from_vec(batch.len(), 1, grad)?)?;
        adam_step(&mut self.adam_critic, &mut self.critic, &cg, self.config.lr_critic)?;
        let objective = self.actor_update(&states)?;
        soft_update(&mut self.critic_target, &self.critic, self.config.tau)?;
        soft_update(&mut self.actor_target, &self.actor, self.config.tau)?;
        Ok(Some(DdpgLosses {
            critic_loss: loss / n,
            actor_objective: objective,
        }))
    }
}
