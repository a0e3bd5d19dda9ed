use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::agents::{argmax, ActionSpace, ActionValue};
use crate::envs::{CartPole, EnvId, Environment, Flappy, Lane, LaneConfig, TrackSpec};
use crate::numkit::{load_mlp, Mlp};

/// Greedy policy: a Q-network (argmax) or an actor (tanh output mapped onto
/// the action interval).
#[derive(Debug, Clone)]
pub enum Policy {
    Greedy(Mlp),
    Actor { net: Mlp, lo: f64, hi: f64 },
}

impl Policy {
    pub fn net(&self) -> &Mlp {
        match self {
            Policy::Greedy(n) | Policy::Actor { net: n, .. } => n,
        }
    }

    pub fn act(&self, obs: &[f64]) -> Result<ActionValue, HarnessError> {
        match self {
            Policy::Greedy(q) => Ok(ActionValue::Discrete(argmax(&q.predict(obs)?))),
            Policy::Actor { net, lo, hi } => {
                let y = net.predict(obs)?[0];
                Ok(ActionValue::Continuous((lo + (y + 1.0) * 0.5 * (hi - lo)).clamp(*lo, *hi)))
            }
        }
    }

    /// Wraps a network for `space`, checking its shape against the
    /// environment.
    pub fn for_space(net: Mlp, space: ActionSpace, obs_dim: usize) -> Result<Self, HarnessError> {
        let out = match space {
            ActionSpace::Discrete { n } => n,
            ActionSpace::Continuous { .. } => 1,
        };
        if net.input_dim() != obs_dim || net.output_dim() != out {
            return Err(HarnessError::Checkpoint(format!(
                "network maps {} -> {}, environment needs {obs_dim} -> {out}",
                net.input_dim(),
                net.output_dim()
            )));
        }
        Ok(match space {
            ActionSpace::Discrete { .. } => Policy::Greedy(net),
            ActionSpace::Continuous { lo, hi } => Policy::Actor { net, lo, hi },
        })
    }
}

/// Runs `episodes` greedy episodes; returns the mean return and each
/// episode's return. The environment rng is seeded from `seed` alone, so
/// repeated calls agree.
pub fn evaluate<E: Environment>(env: &mut E, policy: &Policy, episodes: u32, seed: u64) -> Result<(f64, Vec<f64>), HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let mut scores = Vec::with_capacity(episodes as usize);
    for _ in 0..episodes {
        let mut s = env.reset(&mut rng);
        let mut total = 0.0;
        loop {
            let a = policy.act(&env.observe(&s))?;
            let out = env.step(&a)?;
            total += out.reward;
            s = out.state;
            if out.done {
                break;
            }
        }
        scores.push(total);
    }
    let mean = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
    Ok((mean, scores))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LapResult {
    pub completed: bool,
    pub reward: f64,
    pub steps: u64,
}

/// Drives one lap of each track with the greedy policy.
pub fn lap_test(policy: &Policy, base: &LaneConfig, tracks: &[TrackSpec]) -> Result<Vec<LapResult>, HarnessError> {
    tracks
        .iter()
        .map(|t| {
            let mut env = Lane::lap(LaneConfig {
                track: t.clone(),
                ..base.clone()
            })?;
            let mut s = env.reset(&mut ChaCha8Rng::seed_from_u64(0));
            let (mut reward, mut steps) = (0.0, 0);
            loop {
                let out = env.step(&policy.act(&env.observe(&s))?)?;
                reward += out.reward;
                steps += 1;
                s = out.state;
                if out.done {
                    break;
                }
            }
            Ok(LapResult {
                completed: env.lap_complete(),
                reward,
                steps,
            })
        })
        .collect()
}

fn env_shape(env: EnvId, cfg: &ExperimentConfig) -> Result<(ActionSpace, usize), HarnessError> {
    Ok(match env {
        EnvId::Cartpole => {
            let e = CartPole::new(cfg.cartpole.clone());
            (e.action_space(), e.obs_dim())
        }
        EnvId::Flappy => {
            let e = Flappy::new(cfg.flappy.clone());
            (e.action_space(), e.obs_dim())
        }
        EnvId::Lane => {
            let e = Lane::new(cfg.lane.clone())?;
            (e.action_space(), e.obs_dim())
        }
    })
}

/// Loads a Q-network or actor checkpoint for `env`.
pub fn load_policy(path: &Path, env: EnvId, cfg: &ExperimentConfig) -> Result<Policy, HarnessError> {
    let net = load_mlp(path).map_err(|e| HarnessError::Checkpoint(format!("{}: {e}", path.display())))?;
    let (space, obs) = env_shape(env, cfg)?;
    Policy::for_space(net, space, obs)
}

/// Greedy evaluation of a checkpoint with the environment constants of
/// `cfg`.
pub fn evaluate_checkpoint(
    path: &Path,
    env: EnvId,
    episodes: u32,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<(f64, Vec<f64>), HarnessError> {
    let policy = load_policy(path, env, cfg)?;
    match env {
        EnvId::Cartpole => evaluate(&mut CartPole::new(cfg.cartpole.clone()), &policy, episodes, seed),
        EnvId::Flappy => evaluate(&mut Flappy::new(cfg.flappy.clone()), &policy, episodes, seed),
        EnvId::Lane => evaluate(&mut Lane::new(cfg.lane.clone())?, &policy, episodes, seed),
    }
}
