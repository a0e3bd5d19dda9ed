use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;
use crate::agents::{DdpgConfig, DdqnConfig, EpsilonSchedule, OuParams};
use crate::envs::{CartPoleConfig, EnvId, FlappyConfig, LaneConfig};
use crate::numkit::{Activation, LayerSpec};
use crate::sap::GuidanceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentId {
    Ddqn,
    Ddpg,
}

impl AgentId {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentId::Ddqn => "ddqn",
            AgentId::Ddpg => "ddpg",
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ddqn" => Ok(AgentId::Ddqn),
            "ddpg" => Ok(AgentId::Ddpg),
            other => Err(HarnessError::Config(format!("unknown agent {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GuidanceMode {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "ap1")]
    Ap1,
    #[serde(rename = "ap2")]
    Ap2,
    #[serde(rename = "ap1+ap2")]
    Ap1Ap2,
}

impl GuidanceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GuidanceMode::None => "none",
            GuidanceMode::Ap1 => "ap1",
            GuidanceMode::Ap2 => "ap2",
            GuidanceMode::Ap1Ap2 => "ap1+ap2",
        }
    }

    /// Modes that learn an AP1 predictor.
    pub fn uses_predictor(self) -> bool {
        matches!(self, GuidanceMode::Ap1 | GuidanceMode::Ap1Ap2)
    }

    pub fn uses_ap2(self) -> bool {
        matches!(self, GuidanceMode::Ap2 | GuidanceMode::Ap1Ap2)
    }
}

impl fmt::Display for GuidanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GuidanceMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(GuidanceMode::None),
            "ap1" => Ok(GuidanceMode::Ap1),
            "ap2" => Ok(GuidanceMode::Ap2),
            "ap1+ap2" => Ok(GuidanceMode::Ap1Ap2),
            other => Err(HarnessError::Config(format!("unknown guidance mode {other:?}"))),
        }
    }
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvId,
    pub agent: AgentId,
    pub guidance: GuidanceMode,
    pub virtual_stopping: bool,
    pub seed: u64,
    pub total_steps: u64,
    pub guidance_params: GuidanceConfig,
    pub ddqn: DdqnConfig,
    pub ddpg: DdpgConfig,
    pub cartpole: CartPoleConfig,
    pub flappy: FlappyConfig,
    pub lane: LaneConfig,
    /// Greedy evaluation period in steps; 0 evaluates only at the end.
    pub eval_every: u64,
    pub eval_episodes: u32,
    /// Write the knowledge buffer as CSV at the end of the run.
    pub dump_knowledge: bool,
    /// Where logs and checkpoints go; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
}

fn relu(widths: &[usize]) -> Vec<LayerSpec> {
    widths.iter().map(|&w| LayerSpec::new(w, Activation::Relu)).collect()
}

/// Virtual stopping is on by default except for lane keeping, whose reward
/// is already immediate.
pub fn default_virtual_stopping(env: EnvId) -> bool {
    env != EnvId::Lane
}

impl ExperimentConfig {
    /// Per-task defaults.
    pub fn defaults(env: EnvId, agent: AgentId, guidance: GuidanceMode) -> Self {
        let guidance_params = match env {
            EnvId::Cartpole => GuidanceConfig {
                t_o: 100,
                t_e: 2000,
                alpha_e: 0.3,
                alpha_tr: 0.7,
                delta_acc: 0.9,
                n_candidates: 2,
                n_e: 2000,
                lambda: 0.01,
                kb_capacity: 25_000,
                validation_size: 200,
                predictor_lr: 1e-3,
                predictor_hidden: vec![32, 32],
            },
            EnvId::Flappy => GuidanceConfig {
                t_o: 1000,
                t_e: 4500,
                alpha_e: 0.3,
                alpha_tr: 0.8,
                delta_acc: 0.95,
                n_candidates: 2,
                n_e: 2000,
                lambda: 0.01,
                kb_capacity: 25_000,
                validation_size: 200,
                predictor_lr: 1e-4,
                predictor_hidden: vec![64, 64],
            },
            EnvId::Lane => GuidanceConfig {
                t_o: 200,
                t_e: 1200,
                alpha_e: 0.5,
                alpha_tr: 0.9,
                delta_acc: 0.7,
                n_candidates: 128,
                n_e: 2000,
                lambda: 0.01,
                kb_capacity: 10_000,
                validation_size: 200,
                predictor_lr: 1e-3,
                predictor_hidden: vec![64, 64],
            },
        };
        let eps = EpsilonSchedule::new(guidance_params.t_o, guidance_params.t_e - guidance_params.t_o);
        let ddqn = match env {
            EnvId::Flappy => DdqnConfig {
                hidden: relu(&[64, 64]),
                gamma: 0.99,
                lr: 1e-4,
                tau: 0.001,
                batch_size: 128,
                replay_capacity: 50_000,
                epsilon: eps,
            },
            _ => DdqnConfig {
                hidden: relu(&[16, 32]),
                gamma: 0.99,
                lr: 5e-4,
                tau: 0.001,
                batch_size: 128,
                replay_capacity: 50_000,
                epsilon: eps,
            },
        };
        let ddpg = DdpgConfig {
            actor_hidden: relu(&[128, 256]),
            critic_hidden: relu(&[128, 256]),
            gamma: 0.9,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            tau: 0.001,
            batch_size: 128,
            replay_capacity: 100_000,
            noise: OuParams::default(),
            explore_steps: guidance_params.t_e,
            reward_scale: 0.01,
        };
        let (total_steps, eval_every) = match env {
            EnvId::Cartpole => (15_000, 500),
            EnvId::Flappy => (30_000, 5000),
            EnvId::Lane => (15_000, 5000),
        };
        Self {
            env,
            agent,
            guidance,
            virtual_stopping: default_virtual_stopping(env),
            seed: 0,
            total_steps,
            guidance_params,
            ddqn,
            ddpg,
            cartpole: CartPoleConfig::default(),
            flappy: FlappyConfig::default(),
            lane: LaneConfig::default(),
            eval_every,
            eval_episodes: 100,
            dump_knowledge: false,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        match (self.env, self.agent) {
            (EnvId::Lane, AgentId::Ddpg) | (EnvId::Cartpole | EnvId::Flappy, AgentId::Ddqn) => {}
            (e, a) => return bad(format!("agent {a} does not fit the action space of {e}")),
        }
        if self.env == EnvId::Cartpole && self.guidance.uses_ap2() {
            return bad("cart-pole has no type-2 permissibility function".into());
        }
        self.guidance_params.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.total_steps == 0 {
            return bad("total_steps must be positive".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive".into());
        }
        self.lane.track.validate()?;
        Ok(())
    }

    /// Defaults for the task named in `json` (or the given fallbacks),
    /// overridden by every key present in `json`.
    pub fn from_json_value(json: &Value, env: EnvId, agent: AgentId, guidance: GuidanceMode) -> Result<Self, HarnessError> {
        let pick = |key: &str| json.get(key).and_then(Value::as_str).map(str::to_owned);
        let env = match pick("env") {
            Some(s) => s.parse()?,
            None => env,
        };
        let agent = match pick("agent") {
            Some(s) => s.parse()?,
            None => agent,
        };
        let guidance = match pick("guidance") {
            Some(s) => s.parse()?,
            None => guidance,
        };
        let base = serde_json::to_value(Self::defaults(env, agent, guidance)).expect("config serializes");
        let merged = merge_json(base, json, "")?;
        let mut cfg: Self = serde_json::from_value(merged).map_err(|e| HarnessError::Config(e.to_string()))?;
        if json.get("virtual_stopping").is_none() {
            cfg.virtual_stopping = default_virtual_stopping(cfg.env);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, env: EnvId, agent: AgentId, guidance: GuidanceMode) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let json: Value = serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_value(&json, env, agent, guidance)
    }
}

/// Overlays `patch` on `base`. Objects merge key by key and every patch key
/// must already exist in `base`; any other value replaces the base value.
pub fn merge_json(base: Value, patch: &Value, path: &str) -> Result<Value, HarnessError> {
    match (base, patch) {
        (Value::Object(mut b), Value::Object(p)) => {
            for (k, v) in p {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let Some(old) = b.remove(k) else {
                    return Err(HarnessError::Config(format!("unknown configuration key {here:?}")));
                };
                b.insert(k.clone(), merge_json(old, v, &here)?);
            }
            Ok(Value::Object(b))
        }
        (_, p) => Ok(p.clone()),
    }
}
