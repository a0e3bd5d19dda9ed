//! Deterministic environments with their permissibility functions.

mod cartpole;
mod flappy;
mod lane;
mod track;

pub use cartpole::{cartpole_ap1, cartpole_rho, CartPole, CartPoleConfig, CartPoleState};
pub use flappy::{flappy_ap1, flappy_ap2, Flappy, FlappyConfig, FlappyState, FLAP, NOFLAP};
pub use lane::{lane_ap1, lane_reward, Lane, LaneConfig, LaneState};
pub use track::{test_tracks, training_track, Segment, TrackSpec, Turn};

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{ActionSpace, ActionValue};
use crate::sap::ApFunction;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    Cartpole,
    Flappy,
    Lane,
}

impl EnvId {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::Cartpole => "cartpole",
            EnvId::Flappy => "flappy",
            EnvId::Lane => "lane",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EnvId {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cartpole" => Ok(EnvId::Cartpole),
            "flappy" => Ok(EnvId::Flappy),
            "lane" => Ok(EnvId::Lane),
            other => Err(EnvError::Config(format!("unknown environment {other:?}"))),
        }
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub state: S,
    pub reward: f64,
    pub done: bool,
    /// The episode ended in failure (pole fell, bird crashed, car left the
    /// track) rather than by a time or lap limit.
    pub failure: bool,
}

pub trait Environment {
    type State: Clone + fmt::Debug;

    fn id(&self) -> EnvId;

    fn action_space(&self) -> ActionSpace;

    /// Length of the feature vector produced by [`Environment::observe`].
    fn obs_dim(&self) -> usize;

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Self::State;

    /// Errors if the episode is over or was never started.
    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome<Self::State>, EnvError>;

    fn state(&self) -> &Self::State;

    fn is_done(&self) -> bool;

    fn observe(&self, state: &Self::State) -> Vec<f64>;

    /// Full copy of the simulator, when supported.
    fn snapshot(&self) -> Option<Self>
    where
        Self: Sized,
    {
        None
    }

    fn restore(&mut self, snapshot: Self)
    where
        Self: Sized,
    {
        *self = snapshot;
    }

    /// Type-1 permissibility function, if the task has one.
    fn ap1(&self) -> Option<ApFunction<Self::State>>;

    /// Type-2 permissibility function, if the task has one.
    fn ap2(&self) -> Option<ApFunction<Self::State>> {
        None
    }
}

fn not_live() -> EnvError {
    EnvError::Contract("step called on a finished or unstarted episode".into())
}

fn check_action(space: ActionSpace, a: &ActionValue) -> Result<(), EnvError> {
    if space.contains(a) {
        Ok(())
    } else {
        Err(EnvError::Contract(format!("action {a:?} is outside {space:?}")))
    }
}
