//! DDQN and DDPG learners with replay, exploration schedules and target
//! networks.

mod ddpg;
mod ddqn;
mod explore;
mod replay;

pub use ddpg::{DdpgAgent, DdpgConfig, DdpgLosses};
pub use ddqn::{argmax, ddqn_targets, DdqnAgent, DdqnConfig};
pub use explore::{EpsilonSchedule, OuNoise, OuParams};
pub use replay::{ActionSpace, ActionValue, ReplayBuffer, Transition};
