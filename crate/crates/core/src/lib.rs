//! Deep reinforcement learning with action-permissibility guided
//! exploration: DDQN and DDPG agents, permissibility functions and their
//! learned predictor, three benchmark environments, and an experiment
//! harness. The guide under `book/` walks through the concepts.

pub mod agents;
pub mod envs;
pub mod harness;
pub mod numkit;
pub mod oracle;
pub mod sap;

// Compile the guide's code blocks as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/permissibility.md")]
    mod permissibility {}
    #[doc = include_str!("../../../book/src/guidance.md")]
    mod guidance {}
    #[doc = include_str!("../../../book/src/predictor.md")]
    mod predictor {}
    #[doc = include_str!("../../../book/src/virtual_stopping.md")]
    mod virtual_stopping {}
    #[doc = include_str!("../../../book/src/environments.md")]
    mod environments {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
