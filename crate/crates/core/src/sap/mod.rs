//! Permissibility knowledge: AP functions, the knowledge buffer, the AP1
//! predictor, guided action selection and virtual stopping.

mod guidance;
mod knowledge;
mod label;
mod predictor;

pub use guidance::{
    ap2_resample_lane, candidate_set, guidance_alpha, guided_select, virtual_stop, GuidanceConfig, GuidedChoice,
    PermissibilityModel, VirtualStopPolicy,
};
pub use knowledge::{KnowledgeBuffer, KnowledgeTuple, Lane};
pub use label::{compose_ap, label_transition, ApFunction, ApKind, ApLabel, Type1Fn, Type2Fn};
pub use predictor::{should_train_predictor, ApPredictor};

use crate::numkit::NumError;

#[derive(Debug, thiserror::Error)]
pub enum SapError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Num(#[from] NumError),
}
