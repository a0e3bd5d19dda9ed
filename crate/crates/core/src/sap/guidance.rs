use rand::Rng;
use serde::{Deserialize, Serialize};

use super::label::{ApFunction, ApKind, ApLabel};
use super::predictor::ApPredictor;
use super::SapError;
use crate::agents::{ActionSpace, ActionValue, Transition};

/// Knobs that gate guided exploration and predictor training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceConfig {
    /// Guidance stays off while `t <= t_o`.
    pub t_o: u64,
    /// End of the exploration phase.
    pub t_e: u64,
    pub alpha_e: f64,
    pub alpha_tr: f64,
    /// Validation accuracy at which the predictor counts as reliable.
    pub delta_acc: f64,
    /// Candidate-set size for continuous actions.
    pub n_candidates: usize,
    /// Balanced training-set size per predictor step.
    pub n_e: usize,
    pub lambda: f64,
    pub kb_capacity: usize,
    pub validation_size: usize,
    pub predictor_lr: f64,
    pub predictor_hidden: Vec<usize>,
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<(), SapError> {
        let bad = |m: String| Err(SapError::Config(m));
        if self.t_e <= self.t_o {
            return bad(format!("t_e ({}) must exceed t_o ({})", self.t_e, self.t_o));
        }
        for (name, v) in [("alpha_e", self.alpha_e), ("alpha_tr", self.alpha_tr), ("delta_acc", self.delta_acc)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} = {v} is outside [0, 1)"));
            }
        }
        if self.alpha_tr <= self.alpha_e && !(self.alpha_tr == 0.0 && self.alpha_e == 0.0) {
            return bad(format!("alpha_tr ({}) must exceed alpha_e ({})", self.alpha_tr, self.alpha_e));
        }
        if self.n_candidates == 0 || self.n_e < 2 || self.kb_capacity == 0 || self.validation_size == 0 {
            return bad("n_candidates, validation_size and kb_capacity must be positive and n_e >= 2".into());
        }
        if !(self.lambda >= 0.0 && self.predictor_lr > 0.0) {
            return bad("lambda must be non-negative and predictor_lr positive".into());
        }
        Ok(())
    }
}

/// Probability of consulting the predictor at step `t`, or `None` while
/// guidance is off (`t <= t_o`). Missing accuracy counts as unreliable.
pub fn guidance_alpha(
    t: u64,
    t_o: u64,
    t_e: u64,
    vacc: Option<f64>,
    delta_acc: f64,
    alpha_e: f64,
    alpha_tr: f64,
) -> Option<f64> {
    if t <= t_o {
        return None;
    }
    match vacc {
        Some(v) if t > t_e && v >= delta_acc => Some(alpha_tr),
        _ => Some(alpha_e),
    }
}

/// Alternatives to `base`: every other discrete action, or one uniform draw
/// from each of `n` equal sub-intervals of a continuous range.
pub fn candidate_set<R: Rng + ?Sized>(space: &ActionSpace, n: usize, base: &ActionValue, rng: &mut R) -> Vec<ActionValue> {
    match *space {
        ActionSpace::Discrete { n: k } => (0..k)
            .filter(|&i| Some(i) != base.index())
            .map(ActionValue::Discrete)
            .collect(),
        ActionSpace::Continuous { lo, hi } => {
            let w = (hi - lo) / n as f64;
            (0..n)
                .map(|i| {
                    let a = lo + w * i as f64;
                    let v = if i + 1 == n { rng.random_range(a..=hi) } else { a + w * rng.random::<f64>() };
                    ActionValue::Continuous(v.min(hi))
                })
                .collect()
        }
    }
}

/// Anything that can label candidate actions in a state of type `X` before
/// they are executed.
pub trait PermissibilityModel<X: ?Sized> {
    fn predict_labels(&self, state: &X, actions: &[ActionValue]) -> Result<Vec<ApLabel>, SapError>;
}

impl PermissibilityModel<[f64]> for ApPredictor {
    fn predict_labels(&self, state: &[f64], actions: &[ActionValue]) -> Result<Vec<ApLabel>, SapError> {
        self.predict_many(state, actions)
    }
}

/// A type-2 function is its own exact model.
impl<S> PermissibilityModel<S> for ApFunction<S> {
    fn predict_labels(&self, state: &S, actions: &[ActionValue]) -> Result<Vec<ApLabel>, SapError> {
        if self.kind() == ApKind::Type1 {
            return Err(SapError::Contract("a type-1 function cannot label actions before execution".into()));
        }
        actions.iter().map(|a| self.label(state, a, None)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedChoice {
    pub action: ActionValue,
    /// Probability of consulting the model that was in effect.
    pub alpha: Option<f64>,
    pub substituted: bool,
}

/// Replaces a base action the model predicts non-permissible with a random
/// predicted-permissible alternative.
///
/// After `t_o`, one uniform draw decides whether the model is consulted at
/// all (probability `alpha`). If the base action is predicted permissible, or
/// no candidate is, the base action is kept.
#[allow(clippy::too_many_arguments)]
pub fn guided_select<X: ?Sized, M: PermissibilityModel<X> + ?Sized, R: Rng + ?Sized>(
    state: &X,
    base: ActionValue,
    model: &M,
    cfg: &GuidanceConfig,
    space: &ActionSpace,
    t: u64,
    vacc: Option<f64>,
    rng: &mut R,
) -> Result<GuidedChoice, SapError> {
    let keep = |alpha| GuidedChoice {
        action: base,
        alpha,
        substituted: false,
    };
    let Some(alpha) = guidance_alpha(t, cfg.t_o, cfg.t_e, vacc, cfg.delta_acc, cfg.alpha_e, cfg.alpha_tr) else {
        return Ok(keep(None));
    };
    let u: f64 = rng.random();
    if u >= alpha {
        return Ok(keep(Some(alpha)));
    }
    if model.predict_labels(state, &[base])?[0].is_permissible() {
        return Ok(keep(Some(alpha)));
    }
    let candidates = candidate_set(space, cfg.n_candidates, &base, rng);
    let labels = model.predict_labels(state, &candidates)?;
    let permitted: Vec<ActionValue> = candidates
        .into_iter()
        .zip(labels)
        .filter(|(_, l)| l.is_permissible())
        .map(|(a, _)| a)
        .collect();
    if permitted.is_empty() {
        return Ok(keep(Some(alpha)));
    }
    Ok(GuidedChoice {
        action: permitted[rng.random_range(0..permitted.len())],
        alpha: Some(alpha),
        substituted: true,
    })
}

/// Steering constraint for a car drifting away from the track axis
/// (`track_pos_delta > 0`, positive `track_pos` = left of the axis, positive
/// action = steer left). A left-drifting car may not steer further left than
/// its previous command, and symmetrically on the right; violating actions
/// are redrawn uniformly from the allowed side.
pub fn ap2_resample_lane<R: Rng + ?Sized>(
    track_pos: f64,
    a_t: f64,
    a_prev: f64,
    track_pos_delta: f64,
    rng: &mut R,
) -> f64 {
    const LO: f64 = -1.0;
    const HI: f64 = 1.0;
    if track_pos_delta <= 0.0 {
        return a_t;
    }
    if track_pos > 0.0 && a_t > a_prev {
        if a_prev <= LO {
            return LO;
        }
        return rng.random_range(LO..a_prev);
    }
    if track_pos < 0.0 && a_t < a_prev {
        if a_prev >= HI {
            return HI;
        }
        // uniform on (a_prev, HI]
        return HI - (HI - a_prev) * rng.random::<f64>();
    }
    a_t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualStopPolicy {
    pub enabled: bool,
    pub penalty: f64,
}

impl VirtualStopPolicy {
    pub fn new(enabled: bool) -> Self {
        Self { enabled, penalty: -1.0 }
    }
}

/// The replay copy of a non-permissible transition ends the episode with the
/// penalty reward. The live environment is not touched.
pub fn virtual_stop(mut transition: Transition, label: ApLabel, policy: &VirtualStopPolicy) -> Transition {
    if policy.enabled && label == ApLabel::NonPermissible {
        transition.reward = policy.penalty;
        transition.virtual_done = true;
    }
    transition
}
