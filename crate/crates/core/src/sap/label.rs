use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SapError;
use crate::agents::ActionValue;

/// Permissibility of an action in a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApLabel {
    NonPermissible = 0,
    Permissible = 1,
}

impl ApLabel {
    pub fn from_bool(permissible: bool) -> Self {
        if permissible {
            ApLabel::Permissible
        } else {
            ApLabel::NonPermissible
        }
    }

    pub fn is_permissible(self) -> bool {
        self == ApLabel::Permissible
    }

    /// Class index used by the predictor (1 = permissible).
    pub fn class(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApKind {
    /// Judged after execution from `(s, a, s')`.
    Type1,
    /// Judged before execution from `(s, a)`.
    Type2,
}

pub type Type1Fn<S> = Arc<dyn Fn(&S, &ActionValue, &S) -> ApLabel + Send + Sync>;
pub type Type2Fn<S> = Arc<dyn Fn(&S, &ActionValue) -> ApLabel + Send + Sync>;

/// User-supplied permissibility knowledge over environment states `S`.
///
/// Evaluators must be pure: the same inputs always give the same label.
pub enum ApFunction<S> {
    Type1(Type1Fn<S>),
    Type2(Type2Fn<S>),
    /// Non-permissible when any member says so.
    AnyOf(Vec<ApFunction<S>>),
}

impl<S> Clone for ApFunction<S> {
    fn clone(&self) -> Self {
        match self {
            ApFunction::Type1(f) => ApFunction::Type1(Arc::clone(f)),
            ApFunction::Type2(f) => ApFunction::Type2(Arc::clone(f)),
            ApFunction::AnyOf(v) => ApFunction::AnyOf(v.clone()),
        }
    }
}

impl<S> fmt::Debug for ApFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApFunction::Type1(_) => write!(f, "ApFunction::Type1"),
            ApFunction::Type2(_) => write!(f, "ApFunction::Type2"),
            ApFunction::AnyOf(v) => f.debug_tuple("ApFunction::AnyOf").field(v).finish(),
        }
    }
}

impl<S> ApFunction<S> {
    pub fn type1(f: impl Fn(&S, &ActionValue, &S) -> ApLabel + Send + Sync + 'static) -> Self {
        ApFunction::Type1(Arc::new(f))
    }

    pub fn type2(f: impl Fn(&S, &ActionValue) -> ApLabel + Send + Sync + 'static) -> Self {
        ApFunction::Type2(Arc::new(f))
    }

    /// A composition is type 1 if any member needs the next state.
    pub fn kind(&self) -> ApKind {
        match self {
            ApFunction::Type1(_) => ApKind::Type1,
            ApFunction::Type2(_) => ApKind::Type2,
            ApFunction::AnyOf(v) => {
                if v.iter().any(|f| f.kind() == ApKind::Type1) {
                    ApKind::Type1
                } else {
                    ApKind::Type2
                }
            }
        }
    }

    /// Labels `a` in `s`; type-1 functions require the next state.
    pub fn label(&self, s: &S, a: &ActionValue, next: Option<&S>) -> Result<ApLabel, SapError> {
        match self {
            ApFunction::Type1(f) => {
                let n = next.ok_or_else(|| SapError::Contract("type-1 AP function needs the next state".into()))?;
                Ok(f(s, a, n))
            }
            ApFunction::Type2(f) => Ok(f(s, a)),
            ApFunction::AnyOf(v) => {
                for member in v {
                    if member.label(s, a, next)? == ApLabel::NonPermissible {
                        return Ok(ApLabel::NonPermissible);
                    }
                }
                Ok(ApLabel::Permissible)
            }
        }
    }
}

/// Free-function form of [`ApFunction::label`].
pub fn label_transition<S>(f: &ApFunction<S>, s: &S, a: &ActionValue, next: Option<&S>) -> Result<ApLabel, SapError> {
    f.label(s, a, next)
}

/// Disjunction of non-permissibility conditions.
pub fn compose_ap<S>(functions: Vec<ApFunction<S>>) -> Result<ApFunction<S>, SapError> {
    if functions.is_empty() {
        return Err(SapError::Config("cannot compose an empty list of AP functions".into()));
    }
    Ok(ApFunction::AnyOf(functions))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a0() -> ActionValue {
        ActionValue::Discrete(0)
    }

    #[test]
    fn type1_without_next_state_is_a_contract_error() {
        let f: ApFunction<f64> = ApFunction::type1(|_, _, _| ApLabel::Permissible);
        assert!(matches!(f.label(&0.0, &a0(), None), Err(SapError::Contract(_))));
        assert_eq!(f.label(&0.0, &a0(), Some(&1.0)).unwrap(), ApLabel::Permissible);
    }

    #[test]
    fn type2_ignores_next_state() {
        let f: ApFunction<f64> = ApFunction::type2(|s, _| ApLabel::from_bool(*s < 0.0));
        assert_eq!(f.label(&1.0, &a0(), None).unwrap(), ApLabel::NonPermissible);
        assert_eq!(f.label(&-1.0, &a0(), Some(&5.0)).unwrap(), ApLabel::Permissible);
    }

    #[test]
    fn composition_rules() {
        let yes: ApFunction<f64> = ApFunction::type2(|_, _| ApLabel::Permissible);
        let no: ApFunction<f64> = ApFunction::type1(|_, _, _| ApLabel::NonPermissible);
        let all_yes = compose_ap(vec![yes.clone(), yes.clone()]).unwrap();
        assert_eq!(all_yes.kind(), ApKind::Type2);
        assert_eq!(all_yes.label(&0.0, &a0(), None).unwrap(), ApLabel::Permissible);
        let mixed = compose_ap(vec![yes.clone(), no]).unwrap();
        assert_eq!(mixed.kind(), ApKind::Type1);
        assert_eq!(mixed.label(&0.0, &a0(), Some(&0.0)).unwrap(), ApLabel::NonPermissible);
        let single = compose_ap(vec![yes]).unwrap();
        assert_eq!(single.label(&3.0, &a0(), None).unwrap(), ApLabel::Permissible);
        assert!(compose_ap::<f64>(vec![]).is_err());
    }
}
