use std::marker::PhantomData;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{ActionSpace, ActionValue};
use crate::envs::{EnvError, Environment};
use crate::sap::{ApFunction, ApKind, ApLabel, ApPredictor, PermissibilityModel, SapError};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("capability error: {0}")]
    Capability(String),
    #[error(transparent)]
    Sap(#[from] SapError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("report I/O: {0}")]
    Io(String),
}

/// Confusion counts with permissible as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionStats {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionStats {
    pub fn record(&mut self, truth: ApLabel, pred: ApLabel) {
        match (truth.is_permissible(), pred.is_permissible()) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => (self.tp + self.tn) as f64 / n as f64,
        }
    }

    /// Share of truly permissible actions predicted non-permissible.
    pub fn false_negative_rate(&self) -> f64 {
        match self.tp + self.fn_ {
            0 => 0.0,
            n => self.fn_ as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub state_id: usize,
    pub action: String,
    pub truth: u8,
    pub pred: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub stats: ConfusionStats,
    pub records: Vec<AuditRecord>,
}

#[derive(Serialize)]
struct Summary {
    #[serde(flatten)]
    stats: ConfusionStats,
    accuracy: f64,
    false_negative_rate: f64,
}

impl AuditReport {
    /// Writes `audit.csv` (`state_id,action,truth,pred`) and `audit.json`.
    pub fn write(&self, dir: &Path) -> Result<(), OracleError> {
        let io = |e: &dyn std::fmt::Display| OracleError::Io(e.to_string());
        std::fs::create_dir_all(dir).map_err(|e| io(&e))?;
        let mut w = csv::Writer::from_path(dir.join("audit.csv")).map_err(|e| io(&e))?;
        for r in &self.records {
            w.serialize(r).map_err(|e| io(&e))?;
        }
        w.flush().map_err(|e| io(&e))?;
        let summary = Summary {
            stats: self.stats,
            accuracy: self.stats.accuracy(),
            false_negative_rate: self.stats.false_negative_rate(),
        };
        let json = serde_json::to_string_pretty(&summary).map_err(|e| io(&e))?;
        std::fs::write(dir.join("audit.json"), json + "\n").map_err(|e| io(&e))
    }
}

/// Every discrete action, or 101 evenly spaced values of a continuous range.
pub fn audit_actions(space: &ActionSpace) -> Vec<ActionValue> {
    match *space {
        ActionSpace::Discrete { n } => (0..n).map(ActionValue::Discrete).collect(),
        ActionSpace::Continuous { lo, hi } => (0..=100)
            .map(|i| ActionValue::Continuous(lo + (hi - lo) * i as f64 / 100.0))
            .collect(),
    }
}

/// Live simulator copies taken along uniformly random rollouts.
pub fn sample_states<E: Environment, R: Rng + ?Sized>(env: &mut E, count: usize, rng: &mut R) -> Result<Vec<E>, OracleError> {
    let space = env.action_space();
    let mut out = Vec::with_capacity(count);
    env.reset(rng);
    while out.len() < count {
        if env.is_done() {
            env.reset(rng);
        }
        out.push(env.snapshot().ok_or_else(no_snapshot)?);
        let a = space.sample_uniform(rng);
        env.step(&a)?;
    }
    Ok(out)
}

fn no_snapshot() -> OracleError {
    OracleError::Capability("environment cannot snapshot its state".into())
}

/// Executes `a` from the state held by `env`, labels it, and puts the
/// simulator back.
pub fn true_label<E: Environment>(env: &mut E, ap: &ApFunction<E::State>, a: &ActionValue) -> Result<ApLabel, OracleError> {
    let saved = env.snapshot().ok_or_else(no_snapshot)?;
    let s = env.state().clone();
    let label = match ap.kind() {
        ApKind::Type2 => ap.label(&s, a, None)?,
        ApKind::Type1 => {
            let out = env.step(a)?;
            ap.label(&s, a, Some(&out.state))?
        }
    };
    env.restore(saved);
    Ok(label)
}

/// Brute-force comparison of `model` against the AP function over every
/// audit action in every sampled state.
pub fn permissibility_audit<E, M>(states: &mut [E], ap: &ApFunction<E::State>, model: &M) -> Result<AuditReport, OracleError>
where
    E: Environment,
    M: PermissibilityModel<E> + ?Sized,
{
    let mut stats = ConfusionStats::default();
    let mut records = Vec::new();
    for (id, env) in states.iter_mut().enumerate() {
        let actions = audit_actions(&env.action_space());
        let preds = model.predict_labels(env, &actions)?;
        for (a, pred) in actions.iter().zip(preds) {
            let truth = true_label(env, ap, a)?;
            stats.record(truth, pred);
            records.push(AuditRecord {
                state_id: id,
                action: a.to_string(),
                truth: truth.class() as u8,
                pred: pred.class() as u8,
            });
        }
    }
    Ok(AuditReport { stats, records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceScan {
    pub fraction: f64,
    /// Indices of states where no audited action is permissible.
    pub dead_states: Vec<usize>,
}

/// Share of states where at least one audited action is permissible.
pub fn permissible_existence_scan<E: Environment>(states: &mut [E], ap: &ApFunction<E::State>) -> Result<ExistenceScan, OracleError> {
    let mut dead = Vec::new();
    for (id, env) in states.iter_mut().enumerate() {
        let mut any = false;
        for a in audit_actions(&env.action_space()) {
            if true_label(env, ap, &a)?.is_permissible() {
                any = true;
                break;
            }
        }
        if !any {
            dead.push(id);
        }
    }
    let n = states.len().max(1) as f64;
    Ok(ExistenceScan {
        fraction: (states.len() - dead.len()) as f64 / n,
        dead_states: dead,
    })
}

/// Exact model that answers by simulating each action on a copy of the
/// environment.
pub struct CheatingModel<E: Environment> {
    ap: ApFunction<E::State>,
}

impl<E: Environment> CheatingModel<E> {
    pub fn new(ap: ApFunction<E::State>) -> Self {
        Self { ap }
    }
}

impl<E: Environment> PermissibilityModel<E> for CheatingModel<E> {
    fn predict_labels(&self, env: &E, actions: &[ActionValue]) -> Result<Vec<ApLabel>, SapError> {
        let mut copy = env
            .snapshot()
            .ok_or_else(|| SapError::Contract("environment cannot snapshot its state".into()))?;
        actions
            .iter()
            .map(|a| match true_label(&mut copy, &self.ap, a) {
                Ok(l) => Ok(l),
                Err(OracleError::Sap(e)) => Err(e),
                Err(e) => Err(SapError::Contract(e.to_string())),
            })
            .collect()
    }
}

/// Adapts a feature-space predictor to environment snapshots.
pub struct FeatureModel<'a, E> {
    predictor: &'a ApPredictor,
    _env: PhantomData<fn(&E)>,
}

impl<'a, E> FeatureModel<'a, E> {
    pub fn new(predictor: &'a ApPredictor) -> Self {
        Self {
            predictor,
            _env: PhantomData,
        }
    }
}

impl<E: Environment> PermissibilityModel<E> for FeatureModel<'_, E> {
    fn predict_labels(&self, env: &E, actions: &[ActionValue]) -> Result<Vec<ApLabel>, SapError> {
        self.predictor.predict_many(&env.observe(env.state()), actions)
    }
}
