use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::aggregate::{aggregate_seeds, load_run_groups, Curve, Metric};
use super::config::{AgentId, ExperimentConfig, GuidanceMode};
use super::plot::emit_plot;
use super::run::{run_experiment, run_id};
use super::HarnessError;
use crate::envs::EnvId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignEntry {
    pub env: EnvId,
    pub agent: AgentId,
    pub guidance: GuidanceMode,
    /// Virtual stopping; the task default when absent.
    #[serde(default)]
    pub vstop: Option<bool>,
}

/// A grid of runs over seeds, followed by aggregation and plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    /// Training steps per run; the task default when absent.
    #[serde(default)]
    pub steps: Option<u64>,
    pub runs: Vec<CampaignEntry>,
    /// Configuration keys applied to every run.
    #[serde(default)]
    pub overrides: Option<Value>,
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    /// The experiment configuration of every run, in execution order.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>, HarnessError> {
        if self.seeds.is_empty() || self.runs.is_empty() {
            return Err(HarnessError::Config("campaign needs at least one run and one seed".into()));
        }
        let mut out = Vec::new();
        for entry in &self.runs {
            for &seed in &self.seeds {
                let mut patch = self.overrides.clone().unwrap_or_else(|| json!({}));
                let Value::Object(map) = &mut patch else {
                    return Err(HarnessError::Config("overrides must be an object".into()));
                };
                map.insert("env".into(), json!(entry.env));
                map.insert("agent".into(), json!(entry.agent));
                map.insert("guidance".into(), json!(entry.guidance));
                map.insert("seed".into(), json!(seed));
                map.insert("out_dir".into(), json!(self.out_dir));
                if let Some(v) = entry.vstop {
                    map.insert("virtual_stopping".into(), json!(v));
                }
                if let Some(n) = self.steps {
                    map.insert("total_steps".into(), json!(n));
                }
                let cfg = ExperimentConfig::from_json_value(&patch, entry.env, entry.agent, entry.guidance)?;
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

/// Runs every configuration whose summary file is missing, then writes one
/// reward plot per task (and a validation-accuracy plot when a predictor was
/// trained). Returns the plot paths.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let experiments = cfg.experiments()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    for exp in &experiments {
        let summary = cfg.out_dir.join(format!("{}.summary.json", run_id(exp)));
        if summary.exists() {
            continue;
        }
        run_experiment(exp)?;
    }

    let groups = load_run_groups(&cfg.out_dir)?;
    let mut plots = Vec::new();
    for env in [EnvId::Cartpole, EnvId::Flappy, EnvId::Lane] {
        for metric in [Metric::AvgReward100, Metric::Vacc] {
            let curves: Vec<Curve> = groups
                .iter()
                .filter(|g| g[0].0.env == env)
                .map(|g| aggregate_seeds(g, metric))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .filter(|c| !c.is_empty())
                .collect();
            if curves.is_empty() {
                continue;
            }
            let path = cfg.out_dir.join(format!("{env}.{}.svg", metric.as_str()));
            emit_plot(&curves, metric, &path)?;
            plots.push(path);
        }
    }
    Ok(plots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expands_runs_by_seed() {
        let c: CampaignConfig = serde_json::from_value(json!({
            "out_dir": "/tmp/x",
            "seeds": [1, 2],
            "steps": 300,
            "runs": [{"env": "cartpole", "agent": "ddqn", "guidance": "ap1"},
                     {"env": "lane", "agent": "ddpg", "guidance": "none", "vstop": true}],
            "overrides": {"eval_episodes": 3}
        }))
        .unwrap();
        let e = c.experiments().unwrap();
        assert_eq!(e.len(), 4);
        assert_eq!(e[1].seed, 2);
        assert!(e.iter().all(|x| x.total_steps == 300 && x.eval_episodes == 3));
        assert!(e[0].virtual_stopping && e[3].virtual_stopping);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r: Result<CampaignConfig, _> = serde_json::from_value(json!({
            "out_dir": "x", "seeds": [1], "runs": [], "bogus": 1
        }));
        assert!(r.is_err());
        let c: CampaignConfig = serde_json::from_value(json!({
            "out_dir": "x", "seeds": [1],
            "runs": [{"env": "cartpole", "agent": "ddqn", "guidance": "none"}],
            "overrides": {"nope": 1}
        }))
        .unwrap();
        assert!(matches!(c.experiments(), Err(HarnessError::Config(_))));
    }
}
