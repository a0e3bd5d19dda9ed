use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::log::{RunLog, StepRow};
use super::run::run_id;
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "avgReward100")]
    AvgReward100,
    #[serde(rename = "vacc")]
    Vacc,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::AvgReward100 => "avgReward100",
            Metric::Vacc => "vacc",
        }
    }

    fn of(self, row: &StepRow) -> Option<f64> {
        match self {
            Metric::AvgReward100 => row.avg_reward100,
            Metric::Vacc => row.vacc,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "avgReward100" => Ok(Metric::AvgReward100),
            "vacc" => Ok(Metric::Vacc),
            _ => Err(HarnessError::Config(format!("unknown metric {s:?}"))),
        }
    }
}

/// Mean and population standard deviation of a metric across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub steps: Vec<u64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Curve {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

pub fn read_step_log(path: &Path) -> Result<Vec<StepRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Identity of a configuration with the seed and output location blanked.
fn seedless(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        seed: 0,
        out_dir: None,
        ..cfg.clone()
    }
}

fn label(cfg: &ExperimentConfig) -> String {
    let id = run_id(cfg);
    match id.rfind("-s") {
        Some(i) => id[..i].to_string(),
        None => id,
    }
}

/// Aggregates runs that differ only in seed over the steps where every
/// run has a value.
pub fn aggregate_seeds(runs: &[(ExperimentConfig, RunLog)], metric: Metric) -> Result<Curve, HarnessError> {
    let (first, _) = runs
        .first()
        .ok_or_else(|| HarnessError::Aggregation("no runs to aggregate".into()))?;
    let key = seedless(first);
    if let Some((c, _)) = runs.iter().find(|(c, _)| seedless(c) != key) {
        return Err(HarnessError::Aggregation(format!(
            "{} and {} differ in more than the seed",
            run_id(first),
            run_id(c)
        )));
    }
    let mut grid: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (_, log) in runs {
        for row in &log.steps {
            if let Some(v) = metric.of(row) {
                grid.entry(row.step).or_default().push(v);
            }
        }
    }
    let mut curve = Curve {
        label: label(first),
        steps: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
    };
    for (step, vals) in grid.into_iter().filter(|(_, v)| v.len() == runs.len()) {
        let n = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        curve.steps.push(step);
        curve.mean.push(m);
        curve.std.push(var.sqrt());
    }
    Ok(curve)
}

/// Reads every completed run in `dir` (config plus step log), grouped by
/// configuration modulo seed.
pub fn load_run_groups(dir: &Path) -> Result<Vec<Vec<(ExperimentConfig, RunLog)>>, HarnessError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".config.json"))
        .collect();
    paths.sort();
    let mut groups: Vec<Vec<(ExperimentConfig, RunLog)>> = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
        let steps = read_step_log(&dir.join(format!("{}.steps.csv", run_id(&cfg))))?;
        let log = RunLog {
            steps,
            ..Default::default()
        };
        match groups.iter_mut().find(|g| seedless(&g[0].0) == seedless(&cfg)) {
            Some(g) => g.push((cfg, log)),
            None => groups.push(vec![(cfg, log)]),
        }
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvId;
    use crate::harness::{AgentId, GuidanceMode};

    fn row(step: u64, avg: Option<f64>) -> StepRow {
        StepRow {
            step,
            episode: 1,
            reward: 1.0,
            avg_reward100: avg,
            explore: 0.0,
            alpha: None,
            vacc: None,
            kb_pos: 0,
            kb_neg: 0,
            virtual_stops: 0,
        }
    }

    fn run(seed: u64, vals: &[Option<f64>]) -> (ExperimentConfig, RunLog) {
        let mut cfg = ExperimentConfig::defaults(EnvId::Cartpole, AgentId::Ddqn, GuidanceMode::None);
        cfg.seed = seed;
        let steps = vals.iter().enumerate().map(|(i, v)| row(i as u64 + 1, *v)).collect();
        (
            cfg,
            RunLog {
                steps,
                ..Default::default()
            },
        )
    }

    #[test]
    fn single_run_is_itself() {
        let r = run(1, &[None, Some(2.0), Some(4.0)]);
        let c = aggregate_seeds(&[r], Metric::AvgReward100).unwrap();
        assert_eq!(c.steps, vec![2, 3]);
        assert_eq!(c.mean, vec![2.0, 4.0]);
        assert_eq!(c.std, vec![0.0, 0.0]);
        assert_eq!(c.label, "cartpole-ddqn-none-vson");
    }

    #[test]
    fn mean_and_std_on_common_grid() {
        let a = run(1, &[Some(1.0), Some(2.0), None]);
        let b = run(2, &[None, Some(4.0), Some(5.0)]);
        let c = aggregate_seeds(&[a, b], Metric::AvgReward100).unwrap();
        assert_eq!(c.steps, vec![2]);
        assert_eq!(c.mean, vec![3.0]);
        assert_eq!(c.std, vec![1.0]);
    }

    #[test]
    fn mismatched_configs_are_rejected() {
        let a = run(1, &[Some(1.0)]);
        let mut b = run(2, &[Some(1.0)]);
        b.0.guidance = GuidanceMode::Ap1;
        assert!(matches!(
            aggregate_seeds(&[a, b], Metric::AvgReward100),
            Err(HarnessError::Aggregation(_))
        ));
        assert!(aggregate_seeds(&[], Metric::Vacc).is_err());
    }
}
