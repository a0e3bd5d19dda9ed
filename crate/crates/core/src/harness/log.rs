use std::collections::VecDeque;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// One training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: u64,
    pub episode: u64,
    pub reward: f64,
    /// Mean return of the last 100 completed episodes.
    #[serde(rename = "avgReward100")]
    pub avg_reward100: Option<f64>,
    /// Epsilon for DDQN, 1/0 noise flag for DDPG.
    pub explore: f64,
    pub alpha: Option<f64>,
    pub vacc: Option<f64>,
    #[serde(rename = "kbPos")]
    pub kb_pos: u64,
    #[serde(rename = "kbNeg")]
    pub kb_neg: u64,
    #[serde(rename = "virtualStops")]
    pub virtual_stops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: u64,
    /// Step at which the episode ended.
    pub end_step: u64,
    pub length: u64,
    #[serde(rename = "return")]
    pub ret: f64,
    /// Ended by failure rather than a time limit.
    pub failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub step: u64,
    pub mean: f64,
    pub std: f64,
    pub episodes: u32,
}

/// Everything logged by one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub steps: Vec<StepRow>,
    pub episodes: Vec<EpisodeRow>,
    pub evals: Vec<EvalRow>,
}

impl RunLog {
    /// First evaluation step whose mean reaches `threshold`.
    pub fn first_eval_reaching(&self, threshold: f64) -> Option<u64> {
        self.evals.iter().find(|e| e.mean >= threshold).map(|e| e.step)
    }

    /// Mean of the logged validation accuracy over steps `> from_step`.
    pub fn mean_vacc_after(&self, from_step: u64) -> Option<f64> {
        let v: Vec<f64> = self.steps.iter().filter(|r| r.step > from_step).filter_map(|r| r.vacc).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Failed episodes that ended after `from_step`.
    pub fn failures_after(&self, from_step: u64) -> usize {
        self.episodes.iter().filter(|e| e.failure && e.end_step > from_step).count()
    }
}

/// Trailing window of episode returns.
#[derive(Debug, Default)]
pub(crate) struct ReturnWindow {
    window: VecDeque<f64>,
}

impl ReturnWindow {
    pub fn push(&mut self, r: f64) {
        if self.window.len() == 100 {
            self.window.pop_front();
        }
        self.window.push_back(r);
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.window.is_empty()).then(|| self.window.iter().sum::<f64>() / self.window.len() as f64)
    }
}

type CsvOut = csv::Writer<BufWriter<File>>;

/// CSV files for the three row kinds, flushed every 100 steps.
pub(crate) struct LogFiles {
    steps: CsvOut,
    episodes: CsvOut,
    evals: CsvOut,
}

fn open(path: &Path) -> Result<CsvOut, HarnessError> {
    let f = File::create(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

impl LogFiles {
    pub fn create(dir: &Path, run_id: &str) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            steps: open(&dir.join(format!("{run_id}.steps.csv")))?,
            episodes: open(&dir.join(format!("{run_id}.episodes.csv")))?,
            evals: open(&dir.join(format!("{run_id}.evals.csv")))?,
        })
    }

    pub fn step(&mut self, row: &StepRow) -> Result<(), HarnessError> {
        self.steps.serialize(row)?;
        if row.step.is_multiple_of(100) {
            self.flush()?;
        }
        Ok(())
    }

    pub fn episode(&mut self, row: &EpisodeRow) -> Result<(), HarnessError> {
        Ok(self.episodes.serialize(row)?)
    }

    pub fn eval(&mut self, row: &EvalRow) -> Result<(), HarnessError> {
        Ok(self.evals.serialize(row)?)
    }

    pub fn flush(&mut self) -> Result<(), HarnessError> {
        self.steps.flush()?;
        self.episodes.flush()?;
        self.evals.flush()?;
        Ok(())
    }
}
