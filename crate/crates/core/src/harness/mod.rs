//! Experiment orchestration: configuration, the training loop, logging,
//! evaluation, seed aggregation, plots and multi-run campaigns.

mod aggregate;
mod campaign;
mod config;
mod eval;
mod log;
mod plot;
mod run;

pub use aggregate::{aggregate_seeds, load_run_groups, read_step_log, Curve, Metric};
pub use campaign::{run_campaign, CampaignConfig, CampaignEntry};
pub use config::{merge_json, AgentId, ExperimentConfig, GuidanceMode};
pub use eval::{evaluate, evaluate_checkpoint, lap_test, load_policy, LapResult, Policy};
pub use log::{EpisodeRow, EvalRow, RunLog, StepRow};
pub use plot::{emit_plot, render_svg};
pub use run::{run_experiment, run_id, Agent, RunOutput};

use crate::envs::EnvError;
use crate::numkit::NumError;
use crate::oracle::OracleError;
use crate::sap::SapError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("aggregation error: {0}")]
    Aggregation(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            _ => 1,
        }
    }
}

impl From<NumError> for HarnessError {
    fn from(e: NumError) -> Self {
        match e {
            NumError::NonFinite(_) => HarnessError::Numerical(e.to_string()),
            NumError::Config(_) => HarnessError::Config(e.to_string()),
            NumError::Checkpoint(_) => HarnessError::Checkpoint(e.to_string()),
            NumError::Io(_) => HarnessError::Io(e.to_string()),
            NumError::Shape(_) | NumError::MissingCache => HarnessError::Runtime(e.to_string()),
        }
    }
}

impl From<SapError> for HarnessError {
    fn from(e: SapError) -> Self {
        match e {
            SapError::Num(n) => n.into(),
            SapError::Config(_) => HarnessError::Config(e.to_string()),
            SapError::Contract(_) => HarnessError::Runtime(e.to_string()),
        }
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Config(_) => HarnessError::Config(e.to_string()),
            EnvError::Contract(_) => HarnessError::Runtime(e.to_string()),
        }
    }
}

impl From<OracleError> for HarnessError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Sap(s) => s.into(),
            OracleError::Env(s) => s.into(),
            OracleError::Capability(_) => HarnessError::Config(e.to_string()),
            OracleError::Io(_) => HarnessError::Io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
