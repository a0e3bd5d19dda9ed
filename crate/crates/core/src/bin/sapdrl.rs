use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use sapdrl::envs::{CartPole, EnvId, Environment, Flappy, Lane};
use sapdrl::harness::{
    aggregate_seeds, emit_plot, evaluate_checkpoint, load_run_groups, run_campaign, run_experiment, AgentId, CampaignConfig,
    ExperimentConfig, GuidanceMode, HarnessError, Metric,
};
use sapdrl::numkit::load_mlp;
use sapdrl::oracle::{permissibility_audit, sample_states, FeatureModel};
use sapdrl::sap::{ApFunction, ApPredictor};

#[derive(Parser)]
#[command(name = "sapdrl", about = "Permissibility-guided deep reinforcement learning experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Vstop {
    On,
    Off,
    Auto,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one agent and write logs and checkpoints.
    Train {
        #[arg(long)]
        env: EnvId,
        #[arg(long)]
        agent: AgentId,
        #[arg(long, default_value = "none")]
        guidance: GuidanceMode,
        #[arg(long, value_enum, default_value = "auto")]
        vstop: Vstop,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a Q-network or actor checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        env: EnvId,
        #[arg(long, default_value_t = 100)]
        episodes: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare a predictor checkpoint with an exact permissibility function.
    Audit {
        #[arg(long)]
        env: EnvId,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        states: usize,
        #[arg(long)]
        out: PathBuf,
        /// Reference function; ap1 by default, ap1+ap2 for flappy.
        #[arg(long)]
        ap: Option<GuidanceMode>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Plot seed-aggregated curves of every run in a directory.
    Plot {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value = "avgReward100")]
        metric: Metric,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a resumable grid of experiments, then plot.
    Campaign {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_json(path: Option<&Path>) -> Result<Value, HarnessError> {
    let Some(p) = path else { return Ok(json!({})) };
    let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
    if !v.is_object() {
        return Err(HarnessError::Config(format!("{}: expected a JSON object", p.display())));
    }
    Ok(v)
}

fn env_config(env: EnvId, path: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
    let agent = if env == EnvId::Lane { AgentId::Ddpg } else { AgentId::Ddqn };
    let mut json = read_json(path)?;
    json["env"] = json!(env);
    ExperimentConfig::from_json_value(&json, env, agent, GuidanceMode::None)
}

fn audit<E: Environment>(
    mut env: E,
    ap: Option<ApFunction<E::State>>,
    checkpoint: &Path,
    states: usize,
    seed: u64,
    out: &Path,
) -> Result<f64, HarnessError> {
    let ap = ap.ok_or_else(|| HarnessError::Config("no such permissibility function for this task".into()))?;
    let net = load_mlp(checkpoint).map_err(|e| HarnessError::Checkpoint(format!("{}: {e}", checkpoint.display())))?;
    let predictor = ApPredictor::from_net(net, env.obs_dim(), env.action_space(), 0.0, 0.0)
        .map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut snaps = sample_states(&mut env, states, &mut rng)?;
    let report = permissibility_audit(&mut snaps, &ap, &FeatureModel::new(&predictor))?;
    report.write(out)?;
    Ok(report.stats.accuracy())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.cmd {
        Cmd::Train {
            env,
            agent,
            guidance,
            vstop,
            seed,
            steps,
            config,
            out,
        } => {
            let mut json = read_json(config.as_deref())?;
            json["env"] = json!(env);
            json["agent"] = json!(agent);
            json["guidance"] = json!(guidance);
            json["seed"] = json!(seed);
            json["out_dir"] = json!(out);
            match vstop {
                Vstop::On => json["virtual_stopping"] = json!(true),
                Vstop::Off => json["virtual_stopping"] = json!(false),
                Vstop::Auto => {}
            }
            if let Some(n) = steps {
                json["total_steps"] = json!(n);
            }
            let cfg = ExperimentConfig::from_json_value(&json, env, agent, guidance)?;
            let res = run_experiment(&cfg)?;
            let last = res.log.evals.last().map_or(f64::NAN, |e| e.mean);
            println!(
                "{}: {} episodes, final evaluation {last:.3}",
                res.run_id,
                res.log.episodes.len()
            );
        }
        Cmd::Eval {
            checkpoint,
            env,
            episodes,
            seed,
            config,
        } => {
            let cfg = env_config(env, config.as_deref())?;
            let (mean, scores) = evaluate_checkpoint(&checkpoint, env, episodes, seed, &cfg)?;
            let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len().max(1) as f64;
            println!("mean {mean:.4} std {:.4} over {episodes} episodes", var.sqrt());
        }
        Cmd::Audit {
            env,
            checkpoint,
            states,
            out,
            ap,
            seed,
            config,
        } => {
            let cfg = env_config(env, config.as_deref())?;
            let mode = ap.unwrap_or(if env == EnvId::Flappy { GuidanceMode::Ap1Ap2 } else { GuidanceMode::Ap1 });
            let acc = match env {
                EnvId::Cartpole => {
                    let e = CartPole::new(cfg.cartpole);
                    let f = match mode {
                        GuidanceMode::Ap1 => e.ap1(),
                        _ => None,
                    };
                    audit(e, f, &checkpoint, states, seed, &out)?
                }
                EnvId::Flappy => {
                    let e = Flappy::new(cfg.flappy);
                    let f = match mode {
                        GuidanceMode::Ap1 => e.ap1(),
                        GuidanceMode::Ap2 => e.ap2(),
                        GuidanceMode::Ap1Ap2 => Some(e.ap_combined()),
                        GuidanceMode::None => None,
                    };
                    audit(e, f, &checkpoint, states, seed, &out)?
                }
                EnvId::Lane => {
                    let e = Lane::new(cfg.lane)?;
                    let f = match mode {
                        GuidanceMode::Ap1 => e.ap1(),
                        _ => None,
                    };
                    audit(e, f, &checkpoint, states, seed, &out)?
                }
            };
            println!("accuracy {acc:.4}");
        }
        Cmd::Plot { runs, metric, out } => {
            let curves = load_run_groups(&runs)?
                .iter()
                .map(|g| aggregate_seeds(g, metric))
                .collect::<Result<Vec<_>, _>>()?;
            emit_plot(&curves, metric, &out)?;
        }
        Cmd::Campaign { config } => {
            for p in run_campaign(&CampaignConfig::load(&config)?)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sapdrl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
