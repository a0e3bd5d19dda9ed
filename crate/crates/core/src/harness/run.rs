use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{AgentId, ExperimentConfig, GuidanceMode};
use super::eval::{evaluate, Policy};
use super::log::{EpisodeRow, EvalRow, LogFiles, ReturnWindow, RunLog, StepRow};
use super::HarnessError;
use crate::agents::{ActionSpace, ActionValue, DdpgAgent, DdqnAgent, ReplayBuffer, Transition};
use crate::envs::{CartPole, EnvId, Environment, Flappy, Lane, LaneState};
use crate::numkit::save_mlp;
use crate::sap::{
    ap2_resample_lane, guided_select, should_train_predictor, virtual_stop, ApFunction, ApLabel, ApPredictor,
    KnowledgeBuffer, KnowledgeTuple, VirtualStopPolicy,
};

// Independent random streams per concern, so enabling guidance does not
// perturb the environment or exploration draws.
const STREAM_ENV: u64 = 0;
const STREAM_EXPLORE: u64 = 1;
const STREAM_REPLAY: u64 = 2;
const STREAM_INIT: u64 = 3;
const STREAM_GUIDE: u64 = 4;
const STREAM_KB_ROUTE: u64 = 5;
const STREAM_KB_SAMPLE: u64 = 6;

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

/// `{env}-{agent}-{guidance}-vs{on|off}-s{seed}`.
pub fn run_id(cfg: &ExperimentConfig) -> String {
    format!(
        "{}-{}-{}-vs{}-s{}",
        cfg.env,
        cfg.agent,
        cfg.guidance,
        if cfg.virtual_stopping { "on" } else { "off" },
        cfg.seed
    )
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Agent {
    Ddqn(DdqnAgent),
    Ddpg(DdpgAgent),
}

impl Agent {
    fn new<R: Rng + ?Sized>(cfg: &ExperimentConfig, obs_dim: usize, space: ActionSpace, rng: &mut R) -> Result<Self, HarnessError> {
        Ok(match (cfg.agent, space) {
            (AgentId::Ddqn, ActionSpace::Discrete { n }) => Agent::Ddqn(DdqnAgent::new(obs_dim, n, cfg.ddqn.clone(), rng)?),
            (AgentId::Ddpg, ActionSpace::Continuous { lo, hi }) => {
                Agent::Ddpg(DdpgAgent::new(obs_dim, (lo, hi), cfg.ddpg.clone(), rng)?)
            }
            (a, s) => return Err(HarnessError::Config(format!("agent {a} cannot act in {s:?}"))),
        })
    }

    fn act<R: Rng + ?Sized>(&mut self, obs: &[f64], t: u64, rng: &mut R) -> Result<ActionValue, HarnessError> {
        Ok(match self {
            Agent::Ddqn(a) => a.act(obs, t, rng)?,
            Agent::Ddpg(a) => a.act(obs, t, true, rng)?,
        })
    }

    fn explore_level(&self, t: u64) -> f64 {
        match self {
            Agent::Ddqn(a) => a.epsilon_at(t),
            Agent::Ddpg(a) => f64::from(u8::from(t <= a.config.explore_steps)),
        }
    }

    fn start_episode(&mut self) {
        if let Agent::Ddpg(a) = self {
            a.noise.reset();
        }
    }

    fn push(&mut self, t: Transition) {
        match self {
            Agent::Ddqn(a) => a.replay.push(t),
            Agent::Ddpg(a) => a.replay.push(t),
        }
    }

    fn train<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), HarnessError> {
        match self {
            Agent::Ddqn(a) => {
                a.train_step(rng)?;
            }
            Agent::Ddpg(a) => {
                a.train_step(rng)?;
            }
        }
        Ok(())
    }

    pub fn replay(&self) -> &ReplayBuffer {
        match self {
            Agent::Ddqn(a) => &a.replay,
            Agent::Ddpg(a) => &a.replay,
        }
    }

    /// Greedy policy without exploration noise.
    pub fn policy(&self) -> Policy {
        match self {
            Agent::Ddqn(a) => Policy::Greedy(a.q_net.clone()),
            Agent::Ddpg(a) => {
                let (lo, hi) = a.bounds();
                Policy::Actor {
                    net: a.actor.clone(),
                    lo,
                    hi,
                }
            }
        }
    }

    fn save(&self, dir: &Path, run_id: &str) -> Result<(), HarnessError> {
        match self {
            Agent::Ddqn(a) => save_mlp(&a.q_net, &dir.join(format!("{run_id}.q.sapn")))?,
            Agent::Ddpg(a) => {
                save_mlp(&a.actor, &dir.join(format!("{run_id}.actor.sapn")))?;
                save_mlp(&a.critic, &dir.join(format!("{run_id}.critic.sapn")))?;
            }
        }
        Ok(())
    }
}

/// Final state of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run_id: String,
    pub log: RunLog,
    pub agent: Agent,
    pub predictor: Option<ApPredictor>,
    pub knowledge: Option<KnowledgeBuffer>,
}

/// How permissibility knowledge enters the loop for one task and mode.
struct Wiring<S> {
    /// Labels executed transitions (knowledge buffer and virtual stopping).
    labeler: Option<ApFunction<S>>,
    /// Exact type-2 function consulted in place of a learned predictor.
    direct: Option<ApFunction<S>>,
    /// Lateral offset for the lane steering constraint.
    lane_offset: Option<fn(&S) -> f64>,
}

impl<S> Wiring<S> {
    fn none() -> Self {
        Self {
            labeler: None,
            direct: None,
            lane_offset: None,
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    run_id: &'a str,
    total_steps: u64,
    episodes: usize,
    failures: usize,
    final_eval: Option<f64>,
    virtual_stops: u64,
}

/// Trains one agent as configured, writing logs and checkpoints to
/// `cfg.out_dir` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    match cfg.env {
        EnvId::Cartpole => {
            let env = CartPole::new(cfg.cartpole.clone());
            let mut w = Wiring::none();
            if cfg.guidance == GuidanceMode::Ap1 {
                w.labeler = env.ap1();
            }
            run_loop(cfg, env.clone(), env, w)
        }
        EnvId::Flappy => {
            let env = Flappy::new(cfg.flappy.clone());
            let mut w = Wiring::none();
            match cfg.guidance {
                GuidanceMode::None => {}
                GuidanceMode::Ap1 => w.labeler = env.ap1(),
                GuidanceMode::Ap2 => {
                    w.labeler = env.ap2();
                    w.direct = env.ap2();
                }
                GuidanceMode::Ap1Ap2 => w.labeler = Some(env.ap_combined()),
            }
            run_loop(cfg, env.clone(), env, w)
        }
        EnvId::Lane => {
            let env = Lane::new(cfg.lane.clone())?;
            let mut w = Wiring::none();
            if cfg.guidance.uses_predictor() {
                w.labeler = env.ap1();
            }
            if cfg.guidance.uses_ap2() {
                w.lane_offset = Some(|s: &LaneState| s.track_pos);
            }
            run_loop(cfg, env.clone(), env, w)
        }
    }
}

fn run_loop<E: Environment>(cfg: &ExperimentConfig, mut env: E, mut eval_env: E, wiring: Wiring<E::State>) -> Result<RunOutput, HarnessError> {
    let rid = run_id(cfg);
    let g = &cfg.guidance_params;
    let mut env_rng = stream(cfg.seed, STREAM_ENV);
    let mut explore_rng = stream(cfg.seed, STREAM_EXPLORE);
    let mut replay_rng = stream(cfg.seed, STREAM_REPLAY);
    let mut init_rng = stream(cfg.seed, STREAM_INIT);
    let mut guide_rng = stream(cfg.seed, STREAM_GUIDE);
    let mut route_rng = stream(cfg.seed, STREAM_KB_ROUTE);
    let mut sample_rng = stream(cfg.seed, STREAM_KB_SAMPLE);

    let space = env.action_space();
    let obs_dim = env.obs_dim();
    let mut agent = Agent::new(cfg, obs_dim, space, &mut init_rng)?;
    let mut predictor = if cfg.guidance.uses_predictor() {
        Some(ApPredictor::new(obs_dim, space, &g.predictor_hidden, g.lambda, g.predictor_lr, &mut init_rng)?)
    } else {
        None
    };
    let mut kb = predictor.as_ref().map(|_| KnowledgeBuffer::new(g.kb_capacity));
    let vstop = VirtualStopPolicy::new(cfg.virtual_stopping);

    let mut files = match &cfg.out_dir {
        Some(dir) => Some(LogFiles::create(dir, &rid)?),
        None => None,
    };
    let mut log = RunLog::default();
    let mut window = ReturnWindow::default();
    let mut virtual_stops = 0u64;
    let mut episode = 1u64;
    let (mut ep_len, mut ep_ret) = (0u64, 0.0);
    let mut prev: Option<(f64, f64)> = None;
    let mut state = env.reset(&mut env_rng);
    agent.start_episode();

    for t in 1..=cfg.total_steps {
        let obs = env.observe(&state);
        let base = agent.act(&obs, t, &mut explore_rng)?;
        let (mut action, mut alpha) = (base, None);
        if let Some(p) = &predictor {
            let c = guided_select(obs.as_slice(), base, p, g, &space, t, p.last_vacc(), &mut guide_rng)?;
            (action, alpha) = (c.action, c.alpha);
        } else if let Some(f) = &wiring.direct {
            // an exact function is always reliable
            let c = guided_select(&state, base, f, g, &space, t, Some(1.0), &mut guide_rng)?;
            (action, alpha) = (c.action, c.alpha);
        }
        let offset = wiring.lane_offset.map(|f| f(&state));
        if let (Some(tp), Some((prev_tp, prev_a)), Some(a)) = (offset, prev, action.scalar()) {
            let delta = tp.abs() - prev_tp.abs();
            action = ActionValue::Continuous(ap2_resample_lane(tp, a, prev_a, delta, &mut guide_rng));
        }

        let out = env.step(&action)?;
        let label: Option<ApLabel> = match &wiring.labeler {
            Some(f) => Some(f.label(&state, &action, Some(&out.state))?),
            None => None,
        };
        let next_obs = env.observe(&out.state);
        if let (Some(kb), Some(l)) = (kb.as_mut(), label) {
            kb.insert(
                KnowledgeTuple {
                    state: obs.clone(),
                    action,
                    label: l,
                },
                &mut route_rng,
            );
        }
        let mut tr = Transition {
            state: obs,
            action,
            reward: out.reward,
            next_state: next_obs,
            done: out.done,
            virtual_done: false,
        };
        if let Some(l) = label {
            tr = virtual_stop(tr, l, &vstop);
        }
        virtual_stops += u64::from(tr.virtual_done);
        agent.push(tr);
        if t > g.t_o {
            agent.train(&mut replay_rng)?;
        }
        if let (Some(p), Some(kb)) = (predictor.as_mut(), kb.as_ref()) {
            if should_train_predictor(p.vacc_history(), g.delta_acc, t, g.t_e) {
                if let Some(d) = kb.sample_balanced(g.n_e, &mut sample_rng) {
                    p.train(&d)?;
                }
            }
            p.validate(kb, g.validation_size, t, &mut sample_rng)?;
        }

        ep_len += 1;
        ep_ret += out.reward;
        if out.done {
            let row = EpisodeRow {
                episode,
                end_step: t,
                length: ep_len,
                ret: ep_ret,
                failure: out.failure,
            };
            if let Some(f) = files.as_mut() {
                f.episode(&row)?;
            }
            log.episodes.push(row);
            window.push(ep_ret);
        }
        let (kb_pos, kb_neg) = kb.as_ref().map_or((0, 0), |k| {
            (k.class_count(ApLabel::Permissible) as u64, k.class_count(ApLabel::NonPermissible) as u64)
        });
        let row = StepRow {
            step: t,
            episode,
            reward: out.reward,
            avg_reward100: window.mean(),
            explore: agent.explore_level(t),
            alpha,
            vacc: predictor.as_ref().and_then(|p| p.last_vacc()),
            kb_pos,
            kb_neg,
            virtual_stops,
        };
        if let Some(f) = files.as_mut() {
            f.step(&row)?;
        }
        log.steps.push(row);

        if out.done {
            episode += 1;
            ep_len = 0;
            ep_ret = 0.0;
            prev = None;
            state = env.reset(&mut env_rng);
            agent.start_episode();
        } else {
            prev = offset.zip(action.scalar());
            state = out.state;
        }

        if (cfg.eval_every > 0 && t % cfg.eval_every == 0) || t == cfg.total_steps {
            let (mean, scores) = evaluate(&mut eval_env, &agent.policy(), cfg.eval_episodes, cfg.seed)?;
            let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len().max(1) as f64;
            let row = EvalRow {
                step: t,
                mean,
                std: var.sqrt(),
                episodes: cfg.eval_episodes,
            };
            if let Some(f) = files.as_mut() {
                f.eval(&row)?;
            }
            log.evals.push(row);
        }
    }

    if let (Some(dir), Some(mut f)) = (&cfg.out_dir, files) {
        f.flush()?;
        agent.save(dir, &rid)?;
        if let Some(p) = &predictor {
            save_mlp(p.net(), &dir.join(format!("{rid}.predictor.sapn")))?;
        }
        if let (Some(k), true) = (&kb, cfg.dump_knowledge) {
            let file = std::fs::File::create(dir.join(format!("{rid}.kb.csv")))?;
            k.write_csv(std::io::BufWriter::new(file))?;
        }
        let config = serde_json::to_string_pretty(cfg).expect("config serializes");
        std::fs::write(dir.join(format!("{rid}.config.json")), config + "\n")?;
        let summary = Summary {
            run_id: &rid,
            total_steps: cfg.total_steps,
            episodes: log.episodes.len(),
            failures: log.failures_after(0),
            final_eval: log.evals.last().map(|e| e.mean),
            virtual_stops,
        };
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        std::fs::write(dir.join(format!("{rid}.summary.json")), text + "\n")?;
    }

    Ok(RunOutput {
        run_id: rid,
        log,
        agent,
        predictor,
        knowledge: kb,
    })
}
