//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! Multi-seed criteria use seeds 1..=5.

use std::collections::HashSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sapdrl::agents::{ddqn_targets, ActionSpace, ActionValue, Transition};
use sapdrl::envs::{
    cartpole_ap1, test_tracks, CartPole, CartPoleConfig, CartPoleState, EnvId, Environment, Flappy, FlappyConfig, Lane,
    LaneConfig,
};
use sapdrl::harness::{lap_test, run_experiment, Agent, AgentId, ExperimentConfig, GuidanceMode, RunOutput};
use sapdrl::numkit::{Activation, LayerSpec, Mlp};
use sapdrl::oracle::{finite_diff_grad, grads_agree, permissibility_audit, permissible_existence_scan, sample_states, CheatingModel};
use sapdrl::sap::{
    candidate_set, guided_select, ApLabel, GuidanceConfig, KnowledgeBuffer, KnowledgeTuple, PermissibilityModel, SapError,
};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Verdict {
    id: u32,
    name: &'static str,
    ok: bool,
    detail: String,
}

fn train(env: EnvId, agent: AgentId, guidance: GuidanceMode, seed: u64, steps: u64) -> (RunOutput, Duration) {
    let mut cfg = ExperimentConfig::defaults(env, agent, guidance);
    cfg.seed = seed;
    cfg.total_steps = steps;
    let start = Instant::now();
    let out = run_experiment(&cfg).unwrap_or_else(|e| panic!("{env} {guidance} seed {seed}: {e}"));
    (out, start.elapsed())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// 1: analytic gradients against central differences

fn criterion_gradients() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    for case in 0..100 {
        let depth = rng.random_range(2..=4);
        let input = rng.random_range(2..=32);
        let mut specs: Vec<LayerSpec> = (0..depth - 1)
            .map(|_| {
                let act = if rng.random::<bool>() { Activation::Relu } else { Activation::Tanh };
                LayerSpec::new(rng.random_range(2..=32), act)
            })
            .collect();
        specs.push(LayerSpec::new(rng.random_range(2..=32), Activation::Linear));
        let mut net = Mlp::new(input, &specs, &mut rng).unwrap();
        let x: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        net.forward(&x).unwrap();
        let analytic = net.backward(&c).unwrap().flat();
        let probe = net.clone();
        let loss = |p: &[f64]| {
            let mut n = probe.clone();
            n.set_params_flat(p).unwrap();
            n.predict(&x).unwrap().iter().zip(&c).map(|(y, w)| y * w).sum::<f64>()
        };
        let numeric = finite_diff_grad(loss, &net.params_flat(), 1e-5);
        if let Err(e) = grads_agree(&analytic, &numeric, 1e-4, 1e-7) {
            failures.push(format!("net {case}: {e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        id: 1,
        name: "gradient check on 100 random MLPs",
        ok: failures.is_empty() && secs < 30.0,
        detail: format!("{} mismatches in {secs:.1}s {}", failures.len(), failures.join("; ")),
    }
}

// 2 and 3: cart-pole

struct CartpoleRuns {
    guided: Vec<(RunOutput, Duration)>,
    plain: Vec<(RunOutput, Duration)>,
}

fn cartpole_runs() -> CartpoleRuns {
    let run = |g| SEEDS.iter().map(|&s| train(EnvId::Cartpole, AgentId::Ddqn, g, s, 15_000)).collect();
    CartpoleRuns {
        guided: run(GuidanceMode::Ap1),
        plain: run(GuidanceMode::None),
    }
}

fn criterion_cartpole_speed(r: &CartpoleRuns) -> Verdict {
    let mut solved = 0;
    let mut faster = 0;
    let mut slowest = Duration::ZERO;
    let mut per_seed = Vec::new();
    for ((g, tg), (p, tp)) in r.guided.iter().zip(&r.plain) {
        slowest = slowest.max(*tg + *tp);
        let a = g.log.first_eval_reaching(195.0);
        let b = p.log.first_eval_reaching(195.0);
        solved += usize::from(a.is_some());
        faster += usize::from(matches!((a, b), (Some(x), Some(y)) if x < y) || (a.is_some() && b.is_none()));
        per_seed.push(format!("{a:?}/{b:?}"));
    }
    Verdict {
        id: 2,
        name: "cart-pole DDQN-AP1 solves faster than DDQN",
        ok: solved >= 3 && faster >= 4 && slowest < Duration::from_secs(600),
        detail: format!(
            "solved {solved}/5, faster {faster}/5, first step >= 195 guided/plain {}, slowest seed {:.1}s",
            per_seed.join(" "),
            slowest.as_secs_f64()
        ),
    }
}

fn criterion_cartpole_vacc(r: &CartpoleRuns) -> Verdict {
    let vaccs: Vec<Option<f64>> = r.guided.iter().map(|(o, _)| o.log.mean_vacc_after(13_000)).collect();
    let good = vaccs.iter().filter(|v| v.is_some_and(|x| x >= 0.90)).count();
    Verdict {
        id: 3,
        name: "cart-pole predictor holdout accuracy",
        ok: good >= 4,
        detail: format!("{good}/5 seeds >= 0.90 over final 2k steps: {vaccs:.3?}"),
    }
}

// 4: flappy

fn criterion_flappy() -> Verdict {
    let final_eval = |g| -> Vec<f64> {
        SEEDS
            .iter()
            .map(|&s| train(EnvId::Flappy, AgentId::Ddqn, g, s, 30_000).0.log.evals.last().unwrap().mean)
            .collect()
    };
    let plain = mean(&final_eval(GuidanceMode::None));
    let ap2 = mean(&final_eval(GuidanceMode::Ap2));
    let both = mean(&final_eval(GuidanceMode::Ap1Ap2));
    Verdict {
        id: 4,
        name: "flappy DDQN-(AP1+AP2) >= 1.5x DDQN, ordering AP1+AP2 >= AP2 >= DDQN",
        ok: both >= 1.5 * plain && both >= ap2 && ap2 >= plain,
        detail: format!("mean final evaluation: ap1+ap2 {both:.2}, ap2 {ap2:.2}, ddqn {plain:.2}"),
    }
}

// 5: lane keeping

fn criterion_lane() -> Verdict {
    let mut fewer = 0;
    let mut laps_ok = 0;
    let mut detail = Vec::new();
    for &s in &SEEDS {
        let guided = train(EnvId::Lane, AgentId::Ddpg, GuidanceMode::Ap1, s, 15_000).0;
        let plain = train(EnvId::Lane, AgentId::Ddpg, GuidanceMode::None, s, 15_000).0;
        let (fg, fp) = (guided.log.failures_after(10_000), plain.log.failures_after(10_000));
        fewer += usize::from(fg <= fp);
        let laps = lap_test(&guided.agent.policy(), &LaneConfig::default(), &test_tracks()).unwrap();
        let done = laps.iter().filter(|l| l.completed).count();
        laps_ok += usize::from(done >= 2);
        detail.push(format!("seed {s}: fails {fg}/{fp}, laps {done}/4"));
    }
    Verdict {
        id: 5,
        name: "lane DDPG-AP1 leaves the track no more than DDPG and completes test laps",
        ok: fewer >= 4 && laps_ok == SEEDS.len(),
        detail: detail.join("; "),
    }
}

// 6: Algorithm-1 properties

/// Labels every action with a fixed rule.
struct RuleModel<F>(F);

impl<F: Fn(&ActionValue) -> bool> PermissibilityModel<[f64]> for RuleModel<F> {
    fn predict_labels(&self, _: &[f64], actions: &[ActionValue]) -> Result<Vec<ApLabel>, SapError> {
        Ok(actions.iter().map(|a| ApLabel::from_bool((self.0)(a))).collect())
    }
}

fn gcfg(alpha_e: f64, alpha_tr: f64, n: usize) -> GuidanceConfig {
    GuidanceConfig {
        t_o: 10,
        t_e: 100,
        alpha_e,
        alpha_tr,
        delta_acc: 0.5,
        n_candidates: n,
        n_e: 2,
        lambda: 0.0,
        kb_capacity: 10,
        validation_size: 1,
        predictor_lr: 1e-3,
        predictor_hidden: vec![],
    }
}

fn any_space() -> impl Strategy<Value = ActionSpace> {
    prop_oneof![
        (2usize..6).prop_map(|n| ActionSpace::Discrete { n }),
        (-3.0f64..0.0, 0.1f64..3.0).prop_map(|(lo, w)| ActionSpace::Continuous { lo, hi: lo + w }),
    ]
}

fn action_in(space: ActionSpace, u: f64) -> ActionValue {
    match space {
        ActionSpace::Discrete { n } => ActionValue::Discrete(((u * n as f64) as usize).min(n - 1)),
        ActionSpace::Continuous { lo, hi } => ActionValue::Continuous(lo + u * (hi - lo)),
    }
}

fn criterion_algorithm1() -> Verdict {
    let cases = 10_000;
    let runner = || TestRunner::new(PropConfig::with_cases(cases));
    let state = [0.0f64; 3];
    let mut results = Vec::new();

    let no_op = runner().run(
        &(any_space(), 0.0f64..1.0, 0u64..500, any::<u64>(), proptest::option::of(0.0f64..1.0)),
        |(space, u, t, seed, vacc)| {
            let base = action_in(space, u);
            let model = RuleModel(|_: &ActionValue| false);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = guided_select(&state[..], base, &model, &gcfg(0.0, 0.0, 8), &space, t, vacc, &mut rng).unwrap();
            prop_assert_eq!(c.action, base);
            prop_assert!(!c.substituted);
            Ok(())
        },
    );
    results.push(("alpha=0 no-op", no_op.map_err(|e| e.to_string())));

    let pass_through = runner().run(
        &(any_space(), 0.0f64..1.0, 0u64..500, any::<u64>(), 0.0f64..0.5),
        |(space, u, t, seed, ae)| {
            let base = action_in(space, u);
            let model = RuleModel(move |a: &ActionValue| *a == base);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = guided_select(&state[..], base, &model, &gcfg(ae, ae + 0.45, 8), &space, t, Some(0.9), &mut rng).unwrap();
            prop_assert_eq!(c.action, base);
            Ok(())
        },
    );
    results.push(("permissible pass-through", pass_through.map_err(|e| e.to_string())));

    let fallback = runner().run(&(any_space(), 0.0f64..1.0, 11u64..500, any::<u64>()), |(space, u, t, seed)| {
        let base = action_in(space, u);
        let model = RuleModel(|_: &ActionValue| false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // alpha just below 1 so the model is almost always consulted
        let c = guided_select(&state[..], base, &model, &gcfg(0.98, 0.99, 8), &space, t, None, &mut rng).unwrap();
        prop_assert_eq!(c.action, base);
        prop_assert!(!c.substituted);
        Ok(())
    });
    results.push(("empty permitted set falls back to base", fallback.map_err(|e| e.to_string())));

    let one_per_interval = runner().run(
        &(-5.0f64..5.0, 0.01f64..5.0, 1usize..200, any::<u64>()),
        |(lo, w, n, seed)| {
            let hi = lo + w;
            let space = ActionSpace::Continuous { lo, hi };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = candidate_set(&space, n, &ActionValue::Continuous(lo), &mut rng);
            prop_assert_eq!(set.len(), n);
            let width = w / n as f64;
            for (i, a) in set.iter().enumerate() {
                let v = a.scalar().unwrap();
                let (a0, a1) = (lo + width * i as f64, lo + width * (i + 1) as f64);
                prop_assert!(v >= a0 - 1e-12 && v <= a1 + 1e-12, "candidate {} = {} outside [{}, {}]", i, v, a0, a1);
            }
            Ok(())
        },
    );
    results.push(("low-variance sampling one per sub-interval", one_per_interval.map_err(|e| e.to_string())));

    let balanced = runner().run(
        &(1usize..60, 0usize..200, 0usize..200, any::<u64>()),
        |(half, extra_pos, extra_neg, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut kb = KnowledgeBuffer::with_holdout(10_000, 0.0);
            let (npos, nneg) = (half + extra_pos, half + extra_neg);
            for i in 0..npos + nneg {
                let label = ApLabel::from_bool(i < npos);
                kb.insert(
                    KnowledgeTuple {
                        state: vec![i as f64],
                        action: ActionValue::Discrete(0),
                        label,
                    },
                    &mut rng,
                );
            }
            let d = kb.sample_balanced(2 * half, &mut rng).expect("enough tuples");
            let pos = d.iter().filter(|t| t.label.is_permissible()).count();
            prop_assert_eq!(pos, half);
            prop_assert_eq!(d.len() - pos, half);
            let ids: HashSet<u64> = d.iter().map(|t| t.state[0] as u64).collect();
            prop_assert_eq!(ids.len(), d.len());
            // one class short by a single tuple is insufficient
            let mut short = KnowledgeBuffer::with_holdout(10_000, 0.0);
            for i in 0..half + half - 1 {
                let label = ApLabel::from_bool(i < half);
                short.insert(
                    KnowledgeTuple {
                        state: vec![i as f64],
                        action: ActionValue::Discrete(0),
                        label,
                    },
                    &mut rng,
                );
            }
            prop_assert!(short.sample_balanced(2 * half, &mut rng).is_none());
            Ok(())
        },
    );
    results.push(("balanced sampling exact N_E/2 split", balanced.map_err(|e| e.to_string())));

    let failed: Vec<String> = results
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    Verdict {
        id: 6,
        name: "Algorithm-1 property suite",
        ok: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} properties x {cases} cases", results.len())
        } else {
            failed.join("; ")
        },
    }
}

// 7: virtual stopping contract

fn cp_state(v: &[f64]) -> CartPoleState {
    CartPoleState {
        x: v[0],
        x_dot: v[1],
        theta: v[2],
        theta_dot: v[3],
    }
}

fn criterion_virtual_stop() -> Verdict {
    let mut problems = Vec::new();
    let safe = CartPoleConfig::default().safe_angle;
    let (on, _) = train(EnvId::Cartpole, AgentId::Ddqn, GuidanceMode::Ap1, 7, 3_000);
    let Agent::Ddqn(agent) = &on.agent else { unreachable!() };
    let stored: Vec<&Transition> = agent.replay.iter().collect();
    if stored.len() != 3_000 {
        problems.push(format!("{} transitions stored", stored.len()));
    }
    let mut stops = 0;
    for (i, t) in stored.iter().enumerate() {
        let label = cartpole_ap1(&cp_state(&t.state), &cp_state(&t.next_state), safe);
        let stopped = label == ApLabel::NonPermissible;
        stops += usize::from(stopped);
        if stopped != t.virtual_done || (stopped && t.reward != -1.0) || (!stopped && t.reward != 1.0) {
            problems.push(format!("transition {i}: label {label:?} reward {} virtual {}", t.reward, t.virtual_done));
        }
        if let Some(next) = stored.get(i + 1) {
            if !t.done && next.state != t.next_state {
                problems.push(format!("transition {i}: episode did not continue after a virtual stop"));
            }
        }
    }
    let stopped: Vec<&Transition> = stored.iter().copied().filter(|t| t.virtual_done).collect();
    if stopped.is_empty() {
        problems.push("no virtual stops".into());
    } else {
        let targets = ddqn_targets(&stopped, &agent.q_net, &agent.target_net, 0.99).unwrap();
        if targets.iter().any(|&y| y != -1.0) {
            problems.push("a virtually stopped target bootstraps".into());
        }
    }
    let mut cfg = ExperimentConfig::defaults(EnvId::Cartpole, AgentId::Ddqn, GuidanceMode::Ap1);
    cfg.virtual_stopping = false;
    cfg.total_steps = 1_000;
    let off = run_experiment(&cfg).unwrap();
    if off.agent.replay().iter().any(|t| t.virtual_done || t.reward != 1.0) {
        problems.push("virtual stop applied while disabled".into());
    }
    Verdict {
        id: 7,
        name: "virtual stopping contract",
        ok: problems.is_empty(),
        detail: format!("{stops} virtual stops checked; {}", problems.iter().take(5).cloned().collect::<Vec<_>>().join("; ")),
    }
}

// 8: cheating-predictor audit

fn cheat_audit<E: Environment>(mut env: E, ap: sapdrl::sap::ApFunction<E::State>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = sample_states(&mut env, 1000, &mut rng).unwrap();
    permissibility_audit(&mut states, &ap, &CheatingModel::new(ap.clone()))
        .unwrap()
        .stats
        .accuracy()
}

fn criterion_audit() -> Verdict {
    let cp = CartPole::new(CartPoleConfig::default());
    let cp_acc = cheat_audit(cp.clone(), cp.ap1().unwrap(), 1);
    let fl = Flappy::new(FlappyConfig::default());
    let fl_acc = cheat_audit(fl.clone(), fl.ap_combined(), 2);
    let lane = Lane::new(LaneConfig::default()).unwrap();
    let lane_acc = cheat_audit(lane.clone(), lane.ap1().unwrap(), 3);
    let mut env = cp.clone();
    let mut states = sample_states(&mut env, 1000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let scan = permissible_existence_scan(&mut states, &cp.ap1().unwrap()).unwrap();
    Verdict {
        id: 8,
        name: "cheating-predictor audit and cart-pole existence scan",
        ok: cp_acc == 1.0 && fl_acc == 1.0 && lane_acc == 1.0 && scan.fraction >= 0.99,
        detail: format!(
            "accuracy cartpole {cp_acc}, flappy {fl_acc}, lane {lane_acc}; states with a permissible action {:.4}",
            scan.fraction
        ),
    }
}

// 9: reproducible CLI runs

fn cli_train(out: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_sapdrl"))
        .arg("train")
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_determinism() -> Verdict {
    let mut problems = Vec::new();
    let runs: [(&[&str], &str); 2] = [
        (
            &["--env", "cartpole", "--agent", "ddqn", "--guidance", "ap1", "--vstop", "on", "--seed", "11", "--steps", "3000"],
            "cartpole-ddqn-ap1-vson-s11",
        ),
        (
            &["--env", "lane", "--agent", "ddpg", "--guidance", "ap1+ap2", "--vstop", "auto", "--seed", "12", "--steps", "1500"],
            "lane-ddpg-ap1+ap2-vsoff-s12",
        ),
    ];
    for (args, id) in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        if !(cli_train(a.path(), args) && cli_train(b.path(), args)) {
            problems.push(format!("{id}: train failed"));
            continue;
        }
        for kind in ["steps", "episodes", "evals"] {
            let name = format!("{id}.{kind}.csv");
            match (std::fs::read(a.path().join(&name)), std::fs::read(b.path().join(&name))) {
                (Ok(x), Ok(y)) if x == y && !x.is_empty() => {}
                _ => problems.push(format!("{name} differs or is missing")),
            }
        }
    }
    Verdict {
        id: 9,
        name: "byte-identical run logs for repeated `sapdrl train`",
        ok: problems.is_empty(),
        detail: if problems.is_empty() { "6 CSV pairs identical".into() } else { problems.join("; ") },
    }
}

fn main() {
    let report = |v: Verdict| {
        println!("criterion {} {}: {} ({})", v.id, if v.ok { "PASS" } else { "FAIL" }, v.name, v.detail);
        v.ok
    };
    let mut ok = true;
    ok &= report(criterion_gradients());
    let cp = cartpole_runs();
    ok &= report(criterion_cartpole_speed(&cp));
    ok &= report(criterion_cartpole_vacc(&cp));
    drop(cp);
    ok &= report(criterion_flappy());
    ok &= report(criterion_lane());
    ok &= report(criterion_algorithm1());
    ok &= report(criterion_virtual_stop());
    ok &= report(criterion_audit());
    ok &= report(criterion_determinism());
    if !ok {
        std::process::exit(1);
    }
}
