use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, not_live, EnvError, EnvId, Environment, StepOutcome};
use crate::agents::{ActionSpace, ActionValue};
use crate::sap::{compose_ap, ApFunction, ApLabel};

pub const NOFLAP: usize = 0;
pub const FLAP: usize = 1;

/// Geometry and physics of the flappy-bird game, in pixels and steps.
/// Screen `y` grows downward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlappyConfig {
    pub screen_width: f64,
    pub screen_height: f64,
    pub bird_x: f64,
    pub bird_size: f64,
    pub pipe_width: f64,
    pub pipe_spacing: f64,
    pub scroll: f64,
    pub flap_velocity: f64,
    pub gravity: f64,
    pub max_fall: f64,
    pub gap: f64,
    /// Gap centers are drawn uniformly from this band, as fractions of the
    /// screen height.
    pub gap_center_lo: f64,
    pub gap_center_hi: f64,
    pub max_steps: u32,
}

impl Default for FlappyConfig {
    fn default() -> Self {
        Self {
            screen_width: 288.0,
            screen_height: 512.0,
            bird_x: 60.0,
            bird_size: 24.0,
            pipe_width: 52.0,
            pipe_spacing: 144.0,
            scroll: 4.0,
            flap_velocity: -9.0,
            gravity: 1.0,
            max_fall: 10.0,
            gap: 100.0,
            gap_center_lo: 0.3,
            gap_center_hi: 0.7,
            max_steps: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pipe {
    /// Left edge.
    pub x: f64,
    pub gap_center: f64,
    pub passed: bool,
}

/// Bird features relative to the next pipe. `y` is the bird's center.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlappyState {
    pub y: f64,
    pub v: f64,
    /// Horizontal distance from the bird's left edge to the next pipe's left
    /// edge.
    pub dx: f64,
    /// Gap center minus `y`; positive when the bird is above the center.
    pub delta_c: f64,
    /// Lower-pipe top minus `y`; positive when the bird is above it.
    pub delta_l: f64,
    pub crashed: bool,
}

/// Flapping above the gap center, or gliding below the lower pipe top.
pub fn flappy_ap2(s: &FlappyState, a: &ActionValue) -> ApLabel {
    let flap = a.index() == Some(FLAP);
    let c1 = s.delta_c > 0.0 && flap;
    let c2 = s.delta_l < 0.0 && !flap;
    ApLabel::from_bool(!(c1 || c2))
}

/// Gliding into a crash while below the gap center.
pub fn flappy_ap1(_s: &FlappyState, a: &ActionValue, next: &FlappyState) -> ApLabel {
    let c3 = next.delta_c < 0.0 && a.index() == Some(NOFLAP) && next.crashed;
    ApLabel::from_bool(!c3)
}

/// Feature-state flappy bird. Action 0 glides, 1 flaps. Passing a pipe pays
/// 1, crashing -1, every other step 0.1.
#[derive(Debug, Clone)]
pub struct Flappy {
    cfg: FlappyConfig,
    rng: ChaCha8Rng,
    pipes: VecDeque<Pipe>,
    state: FlappyState,
    steps: u32,
    score: u32,
    live: bool,
}

impl Flappy {
    pub fn new(cfg: FlappyConfig) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(0),
            pipes: VecDeque::new(),
            state: FlappyState::default(),
            steps: 0,
            score: 0,
            live: false,
        }
    }

    pub fn config(&self) -> &FlappyConfig {
        &self.cfg
    }

    pub fn pipes(&self) -> impl Iterator<Item = &Pipe> {
        self.pipes.iter()
    }

    /// Pipes passed in the current episode.
    pub fn score(&self) -> u32 {
        self.score
    }

    fn spawn_pipe(&mut self, x: f64) {
        let h = self.cfg.screen_height;
        let c = self.rng.random_range(self.cfg.gap_center_lo * h..=self.cfg.gap_center_hi * h);
        self.pipes.push_back(Pipe {
            x,
            gap_center: c,
            passed: false,
        });
    }

    fn next_pipe(&self) -> &Pipe {
        self.pipes
            .iter()
            .find(|p| !p.passed)
            .expect("pipes are spawned ahead of the bird")
    }

    fn features(&self, y: f64, v: f64, crashed: bool) -> FlappyState {
        let p = self.next_pipe();
        FlappyState {
            y,
            v,
            dx: p.x - self.cfg.bird_x,
            delta_c: p.gap_center - y,
            delta_l: p.gap_center + self.cfg.gap / 2.0 - y,
            crashed,
        }
    }

    fn hits(&self, y: f64) -> bool {
        let c = &self.cfg;
        let half = c.bird_size / 2.0;
        if y - half < 0.0 || y + half > c.screen_height {
            return true;
        }
        self.pipes.iter().any(|p| {
            let overlap_x = c.bird_x < p.x + c.pipe_width && c.bird_x + c.bird_size > p.x;
            let upper = p.gap_center - c.gap / 2.0;
            let lower = p.gap_center + c.gap / 2.0;
            overlap_x && (y - half < upper || y + half > lower)
        })
    }
}

impl Default for Flappy {
    fn default() -> Self {
        Self::new(FlappyConfig::default())
    }
}

impl Environment for Flappy {
    type State = FlappyState;

    fn id(&self) -> EnvId {
        EnvId::Flappy
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete { n: 2 }
    }

    fn obs_dim(&self) -> usize {
        5
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> FlappyState {
        self.rng = ChaCha8Rng::seed_from_u64(rng.random());
        self.pipes.clear();
        let mut x = self.cfg.screen_width;
        while x < 2.0 * self.cfg.screen_width {
            self.spawn_pipe(x);
            x += self.cfg.pipe_spacing;
        }
        self.steps = 0;
        self.score = 0;
        self.live = true;
        self.state = self.features(self.cfg.screen_height / 2.0, 0.0, false);
        self.state
    }

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome<FlappyState>, EnvError> {
        if !self.live {
            return Err(not_live());
        }
        check_action(self.action_space(), action)?;
        let c = self.cfg.clone();
        let v = if action.index() == Some(FLAP) {
            c.flap_velocity
        } else {
            (self.state.v + c.gravity).min(c.max_fall)
        };
        let y = self.state.y + v;
        let mut reward = 0.1;
        for p in self.pipes.iter_mut() {
            p.x -= c.scroll;
            if !p.passed && p.x + c.pipe_width < c.bird_x {
                p.passed = true;
                self.score += 1;
                reward = 1.0;
            }
        }
        while self.pipes.front().is_some_and(|p| p.x + c.pipe_width < 0.0) {
            self.pipes.pop_front();
        }
        let last = self.pipes.back().map_or(c.screen_width, |p| p.x);
        if last < c.screen_width + c.pipe_spacing {
            self.spawn_pipe(last + c.pipe_spacing);
        }
        let crashed = self.hits(y);
        if crashed {
            reward = -1.0;
        }
        self.steps += 1;
        self.state = self.features(y, v, crashed);
        let done = crashed || self.steps >= c.max_steps;
        self.live = !done;
        Ok(StepOutcome {
            state: self.state,
            reward,
            done,
            failure: crashed,
        })
    }

    fn state(&self) -> &FlappyState {
        &self.state
    }

    fn is_done(&self) -> bool {
        !self.live
    }

    fn observe(&self, s: &FlappyState) -> Vec<f64> {
        let half = self.cfg.screen_height / 2.0;
        vec![
            (s.y - half) / half,
            s.v / self.cfg.max_fall,
            s.dx / self.cfg.pipe_spacing,
            s.delta_c / self.cfg.gap,
            s.delta_l / self.cfg.gap,
        ]
    }

    fn snapshot(&self) -> Option<Self> {
        Some(self.clone())
    }

    fn ap1(&self) -> Option<ApFunction<FlappyState>> {
        Some(ApFunction::type1(flappy_ap1))
    }

    fn ap2(&self) -> Option<ApFunction<FlappyState>> {
        Some(ApFunction::type2(flappy_ap2))
    }
}

impl Flappy {
    /// Both functions combined: non-permissible if either says so.
    pub fn ap_combined(&self) -> ApFunction<FlappyState> {
        compose_ap(vec![ApFunction::type2(flappy_ap2), ApFunction::type1(flappy_ap1)]).expect("non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAP_A: ActionValue = ActionValue::Discrete(FLAP);
    const GLIDE: ActionValue = ActionValue::Discrete(NOFLAP);

    fn started(seed: u64) -> Flappy {
        let mut env = Flappy::default();
        env.reset(&mut ChaCha8Rng::seed_from_u64(seed));
        env
    }

    #[test]
    fn gravity_and_flap() {
        let mut env = started(0);
        env.state.v = 3.0;
        let y = env.state.y;
        let s = env.step(&GLIDE).unwrap().state;
        assert_eq!((s.v, s.y), (4.0, y + 4.0));
        let s = env.step(&FLAP_A).unwrap().state;
        assert_eq!(s.v, -9.0);
        env.state.v = 10.0;
        assert_eq!(env.step(&GLIDE).unwrap().state.v, 10.0);
    }

    #[test]
    fn reset_geometry() {
        let env = started(1);
        let s = env.state();
        let first = env.pipes().next().unwrap();
        assert_eq!(s.y, 256.0);
        assert_eq!(s.delta_c, first.gap_center - s.y);
        assert_eq!(s.delta_l, first.gap_center + 50.0 - s.y);
        for p in env.pipes() {
            assert!((153.6..=358.4).contains(&p.gap_center));
        }
        let a: Vec<f64> = started(7).pipes().map(|p| p.gap_center).collect();
        let b: Vec<f64> = started(7).pipes().map(|p| p.gap_center).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn falling_bird_crashes_with_penalty() {
        let mut env = started(2);
        loop {
            let out = env.step(&GLIDE).unwrap();
            if out.done {
                assert_eq!(out.reward, -1.0);
                assert!(out.failure && out.state.crashed);
                break;
            }
            assert_eq!(out.reward, 0.1);
        }
        assert!(env.step(&GLIDE).is_err());
    }

    /// Steers toward the gap center; used to check pipe crossings.
    fn pilot(s: &FlappyState) -> ActionValue {
        if s.delta_c < -8.0 && s.v >= 0.0 {
            FLAP_A
        } else {
            GLIDE
        }
    }

    #[test]
    fn piloted_bird_collects_pipes() {
        let mut env = started(3);
        let mut passes = 0;
        for _ in 0..1000 {
            let a = pilot(env.state());
            let out = env.step(&a).unwrap();
            if out.reward == 1.0 {
                passes += 1;
            }
            // features agree with the raw pipe layout
            let next = env.pipes().find(|p| !p.passed).unwrap();
            assert_eq!(out.state.delta_c, next.gap_center - out.state.y);
            assert_eq!(out.state.dx, next.x - 60.0);
            if out.done {
                break;
            }
        }
        assert_eq!(passes, env.score());
        assert!(passes >= 5, "only {passes} pipes");
    }

    #[test]
    fn ap2_conditions() {
        let s = FlappyState {
            delta_c: 12.0,
            delta_l: 62.0,
            ..Default::default()
        };
        assert_eq!(flappy_ap2(&s, &FLAP_A), ApLabel::NonPermissible);
        let low = FlappyState {
            delta_c: -55.0,
            delta_l: -5.0,
            ..Default::default()
        };
        assert_eq!(flappy_ap2(&low, &GLIDE), ApLabel::NonPermissible);
        let mid = FlappyState {
            delta_c: -3.0,
            delta_l: 8.0,
            ..Default::default()
        };
        assert_eq!(flappy_ap2(&mid, &GLIDE), ApLabel::Permissible);
    }

    #[test]
    fn ap1_and_combination() {
        let s = FlappyState::default();
        let crash_low = FlappyState {
            delta_c: -40.0,
            crashed: true,
            ..Default::default()
        };
        assert_eq!(flappy_ap1(&s, &GLIDE, &crash_low), ApLabel::NonPermissible);
        assert_eq!(flappy_ap1(&s, &FLAP_A, &crash_low), ApLabel::Permissible);
        let fine = FlappyState {
            delta_c: -40.0,
            ..Default::default()
        };
        assert_eq!(flappy_ap1(&s, &GLIDE, &fine), ApLabel::Permissible);
        let env = Flappy::default();
        let both = env.ap_combined();
        let mid = FlappyState {
            delta_c: -3.0,
            delta_l: 8.0,
            ..Default::default()
        };
        assert_eq!(both.label(&mid, &GLIDE, Some(&crash_low)).unwrap(), ApLabel::NonPermissible);
    }
}
