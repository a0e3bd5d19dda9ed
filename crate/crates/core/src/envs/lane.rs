use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::track::{training_track, TrackSpec};
use super::{check_action, not_live, EnvError, EnvId, Environment, StepOutcome};
use crate::agents::{ActionSpace, ActionValue};
use crate::sap::{ApFunction, ApLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaneConfig {
    pub wheelbase: f64,
    pub dt: f64,
    pub speed_kmh: f64,
    /// Wheel angle in radians at full steering command.
    pub max_steer: f64,
    /// Episode step limit on the looping training track.
    pub max_steps: u32,
    pub track: TrackSpec,
}

impl Default for LaneConfig {
    fn default() -> Self {
        Self {
            wheelbase: 2.5,
            dt: 0.02,
            speed_kmh: 100.0,
            max_steer: 0.366519,
            max_steps: 1000,
            track: training_track(),
        }
    }
}

/// Car pose relative to the track axis. Speeds are in km/h.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaneState {
    /// Heading minus track direction, in `[-pi, pi)`, positive to the left.
    pub angle: f64,
    /// Lateral offset over half the track width; +1 is the left edge.
    pub track_pos: f64,
    pub speed_x: f64,
    pub speed_y: f64,
    pub speed_z: f64,
    /// Distance travelled along the axis since reset, in meters.
    pub progress: f64,
}

/// `speed_x (cos(angle) - |sin(angle)| - |track_pos|)`.
pub fn lane_reward(angle: f64, track_pos: f64, speed_x: f64) -> f64 {
    speed_x * (angle.cos() - angle.sin().abs() - track_pos.abs())
}

/// Non-permissible when the car moved away from the track axis.
pub fn lane_ap1(s: &LaneState, next: &LaneState) -> ApLabel {
    ApLabel::from_bool(next.track_pos.abs() - s.track_pos.abs() <= 0.0)
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Constant-speed kinematic bicycle driven along a track in curvilinear
/// coordinates. Steering is in `[-1, 1]`, positive to the left.
#[derive(Debug, Clone)]
pub struct Lane {
    cfg: LaneConfig,
    state: LaneState,
    lateral: f64,
    steps: u32,
    live: bool,
    lap_mode: bool,
}

impl Lane {
    pub fn new(cfg: LaneConfig) -> Result<Self, EnvError> {
        cfg.track.validate()?;
        if !(cfg.wheelbase > 0.0 && cfg.dt > 0.0 && cfg.speed_kmh > 0.0 && cfg.max_steer > 0.0) {
            return Err(EnvError::Config("lane constants must be positive".into()));
        }
        Ok(Self {
            cfg,
            state: LaneState::default(),
            lateral: 0.0,
            steps: 0,
            live: false,
            lap_mode: false,
        })
    }

    /// One-lap driving test: the episode ends successfully once the car has
    /// covered the track length.
    pub fn lap(cfg: LaneConfig) -> Result<Self, EnvError> {
        let mut env = Self::new(cfg)?;
        env.lap_mode = true;
        Ok(env)
    }

    pub fn config(&self) -> &LaneConfig {
        &self.cfg
    }

    pub fn half_width(&self) -> f64 {
        self.cfg.track.width / 2.0
    }

    pub fn speed_ms(&self) -> f64 {
        self.cfg.speed_kmh / 3.6
    }

    pub fn lap_complete(&self) -> bool {
        self.state.progress >= self.cfg.track.length()
    }

    fn step_limit(&self) -> u32 {
        if self.lap_mode {
            let per_lap = self.cfg.track.length() / (self.speed_ms() * self.cfg.dt);
            (2.0 * per_lap).ceil() as u32
        } else {
            self.cfg.max_steps
        }
    }

    /// Starts on the axis at arc length `progress` with the given offset and
    /// heading error.
    pub fn reset_to(&mut self, track_pos: f64, angle: f64, progress: f64) -> LaneState {
        self.lateral = track_pos * self.half_width();
        self.state = self.pose(angle, progress);
        self.steps = 0;
        self.live = true;
        self.state
    }

    fn pose(&self, angle: f64, progress: f64) -> LaneState {
        LaneState {
            angle,
            track_pos: self.lateral / self.half_width(),
            speed_x: self.cfg.speed_kmh,
            speed_y: self.cfg.speed_kmh * angle.sin(),
            speed_z: 0.0,
            progress,
        }
    }
}

impl Environment for Lane {
    type State = LaneState;

    fn id(&self) -> EnvId {
        EnvId::Lane
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous { lo: -1.0, hi: 1.0 }
    }

    fn obs_dim(&self) -> usize {
        5
    }

    fn reset<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> LaneState {
        self.reset_to(0.0, 0.0, 0.0)
    }

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome<LaneState>, EnvError> {
        if !self.live {
            return Err(not_live());
        }
        check_action(self.action_space(), action)?;
        let steer = action.scalar().unwrap_or(0.0) * self.cfg.max_steer;
        let v = self.speed_ms();
        let dt = self.cfg.dt;
        let psi = self.state.angle;
        let s = self.state.progress;
        let kappa = self.cfg.track.curvature_at(s);
        // semi-implicit Euler: the new heading moves the car, so steering
        // already shows in the next offset
        let s_dot = v * psi.cos() / (1.0 - kappa * self.lateral);
        let psi = wrap_angle(psi + dt * (v / self.cfg.wheelbase * steer.tan() - kappa * s_dot));
        let s_dot = v * psi.cos() / (1.0 - kappa * self.lateral);
        self.lateral += dt * v * psi.sin();
        self.state = self.pose(psi, s + dt * s_dot);
        self.steps += 1;
        let failure = self.state.track_pos.abs() > 1.0;
        let reward = lane_reward(self.state.angle, self.state.track_pos, self.state.speed_x);
        let done = failure || self.steps >= self.step_limit() || (self.lap_mode && self.lap_complete());
        self.live = !done;
        Ok(StepOutcome {
            state: self.state,
            reward,
            done,
            failure,
        })
    }

    fn state(&self) -> &LaneState {
        &self.state
    }

    fn is_done(&self) -> bool {
        !self.live
    }

    /// Sensors scaled to unit order for typical on-track driving: angle and
    /// offset in tenths, lateral speeds in tens of km/h.
    fn observe(&self, s: &LaneState) -> Vec<f64> {
        vec![s.angle * 10.0, s.track_pos * 10.0, s.speed_x / 100.0, s.speed_y / 10.0, s.speed_z / 10.0]
    }

    fn snapshot(&self) -> Option<Self> {
        Some(self.clone())
    }

    fn ap1(&self) -> Option<ApFunction<LaneState>> {
        Some(ApFunction::type1(|s, _, n| lane_ap1(s, n)))
    }
}
