use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, not_live, EnvError, EnvId, Environment, StepOutcome};
use crate::agents::{ActionSpace, ActionValue};
use crate::sap::{ApFunction, ApLabel};

/// Classic-control cart-pole constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartPoleConfig {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub half_length: f64,
    pub force: f64,
    pub tau: f64,
    pub theta_limit: f64,
    pub x_limit: f64,
    pub max_steps: u32,
    /// Half-width of the safe angular zone used by the AP function.
    pub safe_angle: f64,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force: 10.0,
            tau: 0.02,
            theta_limit: 12.0 * 2.0 * std::f64::consts::PI / 360.0,
            x_limit: 2.4,
            max_steps: 200,
            safe_angle: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }
}

/// Which side of the safe zone the pole is on: 0 inside `(-safe, safe)`,
/// otherwise the sign of `theta`.
pub fn cartpole_rho(theta: f64, safe_angle: f64) -> i8 {
    if theta.abs() < safe_angle {
        0
    } else if theta > 0.0 {
        1
    } else {
        -1
    }
}

/// Non-permissible when the pole ends outside the safe zone while both its
/// angle and its angular speed grew in magnitude.
pub fn cartpole_ap1(s: &CartPoleState, next: &CartPoleState, safe_angle: f64) -> ApLabel {
    let outside = cartpole_rho(next.theta, safe_angle) != 0;
    let faster = next.theta_dot.abs() - s.theta_dot.abs() > 0.0;
    let further = next.theta.abs() - s.theta.abs() > 0.0;
    ApLabel::from_bool(!(outside && faster && further))
}

/// Cart-pole balancing. Action 0 pushes left, 1 pushes right; every step
/// pays 1.
#[derive(Debug, Clone)]
pub struct CartPole {
    cfg: CartPoleConfig,
    state: CartPoleState,
    steps: u32,
    live: bool,
}

impl CartPole {
    pub fn new(cfg: CartPoleConfig) -> Self {
        Self {
            cfg,
            state: CartPoleState::default(),
            steps: 0,
            live: false,
        }
    }

    pub fn config(&self) -> &CartPoleConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, state: CartPoleState) {
        self.state = state;
        self.steps = 0;
        self.live = true;
    }

    /// One Euler step of the cart-pole equations of motion.
    pub fn dynamics(cfg: &CartPoleConfig, s: &CartPoleState, push_right: bool) -> CartPoleState {
        let force = if push_right { cfg.force } else { -cfg.force };
        let total_mass = cfg.cart_mass + cfg.pole_mass;
        let pml = cfg.pole_mass * cfg.half_length;
        let (sin, cos) = s.theta.sin_cos();
        let temp = (force + pml * s.theta_dot * s.theta_dot * sin) / total_mass;
        let theta_acc =
            (cfg.gravity * sin - cos * temp) / (cfg.half_length * (4.0 / 3.0 - cfg.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pml * theta_acc * cos / total_mass;
        CartPoleState {
            x: s.x + cfg.tau * s.x_dot,
            x_dot: s.x_dot + cfg.tau * x_acc,
            theta: s.theta + cfg.tau * s.theta_dot,
            theta_dot: s.theta_dot + cfg.tau * theta_acc,
        }
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new(CartPoleConfig::default())
    }
}

impl Environment for CartPole {
    type State = CartPoleState;

    fn id(&self) -> EnvId {
        EnvId::Cartpole
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete { n: 2 }
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> CartPoleState {
        let mut u = || rng.random_range(-0.05..=0.05);
        let s = CartPoleState {
            x: u(),
            x_dot: u(),
            theta: u(),
            theta_dot: u(),
        };
        self.reset_to(s);
        s
    }

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome<CartPoleState>, EnvError> {
        if !self.live {
            return Err(not_live());
        }
        check_action(self.action_space(), action)?;
        self.state = Self::dynamics(&self.cfg, &self.state, action.index() == Some(1));
        self.steps += 1;
        let s = &self.state;
        let failure = s.theta.abs() > self.cfg.theta_limit || s.x.abs() > self.cfg.x_limit;
        let done = failure || self.steps >= self.cfg.max_steps;
        self.live = !done;
        Ok(StepOutcome {
            state: *s,
            reward: 1.0,
            done,
            failure,
        })
    }

    fn state(&self) -> &CartPoleState {
        &self.state
    }

    fn is_done(&self) -> bool {
        !self.live
    }

    fn observe(&self, state: &CartPoleState) -> Vec<f64> {
        state.to_vec()
    }

    fn snapshot(&self) -> Option<Self> {
        Some(self.clone())
    }

    fn ap1(&self) -> Option<ApFunction<CartPoleState>> {
        let safe = self.cfg.safe_angle;
        Some(ApFunction::type1(move |s, _, n| cartpole_ap1(s, n, safe)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const RIGHT: ActionValue = ActionValue::Discrete(1);
    const LEFT: ActionValue = ActionValue::Discrete(0);

    #[test]
    fn push_right_from_rest() {
        let mut env = CartPole::default();
        env.reset_to(CartPoleState::default());
        let s = env.step(&RIGHT).unwrap().state;
        assert!((s.x_dot - 0.19512).abs() < 1e-5);
        assert!((s.theta_dot + 0.29268).abs() < 1e-5);
        assert_eq!((s.x, s.theta), (0.0, 0.0));
    }

    #[test]
    fn angle_past_limit_ends_episode() {
        let mut env = CartPole::default();
        env.reset_to(CartPoleState {
            theta: 12.1_f64.to_radians(),
            theta_dot: 0.5,
            ..Default::default()
        });
        let out = env.step(&RIGHT).unwrap();
        assert!(out.done && out.failure);
        assert!(env.step(&RIGHT).is_err());
    }

    #[test]
    fn two_hundred_steps_end_episode() {
        let mut env = CartPole::default();
        env.reset_to(CartPoleState::default());
        let mut n = 0;
        loop {
            // bang-bang balance on angular velocity
            let a = if env.state().theta_dot + env.state().theta > 0.0 { RIGHT } else { LEFT };
            let out = env.step(&a).unwrap();
            n += 1;
            if out.done {
                assert!(!out.failure);
                break;
            }
        }
        assert_eq!(n, 200);
    }

    #[test]
    fn step_before_reset_is_rejected() {
        assert!(CartPole::default().step(&LEFT).is_err());
    }

    #[test]
    fn resets_are_small_and_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut env = CartPole::default();
        let mut sum = [0.0; 4];
        let n = 10_000;
        for _ in 0..n {
            let v = env.reset(&mut rng).to_vec();
            for (acc, x) in sum.iter_mut().zip(&v) {
                assert!(x.abs() <= 0.05);
                *acc += x;
            }
        }
        // sd of the mean of U(-0.05, 0.05) over 1e4 draws is 2.9e-4
        for acc in sum {
            assert!((acc / n as f64).abs() < 0.002);
        }
        let a = env.reset(&mut ChaCha8Rng::seed_from_u64(9));
        let b = env.reset(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn rho_zones() {
        assert_eq!(cartpole_rho(0.03, 0.05), 0);
        assert_eq!(cartpole_rho(0.06, 0.05), 1);
        assert_eq!(cartpole_rho(-0.06, 0.05), -1);
    }

    #[test]
    fn ap1_cases() {
        let s = CartPoleState {
            theta: 0.06,
            theta_dot: 0.2,
            ..Default::default()
        };
        let worse = CartPoleState {
            theta: 0.08,
            theta_dot: 0.3,
            ..Default::default()
        };
        assert_eq!(cartpole_ap1(&s, &worse, 0.05), ApLabel::NonPermissible);
        let safe = CartPoleState {
            theta: 0.01,
            theta_dot: 5.0,
            ..Default::default()
        };
        assert_eq!(cartpole_ap1(&s, &safe, 0.05), ApLabel::Permissible);
        let left = CartPoleState {
            theta: -0.06,
            theta_dot: -0.2,
            ..Default::default()
        };
        let recovering = CartPoleState {
            theta: -0.055,
            theta_dot: -0.3,
            ..Default::default()
        };
        assert_eq!(cartpole_ap1(&left, &recovering, 0.05), ApLabel::Permissible);
    }

    #[test]
    fn mirrored_trajectories() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = CartPole::default();
        let mut b = CartPole::default();
        let s0 = a.reset(&mut rng);
        b.reset_to(CartPoleState {
            x: -s0.x,
            x_dot: -s0.x_dot,
            theta: -s0.theta,
            theta_dot: -s0.theta_dot,
        });
        let ap = a.ap1().unwrap();
        while !a.is_done() {
            let act = ActionValue::Discrete(rng.random_range(0..2));
            let mirrored = ActionValue::Discrete(1 - act.index().unwrap());
            let (pa, pb) = (*a.state(), *b.state());
            let oa = a.step(&act).unwrap();
            let ob = b.step(&mirrored).unwrap();
            assert_eq!(oa.state.theta, -ob.state.theta);
            assert_eq!(oa.state.x_dot, -ob.state.x_dot);
            assert_eq!(oa.done, ob.done);
            assert_eq!(
                ap.label(&pa, &act, Some(&oa.state)).unwrap(),
                ap.label(&pb, &mirrored, Some(&ob.state)).unwrap()
            );
        }
    }
}
