use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Linearly annealed epsilon for epsilon-greedy exploration.
///
/// Held at `initial` for `observe_steps`, then annealed to `final_value`
/// over `anneal_steps`, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub final_value: f64,
    pub observe_steps: u64,
    pub anneal_steps: u64,
}

impl EpsilonSchedule {
    pub fn new(observe_steps: u64, anneal_steps: u64) -> Self {
        Self {
            initial: 1.0,
            final_value: 0.01,
            observe_steps,
            anneal_steps,
        }
    }

    pub fn epsilon_at(&self, t: u64) -> f64 {
        if t <= self.observe_steps {
            return self.initial;
        }
        let k = t - self.observe_steps;
        if k >= self.anneal_steps {
            return self.final_value;
        }
        let frac = k as f64 / self.anneal_steps as f64;
        self.initial + (self.final_value - self.initial) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
}

impl Default for OuParams {
    fn default() -> Self {
        Self {
            theta: 0.15,
            sigma: 0.3,
            mu: 0.0,
        }
    }
}

/// Ornstein-Uhlenbeck exploration noise, unit time step.
#[derive(Debug, Clone, PartialEq)]
pub struct OuNoise {
    pub x: f64,
    pub params: OuParams,
}

impl OuNoise {
    pub fn new(params: OuParams) -> Self {
        Self { x: params.mu, params }
    }

    pub fn reset(&mut self) {
        self.x = self.params.mu;
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.x += self.params.theta * (self.params.mu - self.x) + self.params.sigma * z;
        self.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epsilon_endpoints_and_midpoint() {
        let s = EpsilonSchedule::new(100, 2000);
        assert_eq!(s.epsilon_at(0), 1.0);
        assert_eq!(s.epsilon_at(100), 1.0);
        assert_eq!(s.epsilon_at(2100), 0.01);
        assert_eq!(s.epsilon_at(1_000_000), 0.01);
        let m = EpsilonSchedule::new(0, 2000);
        assert!((m.epsilon_at(1000) - 0.505).abs() < 1e-12);
    }

    #[test]
    fn epsilon_is_monotone() {
        let s = EpsilonSchedule::new(37, 501);
        let mut prev = f64::INFINITY;
        for t in 0..1000 {
            let e = s.epsilon_at(t);
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn noiseless_mean_reversion() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut n = OuNoise::new(OuParams { theta: 0.15, sigma: 0.0, mu: 0.0 });
        n.x = 1.0;
        assert!((n.step(&mut rng) - 0.85).abs() < 1e-15);
        n.x = 0.0;
        assert_eq!(n.step(&mut rng), 0.0);
    }

    #[test]
    fn long_run_mean_is_zero() {
        // Stationary OU: var = sigma^2 / (1 - (1 - theta)^2), lag-k
        // correlation (1 - theta)^k, so the mean of n samples has variance
        // var * (1 + rho) / (1 - rho) / n.
        let p = OuParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut n = OuNoise::new(p);
        let steps = 100_000;
        let mean = (0..steps).map(|_| n.step(&mut rng)).sum::<f64>() / steps as f64;
        let rho = 1.0 - p.theta;
        let var = p.sigma * p.sigma / (1.0 - rho * rho);
        let se = (var * (1.0 + rho) / (1.0 - rho) / steps as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }
}
