use super::mlp::{Gradients, Mlp};
use super::NumError;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for Adam, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
        }
    }

    pub fn for_net(net: &Mlp) -> Self {
        Self::new(net.param_count())
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Bias-corrected Adam update over parameter slices laid out in the same
    /// order as the moment buffers.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<(), NumError> {
        let total: usize = params.iter().map(|p| p.len()).sum();
        let gtotal: usize = grads.iter().map(|g| g.len()).sum();
        if total != self.m.len() || gtotal != total || params.len() != grads.len() {
            return Err(NumError::Shape(format!(
                "adam state holds {} moments, got {total} params and {gtotal} grads",
                self.m.len()
            )));
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(NumError::NonFinite("rejected update: non-finite gradient".into()));
        }
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - ADAM_BETA1.powf(t);
        let c2 = 1.0 - ADAM_BETA2.powf(t);
        let mut offset = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            let m = &mut self.m[offset..offset + p.len()];
            let v = &mut self.v[offset..offset + p.len()];
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
            offset += p.len();
        }
        Ok(())
    }
}

/// One Adam step on every parameter of `net`.
pub fn adam_step(state: &mut AdamState, net: &mut Mlp, grads: &Gradients, lr: f64) -> Result<(), NumError> {
    let g = grads.slices();
    let mut p = net.param_slices_mut();
    state.update(&mut p, &g, lr)
}

/// Polyak averaging: `target <- tau * source + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<(), NumError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(NumError::Config(format!("soft-update rate {tau} outside (0, 1]")));
    }
    if !target.same_topology(source) {
        return Err(NumError::Shape("soft update between different topologies".into()));
    }
    let src = source.param_slices();
    for (t, s) in target.param_slices_mut().into_iter().zip(src) {
        for (tv, sv) in t.iter_mut().zip(s) {
            *tv = tau * sv + (1.0 - tau) * *tv;
        }
    }
    Ok(())
}
