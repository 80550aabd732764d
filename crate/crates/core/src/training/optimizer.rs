use std::collections::BTreeMap;

use crate::model::{Gradients, ModelState, ParamId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one tensor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub steps: u64,
    moments: BTreeMap<ParamId, Moments>,
}

/// One bias-corrected update of `param` in place; `t` is the 1-based step.
pub fn adam_update(param: &mut [f64], grad: &[f64], state: &mut Moments, t: u64, cfg: &AdamConfig) {
    if state.m.len() != param.len() {
        state.m = vec![0.0; param.len()];
        state.v = vec![0.0; param.len()];
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for (((p, &g), m), v) in param.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            steps: 0,
            moments: BTreeMap::new(),
        }
    }

    /// Applies one update to every tensor selected by `include`; the others
    /// are left untouched along with their moment estimates.
    pub fn step(&mut self, model: &mut ModelState, grads: &Gradients, include: impl Fn(ParamId) -> bool) {
        self.steps += 1;
        let grads: BTreeMap<ParamId, &[f64]> = grads.tensors().into_iter().collect();
        for (id, param) in model.tensors_mut() {
            if !include(id) {
                continue;
            }
            let state = self.moments.entry(id).or_default();
            adam_update(param, grads[&id], state, self.steps, &self.config);
        }
    }
}
