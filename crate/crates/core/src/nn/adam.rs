use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam moments and step counter for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self { config, m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::LengthMismatch { params: params.len(), grads: grads.len() });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient(i));
        }
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}
