//! Adam with bias correction.

use super::train::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// Applies one Adam update to `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(state.m.len(), grad.len());
    state.t += 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for k in 0..params.len() {
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * grad[k];
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * grad[k] * grad[k];
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        params[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
}
