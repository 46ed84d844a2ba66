use std::collections::BTreeMap;

use super::config::TrainConfig;
use super::params::Parameters;
use super::tape::Tensor;

/// Adam moment buffers. `t` counts completed steps across the whole run;
/// bias correction uses it, so the state must travel with checkpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One Adam update over every parameter tensor. Tensors without an entry in
/// `grads` see a zero gradient, which still decays their moments.
pub fn adam_step(
    params: &mut Parameters,
    grads: &BTreeMap<String, Tensor>,
    state: &mut AdamState,
    cfg: &TrainConfig,
) {
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (name, tensor) in params.tensors.iter_mut() {
        let m = state
            .m
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(tensor.rows, tensor.cols));
        let v = state
            .v
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(tensor.rows, tensor.cols));
        let g = grads.get(name);
        for i in 0..tensor.data.len() {
            let gi = g.map_or(0.0, |t| t.data[i]);
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m.data[i] / bc1;
            let v_hat = v.data[i] / bc2;
            tensor.data[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
}
