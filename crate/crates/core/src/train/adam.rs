use super::bptt::Gradients;
use super::trainer::TrainConfig;
use crate::linalg::Matrix;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one pair per parameter matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[&Matrix]) -> Self {
        let zeros = || params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. The L2 penalty is folded into the
/// gradient (`g + l2·W`) before the moments are updated. Matrices named in
/// `config.frozen` are left untouched.
pub fn adam_step(state: &mut AdamState, params: &mut [&mut Matrix], grads: &Gradients, config: &TrainConfig) {
    assert_eq!(params.len(), grads.mats.len(), "adam: parameter count");
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - BETA1.powi(t);
    let bias2 = 1.0 - BETA2.powi(t);
    let lr = config.learning_rate;
    for (i, w) in params.iter_mut().enumerate() {
        if config.frozen.iter().any(|f| f == &grads.names[i]) {
            continue;
        }
        let g = &grads.mats[i];
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, wj) in w.data_mut().iter_mut().enumerate() {
            let gj = g.data()[j] + config.l2 * *wj;
            m[j] = BETA1 * m[j] + (1.0 - BETA1) * gj;
            v[j] = BETA2 * v[j] + (1.0 - BETA2) * gj * gj;
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            *wj -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
}
