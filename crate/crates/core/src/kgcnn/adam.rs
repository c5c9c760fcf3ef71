//! Adam with bias correction.

use super::model::{ModelConfig, Params};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Params,
    pub v: Params,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &Params) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One Adam update of a flat tensor. `step` is the 1-based step count.
pub fn adam_update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], step: u64, cfg: &ModelConfig) {
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        param[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
}

pub fn adam_step(params: &mut Params, grads: &Params, state: &mut OptimizerState, cfg: &ModelConfig) {
    state.step += 1;
    let step = state.step;
    let OptimizerState { m, v, .. } = state;
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(m.tensors_mut())
        .zip(v.tensors_mut())
    {
        adam_update(p, g, m, v, step, cfg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let cfg = ModelConfig::default();
        let mut p = vec![0.3, -1.2];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_update(&mut p, &[0.0, 0.0], &mut m, &mut v, 1, &cfg);
        assert_eq!(p, vec![0.3, -1.2]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = ModelConfig::default();
        let mut p = vec![0.0];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        adam_update(&mut p, &[1.0], &mut m, &mut v, 1, &cfg);
        // m̂ = v̂ = 1 after bias correction, so the step is lr / (1 + eps).
        let expected = cfg.lr / (1.0 + cfg.adam_eps);
        assert!((p[0] + expected).abs() < 1e-6);
        assert!((p[0].abs() - cfg.lr).abs() < 1e-6);
    }

    #[test]
    fn moment_shapes_follow_params() {
        let cfg = ModelConfig {
            filters: 2,
            kernel: 2,
            hidden: 3,
            ..ModelConfig::default()
        };
        let mut params = Params::zeros(&cfg, 4, 5);
        let grads = params.zeros_like();
        let mut state = OptimizerState::new(&params);
        for _ in 0..3 {
            adam_step(&mut params, &grads, &mut state, &cfg);
        }
        assert_eq!(state.step, 3);
        for (a, b) in state.m.tensors().iter().zip(params.tensors()) {
            assert_eq!(a.len(), b.len());
        }
    }
}
