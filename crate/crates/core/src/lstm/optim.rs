use serde::{Deserialize, Serialize};

use super::params::{Gradients, ModelParams};
use super::LstmError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    /// Plain gradient descent, for ablations.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments plus the number of steps taken.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<F> {
    pub kind: OptimizerKind,
    pub adam: AdamConfig,
    pub m: ModelParams<F>,
    pub v: ModelParams<F>,
    pub step: u64,
}

impl<F: Scalar> OptimizerState<F> {
    pub fn new(kind: OptimizerKind, params: &ModelParams<F>) -> Self {
        Self {
            kind,
            adam: AdamConfig::default(),
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// Applies one update in place and advances `state.step`.
pub fn optimizer_step<F: Scalar>(
    params: &mut ModelParams<F>,
    grads: &Gradients<F>,
    state: &mut OptimizerState<F>,
    lr: F,
) -> Result<(), LstmError> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) || !params.same_shape(&state.v) {
        return Err(LstmError::ShapeMismatch("optimizer step on mismatched tensors".into()));
    }
    state.step += 1;
    match state.kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                for (pv, gv) in p.data.iter_mut().zip(g.data) {
                    *pv = *pv - lr * *gv;
                }
            }
        }
        OptimizerKind::Adam => {
            let AdamConfig { beta1, beta2, epsilon } = state.adam;
            let t = state.step as i32;
            let (b1, b2, eps) = (F::of(beta1), F::of(beta2), F::of(epsilon));
            let one = F::one();
            let c1 = one - F::of(beta1.powi(t));
            let c2 = one - F::of(beta2.powi(t));
            let ms = state.m.tensors_mut();
            let vs = state.v.tensors_mut();
            for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
                for (((pv, gv), mv), vv) in p.data.iter_mut().zip(g.data).zip(m.data.iter_mut()).zip(v.data.iter_mut()) {
                    *mv = b1 * *mv + (one - b1) * *gv;
                    *vv = b2 * *vv + (one - b2) * *gv * *gv;
                    let m_hat = *mv / c1;
                    let v_hat = *vv / c2;
                    *pv = *pv - lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::params::{init_params, Dims};

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = init_params::<f64>(1, Dims::new(3, 4, 2)).unwrap();
        let before = p.clone();
        let g = p.zeros_like();
        let mut st = OptimizerState::new(OptimizerKind::Adam, &p);
        for _ in 0..3 {
            optimizer_step(&mut p, &g, &mut st, 0.0025).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.step, 3);
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = init_params::<f64>(1, Dims::new(3, 2, 2)).unwrap();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.fc_out.bias[0] = 1.0;
        let mut st = OptimizerState::new(OptimizerKind::Adam, &p);
        optimizer_step(&mut p, &g, &mut st, 0.0025).unwrap();
        // m̂ = v̂ = 1 after bias correction, so the step is lr / (1 + ε)
        let moved = before.fc_out.bias[0] - p.fc_out.bias[0];
        assert!((moved - 0.0025 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(p.fc_out.bias[1], before.fc_out.bias[1]);
    }

    #[test]
    fn sgd_step() {
        let mut p = init_params::<f64>(2, Dims::new(3, 2, 2)).unwrap();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.fc_in.weight.fill(2.0);
        let mut st = OptimizerState::new(OptimizerKind::Sgd, &p);
        optimizer_step(&mut p, &g, &mut st, 0.5).unwrap();
        for (a, b) in p.fc_in.weight.iter().zip(before.fc_in.weight.iter()) {
            assert_eq!(*a, b - 1.0);
        }
    }

    #[test]
    fn mismatched_shapes() {
        let mut p = init_params::<f64>(1, Dims::new(3, 2, 2)).unwrap();
        let g = init_params::<f64>(1, Dims::new(3, 3, 2)).unwrap();
        let mut st = OptimizerState::new(OptimizerKind::Adam, &p);
        assert!(matches!(optimizer_step(&mut p, &g, &mut st, 0.1), Err(LstmError::ShapeMismatch(_))));
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut p = init_params::<f32>(4, Dims::new(3, 3, 2)).unwrap();
            let mut st = OptimizerState::new(OptimizerKind::Adam, &p);
            let mut g = p.clone();
            g.scale(0.3);
            for _ in 0..5 {
                optimizer_step(&mut p, &g, &mut st, 0.0025).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
