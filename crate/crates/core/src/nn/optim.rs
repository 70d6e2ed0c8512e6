//! SGD and Adam parameter updates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::params::{GradientSet, ParameterSet};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer {other}"))),
        }
    }
}

/// Optimizer state owned by a client model.
///
/// Adam keeps first/second moments per layer plus two counters: a global
/// `step` (increments once per update, never reset) and a per-layer step used
/// for bias correction. When the protocol injects fresh parameters into a
/// layer, that layer's moments and bias-correction counter restart together;
/// stale moments against injected parameters would mis-scale the first
/// updates.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: ParameterSet,
    v: ParameterSet,
    layer_step: BTreeMap<String, u64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &ParameterSet) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (ParameterSet::new(), ParameterSet::new()),
            OptimizerKind::Adam => (params.zeros_like(), params.zeros_like()),
        };
        OptimizerState {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m,
            v,
            layer_step: BTreeMap::new(),
        }
    }

    /// Restart the named layers' moments and bias-correction counters.
    pub fn reset_layers<'a>(&mut self, names: impl IntoIterator<Item = &'a String>) {
        for name in names {
            for moments in [&mut self.m, &mut self.v] {
                if let Some(p) = moments.get_mut(name) {
                    p.weights = Tensor::zeros(p.weights.shape());
                    p.bias = Tensor::zeros(p.bias.shape());
                }
            }
            self.layer_step.remove(name);
        }
    }
}

/// `w' = w - eta * g`.
pub fn sgd_step(params: &mut ParameterSet, grads: &GradientSet, eta: f64) -> Result<()> {
    if eta <= 0.0 {
        return Err(Error::Config("learning rate must be > 0".into()));
    }
    params.add_scaled(grads, -eta)
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    data: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    eta: f64,
) {
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    for i in 0..data.len() {
        let g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        data[i] -= eta * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Bias-corrected Adam update with the state's beta1/beta2/epsilon.
pub fn adam_step(
    params: &mut ParameterSet,
    grads: &GradientSet,
    state: &mut OptimizerState,
    eta: f64,
) -> Result<()> {
    if eta <= 0.0 {
        return Err(Error::Config("learning rate must be > 0".into()));
    }
    if state.kind != OptimizerKind::Adam {
        return Err(Error::Config(
            "adam_step on a non-Adam optimizer state".into(),
        ));
    }
    state.step += 1;
    let (beta1, beta2, eps) = (state.beta1, state.beta2, state.epsilon);
    let m_set = &mut state.m;
    let v_set = &mut state.v;
    let layer_step = &mut state.layer_step;
    for (name, p) in params.iter_mut() {
        let g = grads.get(name).ok_or_else(|| Error::SharedShapeMismatch {
            layer: name.clone(),
        })?;
        if g.weights.shape() != p.weights.shape() || g.bias.shape() != p.bias.shape() {
            return Err(Error::SharedShapeMismatch {
                layer: name.clone(),
            });
        }
        let t = {
            let entry = layer_step.entry(name.clone()).or_insert(0);
            *entry += 1;
            *entry
        };
        let m = m_set.get_mut(name).expect("moments mirror params");
        let v = v_set.get_mut(name).expect("moments mirror params");
        adam_update(
            p.weights.data_mut(),
            g.weights.data(),
            m.weights.data_mut(),
            v.weights.data_mut(),
            t,
            beta1,
            beta2,
            eps,
            eta,
        );
        adam_update(
            p.bias.data_mut(),
            g.bias.data(),
            m.bias.data_mut(),
            v.bias.data_mut(),
            t,
            beta1,
            beta2,
            eps,
            eta,
        );
    }
    Ok(())
}

/// Single step with the state's optimizer kind.
pub fn optimizer_step(
    params: &mut ParameterSet,
    grads: &GradientSet,
    state: &mut OptimizerState,
    eta: f64,
) -> Result<()> {
    match state.kind {
        OptimizerKind::Sgd => {
            state.step += 1;
            sgd_step(params, grads, eta)
        }
        OptimizerKind::Adam => adam_step(params, grads, state, eta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::LayerParams;
    use approx::assert_relative_eq;

    fn one_layer(values: &[f64]) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert(
            "w",
            LayerParams {
                weights: Tensor::from_vec(&[values.len()], values.to_vec()).unwrap(),
                bias: Tensor::zeros(&[1]),
            },
        );
        p
    }

    #[test]
    fn sgd_arithmetic() {
        let mut params = one_layer(&[2.0, 4.0]);
        let grads = one_layer(&[1.0, 1.0]);
        sgd_step(&mut params, &grads, 0.5).unwrap();
        assert_eq!(params.get("w").unwrap().weights.data(), &[1.5, 3.5]);
    }

    #[test]
    fn adam_first_step_moves_by_eta_sign_of_gradient() {
        let mut params = one_layer(&[1.0, -2.0]);
        let grads = one_layer(&[0.3, -0.7]);
        let mut state = OptimizerState::new(OptimizerKind::Adam, &params);
        let eta = 0.01;
        adam_step(&mut params, &grads, &mut state, eta).unwrap();
        // At t = 1 the bias-corrected update is eta * g / (|g| + eps'),
        // i.e. eta * sign(g) up to epsilon.
        let w = params.get("w").unwrap().weights.data();
        assert_relative_eq!(w[0], 1.0 - eta, max_relative = 1e-6);
        assert_relative_eq!(w[1], -2.0 + eta, max_relative = 1e-6);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_two_steps_match_scalar_reimplementation() {
        // Quadratic 0.5 w^2 from w0 = 1, gradient g = w.
        let mut params = one_layer(&[1.0]);
        let mut state = OptimizerState::new(OptimizerKind::Adam, &params);
        let eta = 0.1;

        // independent scalar Adam
        let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
        let mut w = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=2u32 {
            let g = w;
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            let m_hat = m / (1.0 - beta1.powi(t as i32));
            let v_hat = v / (1.0 - beta2.powi(t as i32));
            w -= eta * m_hat / (v_hat.sqrt() + eps);
        }

        for _ in 0..2 {
            let g = params.get("w").unwrap().weights.data()[0];
            let grads = one_layer(&[g]);
            adam_step(&mut params, &grads, &mut state, eta).unwrap();
        }
        assert_eq!(params.get("w").unwrap().weights.data()[0], w);
    }

    #[test]
    fn adam_with_zero_gradients_leaves_parameters_unchanged() {
        let mut params = one_layer(&[3.0, -1.5, 0.25]);
        let before = params.clone();
        let grads = params.zeros_like();
        let mut state = OptimizerState::new(OptimizerKind::Adam, &params);
        for _ in 0..5 {
            adam_step(&mut params, &grads, &mut state, 0.01).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.step, 5);
    }

    #[test]
    fn reset_layers_restarts_bias_correction() {
        let mut params = one_layer(&[1.0]);
        let grads = one_layer(&[0.5]);
        let mut state = OptimizerState::new(OptimizerKind::Adam, &params);
        for _ in 0..10 {
            adam_step(&mut params, &grads, &mut state, 0.01).unwrap();
        }
        state.reset_layers(["w".to_string()].iter());

        // After a reset, the next update must be scaled like a fresh t = 1
        // step (about eta in magnitude), not a stale-counter step.
        let w_before = params.get("w").unwrap().weights.data()[0];
        adam_step(&mut params, &grads, &mut state, 0.01).unwrap();
        let delta = (params.get("w").unwrap().weights.data()[0] - w_before).abs();
        assert_relative_eq!(delta, 0.01, max_relative = 1e-6);
        assert_eq!(state.step, 11, "global step counter is never reset");
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut params = one_layer(&[1.0, 2.0]);
        let grads = one_layer(&[1.0]);
        assert!(sgd_step(&mut params, &grads, 0.1).is_err());
    }
}
