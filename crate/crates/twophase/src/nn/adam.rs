//! Bias-corrected Adam over named parameter tensors.

use std::collections::BTreeMap;

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Named parameter set. BTreeMap keeps iteration (and therefore update and
/// serialization order) sorted by name.
pub type NamedTensors<E> = BTreeMap<String, Tensor<E>>;

/// Gradients keyed like the parameters they belong to.
pub type NamedGrads<E> = BTreeMap<String, Vec<E>>;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }
}

/// Optimizer state: step counter plus first/second moment tensors, allocated
/// lazily per parameter and always shape-congruent with it.
#[derive(Debug, Clone)]
pub struct AdamState<E: Scalar> {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<String, (Vec<E>, Vec<E>)>,
}

impl<E: Scalar> AdamState<E> {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update (Kingma & Ba, algorithm 1) over every trainable parameter
/// that has a gradient. Parameters with `requires_grad == false` are never
/// touched, and neither are their moments.
pub fn adam_step<E: Scalar>(
    params: &mut NamedTensors<E>,
    grads: &NamedGrads<E>,
    state: &mut AdamState<E>,
) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let beta1 = E::of_f64(state.config.beta1);
    let beta2 = E::of_f64(state.config.beta2);
    let eps = E::of_f64(state.config.epsilon);
    let lr = E::of_f64(state.config.learning_rate);
    let bias1 = E::one() - beta1.powi(t);
    let bias2 = E::one() - beta2.powi(t);

    for (name, param) in params.iter_mut() {
        if !param.requires_grad() {
            continue;
        }
        let Some(grad) = grads.get(name) else {
            continue;
        };
        if grad.len() != param.numel() {
            return Err(Error::shape(
                "adam_step",
                format!("gradient of {} elements for `{name}`", param.numel()),
                format!("{} elements", grad.len()),
            ));
        }
        if let Some(pos) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::numeric(
                "adam_step",
                format!(
                    "non-finite gradient for parameter `{name}` at element {pos}: {:?}",
                    grad[pos]
                ),
            ));
        }
        let (m, v) = state
            .moments
            .entry(name.clone())
            .or_insert_with(|| (vec![E::zero(); grad.len()], vec![E::zero(); grad.len()]));
        for ((p, &g), (mi, vi)) in param
            .data_mut()
            .iter_mut()
            .zip(grad.iter())
            .zip(m.iter_mut().zip(v.iter_mut()))
        {
            *mi = beta1 * *mi + (E::one() - beta1) * g;
            *vi = beta2 * *vi + (E::one() - beta2) * g * g;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(value: f64) -> NamedTensors<f64> {
        let mut params = NamedTensors::new();
        params.insert(
            "w".to_string(),
            Tensor::new(vec![1], vec![value]).unwrap().with_grad(),
        );
        params
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut params = single_param(0.37);
        let mut state = AdamState::new(AdamConfig::default());
        let mut grads = NamedGrads::new();
        grads.insert("w".to_string(), vec![0.0]);
        for _ in 0..25 {
            adam_step(&mut params, &grads, &mut state).unwrap();
        }
        assert_eq!(params["w"].data()[0], 0.37);
        assert_eq!(state.step_count(), 25);
    }

    #[test]
    fn first_update_with_unit_gradient_is_minus_lr() {
        // bias correction makes m_hat/sqrt(v_hat) = 1 at step 1, up to epsilon
        let mut params = single_param(0.0);
        let mut state = AdamState::new(AdamConfig::default());
        let mut grads = NamedGrads::new();
        grads.insert("w".to_string(), vec![1.0]);
        adam_step(&mut params, &grads, &mut state).unwrap();
        let got = params["w"].data()[0];
        assert!((got - (-1e-3)).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn ten_step_trajectory_matches_handrolled_recurrence() {
        // independent reimplementation of the standard recurrence
        let (lr, b1, b2, eps) = (1e-3, 0.9, 0.999, 1e-8);
        let mut w_ref = 0.5f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let gradient_at = |w: f64, step: usize| 2.0 * w + 0.1 * (step as f64);
        let mut reference = Vec::new();
        for t in 1..=10 {
            let g = gradient_at(w_ref, t);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t as i32));
            let v_hat = v / (1.0 - b2.powi(t as i32));
            w_ref -= lr * m_hat / (v_hat.sqrt() + eps);
            reference.push(w_ref);
        }

        let mut params = single_param(0.5);
        let mut state = AdamState::new(AdamConfig::default());
        for t in 1..=10 {
            let w = params["w"].data()[0];
            let mut grads = NamedGrads::new();
            grads.insert("w".to_string(), vec![gradient_at(w, t)]);
            adam_step(&mut params, &grads, &mut state).unwrap();
            assert_eq!(
                params["w"].data()[0],
                reference[t - 1],
                "trajectory diverged at step {t}"
            );
        }
    }

    #[test]
    fn frozen_parameters_are_never_touched() {
        let mut params = NamedTensors::new();
        params.insert(
            "frozen".to_string(),
            Tensor::new(vec![1], vec![1.0f64]).unwrap(),
        );
        let mut grads = NamedGrads::new();
        grads.insert("frozen".to_string(), vec![5.0]);
        let mut state = AdamState::new(AdamConfig::default());
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params["frozen"].data()[0], 1.0);
    }

    #[test]
    fn non_finite_gradient_error_names_the_parameter() {
        let mut params = single_param(0.0);
        let mut grads = NamedGrads::new();
        grads.insert("w".to_string(), vec![f64::NAN]);
        let mut state = AdamState::new(AdamConfig::default());
        let err = adam_step(&mut params, &grads, &mut state).unwrap_err();
        assert!(err.to_string().contains("`w`"));
        assert_eq!(err.exit_code(), 2);
    }
}
