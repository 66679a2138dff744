//! Adam optimizer with bias correction and a stepwise learning-rate schedule.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct AdamState {
    /// Completed update count.
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// (step threshold, learning rate); selected by largest threshold <= the
    /// pre-update step count. Thresholds strictly increase, rates strictly
    /// decrease, first threshold is 0.
    pub schedule: Vec<(u64, f64)>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

impl AdamState {
    pub fn new(
        param_sizes: &[usize],
        schedule: Vec<(u64, f64)>,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Result<AdamState> {
        if schedule.is_empty() || schedule[0].0 != 0 {
            return Err(Error::Config(
                "lr schedule must be non-empty and start at step threshold 0".into(),
            ));
        }
        for w in schedule.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config(format!(
                    "lr schedule thresholds must strictly increase: {} then {}",
                    w[0].0, w[1].0
                )));
            }
            if w[1].1 >= w[0].1 {
                return Err(Error::Config(format!(
                    "lr schedule rates must strictly decrease: {} then {}",
                    w[0].1, w[1].1
                )));
            }
        }
        for (i, &(_, r)) in schedule.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Config(format!("lr schedule entry {i} has non-positive rate {r}")));
            }
        }
        Ok(AdamState {
            step: 0,
            beta1,
            beta2,
            epsilon,
            schedule,
            m: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn with_default_moments(param_sizes: &[usize], schedule: Vec<(u64, f64)>) -> Result<AdamState> {
        AdamState::new(param_sizes, schedule, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON)
    }

    /// Learning rate in effect for the next update.
    pub fn learning_rate(&self) -> f64 {
        let mut lr = self.schedule[0].1;
        for &(threshold, rate) in &self.schedule {
            if self.step >= threshold {
                lr = rate;
            }
        }
        lr
    }
}

/// One Adam update over the full parameter list. `names` label parameters in
/// divergence errors. Deterministic: identical inputs give bit-identical
/// outputs.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [Tensor],
    grads: &[Vec<f64>],
    names: &[String],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::dimension(
            "adam_step",
            format!(
                "{} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.numel() != g.len() {
            return Err(Error::dimension(
                "adam_step",
                format!(
                    "param {} has {} elements, grad has {}",
                    names.get(i).map(String::as_str).unwrap_or("?"),
                    p.numel(),
                    g.len()
                ),
            ));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite gradient for parameter {} at step {}",
                names.get(i).map(String::as_str).unwrap_or("?"),
                state.step
            )));
        }
    }

    let lr = state.learning_rate();
    let t = (state.step + 1) as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let data = p.data_mut();
        for j in 0..g.len() {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            data[j] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    state.step += 1;
    Ok(())
}
