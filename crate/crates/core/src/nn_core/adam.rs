//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::nn_core::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates per parameter tensor, keyed by position in
/// the parameter list. Moments are allocated lazily on the first step.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

/// One Adam update over a parameter list paired with a gradient list.
///
/// Rejects the step (leaving parameters and state untouched) if any gradient
/// is non-finite; the training loop decides whether to skip the batch.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[&Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape(format!(
            "adam_step: {} parameter tensors vs {} gradient tensors",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "adam_step: parameter shape {:?} vs gradient shape {:?}",
                p.shape(),
                g.shape()
            )));
        }
        if !g.all_finite() {
            return Err(Error::Numeric("non-finite gradient; step rejected".into()));
        }
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        state.v = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
    }

    state.step += 1;
    let t = state.step;
    let b1 = T::from_f64(state.config.beta1);
    let b2 = T::from_f64(state.config.beta2);
    let one = T::one();
    // Bias-corrected step size.
    let corr1 = 1.0 - state.config.beta1.powi(t as i32);
    let corr2 = 1.0 - state.config.beta2.powi(t as i32);
    let lr_t = T::from_f64(state.config.lr * corr2.sqrt() / corr1);
    let eps = T::from_f64(state.config.epsilon);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let pd = p.data_mut();
        for i in 0..pd.len() {
            let gi = g.data()[i];
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            pd[i] = pd[i] - lr_t * m[i] / (v[i].sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::from_vec(&[3], vec![1.0f64, -2.0, 0.5]).unwrap();
        let g: Tensor<f64> = Tensor::zeros(&[3]);
        let before = p.data().to_vec();
        let mut state = AdamState::new(AdamConfig::default());
        adam_step(&mut [&mut p], &[&g], &mut state).unwrap();
        assert_eq!(p.data(), before.as_slice());
    }

    #[test]
    fn single_step_magnitude() {
        // From m = v = 0 with g = 1 and lr = 1e-3 the first update is
        // −lr·g/(|g| + ε·…) ≈ −0.001.
        let mut p = Tensor::from_vec(&[1], vec![0.0f64]).unwrap();
        let g = Tensor::from_vec(&[1], vec![1.0f64]).unwrap();
        let mut state = AdamState::new(AdamConfig::default());
        adam_step(&mut [&mut p], &[&g], &mut state).unwrap();
        assert!((p.data()[0] + 0.001).abs() < 1e-9, "step was {}", p.data()[0]);
    }

    #[test]
    fn constant_gradient_approaches_sign_step() {
        // With a constant gradient Adam's update tends to lr·sign(g).
        let mut p = Tensor::from_vec(&[1], vec![0.0f64]).unwrap();
        let g = Tensor::from_vec(&[1], vec![-0.37f64]).unwrap();
        let mut state = AdamState::new(AdamConfig::default());
        let mut prev = 0.0;
        let mut last_step = 0.0;
        for _ in 0..500 {
            adam_step(&mut [&mut p], &[&g], &mut state).unwrap();
            last_step = p.data()[0] - prev;
            prev = p.data()[0];
        }
        assert!((last_step - 0.001).abs() < 1e-4, "limit step was {last_step}");
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = Tensor::from_vec(&[1], vec![1.0f64]).unwrap();
        let g = Tensor::from_vec(&[1], vec![f64::NAN]).unwrap();
        let mut state = AdamState::new(AdamConfig::default());
        let before = p.data().to_vec();
        assert!(matches!(
            adam_step(&mut [&mut p], &[&g], &mut state),
            Err(Error::Numeric(_))
        ));
        assert_eq!(p.data(), before.as_slice());
        assert_eq!(state.step, 0);
    }
}
