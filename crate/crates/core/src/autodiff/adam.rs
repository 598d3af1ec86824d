use serde::{Deserialize, Serialize};

use crate::autodiff::param::Param;
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. `params` and `grads` must be in a stable order
    /// across calls. Gradients are validated before anything is written, so
    /// a rejected step leaves both parameters and state untouched.
    pub fn step(&mut self, params: &mut [&mut Param], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::InvalidArgument(format!(
                "adam: {} params but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.lr <= 0.0 {
            return Err(Error::InvalidArgument(format!("adam: lr must be positive, got {}", self.lr)));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.value.shape() != g.shape() {
                return Err(Error::shape("adam", p.value.shape(), g.shape()));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(p.name.clone()));
            }
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
            self.second = self.first.clone();
        } else if self.first.len() != params.len() {
            return Err(Error::InvalidArgument("adam: parameter list changed between steps".into()));
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let it = p
                .value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((w, &gi), (mi, vi)) in it {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> Param {
        Param::new("w", Tensor::vector(vec![v]))
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = scalar_param(0.0);
        let mut adam = Adam::new(0.01);
        adam.step(&mut [&mut p], &[Tensor::vector(vec![0.5])]).unwrap();
        let expected = -0.01 * 0.5 / (0.5 + 1e-8);
        assert!((p.value.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_but_counts_step() {
        let mut p = scalar_param(1.25);
        let mut adam = Adam::new(0.1);
        adam.step(&mut [&mut p], &[Tensor::vector(vec![0.0])]).unwrap();
        assert_eq!(p.value.data()[0], 1.25);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn two_steps_match_hand_unrolled_recurrence() {
        // Hand computation, constant g = 0.3, lr = 0.05:
        // t=1: m=0.03, v=0.00009, mhat=0.3, vhat=0.09 -> dw = -0.05*0.3/(0.3+eps)
        // t=2: m=0.057, v=0.00017991, mhat=0.057/0.19=0.3, vhat=0.00017991/0.001999=0.09
        let (g, lr, eps) = (0.3_f64, 0.05_f64, 1e-8_f64);
        let m1 = 0.1 * g;
        let v1 = 0.001 * g * g;
        let w1 = 2.0 - lr * (m1 / 0.1) / ((v1 / 0.001).sqrt() + eps);
        let m2 = 0.9 * m1 + 0.1 * g;
        let v2 = 0.999 * v1 + 0.001 * g * g;
        let w2 = w1 - lr * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.998001)).sqrt() + eps);

        let mut p = scalar_param(2.0);
        let mut adam = Adam::new(lr);
        adam.step(&mut [&mut p], &[Tensor::vector(vec![g])]).unwrap();
        assert!((p.value.data()[0] - w1).abs() < 1e-14);
        adam.step(&mut [&mut p], &[Tensor::vector(vec![g])]).unwrap();
        assert!((p.value.data()[0] - w2).abs() < 1e-14);
        assert!((w2 - (2.0 - 2.0 * lr)).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_aborts_with_name() {
        let mut p = Param::new("critic.head.weight", Tensor::vector(vec![1.0]));
        let mut adam = Adam::new(0.1);
        let err = adam
            .step(&mut [&mut p], &[Tensor::vector(vec![f64::NAN])])
            .unwrap_err();
        assert!(err.to_string().contains("critic.head.weight"));
        assert_eq!(p.value.data()[0], 1.0);
        assert_eq!(adam.steps_taken(), 0);
    }
}
