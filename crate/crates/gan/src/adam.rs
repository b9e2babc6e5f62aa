use nn::{Scalar, Tensor};

use crate::params::ParamSet;

/// Adam with the usual bias correction; moments are kept in f64 regardless
/// of the training precision so resume stays exact.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new<S: Scalar>(params: &ParamSet<S>, beta1: f64, beta2: f64) -> Self {
        Self {
            m: params.tensors.iter().map(|t| vec![0.0; t.numel()]).collect(),
            v: params.tensors.iter().map(|t| vec![0.0; t.numel()]).collect(),
            t: 0,
            beta1,
            beta2,
            epsilon: 1e-8,
        }
    }

    pub fn step<S: Scalar>(&mut self, params: &mut ParamSet<S>, grads: &[Tensor<S>], lr: f64) {
        assert_eq!(params.tensors.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (p, (grad, (m, v))) in params
            .tensors
            .iter_mut()
            .zip(grads.iter().zip(self.m.iter_mut().zip(self.v.iter_mut())))
        {
            for i in 0..p.numel() {
                let gi = grad.data[i].to_f64();
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                let delta = lr * mhat / (vhat.sqrt() + self.epsilon);
                p.data[i] = S::from_f64(p.data[i].to_f64() - delta);
            }
        }
    }
}
