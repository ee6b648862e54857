//! Adam optimizer state and update rule.

use thiserror::Error;

use super::tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum AdamError {
    #[error("parameter {index} has shape {param:?} but gradient has shape {grad:?}")]
    ShapeMismatch {
        index: usize,
        param: Vec<usize>,
        grad: Vec<usize>,
    },
    #[error("expected {expected} gradients, got {got}")]
    CountMismatch { expected: usize, got: usize },
}

/// First/second-moment accumulators for one parameter set.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    /// Accumulators start at zero with the given parameter shapes.
    pub fn new(lr: f64, shapes: &[Vec<usize>]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    pub fn for_params(lr: f64, params: &[Tensor]) -> Self {
        let shapes: Vec<Vec<usize>> = params.iter().map(|t| t.shape().to_vec()).collect();
        AdamState::new(lr, &shapes)
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }

    /// One bias-corrected Adam descent step, in place.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), AdamError> {
        if grads.len() != self.m.len() || params.len() != self.m.len() {
            return Err(AdamError::CountMismatch {
                expected: self.m.len(),
                got: grads.len(),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(AdamError::ShapeMismatch {
                    index: i,
                    param: p.shape().to_vec(),
                    grad: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = p.data_mut();
            for (((pv, &gv), mv), vv) in pd
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                *pv -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = vec![Tensor::vector(vec![0.5, -0.25])];
        let grads = vec![Tensor::zeros(&[2])];
        let mut adam = AdamState::for_params(0.002, &params);
        // Seed some moment history, then feed zeros: moments decay toward 0.
        adam.step(&mut params, &[Tensor::vector(vec![1.0, -1.0])])
            .unwrap();
        let before = params.clone();
        let m_before = adam.first_moments()[0].data()[0].abs();
        for _ in 0..50 {
            adam.step(&mut params, &grads).unwrap();
        }
        let m_after = adam.first_moments()[0].data()[0].abs();
        assert!(m_after < m_before * 1e-2);
        // Parameters drift only while the decaying first moment is nonzero,
        // and not at all once fed zero gradients from a zero state.
        let mut fresh = vec![Tensor::vector(vec![0.5, -0.25])];
        let mut fresh_adam = AdamState::for_params(0.002, &fresh);
        fresh_adam.step(&mut fresh, &grads).unwrap();
        assert_eq!(fresh[0].data(), &[0.5, -0.25]);
        drop(before);
    }

    #[test]
    fn first_step_update_is_lr_times_sign() {
        // After bias correction, step 1 gives update = -lr * g/(|g| + eps'),
        // which is -lr * sign(g) up to eps.
        let mut params = vec![Tensor::vector(vec![1.0, 1.0])];
        let grads = vec![Tensor::vector(vec![0.3, -4.0])];
        let mut adam = AdamState::for_params(0.002, &params);
        adam.step(&mut params, &grads).unwrap();
        assert!((params[0].data()[0] - (1.0 - 0.002)).abs() < 1e-6);
        assert!((params[0].data()[1] - (1.0 + 0.002)).abs() < 1e-6);
    }

    #[test]
    fn constant_gradient_update_magnitude_approaches_lr() {
        // With a constant gradient the moment ratio m/sqrt(v) -> 1, so the
        // per-step movement approaches lr. 1000-step simulation.
        let g = 0.37;
        let mut params = vec![Tensor::vector(vec![0.0])];
        let grads = vec![Tensor::vector(vec![g])];
        let mut adam = AdamState::for_params(0.002, &params);
        let mut prev = params[0].data()[0];
        let mut last_delta = 0.0;
        for _ in 0..1000 {
            adam.step(&mut params, &grads).unwrap();
            last_delta = params[0].data()[0] - prev;
            prev = params[0].data()[0];
        }
        assert!(
            (last_delta.abs() - 0.002).abs() < 1e-4,
            "per-step movement {last_delta}"
        );
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut params = vec![Tensor::vector(vec![1.0, 2.0])];
        let grads = vec![Tensor::vector(vec![1.0])];
        let mut adam = AdamState::for_params(0.002, &params);
        assert!(matches!(
            adam.step(&mut params, &grads),
            Err(AdamError::ShapeMismatch { .. })
        ));
    }
}
