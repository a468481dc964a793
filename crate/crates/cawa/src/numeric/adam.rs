//! ADAM with bias correction.

use super::scalar::Scalar;
use super::tensor::{Parameter, Tensor};

#[derive(Clone, Debug)]
pub struct AdamState<S: Scalar> {
    pub learning_rate: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
    /// Step counter, incremented once per `step` call.
    pub t: u64,
    /// (first moment, second moment) per parameter, in visiting order.
    pub moments: Vec<(Tensor<S>, Tensor<S>)>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(learning_rate: S) -> Self {
        AdamState {
            learning_rate,
            beta1: S::from_f64(0.9),
            beta2: S::from_f64(0.999),
            epsilon: S::from_f64(1e-8),
            t: 0,
            moments: Vec::new(),
        }
    }

    /// One update over all parameters, then zeroes their gradients.
    /// Parameter order must stay fixed across calls.
    pub fn step(&mut self, params: &mut [&mut Parameter<S>]) {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| (Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape())))
                .collect();
        }
        assert_eq!(self.moments.len(), params.len(), "parameter count changed");
        self.t += 1;
        let t = S::from_f64(self.t as f64);
        let bc1 = S::one() - self.beta1.powf(t);
        let bc2 = S::one() - self.beta2.powf(t);
        for (p, (m, v)) in params.iter_mut().zip(&mut self.moments) {
            for ((x, g), (m, v)) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(p.grad.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut()))
            {
                *m = self.beta1 * *m + (S::one() - self.beta1) * *g;
                *v = self.beta2 * *v + (S::one() - self.beta2) * *g * *g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *x = *x - self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            p.zero_grad();
        }
    }
}
