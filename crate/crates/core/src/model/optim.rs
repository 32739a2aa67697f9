//! Adaptive-moment gradient descent.

use crate::model::tensor::Tensor;

pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(learning_rate: f64, block_lens: &[usize]) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            moments: block_lens
                .iter()
                .map(|&len| (vec![0.0; len], vec![0.0; len]))
                .collect(),
        }
    }

    /// Apply one update. `params` and `grads` must be the same blocks in
    /// the same order as at construction.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) {
        assert_eq!(params.len(), self.moments.len());
        assert_eq!(grads.len(), self.moments.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params.iter_mut().zip(grads).zip(&mut self.moments) {
            let data = param.data_mut();
            let gdata = grad.data();
            assert_eq!(data.len(), m.len());
            for i in 0..data.len() {
                let g = gdata[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}
