//! Adaptive-moment gradient descent over flat parameter vectors.

/// Adam with the usual defaults (betas 0.9/0.999, epsilon 1e-8) and bias
/// correction. Models keep their parameters as flat `Vec<f64>`, which makes
/// the optimizer, serialization and finite-difference checks share one code
/// path.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        // f(x) = (x - 3)^2
        let mut params = vec![0.0];
        let mut adam = Adam::new(0.05, 1);
        for _ in 0..2000 {
            let grad = vec![2.0 * (params[0] - 3.0)];
            adam.step(&mut params, &grad);
        }
        assert!((params[0] - 3.0).abs() < 1e-3, "got {}", params[0]);
    }
}
