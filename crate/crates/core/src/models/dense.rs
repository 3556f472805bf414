//! Fully connected classifier with a two-logit softmax head.
//!
//! The two-logit head with softmax is equivalent to a single sigmoid unit
//! under binary cross-entropy; the probability of the event class is
//! reported.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::Result;
use crate::rng;

/// MLP dimensions: input, hidden layers, and the fixed 2-logit output.
#[derive(Debug, Clone)]
pub struct DenseNet {
    /// `[input, hidden..., 2]`
    pub dims: Vec<usize>,
}

impl DenseNet {
    pub fn new(input: usize, hidden: &[usize]) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(2);
        DenseNet { dims }
    }

    pub fn n_params(&self) -> usize {
        self.dims
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    /// Glorot-uniform initialization.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng::stream(seed, &[0xde5e]);
        let mut params = Vec::with_capacity(self.n_params());
        for w in self.dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_out * fan_in {
                params.push(rng.gen_range(-scale..scale));
            }
            for _ in 0..fan_out {
                params.push(0.0);
            }
        }
        params
    }

    fn unpack<'a>(&self, params: &'a [f64]) -> Vec<(Array2<f64>, Array1<f64>)> {
        let mut layers = Vec::new();
        let mut offset = 0;
        for window in self.dims.windows(2) {
            let (inp, out) = (window[0], window[1]);
            let w = Array2::from_shape_vec((out, inp), params[offset..offset + out * inp].to_vec())
                .expect("layout");
            offset += out * inp;
            let b = Array1::from_iter(params[offset..offset + out].iter().copied());
            offset += out;
            layers.push((w, b));
        }
        let _: &'a [f64] = params;
        layers
    }

    fn forward(&self, layers: &[(Array2<f64>, Array1<f64>)], x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut activations = vec![x.clone()];
        for (l, (w, b)) in layers.iter().enumerate() {
            let mut z = activations.last().unwrap().dot(&w.t());
            for mut row in z.rows_mut() {
                row += b;
            }
            if l + 1 < layers.len() {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        activations
    }

    /// Event-class probabilities.
    pub fn predict_probs(&self, params: &[f64], x: &Array2<f64>) -> Vec<f64> {
        let layers = self.unpack(params);
        let activations = self.forward(&layers, x);
        let logits = activations.last().unwrap();
        (0..logits.nrows())
            .map(|i| {
                let (a, b) = (logits[(i, 0)], logits[(i, 1)]);
                let m = a.max(b);
                let (ea, eb) = ((a - m).exp(), (b - m).exp());
                eb / (ea + eb)
            })
            .collect()
    }

    /// Weighted softmax cross-entropy loss and flat gradient.
    pub fn loss_and_grad(
        &self,
        params: &[f64],
        x: &Array2<f64>,
        y: &[f64],
        sample_weights: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let layers = self.unpack(params);
        let activations = self.forward(&layers, x);
        let logits = activations.last().unwrap();
        let n = x.nrows();
        let total_weight: f64 = sample_weights.iter().sum();

        let mut loss = 0.0;
        let mut dlogits = Array2::zeros((n, 2));
        for i in 0..n {
            let (a, b) = (logits[(i, 0)], logits[(i, 1)]);
            let m = a.max(b);
            let (ea, eb) = ((a - m).exp(), (b - m).exp());
            let z = ea + eb;
            let (p0, p1) = (ea / z, eb / z);
            let wi = sample_weights[i] / total_weight;
            let eps = 1e-12;
            loss -= wi * (y[i] * (p1 + eps).ln() + (1.0 - y[i]) * (p0 + eps).ln());
            dlogits[(i, 0)] = wi * (p0 - (1.0 - y[i]));
            dlogits[(i, 1)] = wi * (p1 - y[i]);
        }

        let mut grad = vec![0.0; self.n_params()];
        let mut delta = dlogits;
        // walk layers backwards, writing gradients into the flat layout
        let mut offsets = Vec::new();
        let mut offset = 0;
        for window in self.dims.windows(2) {
            offsets.push(offset);
            offset += window[1] * window[0] + window[1];
        }
        for l in (0..layers.len()).rev() {
            let (w, _) = &layers[l];
            let input = &activations[l];
            let dw = delta.t().dot(input);
            let db = delta.sum_axis(ndarray::Axis(0));
            let base = offsets[l];
            let (out, inp) = (self.dims[l + 1], self.dims[l]);
            for r in 0..out {
                for c in 0..inp {
                    grad[base + r * inp + c] = dw[(r, c)];
                }
            }
            for r in 0..out {
                grad[base + out * inp + r] = db[r];
            }
            if l > 0 {
                let mut dinput = delta.dot(w);
                // input to this layer was tanh-activated
                for i in 0..dinput.nrows() {
                    for j in 0..dinput.ncols() {
                        let a = activations[l][(i, j)];
                        dinput[(i, j)] *= 1.0 - a * a;
                    }
                }
                delta = dinput;
            }
        }
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn gradient_matches_central_finite_differences() {
        let net = DenseNet::new(3, &[4]);
        let mut params = net.init_params(3);
        let x = Array2::from_shape_fn((5, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let y = vec![1.0, 0.0, 1.0, 1.0, 0.0];
        let w = vec![1.0, 0.5, 1.0, 2.0, 1.0];
        let (_, grad) = net.loss_and_grad(&params, &x, &y, &w).unwrap();
        let h = 1e-6;
        for idx in [0usize, 3, 7, 11, net.n_params() - 1] {
            let orig = params[idx];
            params[idx] = orig + h;
            let (lp, _) = net.loss_and_grad(&params, &x, &y, &w).unwrap();
            params[idx] = orig - h;
            let (lm, _) = net.loss_and_grad(&params, &x, &y, &w).unwrap();
            params[idx] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (grad[idx] - numeric).abs() / grad[idx].abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-4, "param {idx}: analytic {} numeric {numeric}", grad[idx]);
        }
    }

    #[test]
    fn probabilities_are_well_formed() {
        let net = DenseNet::new(2, &[3]);
        let params = net.init_params(1);
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i + j) as f64);
        for p in net.predict_probs(&params, &x) {
            assert!((0.0..=1.0).contains(&p));
        }
    }
}
