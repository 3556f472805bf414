//! Baseline logistic regression trained with Adam.

use ndarray::{Array1, Array2};

use crate::error::{CoreError, Result};
use crate::rng;

use super::{
    class_weights, epoch_batches, Adam, ModelData, Predictor, Representation, Standardizer,
    Trainer, TrainSpec,
};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weighted binary cross-entropy loss and gradient for a logistic model
/// with parameters `[w_0..w_{d-1}, b]` laid out flat.
pub fn logistic_loss_grad(
    params: &[f64],
    x: &Array2<f64>,
    y: &[f64],
    sample_weights: &[f64],
) -> (f64, Vec<f64>) {
    let d = x.ncols();
    let w = Array1::from_iter(params[..d].iter().copied());
    let b = params[d];
    let total_weight: f64 = sample_weights.iter().sum();
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    let logits = x.dot(&w);
    for i in 0..x.nrows() {
        let p = sigmoid(logits[i] + b);
        let wi = sample_weights[i] / total_weight;
        let eps = 1e-12;
        loss -= wi * (y[i] * (p + eps).ln() + (1.0 - y[i]) * (1.0 - p + eps).ln());
        let delta = wi * (p - y[i]);
        for j in 0..d {
            grad[j] += delta * x[(i, j)];
        }
        grad[d] += delta;
    }
    (loss, grad)
}

/// A fitted logistic model over the collapsed (or bag-of-words) matrix.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    standardizer: Standardizer,
    representation: Representation,
}

impl LogisticModel {
    pub fn scores(&self, x: &Array2<f64>) -> Vec<f64> {
        let w = Array1::from_iter(self.weights.iter().copied());
        let logits = x.dot(&w);
        logits.iter().map(|&z| sigmoid(z + self.bias)).collect()
    }
}

impl Predictor for LogisticModel {
    fn predict(&self, data: &ModelData) -> Result<Vec<f64>> {
        data.validate_finite()?;
        let standardized = self.standardizer.apply(data);
        let x = standardized.as_matrix()?;
        if x.ncols() != self.weights.len() {
            return Err(CoreError::validation(format!(
                "model expects {} features, got {}",
                self.weights.len(),
                x.ncols()
            )));
        }
        Ok(self.scores(x))
    }

    fn representation(&self) -> Representation {
        self.representation
    }
}

/// Trainer for the logistic baseline.
#[derive(Debug, Clone, Default)]
pub struct LogisticTrainer {
    pub spec: TrainSpec,
    pub representation: Option<Representation>,
}

impl LogisticTrainer {
    pub fn new(spec: TrainSpec) -> Self {
        LogisticTrainer {
            spec,
            representation: None,
        }
    }

    /// Fits and returns the concrete model type.
    pub fn fit_model(&self, data: &ModelData, y: &[f64], seed: u64) -> Result<LogisticModel> {
        self.spec.validate()?;
        data.validate_finite()?;
        if data.n_rows() != y.len() {
            return Err(CoreError::validation("rows and labels differ in length"));
        }
        let standardizer = if self.spec.standardize {
            Standardizer::fit(data)
        } else {
            Standardizer::Identity
        };
        let standardized = standardizer.apply(data);
        let x = standardized.as_matrix()?;
        let d = x.ncols();
        let weights = class_weights(y, self.spec.class_weighting);
        let mut params = vec![0.0; d + 1];
        let mut adam = Adam::new(self.spec.learning_rate, params.len());
        for epoch in 0..self.spec.epochs {
            let mut shuffle_rng = rng::stream(seed, &[0x106, epoch as u64]);
            for batch in epoch_batches(x.nrows(), self.spec.batch_size, &mut shuffle_rng) {
                let xb = x.select(ndarray::Axis(0), &batch);
                let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
                let wb: Vec<f64> = batch.iter().map(|&i| weights[i]).collect();
                let (_, grad) = logistic_loss_grad(&params, &xb, &yb, &wb);
                adam.step(&mut params, &grad);
            }
        }
        let bias = params[d];
        params.truncate(d);
        Ok(LogisticModel {
            weights: params,
            bias,
            standardizer,
            representation: self.representation.unwrap_or(Representation::Collapsed),
        })
    }
}

impl Trainer for LogisticTrainer {
    fn name(&self) -> &str {
        "logistic"
    }

    fn fit(&self, data: &ModelData, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.fit_model(data, y, seed)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::metrics::auc;
    use ndarray::Array2;
    use rand::Rng;

    fn separable_1d(n: usize) -> (ModelData, Vec<f64>) {
        let mut x = Array2::zeros((n, 1));
        let mut y = vec![0.0; n];
        for i in 0..n {
            let v = if i % 2 == 0 { 1.0 + (i / 2) as f64 * 0.1 } else { -1.0 - (i / 2) as f64 * 0.1 };
            x[(i, 0)] = v;
            y[i] = f64::from(v > 0.0);
        }
        (ModelData::Matrix(x), y)
    }

    #[test]
    fn separable_fixture_reaches_perfect_auc() {
        let (data, y) = separable_1d(60);
        let trainer = LogisticTrainer::new(TrainSpec {
            epochs: 60,
            ..TrainSpec::default()
        });
        let model = trainer.fit_model(&data, &y, 1).unwrap();
        let scores = model.predict(&data).unwrap();
        assert_eq!(auc(&scores, &y).unwrap(), 1.0);
    }

    #[test]
    fn zero_epochs_give_constant_half_scores() {
        let (data, y) = separable_1d(40);
        let trainer = LogisticTrainer::new(TrainSpec {
            epochs: 0,
            ..TrainSpec::default()
        });
        let model = trainer.fit_model(&data, &y, 1).unwrap();
        let scores = model.predict(&data).unwrap();
        assert!(scores.iter().all(|&s| s == 0.5));
        assert_eq!(auc(&scores, &y).unwrap(), 0.5);
    }

    #[test]
    fn coefficients_match_full_batch_gradient_descent_oracle() {
        // Noisy two-feature fixture (non-separable) has a unique optimum;
        // Adam mini-batch training must land within 5% of a long plain
        // gradient-descent run.
        let mut rng = crate::rng::stream(5, &[0]);
        let n = 400;
        let mut x = Array2::zeros((n, 2));
        let mut y = vec![0.0; n];
        for i in 0..n {
            let a: f64 = rng.gen_range(-2.0..2.0);
            let b: f64 = rng.gen_range(-2.0..2.0);
            x[(i, 0)] = a;
            x[(i, 1)] = b;
            let p = 1.0 / (1.0 + (-(1.2 * a - 0.7 * b + 0.3)).exp());
            y[i] = f64::from(rng.gen::<f64>() < p);
        }
        let data = ModelData::Matrix(x.clone());
        let trainer = LogisticTrainer::new(TrainSpec {
            epochs: 400,
            batch_size: 64,
            standardize: false,
            class_weighting: false,
            ..TrainSpec::default()
        });
        let model = trainer.fit_model(&data, &y, 2).unwrap();

        // oracle: full-batch gradient descent run to convergence
        let weights = vec![1.0; n];
        let mut params = vec![0.0; 3];
        for _ in 0..200_000 {
            let (_, grad) = logistic_loss_grad(&params, &x, &y, &weights);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= 5.0 * g;
            }
        }
        for j in 0..2 {
            let rel = (model.weights[j] - params[j]).abs() / params[j].abs();
            assert!(rel < 0.05, "coefficient {j}: {} vs {}", model.weights[j], params[j]);
        }
        let rel_bias = (model.bias - params[2]).abs() / params[2].abs().max(0.1);
        assert!(rel_bias < 0.05, "bias {} vs {}", model.bias, params[2]);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut x = Array2::zeros((4, 1));
        x[(0, 0)] = f64::NAN;
        let data = ModelData::Matrix(x);
        let trainer = LogisticTrainer::default();
        assert!(trainer.fit_model(&data, &[0.0, 1.0, 0.0, 1.0], 0).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let (data, y) = separable_1d(50);
        let trainer = LogisticTrainer::default();
        let a = trainer.fit_model(&data, &y, 9).unwrap();
        let b = trainer.fit_model(&data, &y, 9).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }
}
