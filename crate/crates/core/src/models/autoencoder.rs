//! Masked-denoising autoencoder pretraining and the encoder-plus-classifier
//! pipeline built on it.
//!
//! Instead of additive Gaussian noise, a fraction of input cells is masked
//! to zero (binary-heavy inputs make additive noise unrealistic). The
//! autoencoder reconstructs the clean input from the corrupted one; after
//! pretraining the decoder is dropped and the encoder output feeds a dense
//! classifier.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::rng;

use super::{
    class_weights, epoch_batches, Adam, DenseNet, ModelData, Predictor, Representation,
    Standardizer, Trainer, TrainSpec,
};

/// Independently zeroes each cell with probability `rate`.
pub fn corrupt_mask(x: &Array2<f64>, rate: f64, seed: u64) -> Result<Array2<f64>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(CoreError::config("corruption rate must lie in [0, 1]"));
    }
    let mut rng = rng::stream(seed, &[0xc0]);
    let mut out = x.clone();
    if rate == 0.0 {
        return Ok(out);
    }
    for v in out.iter_mut() {
        if rng.gen_bool(rate) {
            *v = 0.0;
        }
    }
    Ok(out)
}

/// Symmetric autoencoder: encoder `input -> widths...`, mirrored decoder,
/// tanh activations and a linear reconstruction layer.
#[derive(Debug, Clone)]
pub struct DaeNet {
    /// Full layer dims: `[input, widths..., widths reversed..., input]`.
    pub dims: Vec<usize>,
    /// Number of encoder layers (= `widths.len()`).
    pub encoder_depth: usize,
}

impl DaeNet {
    pub fn new(input: usize, widths: &[usize]) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(widths);
        for w in widths[..widths.len().saturating_sub(1)].iter().rev() {
            dims.push(*w);
        }
        dims.push(input);
        DaeNet {
            dims,
            encoder_depth: widths.len(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng::stream(seed, &[0xdae]);
        let mut params = Vec::with_capacity(self.n_params());
        for w in self.dims.windows(2) {
            let scale = (6.0 / (w[0] + w[1]) as f64).sqrt();
            for _ in 0..w[1] * w[0] {
                params.push(rng.gen_range(-scale..scale));
            }
            for _ in 0..w[1] {
                params.push(0.0);
            }
        }
        params
    }

    fn unpack(&self, params: &[f64]) -> Vec<(Array2<f64>, Array1<f64>)> {
        let mut layers = Vec::new();
        let mut off = 0;
        for w in self.dims.windows(2) {
            let (inp, out) = (w[0], w[1]);
            let weight =
                Array2::from_shape_vec((out, inp), params[off..off + out * inp].to_vec())
                    .expect("layout");
            off += out * inp;
            let bias = Array1::from_iter(params[off..off + out].iter().copied());
            off += out;
            layers.push((weight, bias));
        }
        layers
    }

    fn forward(
        &self,
        layers: &[(Array2<f64>, Array1<f64>)],
        x: &Array2<f64>,
        depth: usize,
    ) -> Vec<Array2<f64>> {
        let n_layers = layers.len();
        let mut activations = vec![x.clone()];
        for (l, (w, b)) in layers.iter().take(depth).enumerate() {
            let mut z = activations.last().unwrap().dot(&w.t());
            for mut row in z.rows_mut() {
                row += b;
            }
            if l + 1 < n_layers {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        activations
    }

    /// Encoder output for (already standardized) input.
    pub fn encode(&self, params: &[f64], x: &Array2<f64>) -> Array2<f64> {
        let layers = self.unpack(params);
        self.forward(&layers, x, self.encoder_depth)
            .pop()
            .expect("activations")
    }

    /// Full reconstruction of the input.
    pub fn reconstruct(&self, params: &[f64], x: &Array2<f64>) -> Array2<f64> {
        let layers = self.unpack(params);
        self.forward(&layers, x, layers.len()).pop().expect("activations")
    }

    /// Mean squared reconstruction error of `clean` from `corrupted`, with
    /// the flat gradient.
    pub fn loss_and_grad(
        &self,
        params: &[f64],
        corrupted: &Array2<f64>,
        clean: &Array2<f64>,
    ) -> Result<(f64, Vec<f64>)> {
        if corrupted.dim() != clean.dim() {
            return Err(CoreError::validation(
                "corrupted and clean inputs must share a shape",
            ));
        }
        let layers = self.unpack(params);
        let activations = self.forward(&layers, corrupted, layers.len());
        let output = activations.last().unwrap();
        let n_cells = (output.nrows() * output.ncols()) as f64;
        let diff = output - clean;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / n_cells;

        let mut grad = vec![0.0; self.n_params()];
        let mut offsets = Vec::new();
        let mut off = 0;
        for w in self.dims.windows(2) {
            offsets.push(off);
            off += w[1] * w[0] + w[1];
        }
        let mut delta = diff * (2.0 / n_cells);
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

/// Per-epoch mean reconstruction loss.
#[derive(Debug, Clone)]
pub struct PretrainReport {
    pub epoch_losses: Vec<f64>,
}

/// Trains the denoising autoencoder and returns the network, its fitted
/// parameters, and the loss trace.
pub fn pretrain_denoising_autoencoder(
    x: &Array2<f64>,
    widths: &[usize],
    rate: f64,
    spec: &TrainSpec,
    seed: u64,
) -> Result<(DaeNet, Vec<f64>, PretrainReport)> {
    spec.validate()?;
    if widths.is_empty() {
        return Err(CoreError::config("autoencoder needs at least one width"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::validation("input contains non-finite values"));
    }
    let net = DaeNet::new(x.ncols(), widths);
    let mut params = net.init_params(rng::mix(seed, &[0xae1]));
    let mut adam = Adam::new(spec.learning_rate, params.len());
    let mut epoch_losses = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        let mut shuffle_rng = rng::stream(seed, &[0xae2, epoch as u64]);
        let mut weighted_loss = 0.0;
        for (b, batch) in epoch_batches(x.nrows(), spec.batch_size, &mut shuffle_rng)
            .iter()
            .enumerate()
        {
            let clean = x.select(ndarray::Axis(0), batch);
            let corrupted = corrupt_mask(
                &clean,
                rate,
                rng::mix(seed, &[0xae3, epoch as u64, b as u64]),
            )?;
            let (loss, grad) = net.loss_and_grad(&params, &corrupted, &clean)?;
            adam.step(&mut params, &grad);
            weighted_loss += loss * batch.len() as f64;
        }
        epoch_losses.push(weighted_loss / x.nrows() as f64);
    }
    Ok((net, params, PretrainReport { epoch_losses }))
}

/// Encoder-plus-dense-classifier pipeline.
pub struct DeepPatientModel {
    standardizer: Standardizer,
    dae: DaeNet,
    dae_params: Vec<f64>,
    head: DenseNet,
    head_params: Vec<f64>,
}

impl Predictor for DeepPatientModel {
    fn predict(&self, data: &ModelData) -> Result<Vec<f64>> {
        data.validate_finite()?;
        let standardized = self.standardizer.apply(data);
        let x = standardized.as_matrix()?;
        let encoded = self.dae.encode(&self.dae_params, x);
        Ok(self.head.predict_probs(&self.head_params, &encoded))
    }

    fn representation(&self) -> Representation {
        Representation::Collapsed
    }
}

/// Pretrains on the training rows, drops the decoder, and fits a dense head
/// on the encoder output.
#[derive(Debug, Clone)]
pub struct DeepPatientTrainer {
    pub spec: TrainSpec,
    pub widths: Vec<usize>,
    pub corruption: f64,
    pub head_hidden: Vec<usize>,
}

impl Default for DeepPatientTrainer {
    fn default() -> Self {
        DeepPatientTrainer {
            spec: TrainSpec::default(),
            widths: vec![500, 500, 500],
            corruption: 0.05,
            head_hidden: vec![32],
        }
    }
}

impl DeepPatientTrainer {
    pub fn fit_model(&self, data: &ModelData, y: &[f64], seed: u64) -> Result<DeepPatientModel> {
        self.spec.validate()?;
        data.validate_finite()?;
        let standardizer = if self.spec.standardize {
            Standardizer::fit(data)
        } else {
            Standardizer::Identity
        };
        let standardized = standardizer.apply(data);
        let x = standardized.as_matrix()?;
        let (dae, dae_params, _) = pretrain_denoising_autoencoder(
            x,
            &self.widths,
            self.corruption,
            &self.spec,
            rng::mix(seed, &[0xd0]),
        )?;
        let encoded = dae.encode(&dae_params, x);
        let head = DenseNet::new(encoded.ncols(), &self.head_hidden);
        let mut head_params = head.init_params(rng::mix(seed, &[0xd1]));
        let weights = class_weights(y, self.spec.class_weighting);
        let mut adam = Adam::new(self.spec.learning_rate, head_params.len());
        for epoch in 0..self.spec.epochs {
            let mut shuffle_rng = rng::stream(seed, &[0xd2, epoch as u64]);
            for batch in epoch_batches(encoded.nrows(), self.spec.batch_size, &mut shuffle_rng) {
                let xb = encoded.select(ndarray::Axis(0), &batch);
                let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
                let wb: Vec<f64> = batch.iter().map(|&i| weights[i]).collect();
                let (_, grad) = head.loss_and_grad(&head_params, &xb, &yb, &wb)?;
                adam.step(&mut head_params, &grad);
            }
        }
        Ok(DeepPatientModel {
            standardizer,
            dae,
            dae_params,
            head,
            head_params,
        })
    }
}

impl Trainer for DeepPatientTrainer {
    fn name(&self) -> &str {
        "deep_patient"
    }

    fn fit(&self, data: &ModelData, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.fit_model(data, y, seed)?))
    }
}
