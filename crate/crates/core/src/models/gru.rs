//! Stacked gated recurrent network trained by backpropagation through time.
//!
//! Two recurrent layers (100 then 50 units by default) with dropout of 10%
//! and 30% after each, feeding a two-logit softmax head. The temporal tensor
//! is fed chronologically (oldest bin first) so the final hidden state sits
//! closest to the index date; bag-of-words input is a one-step sequence.

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::rng;

use super::{
    class_weights, epoch_batches, Adam, ModelData, Predictor, Representation, Standardizer,
    Trainer, TrainSpec,
};

/// Architecture parameters for the two recurrent layers.
#[derive(Debug, Clone)]
pub struct GruConfig {
    pub units: [usize; 2],
    pub dropout: [f64; 2],
}

impl Default for GruConfig {
    fn default() -> Self {
        GruConfig {
            units: [100, 50],
            dropout: [0.1, 0.3],
        }
    }
}

/// Per-layer parameter views unpacked from the flat vector.
struct LayerParams {
    wz: Array2<f64>,
    uz: Array2<f64>,
    bz: Array1<f64>,
    wr: Array2<f64>,
    ur: Array2<f64>,
    br: Array1<f64>,
    wc: Array2<f64>,
    uc: Array2<f64>,
    bc: Array1<f64>,
}

#[derive(Default)]
struct LayerGrads {
    wz: Array2<f64>,
    uz: Array2<f64>,
    bz: Array1<f64>,
    wr: Array2<f64>,
    ur: Array2<f64>,
    br: Array1<f64>,
    wc: Array2<f64>,
    uc: Array2<f64>,
    bc: Array1<f64>,
}

impl LayerGrads {
    fn zeros(inp: usize, out: usize) -> Self {
        LayerGrads {
            wz: Array2::zeros((out, inp)),
            uz: Array2::zeros((out, out)),
            bz: Array1::zeros(out),
            wr: Array2::zeros((out, inp)),
            ur: Array2::zeros((out, out)),
            br: Array1::zeros(out),
            wc: Array2::zeros((out, inp)),
            uc: Array2::zeros((out, out)),
            bc: Array1::zeros(out),
        }
    }
}

/// Step caches for one layer.
struct LayerTrace {
    /// inputs per step (B x in)
    xs: Vec<Array2<f64>>,
    z: Vec<Array2<f64>>,
    r: Vec<Array2<f64>>,
    c: Vec<Array2<f64>>,
    h: Vec<Array2<f64>>,
}

fn layer_param_count(inp: usize, out: usize) -> usize {
    3 * (out * inp + out * out + out)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Network dimensions and the flat parameter layout.
#[derive(Debug, Clone)]
pub struct GruNet {
    pub input: usize,
    pub h1: usize,
    pub h2: usize,
}

impl GruNet {
    pub fn new(input: usize, config: &GruConfig) -> Self {
        GruNet {
            input,
            h1: config.units[0],
            h2: config.units[1],
        }
    }

    pub fn n_params(&self) -> usize {
        layer_param_count(self.input, self.h1)
            + layer_param_count(self.h1, self.h2)
            + 2 * self.h2
            + 2
    }

    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng::stream(seed, &[0x9f0]);
        let mut params = Vec::with_capacity(self.n_params());
        for (inp, out) in [(self.input, self.h1), (self.h1, self.h2)] {
            for _gate in 0..3 {
                let w_scale = (6.0 / (inp + out) as f64).sqrt();
                for _ in 0..out * inp {
                    params.push(rng.gen_range(-w_scale..w_scale));
                }
                let u_scale = (6.0 / (out + out) as f64).sqrt();
                for _ in 0..out * out {
                    params.push(rng.gen_range(-u_scale..u_scale));
                }
                for _ in 0..out {
                    params.push(0.0);
                }
            }
        }
        let head_scale = (6.0 / (self.h2 + 2) as f64).sqrt();
        for _ in 0..2 * self.h2 {
            params.push(rng.gen_range(-head_scale..head_scale));
        }
        params.push(0.0);
        params.push(0.0);
        params
    }

    fn unpack_layer(&self, params: &[f64], offset: usize, inp: usize, out: usize) -> LayerParams {
        let take2 = |off: &mut usize, rows: usize, cols: usize| {
            let m = Array2::from_shape_vec(
                (rows, cols),
                params[*off..*off + rows * cols].to_vec(),
            )
            .expect("layout");
            *off += rows * cols;
            m
        };
        let take1 = |off: &mut usize, len: usize| {
            let v = Array1::from_iter(params[*off..*off + len].iter().copied());
            *off += len;
            v
        };
        let mut off = offset;
        let wz = take2(&mut off, out, inp);
        let uz = take2(&mut off, out, out);
        let bz = take1(&mut off, out);
        let wr = take2(&mut off, out, inp);
        let ur = take2(&mut off, out, out);
        let br = take1(&mut off, out);
        let wc = take2(&mut off, out, inp);
        let uc = take2(&mut off, out, out);
        let bc = take1(&mut off, out);
        LayerParams {
            wz,
            uz,
            bz,
            wr,
            ur,
            br,
            wc,
            uc,
            bc,
        }
    }

    fn unpack_head(&self, params: &[f64]) -> (Array2<f64>, Array1<f64>) {
        let off = layer_param_count(self.input, self.h1) + layer_param_count(self.h1, self.h2);
        let wh = Array2::from_shape_vec((2, self.h2), params[off..off + 2 * self.h2].to_vec())
            .expect("layout");
        let bh = Array1::from_iter(params[off + 2 * self.h2..].iter().copied());
        (wh, bh)
    }

    fn layer_forward(
        &self,
        p: &LayerParams,
        xs: Vec<Array2<f64>>,
        out: usize,
    ) -> LayerTrace {
        let batch = xs[0].nrows();
        let mut h_prev = Array2::zeros((batch, out));
        let mut trace = LayerTrace {
            xs,
            z: Vec::new(),
            r: Vec::new(),
            c: Vec::new(),
            h: Vec::new(),
        };
        for t in 0..trace.xs.len() {
            let x_t = &trace.xs[t];
            let mut z = x_t.dot(&p.wz.t()) + h_prev.dot(&p.uz.t());
            let mut r = x_t.dot(&p.wr.t()) + h_prev.dot(&p.ur.t());
            for mut row in z.rows_mut() {
                row += &p.bz;
            }
            for mut row in r.rows_mut() {
                row += &p.br;
            }
            z.mapv_inplace(sigmoid);
            r.mapv_inplace(sigmoid);
            let gated = &r * &h_prev;
            let mut c = x_t.dot(&p.wc.t()) + gated.dot(&p.uc.t());
            for mut row in c.rows_mut() {
                row += &p.bc;
            }
            c.mapv_inplace(f64::tanh);
            let h = (1.0 - &z) * &h_prev + &z * &c;
            trace.z.push(z);
            trace.r.push(r);
            trace.c.push(c);
            trace.h.push(h.clone());
            h_prev = h;
        }
        trace
    }

    /// Backward through one step; accumulates parameter gradients and
    /// returns (d_input_t, d_h_prev).
    #[allow(clippy::too_many_arguments)]
    fn cell_backward(
        p: &LayerParams,
        g: &mut LayerGrads,
        dh: &Array2<f64>,
        x_t: &Array2<f64>,
        h_prev: &Array2<f64>,
        z: &Array2<f64>,
        r: &Array2<f64>,
        c: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let dz = dh * &(c - h_prev);
        let dza = &dz * z * &(1.0 - z);
        let dc = dh * z;
        let dca = &dc * &(1.0 - c * c);
        let mut dh_prev = dh * &(1.0 - z);

        let gated = r * h_prev;
        g.wc += &dca.t().dot(x_t);
        g.uc += &dca.t().dot(&gated);
        g.bc += &dca.sum_axis(Axis(0));
        let dhr = dca.dot(&p.uc);
        let dr = &dhr * h_prev;
        let dra = &dr * r * &(1.0 - r);
        dh_prev += &(&dhr * r);

        g.wr += &dra.t().dot(x_t);
        g.ur += &dra.t().dot(h_prev);
        g.br += &dra.sum_axis(Axis(0));
        g.wz += &dza.t().dot(x_t);
        g.uz += &dza.t().dot(h_prev);
        g.bz += &dza.sum_axis(Axis(0));

        dh_prev += &dza.dot(&p.uz);
        dh_prev += &dra.dot(&p.ur);
        let dx = dza.dot(&p.wz) + dra.dot(&p.wr) + dca.dot(&p.wc);
        (dx, dh_prev)
    }

    /// Gradients pack in the same order as the parameters
    /// (wz, uz, bz, wr, ur, br, wc, uc, bc); see `unpack_layer`.
    fn pack_layer_grads(&self, flat: &mut [f64], offset: usize, g: &LayerGrads) {
        let mut off = offset;
        let blocks: [(&Array2<f64>, &Array2<f64>, &Array1<f64>); 3] = [
            (&g.wz, &g.uz, &g.bz),
            (&g.wr, &g.ur, &g.br),
            (&g.wc, &g.uc, &g.bc),
        ];
        for (w, u, b) in blocks {
            for &v in w.iter().chain(u.iter()).chain(b.iter()) {
                flat[off] = v;
                off += 1;
            }
        }
    }

    /// Forward pass returning event-class probabilities (dropout off).
    pub fn forward_probs(&self, params: &[f64], x: &Array3<f64>) -> Vec<f64> {
        let (probs, _) = self.forward_full(params, x, None, None);
        probs
    }

    fn forward_full(
        &self,
        params: &[f64],
        x: &Array3<f64>,
        mask1: Option<&Array3<f64>>,
        mask2: Option<&Array2<f64>>,
    ) -> (Vec<f64>, (LayerTrace, LayerTrace, Array2<f64>)) {
        let steps = x.shape()[1];
        let p1 = self.unpack_layer(params, 0, self.input, self.h1);
        let p2 = self.unpack_layer(
            params,
            layer_param_count(self.input, self.h1),
            self.h1,
            self.h2,
        );
        let (wh, bh) = self.unpack_head(params);
        let xs1: Vec<Array2<f64>> = (0..steps)
            .map(|t| x.index_axis(Axis(1), t).to_owned())
            .collect();
        let trace1 = self.layer_forward(&p1, xs1, self.h1);
        let xs2: Vec<Array2<f64>> = (0..steps)
            .map(|t| match mask1 {
                Some(m) => &trace1.h[t] * &m.index_axis(Axis(1), t),
                None => trace1.h[t].clone(),
            })
            .collect();
        let trace2 = self.layer_forward(&p2, xs2, self.h2);
        let final_h = match mask2 {
            Some(m) => trace2.h[steps - 1].clone() * m,
            None => trace2.h[steps - 1].clone(),
        };
        let mut logits = final_h.dot(&wh.t());
        for mut row in logits.rows_mut() {
            row += &bh;
        }
        let probs = (0..logits.nrows())
            .map(|i| {
                let (a, b) = (logits[(i, 0)], logits[(i, 1)]);
                let m = a.max(b);
                let (ea, eb) = ((a - m).exp(), (b - m).exp());
                eb / (ea + eb)
            })
            .collect();
        (probs, (trace1, trace2, final_h))
    }

    /// Weighted softmax cross-entropy loss and flat gradient, without
    /// dropout. Used directly by finite-difference checks.
    pub fn loss_and_grad(
        &self,
        params: &[f64],
        x: &Array3<f64>,
        y: &[f64],
        sample_weights: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        self.loss_and_grad_masked(params, x, y, sample_weights, None, None)
    }

    pub(crate) fn loss_and_grad_masked(
        &self,
        params: &[f64],
        x: &Array3<f64>,
        y: &[f64],
        sample_weights: &[f64],
        mask1: Option<&Array3<f64>>,
        mask2: Option<&Array2<f64>>,
    ) -> Result<(f64, Vec<f64>)> {
        let steps = x.shape()[1];
        if steps == 0 {
            return Err(CoreError::validation("sequence length must be positive"));
        }
        let batch = x.shape()[0];
        let p1 = self.unpack_layer(params, 0, self.input, self.h1);
        let p2 = self.unpack_layer(
            params,
            layer_param_count(self.input, self.h1),
            self.h1,
            self.h2,
        );
        let (wh, _) = self.unpack_head(params);
        let (probs, (trace1, trace2, final_h)) = self.forward_full(params, x, mask1, mask2);

        let total_weight: f64 = sample_weights.iter().sum();
        let mut loss = 0.0;
        let mut dlogits = Array2::zeros((batch, 2));
        for i in 0..batch {
            let p1c = probs[i];
            let p0c = 1.0 - p1c;
            let wi = sample_weights[i] / total_weight;
            let eps = 1e-12;
            loss -= wi * (y[i] * (p1c + eps).ln() + (1.0 - y[i]) * (p0c + eps).ln());
            dlogits[(i, 0)] = wi * (p0c - (1.0 - y[i]));
            dlogits[(i, 1)] = wi * (p1c - y[i]);
        }

        let dwh = dlogits.t().dot(&final_h);
        let dbh = dlogits.sum_axis(Axis(0));
        let mut dfinal = dlogits.dot(&wh);
        if let Some(m) = mask2 {
            dfinal = dfinal * m;
        }

        // BPTT through layer 2, collecting input gradients per step
        let mut g2 = LayerGrads::zeros(self.h1, self.h2);
        let mut dx2: Vec<Array2<f64>> = vec![Array2::zeros((batch, self.h1)); steps];
        let mut dh = dfinal;
        for t in (0..steps).rev() {
            let h_prev = if t == 0 {
                Array2::zeros((batch, self.h2))
            } else {
                trace2.h[t - 1].clone()
            };
            let (dx, dh_prev) = Self::cell_backward(
                &p2,
                &mut g2,
                &dh,
                &trace2.xs[t],
                &h_prev,
                &trace2.z[t],
                &trace2.r[t],
                &trace2.c[t],
            );
            dx2[t] = dx;
            dh = dh_prev;
        }

        // layer-2 input was (masked) layer-1 output
        let mut g1 = LayerGrads::zeros(self.input, self.h1);
        let mut dh1 = Array2::zeros((batch, self.h1));
        for t in (0..steps).rev() {
            let mut inject = dx2[t].clone();
            if let Some(m) = mask1 {
                inject = inject * &m.index_axis(Axis(1), t);
            }
            dh1 += &inject;
            let h_prev = if t == 0 {
                Array2::zeros((batch, self.h1))
            } else {
                trace1.h[t - 1].clone()
            };
            let (_, dh_prev) = Self::cell_backward(
                &p1,
                &mut g1,
                &dh1,
                &trace1.xs[t],
                &h_prev,
                &trace1.z[t],
                &trace1.r[t],
                &trace1.c[t],
            );
            dh1 = dh_prev;
        }

        let mut grad = vec![0.0; self.n_params()];
        self.pack_layer_grads(&mut grad, 0, &g1);
        self.pack_layer_grads(&mut grad, layer_param_count(self.input, self.h1), &g2);
        let head_off =
            layer_param_count(self.input, self.h1) + layer_param_count(self.h1, self.h2);
        let mut off = head_off;
        for &v in dwh.iter() {
            grad[off] = v;
            off += 1;
        }
        for &v in dbh.iter() {
            grad[off] = v;
            off += 1;
        }
        Ok((loss, grad))
    }
}

/// Temporal tensors arrive with bin 0 most recent; feed oldest first.
fn prepare_input(data: &ModelData) -> Array3<f64> {
    match data {
        ModelData::Matrix(m) => {
            let mut out = Array3::zeros((m.nrows(), 1, m.ncols()));
            out.index_axis_mut(Axis(1), 0).assign(m);
            out
        }
        ModelData::Temporal(t) => {
            let steps = t.shape()[1];
            let mut out = Array3::zeros(t.raw_dim());
            for k in 0..steps {
                out.index_axis_mut(Axis(1), k)
                    .assign(&t.index_axis(Axis(1), steps - 1 - k));
            }
            out
        }
    }
}

/// A fitted recurrent model.
pub struct GruModel {
    net: GruNet,
    params: Vec<f64>,
    standardizer: Standardizer,
    representation: Representation,
}

impl GruModel {
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn net(&self) -> &GruNet {
        &self.net
    }
}

impl Predictor for GruModel {
    fn predict(&self, data: &ModelData) -> Result<Vec<f64>> {
        data.validate_finite()?;
        if data.n_features() != self.net.input {
            return Err(CoreError::validation(format!(
                "model expects {} features, got {}",
                self.net.input,
                data.n_features()
            )));
        }
        let standardized = self.standardizer.apply(data);
        let x = prepare_input(&standardized);
        // predict in slabs to bound the activation memory
        let mut scores = Vec::with_capacity(x.shape()[0]);
        let slab = 512;
        let mut start = 0;
        while start < x.shape()[0] {
            let end = (start + slab).min(x.shape()[0]);
            let idx: Vec<usize> = (start..end).collect();
            let part = x.select(Axis(0), &idx);
            scores.extend(self.net.forward_probs(&self.params, &part));
            start = end;
        }
        Ok(scores)
    }

    fn representation(&self) -> Representation {
        self.representation
    }
}

/// Trainer for the recurrent models (temporal tensor or bag-of-words).
#[derive(Debug, Clone)]
pub struct GruTrainer {
    pub spec: TrainSpec,
    pub config: GruConfig,
    pub representation: Representation,
}

impl GruTrainer {
    pub fn new(spec: TrainSpec, config: GruConfig, representation: Representation) -> Self {
        GruTrainer {
            spec,
            config,
            representation,
        }
    }

    fn sample_masks(
        &self,
        batch: usize,
        steps: usize,
        net: &GruNet,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> (Option<Array3<f64>>, Option<Array2<f64>>) {
        let [p1, p2] = self.config.dropout;
        let mask1 = if p1 > 0.0 {
            let keep = 1.0 - p1;
            Some(Array3::from_shape_fn((batch, steps, net.h1), |_| {
                if rng.gen_bool(keep) {
                    1.0 / keep
                } else {
                    0.0
                }
            }))
        } else {
            None
        };
        let mask2 = if p2 > 0.0 {
            let keep = 1.0 - p2;
            Some(Array2::from_shape_fn((batch, net.h2), |_| {
                if rng.gen_bool(keep) {
                    1.0 / keep
                } else {
                    0.0
                }
            }))
        } else {
            None
        };
        (mask1, mask2)
    }

    pub fn fit_model(&self, data: &ModelData, y: &[f64], seed: u64) -> Result<GruModel> {
        self.spec.validate()?;
        data.validate_finite()?;
        if data.n_steps() == 0 {
            return Err(CoreError::validation("sequence length must be positive"));
        }
        if data.n_rows() != y.len() {
            return Err(CoreError::validation("rows and labels differ in length"));
        }
        let standardizer = if self.spec.standardize {
            Standardizer::fit(data)
        } else {
            Standardizer::Identity
        };
        let standardized = standardizer.apply(data);
        let x = prepare_input(&standardized);
        let net = GruNet::new(data.n_features(), &self.config);
        let mut params = net.init_params(rng::mix(seed, &[0x1417]));
        let weights = class_weights(y, self.spec.class_weighting);
        let mut adam = Adam::new(self.spec.learning_rate, params.len());
        let steps = x.shape()[1];
        for epoch in 0..self.spec.epochs {
            let mut shuffle_rng = rng::stream(seed, &[0x5417, epoch as u64]);
            let batches = epoch_batches(x.shape()[0], self.spec.batch_size, &mut shuffle_rng);
            for (b, batch) in batches.iter().enumerate() {
                let xb = x.select(Axis(0), batch);
                let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
                let wb: Vec<f64> = batch.iter().map(|&i| weights[i]).collect();
                let mut mask_rng = rng::stream(seed, &[0xd409, epoch as u64, b as u64]);
                let (mask1, mask2) = self.sample_masks(batch.len(), steps, &net, &mut mask_rng);
                let (_, grad) = net.loss_and_grad_masked(
                    &params,
                    &xb,
                    &yb,
                    &wb,
                    mask1.as_ref(),
                    mask2.as_ref(),
                )?;
                adam.step(&mut params, &grad);
            }
        }
        Ok(GruModel {
            net,
            params,
            standardizer,
            representation: self.representation,
        })
    }
}

impl Trainer for GruTrainer {
    fn name(&self) -> &str {
        match self.representation {
            Representation::Temporal => "gru_sparse",
            Representation::Bow => "gru_bow",
            Representation::Collapsed => "gru_collapsed",
        }
    }

    fn fit(&self, data: &ModelData, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.fit_model(data, y, seed)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn toy_batch(net: &GruNet, steps: usize, batch: usize) -> (Array3<f64>, Vec<f64>, Vec<f64>) {
        let x = Array3::from_shape_fn((batch, steps, net.input), |(i, t, j)| {
            ((i * 7 + t * 3 + j) as f64 * 0.61).sin()
        });
        let y: Vec<f64> = (0..batch).map(|i| f64::from(i % 2 == 0)).collect();
        let w: Vec<f64> = (0..batch).map(|i| 1.0 + (i % 3) as f64 * 0.5).collect();
        (x, y, w)
    }

    fn check_gradient(
        net: &GruNet,
        params: &mut [f64],
        x: &Array3<f64>,
        y: &[f64],
        w: &[f64],
        mask1: Option<&Array3<f64>>,
        mask2: Option<&Array2<f64>>,
        indices: &[usize],
    ) {
        let (_, grad) = net
            .loss_and_grad_masked(params, x, y, w, mask1, mask2)
            .unwrap();
        let h = 1e-6;
        for &idx in indices {
            let orig = params[idx];
            params[idx] = orig + h;
            let (lp, _) = net
                .loss_and_grad_masked(params, x, y, w, mask1, mask2)
                .unwrap();
            params[idx] = orig - h;
            let (lm, _) = net
                .loss_and_grad_masked(params, x, y, w, mask1, mask2)
                .unwrap();
            params[idx] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (grad[idx] - numeric).abs() / grad[idx].abs().max(numeric.abs()).max(1e-8);
            assert!(
                rel < 1e-4,
                "param {idx}: analytic {} vs numeric {numeric}",
                grad[idx]
            );
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let config = GruConfig {
            units: [5, 4],
            dropout: [0.0, 0.0],
        };
        let net = GruNet::new(3, &config);
        let mut params = net.init_params(11);
        let (x, y, w) = toy_batch(&net, 4, 6);
        // ten spread-out parameters, including each block boundary
        let n = net.n_params();
        let indices: Vec<usize> = (0..10).map(|i| i * (n - 1) / 9).collect();
        check_gradient(&net, &mut params, &x, &y, &w, None, None, &indices);
    }

    #[test]
    fn gradient_is_exact_under_fixed_dropout_masks() {
        let config = GruConfig {
            units: [4, 3],
            dropout: [0.25, 0.5],
        };
        let net = GruNet::new(2, &config);
        let mut params = net.init_params(3);
        let (x, y, w) = toy_batch(&net, 3, 5);
        let mut rng = crate::rng::stream(1, &[2]);
        let trainer = GruTrainer::new(TrainSpec::default(), config, Representation::Temporal);
        let (mask1, mask2) = trainer.sample_masks(5, 3, &net, &mut rng);
        let n = net.n_params();
        let indices: Vec<usize> = (0..10).map(|i| i * (n - 1) / 9).collect();
        check_gradient(
            &net,
            &mut params,
            &x,
            &y,
            &w,
            mask1.as_ref(),
            mask2.as_ref(),
            &indices,
        );
    }

    #[test]
    fn zero_length_sequences_are_rejected() {
        let trainer = GruTrainer::new(
            TrainSpec::default(),
            GruConfig::default(),
            Representation::Temporal,
        );
        let data = ModelData::Temporal(Array3::zeros((4, 0, 3)));
        assert!(trainer.fit_model(&data, &[0.0, 1.0, 0.0, 1.0], 0).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let config = GruConfig {
            units: [6, 4],
            dropout: [0.1, 0.3],
        };
        let x = Array3::from_shape_fn((40, 3, 5), |(i, t, j)| ((i + t + j) as f64 * 0.3).cos());
        let y: Vec<f64> = (0..40).map(|i| f64::from(i % 2 == 0)).collect();
        let data = ModelData::Temporal(x);
        let trainer = GruTrainer::new(
            TrainSpec {
                epochs: 2,
                ..TrainSpec::default()
            },
            config,
            Representation::Temporal,
        );
        let a = trainer.fit_model(&data, &y, 5).unwrap();
        let b = trainer.fit_model(&data, &y, 5).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn temporal_input_is_fed_oldest_first() {
        let mut t = Array3::zeros((1, 3, 2));
        for k in 0..3 {
            t[(0, k, 0)] = k as f64;
        }
        let x = prepare_input(&ModelData::Temporal(t));
        assert_eq!(x[(0, 0, 0)], 2.0);
        assert_eq!(x[(0, 2, 0)], 0.0);
    }
}
