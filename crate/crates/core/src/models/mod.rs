//! Trainable predictors over the encoded representations, plus the metric,
//! cross-validation and ablation harnesses.
//!
//! All models train with the same adaptive-moment schedule (learning rate
//! 0.001, binary cross-entropy, 10 epochs, batches of 256) and standardize
//! features on the training fold. Class imbalance is handled with
//! inverse-prevalence sample weights. Every trainer is deterministic given
//! its seed, and every analytic gradient is validated against central
//! finite differences in the test suites.

pub mod ablation;
mod adam;
pub mod autoencoder;
pub mod dense;
pub mod gru;
pub mod kfold;
pub mod logistic;
pub mod metrics;

pub use ablation::{ablation_run, ablation_subsets, AblationRow};
pub use adam::Adam;
pub use autoencoder::{corrupt_mask, DaeNet, DeepPatientTrainer, PretrainReport};
pub use dense::DenseNet;
pub use gru::{GruConfig, GruNet, GruTrainer};
pub use kfold::{kfold_evaluate, stratified_folds, MetricsReport, MetricsSummary};
pub use logistic::{LogisticModel, LogisticTrainer};
pub use metrics::{auc, compute_metrics, Metrics};

use ndarray::{Array1, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Which encoded form a predictor consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    /// Subjects x features matrix (time collapsed).
    Collapsed,
    /// Subjects x time x features tensor.
    Temporal,
    /// Subjects x vocabulary bag-of-words counts.
    Bow,
}

/// Optimizer and schedule parameters shared by all trainers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpec {
    pub learning_rate: f64,
    /// Epochs may be set to 0 to inspect initial-parameter behaviour.
    pub epochs: usize,
    pub batch_size: usize,
    /// Inverse-prevalence sample weights.
    pub class_weighting: bool,
    /// Z-score features on the training fold.
    pub standardize: bool,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            learning_rate: 0.001,
            epochs: 10,
            batch_size: 256,
            class_weighting: true,
            standardize: true,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(CoreError::config("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(CoreError::config("batch size must be positive"));
        }
        Ok(())
    }
}

/// Encoded input consumed by trainers and predictors.
#[derive(Debug, Clone)]
pub enum ModelData {
    /// subjects x features
    Matrix(Array2<f64>),
    /// subjects x time x features
    Temporal(Array3<f64>),
}

impl ModelData {
    pub fn n_rows(&self) -> usize {
        match self {
            ModelData::Matrix(m) => m.nrows(),
            ModelData::Temporal(t) => t.shape()[0],
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            ModelData::Matrix(m) => m.ncols(),
            ModelData::Temporal(t) => t.shape()[2],
        }
    }

    pub fn n_steps(&self) -> usize {
        match self {
            ModelData::Matrix(_) => 1,
            ModelData::Temporal(t) => t.shape()[1],
        }
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> ModelData {
        match self {
            ModelData::Matrix(m) => ModelData::Matrix(m.select(Axis(0), idx)),
            ModelData::Temporal(t) => ModelData::Temporal(t.select(Axis(0), idx)),
        }
    }

    /// Feature columns `idx` in the given order.
    pub fn select_features(&self, idx: &[usize]) -> ModelData {
        match self {
            ModelData::Matrix(m) => ModelData::Matrix(m.select(Axis(1), idx)),
            ModelData::Temporal(t) => ModelData::Temporal(t.select(Axis(2), idx)),
        }
    }

    /// A copy with feature `j` permuted across subjects. For temporal data
    /// the subject permutation moves a feature's whole bin block at once, so
    /// within-subject time patterns survive.
    pub fn permute_feature(&self, j: usize, perm: &[usize]) -> ModelData {
        match self {
            ModelData::Matrix(m) => {
                let mut out = m.clone();
                for (row, &src) in perm.iter().enumerate() {
                    out[(row, j)] = m[(src, j)];
                }
                ModelData::Matrix(out)
            }
            ModelData::Temporal(t) => {
                let mut out = t.clone();
                let steps = t.shape()[1];
                for (row, &src) in perm.iter().enumerate() {
                    for k in 0..steps {
                        out[(row, k, j)] = t[(src, k, j)];
                    }
                }
                ModelData::Temporal(out)
            }
        }
    }

    /// Dense subjects x (time*features) view used by matrix-only models.
    pub fn as_matrix(&self) -> Result<&Array2<f64>> {
        match self {
            ModelData::Matrix(m) => Ok(m),
            ModelData::Temporal(_) => Err(CoreError::validation(
                "this model consumes a subjects x features matrix",
            )),
        }
    }

    pub fn validate_finite(&self) -> Result<()> {
        let ok = match self {
            ModelData::Matrix(m) => m.iter().all(|v| v.is_finite()),
            ModelData::Temporal(t) => t.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(CoreError::validation("input contains non-finite values"))
        }
    }
}

/// A fitted model: deterministic at inference, probabilities in [0, 1].
pub trait Predictor: Send + Sync {
    fn predict(&self, data: &ModelData) -> Result<Vec<f64>>;
    fn representation(&self) -> Representation;
}

/// Builds a fitted predictor from encoded data, labels and a seed.
pub trait Trainer {
    fn name(&self) -> &str;
    fn fit(&self, data: &ModelData, y: &[f64], seed: u64) -> Result<Box<dyn Predictor>>;
}

/// Per-feature z-scoring, fit on the training fold only. Zero-variance
/// columns keep scale 1 so they pass through unchanged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Standardizer {
    Matrix { mean: Array1<f64>, std: Array1<f64> },
    Temporal { mean: Array2<f64>, std: Array2<f64> },
    Identity,
}

impl Standardizer {
    pub fn fit(data: &ModelData) -> Standardizer {
        match data {
            ModelData::Matrix(m) => {
                let n = m.nrows().max(1) as f64;
                let mean = m.sum_axis(Axis(0)) / n;
                let mut std = Array1::zeros(m.ncols());
                for j in 0..m.ncols() {
                    let mut acc = 0.0;
                    for i in 0..m.nrows() {
                        let d = m[(i, j)] - mean[j];
                        acc += d * d;
                    }
                    let s = (acc / n).sqrt();
                    std[j] = if s > 1e-12 { s } else { 1.0 };
                }
                Standardizer::Matrix { mean, std }
            }
            ModelData::Temporal(t) => {
                let (n, steps, feats) = (t.shape()[0].max(1), t.shape()[1], t.shape()[2]);
                let mut mean = Array2::zeros((steps, feats));
                let mut std = Array2::zeros((steps, feats));
                for k in 0..steps {
                    for j in 0..feats {
                        let mut acc = 0.0;
                        for i in 0..t.shape()[0] {
                            acc += t[(i, k, j)];
                        }
                        mean[(k, j)] = acc / n as f64;
                    }
                }
                for k in 0..steps {
                    for j in 0..feats {
                        let mut acc = 0.0;
                        for i in 0..t.shape()[0] {
                            let d = t[(i, k, j)] - mean[(k, j)];
                            acc += d * d;
                        }
                        let s = (acc / n as f64).sqrt();
                        std[(k, j)] = if s > 1e-12 { s } else { 1.0 };
                    }
                }
                Standardizer::Temporal { mean, std }
            }
        }
    }

    pub fn apply(&self, data: &ModelData) -> ModelData {
        match (self, data) {
            (Standardizer::Identity, d) => d.clone(),
            (Standardizer::Matrix { mean, std }, ModelData::Matrix(m)) => {
                let mut out = m.clone();
                for i in 0..out.nrows() {
                    for j in 0..out.ncols() {
                        out[(i, j)] = (out[(i, j)] - mean[j]) / std[j];
                    }
                }
                ModelData::Matrix(out)
            }
            (Standardizer::Temporal { mean, std }, ModelData::Temporal(t)) => {
                let mut out = t.clone();
                for i in 0..out.shape()[0] {
                    for k in 0..out.shape()[1] {
                        for j in 0..out.shape()[2] {
                            out[(i, k, j)] = (out[(i, k, j)] - mean[(k, j)]) / std[(k, j)];
                        }
                    }
                }
                ModelData::Temporal(out)
            }
            _ => data.clone(),
        }
    }
}

/// Inverse-prevalence sample weights, normalized to mean 1.
pub fn class_weights(y: &[f64], enabled: bool) -> Vec<f64> {
    if !enabled || y.is_empty() {
        return vec![1.0; y.len()];
    }
    let n = y.len() as f64;
    let pos = y.iter().filter(|&&v| v > 0.5).count() as f64;
    let neg = n - pos;
    if pos == 0.0 || neg == 0.0 {
        return vec![1.0; y.len()];
    }
    y.iter()
        .map(|&v| if v > 0.5 { n / (2.0 * pos) } else { n / (2.0 * neg) })
        .collect()
}

/// Shuffled batch index lists for one epoch.
pub(crate) fn epoch_batches(
    n: usize,
    batch_size: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn class_weights_balance_to_mean_one() {
        let y = vec![1.0, 0.0, 0.0, 0.0];
        let w = class_weights(&y, true);
        assert!((w.iter().sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
        assert!(w[0] > w[1]);
    }

    #[test]
    fn permute_feature_moves_whole_bin_block() {
        let mut t = Array3::zeros((3, 2, 2));
        for i in 0..3 {
            for k in 0..2 {
                t[(i, k, 0)] = (10 * i + k) as f64;
                t[(i, k, 1)] = (100 * i + k) as f64;
            }
        }
        let data = ModelData::Temporal(t.clone());
        let perm = vec![2, 0, 1];
        let ModelData::Temporal(p) = data.permute_feature(0, &perm) else {
            unreachable!()
        };
        // feature 0 blocks moved intact
        for (row, &src) in perm.iter().enumerate() {
            for k in 0..2 {
                assert_eq!(p[(row, k, 0)], t[(src, k, 0)]);
                assert_eq!(p[(row, k, 1)], t[(row, k, 1)]);
            }
        }
    }

    #[test]
    fn standardizer_zscores_and_keeps_constants() {
        let m = array![[1.0, 5.0], [3.0, 5.0]];
        let data = ModelData::Matrix(m);
        let st = Standardizer::fit(&data);
        let ModelData::Matrix(z) = st.apply(&data) else {
            unreachable!()
        };
        assert!((z[(0, 0)] + 1.0).abs() < 1e-12);
        assert!((z[(1, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(z[(0, 1)], 0.0);
    }
}
