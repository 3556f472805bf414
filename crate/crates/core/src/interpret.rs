//! Global interpretability: permutation feature importance, local surrogate
//! explanations aggregated globally, score normalization, ranking, and the
//! cumulative-importance analysis.
//!
//! Importance is reported so that positive values mean "permuting this
//! feature worsened the error" — large positive scores mark important
//! features.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::models::{auc, ModelData, Predictor};
use crate::rng;

/// Where an importance vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Pfi,
    LimeAggregated,
}

/// Per-feature global importance scores aligned to a vocabulary's feature
/// tokens (reserved slots excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub scores: Vec<f64>,
    pub provenance: Provenance,
    pub normalized: bool,
}

/// Deterministic feature ranking: descending score, ties broken by
/// ascending feature index.
pub type RankedList = Vec<usize>;

/// Options for permutation feature importance.
#[derive(Debug, Clone)]
pub struct PfiOptions {
    /// Permutation repeats per feature; the mean error change is reported.
    pub n_repeats: usize,
    pub seed: u64,
}

impl Default for PfiOptions {
    fn default() -> Self {
        PfiOptions {
            n_repeats: 5,
            seed: 0,
        }
    }
}

/// Per-feature mean and standard deviation of the error change across
/// permutation repeats.
#[derive(Debug, Clone)]
pub struct PfiResult {
    pub importance: ImportanceVector,
    pub repeat_std: Vec<f64>,
    pub baseline_error: f64,
}

fn model_error(predictor: &dyn Predictor, data: &ModelData, y: &[f64]) -> Result<f64> {
    let scores = predictor.predict(data)?;
    for &s in &scores {
        if !s.is_finite() {
            return Err(CoreError::runtime("predictor returned non-finite scores"));
        }
    }
    Ok(1.0 - auc(&scores, y)?)
}

/// Permutation feature importance with 1 - AUC as the error function.
/// Each (feature, repeat) pair owns a derived permutation stream; for
/// temporal input the whole bin block of a feature moves under one subject
/// permutation.
pub fn pfi(
    predictor: &dyn Predictor,
    data: &ModelData,
    y: &[f64],
    opts: &PfiOptions,
) -> Result<PfiResult> {
    if opts.n_repeats == 0 {
        return Err(CoreError::config("n_repeats must be at least 1"));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(CoreError::validation(
            "permutation importance needs both classes",
        ));
    }
    let baseline_error = model_error(predictor, data, y)?;
    let n = data.n_rows();
    let n_features = data.n_features();
    let mut means = Vec::with_capacity(n_features);
    let mut stds = Vec::with_capacity(n_features);
    for j in 0..n_features {
        let mut deltas = Vec::with_capacity(opts.n_repeats);
        for rep in 0..opts.n_repeats {
            let mut perm: Vec<usize> = (0..n).collect();
            let mut stream = rng::stream(opts.seed, &[0x9f1, j as u64, rep as u64]);
            perm.shuffle(&mut stream);
            let permuted = data.permute_feature(j, &perm);
            let err = model_error(predictor, &permuted, y)?;
            deltas.push(err - baseline_error);
        }
        let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
        let var = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / deltas.len() as f64;
        means.push(mean);
        stds.push(var.sqrt());
    }
    Ok(PfiResult {
        importance: ImportanceVector {
            scores: means,
            provenance: Provenance::Pfi,
            normalized: false,
        },
        repeat_std: stds,
        baseline_error,
    })
}

/// Options for the local surrogate explainer.
#[derive(Debug, Clone)]
pub struct LimeOptions {
    pub n_samples: usize,
    /// Width of the exponential kernel on normalized Hamming distance.
    pub kernel_width: f64,
    /// Surrogate complexity limit: at most this many nonzero weights.
    pub top_k: usize,
    /// Ridge penalty for the weighted least-squares fit.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for LimeOptions {
    fn default() -> Self {
        LimeOptions {
            n_samples: 1000,
            kernel_width: 0.25,
            top_k: 10,
            ridge: 1e-3,
            seed: 0,
        }
    }
}

/// Weighted ridge regression on a binary design matrix with intercept.
/// Returns (intercept, coefficients).
fn weighted_ridge(
    z: &Array2<f64>,
    targets: &[f64],
    weights: &[f64],
    ridge: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = z.nrows();
    let d = z.ncols() + 1; // intercept first
    let mut design = Array2::ones((n, d));
    design.slice_mut(ndarray::s![.., 1..]).assign(z);
    let mut xtx = Array2::zeros((d, d));
    let mut xty = Array1::zeros(d);
    for i in 0..n {
        let w = weights[i];
        for a in 0..d {
            xty[a] += w * design[(i, a)] * targets[i];
            for b in 0..d {
                xtx[(a, b)] += w * design[(i, a)] * design[(i, b)];
            }
        }
    }
    for a in 1..d {
        xtx[(a, a)] += ridge;
    }
    // tiny jitter keeps the intercept block solvable when all locality
    // weight concentrates on one sample
    xtx[(0, 0)] += 1e-12;
    let na_a = nalgebra::DMatrix::from_fn(d, d, |r, c| xtx[(r, c)]);
    let na_b = nalgebra::DVector::from_fn(d, |r, _| xty[r]);
    let solution = na_a
        .lu()
        .solve(&na_b)
        .ok_or_else(|| CoreError::runtime("surrogate normal equations are singular"))?;
    Ok((solution[0], solution.iter().skip(1).copied().collect()))
}

/// Explains one instance by masking random subsets of its active features,
/// querying the predictor, and fitting a locality-weighted sparse linear
/// surrogate. Returns a full-length weight vector (zeros for inactive
/// features).
pub fn lime_local(
    predictor: &dyn Predictor,
    x: &Array1<f64>,
    opts: &LimeOptions,
) -> Result<Vec<f64>> {
    if opts.n_samples < 2 {
        return Err(CoreError::config("LIME needs at least two samples"));
    }
    let active: Vec<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(j, _)| j)
        .collect();
    let mut weights_out = vec![0.0; x.len()];
    if active.is_empty() {
        return Ok(weights_out);
    }
    let mut stream = rng::stream(opts.seed, &[0x11e]);
    let mut masks = Array2::zeros((opts.n_samples, active.len()));
    // first sample is the instance itself
    for a in 0..active.len() {
        masks[(0, a)] = 1.0;
    }
    for i in 1..opts.n_samples {
        for a in 0..active.len() {
            masks[(i, a)] = f64::from(stream.gen_bool(0.5));
        }
    }
    let mut perturbed = Array2::zeros((opts.n_samples, x.len()));
    for i in 0..opts.n_samples {
        for (a, &j) in active.iter().enumerate() {
            perturbed[(i, j)] = x[j] * masks[(i, a)];
        }
    }
    let predictions = predictor.predict(&ModelData::Matrix(perturbed))?;
    for &p in &predictions {
        if !p.is_finite() {
            return Err(CoreError::runtime("predictor returned non-finite scores"));
        }
    }
    let locality: Vec<f64> = (0..opts.n_samples)
        .map(|i| {
            let masked = active.len() as f64 - masks.row(i).sum();
            let distance = masked / active.len() as f64;
            (-(distance * distance) / (opts.kernel_width * opts.kernel_width)).exp()
        })
        .collect();
    let (_, mut coefficients) = weighted_ridge(&masks, &predictions, &locality, opts.ridge)?;

    // complexity limit: keep the top-k coefficients, refit on that subset
    if active.len() > opts.top_k {
        let mut order: Vec<usize> = (0..active.len()).collect();
        order.sort_by(|&a, &b| {
            coefficients[b]
                .abs()
                .total_cmp(&coefficients[a].abs())
                .then(a.cmp(&b))
        });
        let keep: Vec<usize> = order[..opts.top_k].to_vec();
        let sub_masks = masks.select(Axis(1), &keep);
        let (_, sub_coefficients) =
            weighted_ridge(&sub_masks, &predictions, &locality, opts.ridge)?;
        coefficients = vec![0.0; active.len()];
        for (pos, &a) in keep.iter().enumerate() {
            coefficients[a] = sub_coefficients[pos];
        }
    }
    for (a, &j) in active.iter().enumerate() {
        weights_out[j] = coefficients[a];
    }
    Ok(weights_out)
}

/// Applies the local explainer to every row and averages absolute weights
/// per feature over the rows where the feature is active.
pub fn lime_global(
    predictor: &dyn Predictor,
    data: &Array2<f64>,
    opts: &LimeOptions,
) -> Result<ImportanceVector> {
    if data.nrows() == 0 {
        return Err(CoreError::validation("empty dataset"));
    }
    let mut sums = vec![0.0; data.ncols()];
    let mut counts = vec![0usize; data.ncols()];
    for (i, row) in data.rows().into_iter().enumerate() {
        let local_opts = LimeOptions {
            seed: rng::mix(opts.seed, &[0x11f, i as u64]),
            ..opts.clone()
        };
        let local = lime_local(predictor, &row.to_owned(), &local_opts)?;
        for j in 0..data.ncols() {
            if row[j] != 0.0 {
                sums[j] += local[j].abs();
                counts[j] += 1;
            }
        }
    }
    let scores = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    Ok(ImportanceVector {
        scores,
        provenance: Provenance::LimeAggregated,
        normalized: false,
    })
}

/// Absolute scores rescaled to sum to one.
pub fn normalize_importance(v: &ImportanceVector) -> Result<ImportanceVector> {
    let total: f64 = v.scores.iter().map(|s| s.abs()).sum();
    if total == 0.0 {
        return Err(CoreError::validation(
            "cannot normalize an all-zero importance vector",
        ));
    }
    Ok(ImportanceVector {
        scores: v.scores.iter().map(|s| s.abs() / total).collect(),
        provenance: v.provenance,
        normalized: true,
    })
}

/// Feature indices in descending score order; ties break toward the lower
/// vocabulary index.
pub fn rank_features(v: &ImportanceVector) -> RankedList {
    let mut order: Vec<usize> = (0..v.scores.len()).collect();
    order.sort_by(|&a, &b| v.scores[b].total_cmp(&v.scores[a]).then(a.cmp(&b)));
    order
}

/// Sorted cumulative importance curve and the smallest prefix reaching 90%
/// of the total.
pub fn cumulative_distribution(v: &ImportanceVector) -> Result<(Vec<f64>, usize)> {
    if !v.normalized {
        return Err(CoreError::validation(
            "cumulative distribution expects a normalized vector",
        ));
    }
    let mut sorted = v.scores.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut curve = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for s in sorted {
        acc += s;
        curve.push(acc);
    }
    let n90 = curve
        .iter()
        .position(|&c| c >= 0.9)
        .map(|p| p + 1)
        .unwrap_or(curve.len());
    Ok((curve, n90))
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| v[x].total_cmp(&v[y]));
        let mut out = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && v[order[j + 1]] == v[order[i]] {
                j += 1;
            }
            let rank = (i + j) as f64 / 2.0 + 1.0;
            for &slot in &order[i..=j] {
                out[slot] = rank;
            }
            i = j + 1;
        }
        out
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LogisticTrainer, Representation, TrainSpec};
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::Rng;

    struct LinearBox {
        w: Vec<f64>,
        b: f64,
    }

    impl Predictor for LinearBox {
        fn predict(&self, data: &ModelData) -> Result<Vec<f64>> {
            let x = data.as_matrix()?;
            Ok((0..x.nrows())
                .map(|i| {
                    let z: f64 = (0..x.ncols()).map(|j| self.w[j] * x[(i, j)]).sum();
                    1.0 / (1.0 + (-(z + self.b)).exp())
                })
                .collect())
        }
        fn representation(&self) -> Representation {
            Representation::Collapsed
        }
    }

    struct ConstantBox(f64);
    impl Predictor for ConstantBox {
        fn predict(&self, data: &ModelData) -> Result<Vec<f64>> {
            Ok(vec![self.0; data.n_rows()])
        }
        fn representation(&self) -> Representation {
            Representation::Collapsed
        }
    }

    fn labelled_matrix(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = crate::rng::stream(seed, &[7]);
        let mut x = Array2::zeros((n, 4));
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = f64::from(rng.gen_bool(0.5));
            x[(i, 0)] = y[i]; // duplicates the label
            x[(i, 1)] = rng.gen_range(-1.0..1.0);
            x[(i, 2)] = rng.gen_range(-1.0..1.0);
            x[(i, 3)] = 0.0; // identically zero
        }
        (x, y)
    }

    #[test]
    fn constant_feature_has_exactly_zero_importance() {
        let (x, y) = labelled_matrix(120, 1);
        let trainer = LogisticTrainer::new(TrainSpec {
            epochs: 30,
            batch_size: 32,
            ..TrainSpec::default()
        });
        let model = trainer
            .fit_model(&ModelData::Matrix(x.clone()), &y, 0)
            .unwrap();
        let result = pfi(&model, &ModelData::Matrix(x), &y, &PfiOptions::default()).unwrap();
        assert_eq!(result.importance.scores[3], 0.0);
    }

    #[test]
    fn label_duplicating_feature_dominates_and_matches_oracle() {
        let (x, y) = labelled_matrix(120, 2);
        let trainer = LogisticTrainer::new(TrainSpec {
            epochs: 30,
            batch_size: 32,
            ..TrainSpec::default()
        });
        let data = ModelData::Matrix(x);
        let model = trainer.fit_model(&data, &y, 0).unwrap();
        let opts = PfiOptions {
            n_repeats: 3,
            seed: 5,
        };
        let result = pfi(&model, &data, &y, &opts).unwrap();

        // independent oracle: same permutations, straight-line recompute
        let scores = model.predict(&data).unwrap();
        let base = 1.0 - auc(&scores, &y).unwrap();
        for j in 0..4 {
            let mut deltas = Vec::new();
            for rep in 0..3 {
                let mut perm: Vec<usize> = (0..data.n_rows()).collect();
                let mut stream = crate::rng::stream(5, &[0x9f1, j as u64, rep as u64]);
                perm.shuffle(&mut stream);
                let permuted = data.permute_feature(j, &perm);
                let s = model.predict(&permuted).unwrap();
                deltas.push((1.0 - auc(&s, &y).unwrap()) - base);
            }
            let oracle = deltas.iter().sum::<f64>() / 3.0;
            assert!(
                (result.importance.scores[j] - oracle).abs() < 1e-12,
                "feature {j}"
            );
        }
        let ranking = rank_features(&result.importance);
        assert_eq!(ranking[0], 0, "label-duplicating feature must rank first");
    }

    #[test]
    fn independent_feature_importance_sits_within_noise() {
        let (x, y) = labelled_matrix(300, 3);
        let trainer = LogisticTrainer::new(TrainSpec {
            epochs: 30,
            batch_size: 64,
            ..TrainSpec::default()
        });
        let data = ModelData::Matrix(x);
        let model = trainer.fit_model(&data, &y, 0).unwrap();
        let result = pfi(
            &model,
            &data,
            &y,
            &PfiOptions {
                n_repeats: 8,
                seed: 2,
            },
        )
        .unwrap();
        // features 1 and 2 are independent of the label and of feature 0
        for j in [1usize, 2] {
            let bound = 2.0 * result.repeat_std[j];
            assert!(
                result.importance.scores[j].abs() <= bound.max(1e-3),
                "feature {j}: {} vs bound {bound}",
                result.importance.scores[j]
            );
        }
    }

    #[test]
    fn constant_predictor_yields_zero_lime_weights() {
        let predictor = ConstantBox(0.42);
        let x = Array1::from_vec(vec![1.0, 0.0, 2.0, 3.0]);
        let weights = lime_local(&predictor, &x, &LimeOptions::default()).unwrap();
        for w in weights {
            assert!(w.abs() < 1e-9, "weight {w}");
        }
    }

    #[test]
    fn linear_black_box_signs_and_ranks_recovered() {
        let w = vec![2.0, -1.5, 0.8, -0.4, 0.2, 0.0];
        let predictor = LinearBox {
            w: w.clone(),
            b: 0.1,
        };
        let x = Array1::from_vec(vec![1.0; 6]);
        let opts = LimeOptions {
            top_k: 6,
            seed: 3,
            ..LimeOptions::default()
        };
        let weights = lime_local(&predictor, &x, &opts).unwrap();
        for j in 0..5 {
            assert_eq!(
                weights[j].signum(),
                w[j].signum(),
                "sign mismatch at {j}: {weights:?}"
            );
        }
        let magnitude_truth: Vec<f64> = w.iter().map(|v| v.abs()).collect();
        let magnitude_est: Vec<f64> = weights.iter().map(|v| v.abs()).collect();
        let rho = spearman(&magnitude_truth, &magnitude_est);
        assert!(rho >= 0.9, "spearman {rho}");
    }

    #[test]
    fn decisive_feature_lands_in_top_k() {
        // feature 0 flips the prediction strongly; the rest are noise
        let mut w = vec![0.01; 20];
        w[0] = 6.0;
        let predictor = LinearBox { w, b: -3.0 };
        let x = Array1::from_vec(vec![1.0; 20]);
        let opts = LimeOptions {
            top_k: 5,
            seed: 4,
            ..LimeOptions::default()
        };
        let weights = lime_local(&predictor, &x, &opts).unwrap();
        assert!(weights[0] > 0.0);
        let nonzero = weights.iter().filter(|v| v.abs() > 0.0).count();
        assert!(nonzero <= 5);
    }

    #[test]
    fn lime_is_reproducible_bit_for_bit() {
        let predictor = LinearBox {
            w: vec![1.0, -2.0, 0.5],
            b: 0.0,
        };
        let x = Array1::from_vec(vec![1.0, 1.0, 1.0]);
        let opts = LimeOptions {
            seed: 9,
            ..LimeOptions::default()
        };
        let a = lime_local(&predictor, &x, &opts).unwrap();
        let b = lime_local(&predictor, &x, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lime_global_aggregates_absolute_weights() {
        let predictor = LinearBox {
            w: vec![1.0, -1.0],
            b: 0.0,
        };
        let single = Array2::from_shape_vec((1, 2), vec![1.0, 1.0]).unwrap();
        let opts = LimeOptions {
            seed: 7,
            ..LimeOptions::default()
        };
        let global = lime_global(&predictor, &single, &opts).unwrap();
        let local_opts = LimeOptions {
            seed: crate::rng::mix(7, &[0x11f, 0]),
            ..opts.clone()
        };
        let local = lime_local(&predictor, &single.row(0).to_owned(), &local_opts).unwrap();
        for j in 0..2 {
            assert!((global.scores[j] - local[j].abs()).abs() < 1e-12);
        }

        // a feature absent everywhere scores zero
        let two = Array2::from_shape_vec((2, 3), vec![1.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let predictor3 = LinearBox {
            w: vec![1.0, -1.0, 5.0],
            b: 0.0,
        };
        let global3 = lime_global(&predictor3, &two, &opts).unwrap();
        assert_eq!(global3.scores[2], 0.0);
    }

    #[test]
    fn lime_global_two_sample_fixture_matches_hand_mean() {
        let predictor = LinearBox {
            w: vec![1.0, -2.0],
            b: 0.0,
        };
        let data = Array2::from_shape_vec((2, 2), vec![1.0, 1.0, 1.0, 0.0]).unwrap();
        let opts = LimeOptions {
            seed: 13,
            ..LimeOptions::default()
        };
        let global = lime_global(&predictor, &data, &opts).unwrap();
        let mut expected = vec![0.0; 2];
        let mut counts = vec![0usize; 2];
        for i in 0..2 {
            let local_opts = LimeOptions {
                seed: crate::rng::mix(13, &[0x11f, i as u64]),
                ..opts.clone()
            };
            let local = lime_local(&predictor, &data.row(i).to_owned(), &local_opts).unwrap();
            for j in 0..2 {
                if data[(i, j)] != 0.0 {
                    expected[j] += local[j].abs();
                    counts[j] += 1;
                }
            }
        }
        for j in 0..2 {
            let mean = if counts[j] > 0 {
                expected[j] / counts[j] as f64
            } else {
                0.0
            };
            assert!((global.scores[j] - mean).abs() < 1e-12);
        }
    }

    fn unnormalized(scores: Vec<f64>) -> ImportanceVector {
        ImportanceVector {
            scores,
            provenance: Provenance::Pfi,
            normalized: false,
        }
    }

    #[test]
    fn normalization_examples() {
        let v = normalize_importance(&unnormalized(vec![2.0, 1.0, 1.0])).unwrap();
        assert_eq!(v.scores, vec![0.5, 0.25, 0.25]);
        let v = normalize_importance(&unnormalized(vec![-3.0, 1.0])).unwrap();
        assert_eq!(v.scores, vec![0.75, 0.25]);
        assert!(normalize_importance(&unnormalized(vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(
            rank_features(&unnormalized(vec![0.1, 0.9, 0.5])),
            vec![1, 2, 0]
        );
        assert_eq!(rank_features(&unnormalized(vec![0.3; 4])), vec![0, 1, 2, 3]);
    }

    #[test]
    fn cumulative_examples() {
        let v = ImportanceVector {
            scores: vec![0.5, 0.3, 0.2],
            provenance: Provenance::Pfi,
            normalized: true,
        };
        let (curve, n90) = cumulative_distribution(&v).unwrap();
        assert!((curve[0] - 0.5).abs() < 1e-12);
        assert!((curve[1] - 0.8).abs() < 1e-12);
        assert!((curve[2] - 1.0).abs() < 1e-12);
        assert_eq!(n90, 3);

        let one_hot = ImportanceVector {
            scores: vec![0.0, 1.0, 0.0],
            provenance: Provenance::Pfi,
            normalized: true,
        };
        assert_eq!(cumulative_distribution(&one_hot).unwrap().1, 1);

        let uniform = ImportanceVector {
            scores: vec![0.01; 100],
            provenance: Provenance::Pfi,
            normalized: true,
        };
        assert_eq!(cumulative_distribution(&uniform).unwrap().1, 90);
    }

    proptest! {
        #[test]
        fn normalized_vectors_sum_to_one(
            scores in proptest::collection::vec(-10.0f64..10.0, 2..40)
        ) {
            prop_assume!(scores.iter().any(|&s| s != 0.0));
            let v = normalize_importance(&unnormalized(scores)).unwrap();
            let total: f64 = v.scores.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let (curve, _) = cumulative_distribution(&v).unwrap();
            for pair in curve.windows(2) {
                prop_assert!(pair[1] >= pair[0] - 1e-15);
            }
            prop_assert!((curve.last().unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ranking_is_invariant_under_monotone_transforms(
            scores in proptest::collection::vec(0.0f64..5.0, 2..30)
        ) {
            let base = rank_features(&unnormalized(scores.clone()));
            let transformed: Vec<f64> = scores.iter().map(|&s| (s * 1.7).exp()).collect();
            let after = rank_features(&unnormalized(transformed));
            prop_assert_eq!(base, after);
        }
    }
}
