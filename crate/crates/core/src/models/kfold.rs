//! Stratified k-fold evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng;

use super::{compute_metrics, Metrics, ModelData, Trainer};

/// Mean or standard deviation of the four headline metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub auc: f64,
}

/// Per-fold metrics with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mean: MetricsSummary,
    pub std: MetricsSummary,
    pub per_fold: Vec<Metrics>,
}

impl MetricsReport {
    fn from_folds(per_fold: Vec<Metrics>) -> Result<MetricsReport> {
        let n = per_fold.len() as f64;
        let pull = |f: &dyn Fn(&Metrics) -> f64| -> (f64, f64) {
            let values: Vec<f64> = per_fold.iter().map(f).collect();
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        for m in &per_fold {
            if m.auc.is_none() {
                return Err(CoreError::runtime("a fold produced single-class labels"));
            }
        }
        let (sens_m, sens_s) = pull(&|m: &Metrics| m.sensitivity);
        let (spec_m, spec_s) = pull(&|m: &Metrics| m.specificity);
        let (f1_m, f1_s) = pull(&|m: &Metrics| m.f1);
        let (auc_m, auc_s) = pull(&|m: &Metrics| m.auc.unwrap());
        Ok(MetricsReport {
            mean: MetricsSummary {
                sensitivity: sens_m,
                specificity: spec_m,
                f1: f1_m,
                auc: auc_m,
            },
            std: MetricsSummary {
                sensitivity: sens_s,
                specificity: spec_s,
                f1: f1_s,
                auc: auc_s,
            },
            per_fold,
        })
    }
}

/// Deterministic stratified folds: each class is shuffled with its own
/// derived stream and dealt round-robin, so folds partition the subjects
/// and keep class balance within one subject.
pub fn stratified_folds(y: &[f64], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(CoreError::config("k must be at least 2"));
    }
    let mut per_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &label) in y.iter().enumerate() {
        per_class[usize::from(label > 0.5)].push(i);
    }
    for (class, members) in per_class.iter().enumerate() {
        if members.len() < k {
            let name = if class == 1 { "event" } else { "control" };
            return Err(CoreError::validation(format!(
                "class {name:?} has {} subjects, fewer than k = {k}",
                members.len()
            )));
        }
    }
    let mut folds = vec![Vec::new(); k];
    for (class, members) in per_class.iter().enumerate() {
        let mut shuffled = members.clone();
        use rand::seq::SliceRandom;
        let mut rng = rng::stream(seed, &[0xf01d, class as u64]);
        shuffled.shuffle(&mut rng);
        for (pos, idx) in shuffled.into_iter().enumerate() {
            folds[pos % k].push(idx);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Trains on k-1 folds and scores the held-out fold, for each fold in turn.
/// Fold seeds derive from (seed, fold index), so reports are reproducible
/// bit for bit.
pub fn kfold_evaluate(
    trainer: &dyn Trainer,
    data: &ModelData,
    y: &[f64],
    k: usize,
    seed: u64,
) -> Result<MetricsReport> {
    if data.n_rows() != y.len() {
        return Err(CoreError::validation("rows and labels differ in length"));
    }
    let folds = stratified_folds(y, k, seed)?;
    let mut per_fold = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(other, _)| *other != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        let train_data = data.select_rows(&train_idx);
        let train_y: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
        let model = trainer.fit(&train_data, &train_y, rng::mix(seed, &[0xf07d, f as u64]))?;
        let test_data = data.select_rows(test_idx);
        let test_y: Vec<f64> = test_idx.iter().map(|&i| y[i]).collect();
        let scores = model.predict(&test_data)?;
        per_fold.push(compute_metrics(&scores, &test_y, 0.5)?);
    }
    MetricsReport::from_folds(per_fold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Predictor, Representation};
    use ndarray::Array2;

    struct ConstantTrainer(f64);
    struct ConstantModel(f64);

    impl Predictor for ConstantModel {
        fn predict(&self, data: &ModelData) -> Result<Vec<f64>> {
            Ok(vec![self.0; data.n_rows()])
        }
        fn representation(&self) -> Representation {
            Representation::Collapsed
        }
    }

    impl Trainer for ConstantTrainer {
        fn name(&self) -> &str {
            "constant"
        }
        fn fit(&self, _: &ModelData, _: &[f64], _: u64) -> Result<Box<dyn Predictor>> {
            Ok(Box::new(ConstantModel(self.0)))
        }
    }

    fn balanced_data(n: usize) -> (ModelData, Vec<f64>) {
        let x = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        let y: Vec<f64> = (0..n).map(|i| f64::from(i % 2 == 0)).collect();
        (ModelData::Matrix(x), y)
    }

    #[test]
    fn constant_predictor_reports_half_auc_zero_std() {
        let (data, y) = balanced_data(60);
        let report = kfold_evaluate(&ConstantTrainer(0.5), &data, &y, 10, 3).unwrap();
        assert_eq!(report.mean.auc, 0.5);
        assert_eq!(report.std.auc, 0.0);
    }

    #[test]
    fn folds_partition_the_subjects() {
        let (_, y) = balanced_data(53);
        let folds = stratified_folds(&y, 10, 1).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..53).collect::<Vec<_>>());
        for (i, a) in folds.iter().enumerate() {
            for b in folds.iter().skip(i + 1) {
                assert!(a.iter().all(|idx| !b.contains(idx)));
            }
        }
    }

    #[test]
    fn small_class_is_named_in_the_error() {
        let y = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let err = stratified_folds(&y, 3, 0).unwrap_err();
        assert!(err.to_string().contains("event"), "{err}");
    }

    #[test]
    fn report_is_reproducible_and_matches_reference_loop() {
        use crate::models::{LogisticTrainer, TrainSpec};
        let (data, y) = balanced_data(40);
        let trainer = LogisticTrainer::new(TrainSpec {
            epochs: 3,
            ..TrainSpec::default()
        });
        let a = kfold_evaluate(&trainer, &data, &y, 4, 9).unwrap();
        let b = kfold_evaluate(&trainer, &data, &y, 4, 9).unwrap();
        assert_eq!(a, b);

        // reference: the same protocol written as a plain loop
        let folds = stratified_folds(&y, 4, 9).unwrap();
        let mut reference = Vec::new();
        for (f, test_idx) in folds.iter().enumerate() {
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(o, _)| *o != f)
                .flat_map(|(_, fold)| fold.iter().copied())
                .collect();
            let model = trainer
                .fit(
                    &data.select_rows(&train_idx),
                    &train_idx.iter().map(|&i| y[i]).collect::<Vec<_>>(),
                    crate::rng::mix(9, &[0xf07d, f as u64]),
                )
                .unwrap();
            let scores = model.predict(&data.select_rows(test_idx)).unwrap();
            let test_y: Vec<f64> = test_idx.iter().map(|&i| y[i]).collect();
            reference.push(compute_metrics(&scores, &test_y, 0.5).unwrap());
        }
        assert_eq!(a.per_fold, reference);
    }
}
