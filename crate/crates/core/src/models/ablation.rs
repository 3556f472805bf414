//! Feature-family ablation harness.

use serde::{Deserialize, Serialize};

use crate::ehr::FeatureFamily;
use crate::encode::FeatureVocabulary;
use crate::error::{CoreError, Result};
use crate::rng;

use super::{kfold_evaluate, MetricsReport, ModelData, Trainer};

use FeatureFamily::*;

/// The ten feature subsets evaluated by the ablation study: each family
/// alone, then cumulative combinations up to the complete feature set.
pub fn ablation_subsets() -> Vec<(&'static str, Vec<FeatureFamily>)> {
    vec![
        ("demographics", vec![Demographic]),
        ("diagnoses", vec![Hospitalisation]),
        ("prescriptions", vec![Prescription]),
        ("history_of_major_disease", vec![HistoryOfDisease]),
        ("blood_test_indicator", vec![BloodTestMarker]),
        ("blood_test_value", vec![BloodTestValue]),
        ("demographics_diagnoses", vec![Demographic, Hospitalisation]),
        (
            "demographics_diagnoses_history",
            vec![Demographic, Hospitalisation, HistoryOfDisease],
        ),
        (
            "demographics_diagnoses_history_prescriptions",
            vec![Demographic, Hospitalisation, HistoryOfDisease, Prescription],
        ),
        (
            "all_features",
            vec![
                Hospitalisation,
                Prescription,
                BloodTestMarker,
                BloodTestValue,
                Demographic,
                HistoryOfDisease,
            ],
        ),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub subset: String,
    pub n_features: usize,
    pub report: MetricsReport,
}

/// Runs the k-fold protocol once per feature subset. `data` must be aligned
/// to the vocabulary's feature order.
pub fn ablation_run(
    data: &ModelData,
    y: &[f64],
    vocab: &FeatureVocabulary,
    trainer: &dyn Trainer,
    k: usize,
    seed: u64,
) -> Result<Vec<AblationRow>> {
    if data.n_features() != vocab.n_features() {
        return Err(CoreError::validation(format!(
            "data has {} feature columns but the vocabulary lists {}",
            data.n_features(),
            vocab.n_features()
        )));
    }
    let mut rows = Vec::new();
    for (s, (name, families)) in ablation_subsets().into_iter().enumerate() {
        let idx = vocab.indices_for_families(&families);
        if idx.is_empty() {
            return Err(CoreError::validation(format!(
                "feature subset {name:?} is empty for this cohort"
            )));
        }
        let subset_data = data.select_features(&idx);
        let report = kfold_evaluate(trainer, &subset_data, y, k, rng::mix(seed, &[0xab, s as u64]))?;
        rows.push(AblationRow {
            subset: name.to_string(),
            n_features: idx.len(),
            report,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_ten_subsets_ending_with_all_features() {
        let subsets = ablation_subsets();
        assert_eq!(subsets.len(), 10);
        assert_eq!(subsets.last().unwrap().0, "all_features");
        assert_eq!(subsets.last().unwrap().1.len(), 6);
    }
}
