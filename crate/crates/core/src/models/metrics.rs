//! Confusion metrics and rank-based AUC.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Sensitivity, specificity and F1 at a fixed threshold, plus AUC. AUC is
/// absent when only one class is present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

fn validate_inputs(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(CoreError::validation(
            "scores and labels must be non-empty and of equal length",
        ));
    }
    for &s in scores {
        if !(0.0..=1.0).contains(&s) {
            return Err(CoreError::validation(format!(
                "scores must lie in [0, 1], got {s}"
            )));
        }
    }
    for &l in labels {
        if l != 0.0 && l != 1.0 {
            return Err(CoreError::validation(format!(
                "labels must be 0 or 1, got {l}"
            )));
        }
    }
    Ok(())
}

/// Area under the ROC curve by the rank statistic, with midranks for tied
/// scores. Requires both classes.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    validate_inputs(scores, labels)?;
    let n = scores.len();
    let pos = labels.iter().filter(|&&l| l == 1.0).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(CoreError::validation(
            "AUC is undefined when only one class is present",
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &slot in &order[i..=j] {
            ranks[slot] = midrank;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = (0..n).filter(|&i| labels[i] == 1.0).map(|i| ranks[i]).sum();
    let p = pos as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Confusion metrics at `threshold` (score >= threshold predicts the event
/// class) together with midrank AUC; AUC is `None` for single-class labels.
pub fn compute_metrics(scores: &[f64], labels: &[f64], threshold: f64) -> Result<Metrics> {
    validate_inputs(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fal_n) = (0.0, 0.0, 0.0, 0.0);
    for (&s, &l) in scores.iter().zip(labels) {
        let predicted = s >= threshold;
        match (predicted, l == 1.0) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, false) => tn += 1.0,
            (false, true) => fal_n += 1.0,
        }
    }
    let sensitivity = if tp + fal_n > 0.0 { tp / (tp + fal_n) } else { 0.0 };
    let specificity = if tn + fp > 0.0 { tn / (tn + fp) } else { 0.0 };
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let f1 = if precision + sensitivity > 0.0 {
        2.0 * precision * sensitivity / (precision + sensitivity)
    } else {
        0.0
    };
    Ok(Metrics {
        sensitivity,
        specificity,
        f1,
        auc: auc(scores, labels).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_separation_scores_one() {
        let m = compute_metrics(&[0.9, 0.1], &[1.0, 0.0], 0.5).unwrap();
        assert_eq!(m.sensitivity, 1.0);
        assert_eq!(m.specificity, 1.0);
        assert_eq!(m.f1, 1.0);
        assert_eq!(m.auc, Some(1.0));
    }

    #[test]
    fn all_tied_scores_give_half_auc() {
        let scores = vec![0.5; 6];
        let labels = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class_auc_is_an_error_but_confusion_survives() {
        let scores = vec![0.6, 0.7];
        let labels = vec![1.0, 1.0];
        assert!(auc(&scores, &labels).is_err());
        let m = compute_metrics(&scores, &labels, 0.5).unwrap();
        assert_eq!(m.sensitivity, 1.0);
        assert_eq!(m.auc, None);
    }

    /// O(n^2) concordance count: ties count half.
    pub(crate) fn auc_concordance_oracle(scores: &[f64], labels: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1.0 && labels[j] == 0.0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_matches_pairwise_concordance_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::stream(99, &[1]);
        let scores: Vec<f64> = (0..200).map(|_| (rng.gen::<f64>() * 8.0).round() / 8.0).collect();
        let labels: Vec<f64> = (0..200).map(|_| f64::from(rng.gen_bool(0.4))).collect();
        let fast = auc(&scores, &labels).unwrap();
        let slow = auc_concordance_oracle(&scores, &labels);
        assert!((fast - slow).abs() < 1e-12, "fast {fast} slow {slow}");
    }

    proptest! {
        #[test]
        fn auc_is_invariant_under_monotone_transforms(
            raw in proptest::collection::vec((0.0f64..1.0, proptest::bool::ANY), 8..60)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s).collect();
            let labels: Vec<f64> = raw.iter().map(|(_, l)| f64::from(*l)).collect();
            prop_assume!(labels.iter().any(|&l| l == 1.0) && labels.iter().any(|&l| l == 0.0));
            // x -> x^3 scaled back into [0,1] keeps order
            let transformed: Vec<f64> = scores.iter().map(|&s| s.powi(3)).collect();
            let a = auc(&scores, &labels).unwrap();
            let b = auc(&transformed, &labels).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn threshold_side_transforms_keep_confusion(
            raw in proptest::collection::vec((0.0f64..1.0, proptest::bool::ANY), 8..60)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s).collect();
            let labels: Vec<f64> = raw.iter().map(|(_, l)| f64::from(*l)).collect();
            // strictly monotone map preserving the 0.5 side: x/2 + x^2/2 has
            // fixed point 0.5? not quite; use x -> (x + x^2)/2 mapped through
            // a piecewise rescale that fixes 0.5 instead.
            let transformed: Vec<f64> = scores
                .iter()
                .map(|&s| if s >= 0.5 { 0.5 + (s - 0.5).powi(2) } else { 0.5 - (0.5 - s).sqrt().min(0.5) })
                .collect();
            let a = compute_metrics(&scores, &labels, 0.5).unwrap();
            let b = compute_metrics(&transformed, &labels, 0.5).unwrap();
            prop_assert!((a.sensitivity - b.sensitivity).abs() < 1e-12);
            prop_assert!((a.specificity - b.specificity).abs() < 1e-12);
        }
    }
}
