//! Synthetic cohort generator with planted structure.
//!
//! Dynamic features are grouped into latent clusters. Each subject draws one
//! gamma-distributed intensity per group and every feature in the group
//! emits events from a Poisson count at that shared intensity, so features
//! within a group are mutually correlated while groups stay independent.
//! With scale `theta = corr / (1 - corr)` the within-group correlation of
//! collapsed counts is `theta / (1 + theta)` independent of the gamma
//! shape, which leaves the shape free to calibrate cell sparsity.
//!
//! Outcome labels come from a logistic model on the log letent intensities;
//! the intercept is calibrated so the mean event probability matches the
//! configured rate. Feature generation and label generation use separate
//! seed streams, so two outcomes generated from the same seed share their
//! event history.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::ehr::{
    Cohort, EventRecord, EventSubtype, FeatureFamily, LabelClass, OutcomeKind, OutcomeLabel,
};
use crate::encode::{self, N_TIME_BINS};
use crate::error::{CoreError, Result};
use crate::rng;

/// Index day shared by all synthetic subjects.
pub const SYNTH_INDEX_DAY: i64 = 1000;

/// Probability that a subject carries any given history flag.
const HISTORY_FLAG_RATE: f64 = 0.12;

/// Mix of event subtypes among Event subjects.
const SUBTYPE_MIX: [(EventSubtype, f64); 4] = [
    (EventSubtype::SuddenDeath, 0.4),
    (EventSubtype::MyocardialInfarction, 0.3),
    (EventSubtype::Stroke, 0.2),
    (EventSubtype::NearFatalArrhythmia, 0.1),
];

/// How dynamic features map onto latent groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupAssignment {
    /// Feature `q` joins group `q mod G`; every group mixes families.
    Interleaved,
    /// Equal contiguous chunks in family order; lets a group (and its risk
    /// weight) sit inside one family.
    Contiguous,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_hospitalisation: usize,
    pub n_prescription: usize,
    pub n_blood_test: usize,
    pub n_history: usize,
    pub n_demographic: usize,
    /// Number of planted feature clusters over the dynamic features.
    pub n_latent_groups: usize,
    /// Target within-group Pearson correlation of collapsed counts.
    pub within_group_corr: f64,
    /// Fraction of Event labels.
    pub event_rate: f64,
    /// Target fraction of zero cells in the tensor encoding.
    pub sparsity_target: f64,
    /// Mean extra duplicate events per base event; raises sentence length
    /// without changing sparsity.
    pub burst_rate: f64,
    /// Per-group logistic risk coefficients (length `n_latent_groups`).
    pub risk_weights: Vec<f64>,
    pub group_assignment: GroupAssignment,
    pub outcome_kind: OutcomeKind,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 2000,
            n_hospitalisation: 318,
            n_prescription: 196,
            n_blood_test: 103,
            n_history: 10,
            n_demographic: 2,
            n_latent_groups: 10,
            within_group_corr: 0.6,
            event_rate: 0.3,
            sparsity_target: 0.989,
            burst_rate: 2.0,
            risk_weights: vec![1.5, 1.0, 0.6, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            group_assignment: GroupAssignment::Interleaved,
            outcome_kind: OutcomeKind::SuddenDeathComposite,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn n_dynamic(&self) -> usize {
        self.n_hospitalisation + self.n_prescription + self.n_blood_test
    }

    /// Vocabulary size the generated cohort will encode to (sex contributes
    /// two categorical tokens, age one).
    pub fn n_vocab_features(&self) -> usize {
        self.n_dynamic() + self.n_history + 3
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(CoreError::config("n_subjects must be positive"));
        }
        if !(0.0 < self.sparsity_target && self.sparsity_target < 1.0) {
            return Err(CoreError::config("sparsity_target must lie in (0, 1)"));
        }
        if !(0.0 < self.event_rate && self.event_rate < 1.0) {
            return Err(CoreError::config("event_rate must lie in (0, 1)"));
        }
        if !(0.0 < self.within_group_corr && self.within_group_corr < 1.0) {
            return Err(CoreError::config("within_group_corr must lie in (0, 1)"));
        }
        if self.burst_rate < 0.0 {
            return Err(CoreError::config("burst_rate must be nonnegative"));
        }
        if self.n_demographic != 2 {
            return Err(CoreError::config(
                "n_demographic is fixed at 2 (age and sex)",
            ));
        }
        if self.n_latent_groups == 0 || self.n_latent_groups > self.n_dynamic() {
            return Err(CoreError::config(
                "n_latent_groups must be in 1..=n_dynamic_features",
            ));
        }
        if self.risk_weights.len() != self.n_latent_groups {
            return Err(CoreError::config(format!(
                "risk_weights must list one coefficient per latent group ({} expected, {} given)",
                self.n_latent_groups,
                self.risk_weights.len()
            )));
        }
        self.gamma_shape().map(|_| ())
    }

    /// Gamma scale implied by the correlation target.
    fn gamma_scale(&self) -> f64 {
        self.within_group_corr / (1.0 - self.within_group_corr)
    }

    /// Gamma shape calibrated so the expected zero-cell fraction matches the
    /// sparsity target once the always-present static cells are accounted
    /// for.
    fn gamma_shape(&self) -> Result<f64> {
        let n_features = self.n_vocab_features() as f64;
        let total_cells = n_features * N_TIME_BINS as f64;
        let static_nonzero =
            (2.0 + self.n_history as f64 * HISTORY_FLAG_RATE) * N_TIME_BINS as f64;
        let target_nonzero = (1.0 - self.sparsity_target) * total_cells;
        let dynamic_budget = target_nonzero - static_nonzero;
        let dynamic_cells = self.n_dynamic() as f64 * N_TIME_BINS as f64;
        if dynamic_budget <= 0.0 {
            let achievable = 1.0 - static_nonzero / total_cells;
            return Err(CoreError::config(format!(
                "sparsity_target {} is below the static-feature floor; \
                 the sparsest achievable value for this feature mix is {:.4}",
                self.sparsity_target, achievable
            )));
        }
        let p_nonzero = dynamic_budget / dynamic_cells;
        if p_nonzero >= 1.0 {
            return Err(CoreError::config(
                "sparsity_target requires more nonzero cells than exist",
            ));
        }
        let theta = self.gamma_scale();
        Ok((1.0 / (1.0 - p_nonzero)).ln() / (1.0 + theta / N_TIME_BINS as f64).ln())
    }
}

/// One dynamic feature descriptor.
#[derive(Debug, Clone)]
struct DynFeature {
    family: FeatureFamily,
    code: String,
    group: usize,
}

fn dynamic_features(config: &SynthConfig) -> Vec<DynFeature> {
    let mut features = Vec::with_capacity(config.n_dynamic());
    for j in 0..config.n_hospitalisation {
        features.push(DynFeature {
            family: FeatureFamily::Hospitalisation,
            code: format!("c{j:03}"),
            group: 0,
        });
    }
    for j in 0..config.n_prescription {
        features.push(DynFeature {
            family: FeatureFamily::Prescription,
            code: format!("b{j:03}"),
            group: 0,
        });
    }
    let n_markers = config.n_blood_test.div_ceil(2);
    for j in 0..n_markers {
        features.push(DynFeature {
            family: FeatureFamily::BloodTestMarker,
            code: format!("lab{j:03}"),
            group: 0,
        });
    }
    for j in 0..config.n_blood_test - n_markers {
        features.push(DynFeature {
            family: FeatureFamily::BloodTestValue,
            code: format!("lab{j:03}"),
            group: 0,
        });
    }
    let n = features.len();
    let groups = config.n_latent_groups;
    for (q, feature) in features.iter_mut().enumerate() {
        feature.group = match config.group_assignment {
            GroupAssignment::Interleaved => q % groups,
            GroupAssignment::Contiguous => (q * groups / n).min(groups - 1),
        };
    }
    features
}

/// Planted structure emitted alongside the cohort for oracle tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Feature token -> planted latent group (dynamic features only).
    pub feature_group: BTreeMap<String, usize>,
    /// Subject ids in generation (and tensor row) order.
    pub subject_ids: Vec<String>,
    /// Per-subject latent intensity per group.
    pub activations: Vec<Vec<f64>>,
    /// Per-subject event probability under the planted logistic model.
    pub true_risk: Vec<f64>,
    /// Per-subject event subtype.
    pub sublabels: BTreeMap<String, EventSubtype>,
    /// Calibrated logistic intercept.
    pub intercept: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intercept such that the mean event probability equals `rate`.
fn calibrate_intercept(scores: &[f64], rate: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mean: f64 =
            scores.iter().map(|&s| sigmoid(mid + s)).sum::<f64>() / scores.len() as f64;
        if mean < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Generates a labelled cohort plus its planted ground truth.
pub fn generate_cohort(config: &SynthConfig) -> Result<(Cohort, GroundTruth)> {
    config.validate()?;
    let shape = config.gamma_shape()?;
    let theta = config.gamma_scale();
    let gamma = Gamma::new(shape, theta)
        .map_err(|e| CoreError::config(format!("invalid gamma parameters: {e}")))?;
    let lab_value = Normal::new(100.0, 15.0).expect("valid normal");
    let features = dynamic_features(config);

    let mut events: Vec<EventRecord> = Vec::new();
    let mut subject_ids = Vec::with_capacity(config.n_subjects);
    let mut activations = Vec::with_capacity(config.n_subjects);
    for i in 0..config.n_subjects {
        let id = format!("s{i:06}");
        let mut frng = rng::stream(config.seed, &[1, i as u64]);

        // demographics, pinned to the index day
        let age = frng.gen_range(50..=94) as f64;
        events.push(
            EventRecord::new(id.clone(), SYNTH_INDEX_DAY, FeatureFamily::Demographic, "age")
                .with_value(age),
        );
        let sex = if frng.gen_bool(0.55) { "sex_f" } else { "sex_m" };
        events.push(EventRecord::new(
            id.clone(),
            SYNTH_INDEX_DAY,
            FeatureFamily::Demographic,
            sex,
        ));
        for d in 0..config.n_history {
            if frng.gen_bool(HISTORY_FLAG_RATE) {
                events.push(EventRecord::new(
                    id.clone(),
                    SYNTH_INDEX_DAY,
                    FeatureFamily::HistoryOfDisease,
                    format!("dis{d:02}"),
                ));
            }
        }

        let u: Vec<f64> = (0..config.n_latent_groups)
            .map(|_| gamma.sample(&mut frng))
            .collect();
        for feature in &features {
            let intensity = u[feature.group];
            if intensity <= 1e-12 {
                continue;
            }
            let n_base = Poisson::new(intensity)
                .map(|p| p.sample(&mut frng) as usize)
                .unwrap_or(0);
            for _ in 0..n_base {
                let bin = frng.gen_range(0..N_TIME_BINS);
                let width: i64 = if bin == N_TIME_BINS - 1 { 5 } else { 60 };
                let delta = bin as i64 * 60 + frng.gen_range(0..width);
                let day = SYNTH_INDEX_DAY - delta;
                let extra = if config.burst_rate > 0.0 {
                    Poisson::new(config.burst_rate)
                        .map(|p| p.sample(&mut frng) as usize)
                        .unwrap_or(0)
                } else {
                    0
                };
                for _ in 0..=extra {
                    let mut event =
                        EventRecord::new(id.clone(), day, feature.family, feature.code.clone());
                    if feature.family == FeatureFamily::BloodTestValue {
                        event = event.with_value(lab_value.sample(&mut frng));
                    }
                    events.push(event);
                }
            }
        }
        subject_ids.push(id);
        activations.push(u);
    }

    // labels from a logistic model on log intensities
    let scores: Vec<f64> = activations
        .iter()
        .map(|u| {
            u.iter()
                .zip(&config.risk_weights)
                .map(|(&a, &w)| w * a.ln_1p())
                .sum()
        })
        .collect();
    let intercept = calibrate_intercept(&scores, config.event_rate);
    let mut labels = Vec::with_capacity(config.n_subjects);
    let mut true_risk = Vec::with_capacity(config.n_subjects);
    let mut sublabels = BTreeMap::new();
    for (i, id) in subject_ids.iter().enumerate() {
        let mut lrng = rng::stream(config.seed, &[2, config.outcome_kind.tag().len() as u64, i as u64]);
        let p = sigmoid(intercept + scores[i]);
        true_risk.push(p);
        let is_event = lrng.gen_bool(p);
        if is_event {
            let offset = lrng.gen_range(0..=180);
            let draw: f64 = lrng.gen();
            let mut acc = 0.0;
            let mut subtype = EventSubtype::SuddenDeath;
            for (candidate, weight) in SUBTYPE_MIX {
                acc += weight;
                if draw < acc {
                    subtype = candidate;
                    break;
                }
            }
            labels.push(OutcomeLabel {
                subject_id: id.clone(),
                outcome_kind: config.outcome_kind,
                label: LabelClass::Event,
                index_day: SYNTH_INDEX_DAY,
                event_day: Some(SYNTH_INDEX_DAY + offset),
            });
            sublabels.insert(id.clone(), subtype);
        } else {
            labels.push(OutcomeLabel {
                subject_id: id.clone(),
                outcome_kind: config.outcome_kind,
                label: LabelClass::Control,
                index_day: SYNTH_INDEX_DAY,
                event_day: None,
            });
            sublabels.insert(id.clone(), EventSubtype::NoEvent);
        }
    }

    let feature_group: BTreeMap<String, usize> = features
        .iter()
        .map(|f| {
            let probe = EventRecord::new("x", 0, f.family, f.code.clone());
            (encode::event_token(&probe), f.group)
        })
        .collect();
    let cohort = Cohort::new(events, labels);
    cohort.validate()?;
    Ok((
        cohort,
        GroundTruth {
            feature_group,
            subject_ids,
            activations,
            true_risk,
            sublabels,
            intercept,
        },
    ))
}

/// Summary statistics over the encoded forms of a cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortStats {
    pub n_subjects: usize,
    pub n_features: usize,
    pub sparsity: f64,
    pub sentence_min: usize,
    pub sentence_max: usize,
    pub sentence_mean: f64,
    pub sentence_sd: f64,
    pub event_rate: f64,
}

pub fn cohort_stats(cohort: &Cohort, kind: OutcomeKind) -> Result<CohortStats> {
    let labels = cohort.labels_for(kind);
    if labels.is_empty() {
        return Err(CoreError::validation("empty cohort"));
    }
    let vocab = encode::build_vocabulary(cohort, kind, false)?;
    let (tensor, _) = encode::encode_sparse(cohort, &vocab)?;
    let docs = encode::encode_sentences(cohort, kind);
    let lengths: Vec<usize> = docs.iter().map(|d| d.tokens.len()).collect();
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<usize>() as f64 / n;
    let var = lengths
        .iter()
        .map(|&l| {
            let d = l as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let events = labels
        .iter()
        .filter(|l| l.label == LabelClass::Event)
        .count();
    Ok(CohortStats {
        n_subjects: labels.len(),
        n_features: vocab.n_features(),
        sparsity: tensor.sparsity(),
        sentence_min: lengths.iter().copied().min().unwrap_or(0),
        sentence_max: lengths.iter().copied().max().unwrap_or(0),
        sentence_mean: mean,
        sentence_sd: var.sqrt(),
        event_rate: events as f64 / n,
    })
}
