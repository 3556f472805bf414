//! Planted-signal checks that cross module boundaries: synthetic cohorts
//! feed the encoders, the encoders feed the trainers, and the planted risk
//! must be recoverable.

use concord_core::ehr::{LabelClass, OutcomeKind};
use concord_core::encode;
use concord_core::models::{
    ablation_run, kfold_evaluate, DeepPatientTrainer, GruConfig, GruTrainer, LogisticTrainer,
    ModelData, Representation, TrainSpec,
};
use concord_core::synth::{generate_cohort, GroupAssignment, SynthConfig};

fn signal_config() -> SynthConfig {
    SynthConfig {
        n_subjects: 500,
        n_hospitalisation: 12,
        n_prescription: 12,
        n_blood_test: 6,
        n_history: 0,
        n_latent_groups: 5,
        within_group_corr: 0.7,
        event_rate: 0.3,
        sparsity_target: 0.7,
        burst_rate: 0.0,
        risk_weights: vec![6.0, 0.0, 0.0, 0.0, 0.0],
        seed: 21,
        ..SynthConfig::default()
    }
}

fn encoded(config: &SynthConfig) -> (ModelData, ModelData, Vec<f64>) {
    let (cohort, _) = generate_cohort(config).unwrap();
    let vocab = encode::build_vocabulary(&cohort, config.outcome_kind, false).unwrap();
    let (tensor, _) = encode::encode_sparse(&cohort, &vocab).unwrap();
    let collapsed = encode::collapse_time(&tensor, &vocab);
    let temporal = tensor.to_dense_temporal();
    let y: Vec<f64> = cohort
        .labels_for(config.outcome_kind)
        .iter()
        .map(|l| f64::from(l.label == LabelClass::Event))
        .collect();
    (
        ModelData::Matrix(collapsed),
        ModelData::Temporal(temporal),
        y,
    )
}

#[test]
fn recurrent_model_recovers_planted_signal() {
    let config = signal_config();
    let (collapsed, temporal, y) = encoded(&config);
    // a fold holds 250 training subjects; small batches keep the optimizer
    // step count comparable to a full-scale run
    let spec = TrainSpec {
        epochs: 40,
        batch_size: 32,
        ..TrainSpec::default()
    };

    // construction validity: the signal is recoverable by a logistic oracle
    let logistic = LogisticTrainer::new(spec.clone());
    let oracle = kfold_evaluate(&logistic, &collapsed, &y, 2, 3).unwrap();
    assert!(
        oracle.mean.auc >= 0.9,
        "logistic oracle auc {}",
        oracle.mean.auc
    );

    let gru = GruTrainer::new(spec, GruConfig::default(), Representation::Temporal);
    let report = kfold_evaluate(&gru, &temporal, &y, 2, 3).unwrap();
    assert!(report.mean.auc >= 0.9, "gru auc {}", report.mean.auc);
}

#[test]
fn label_shuffled_recurrent_model_is_a_coin_flip() {
    use rand::seq::SliceRandom;
    let config = SynthConfig {
        n_subjects: 2000,
        ..signal_config()
    };
    let (cohort, _) = generate_cohort(&config).unwrap();
    let vocab = encode::build_vocabulary(&cohort, config.outcome_kind, true).unwrap();
    let docs = encode::encode_sentences(&cohort, config.outcome_kind);
    let bow = encode::bow_matrix(&docs, &vocab).unwrap();
    let mut y: Vec<f64> = cohort
        .labels_for(config.outcome_kind)
        .iter()
        .map(|l| f64::from(l.label == LabelClass::Event))
        .collect();
    let mut rng = concord_core::rng::stream(1234, &[0]);
    y.shuffle(&mut rng);

    let gru = GruTrainer::new(
        TrainSpec::default(),
        GruConfig::default(),
        Representation::Bow,
    );
    let report = kfold_evaluate(&gru, &ModelData::Matrix(bow), &y, 2, 8).unwrap();
    assert!(
        (report.mean.auc - 0.5).abs() <= 0.03,
        "shuffled-label auc {}",
        report.mean.auc
    );
}

#[test]
fn deep_patient_tracks_the_raw_input_classifier() {
    let config = SynthConfig {
        n_subjects: 400,
        ..signal_config()
    };
    let (collapsed, _, y) = encoded(&config);

    // enough optimizer steps for both paths to converge on 400 subjects
    let spec = TrainSpec {
        epochs: 60,
        batch_size: 64,
        ..TrainSpec::default()
    };
    let raw = LogisticTrainer::new(spec.clone());
    let raw_report = kfold_evaluate(&raw, &collapsed, &y, 3, 5).unwrap();

    let deep = DeepPatientTrainer {
        spec,
        widths: vec![32, 32, 32],
        ..DeepPatientTrainer::default()
    };
    let deep_report = kfold_evaluate(&deep, &collapsed, &y, 3, 5).unwrap();
    let gap = (deep_report.mean.auc - raw_report.mean.auc).abs();
    assert!(
        gap <= 0.05,
        "deep patient auc {} vs raw {}",
        deep_report.mean.auc,
        raw_report.mean.auc
    );
}

#[test]
fn ablation_separates_signal_bearing_families() {
    // contiguous groups: chunk 0 = hospitalisations (8 features), chunks
    // 1..=4 = prescriptions, chunk 5 = blood tests; only prescription
    // groups carry risk weight.
    let config = SynthConfig {
        n_subjects: 1000,
        n_hospitalisation: 8,
        n_prescription: 32,
        n_blood_test: 8,
        n_history: 2,
        n_latent_groups: 6,
        within_group_corr: 0.6,
        sparsity_target: 0.8,
        burst_rate: 0.0,
        risk_weights: vec![0.0, 2.5, 2.5, 2.5, 2.5, 0.0],
        group_assignment: GroupAssignment::Contiguous,
        seed: 17,
        ..SynthConfig::default()
    };
    let (cohort, _) = generate_cohort(&config).unwrap();
    let vocab = encode::build_vocabulary(&cohort, config.outcome_kind, false).unwrap();
    let (tensor, _) = encode::encode_sparse(&cohort, &vocab).unwrap();
    let collapsed = ModelData::Matrix(encode::collapse_time(&tensor, &vocab));
    let y: Vec<f64> = cohort
        .labels_for(config.outcome_kind)
        .iter()
        .map(|l| f64::from(l.label == LabelClass::Event))
        .collect();

    let trainer = LogisticTrainer::new(TrainSpec {
        epochs: 30,
        batch_size: 128,
        ..TrainSpec::default()
    });
    let rows = ablation_run(&collapsed, &y, &vocab, &trainer, 3, 11).unwrap();
    assert_eq!(rows.len(), 10);

    let auc_of = |name: &str| -> f64 {
        rows.iter()
            .find(|r| r.subset == name)
            .unwrap_or_else(|| panic!("missing subset {name}"))
            .report
            .mean
            .auc
    };
    let rx = auc_of("prescriptions");
    let demo = auc_of("demographics");
    assert!(
        rx >= demo + 0.1,
        "prescriptions {rx} vs demographics {demo}"
    );
    let all = auc_of("all_features");
    let best = rows
        .iter()
        .map(|r| r.report.mean.auc)
        .fold(f64::MIN, f64::max);
    assert!(all >= best - 0.02, "all {all} vs best {best}");
}

#[test]
fn vocabulary_build_is_deterministic_over_reruns() {
    let config = signal_config();
    let (cohort, _) = generate_cohort(&config).unwrap();
    let a = encode::build_vocabulary(&cohort, OutcomeKind::SuddenDeathComposite, true).unwrap();
    let b = encode::build_vocabulary(&cohort, OutcomeKind::SuddenDeathComposite, true).unwrap();
    assert_eq!(a.feature_tokens(), b.feature_tokens());
}
