//! Shared pipeline machinery: the encoded run context and the train /
//! interpret / cluster / consensus / ablation stages built on it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use concord_core::cocluster::{
    bootstrap_stability, choose_k, cluster_connectivity, patient_cluster_tag_distribution,
    pearson_corr_matrix, spectral_cocluster,
};
use concord_core::consensus::{agreement_matrices, top_k_table, AgreementMatrix, ModelRanking};
use concord_core::ehr::{Cohort, LabelClass, OutcomeKind};
use concord_core::encode::{self, FeatureVocabulary};
use concord_core::interpret::{
    cumulative_distribution, normalize_importance, pfi, rank_features, ImportanceVector,
    PfiOptions,
};
use concord_core::models::{
    ablation_run, kfold_evaluate, DeepPatientTrainer, GruConfig, GruTrainer, LogisticTrainer,
    MetricsReport, ModelData, Predictor, Representation, Trainer,
};
use concord_core::rng;
use concord_core::synth::GroundTruth;

use crate::config::RunConfig;
use crate::error::{CliError, Result, StageContext};
use crate::io;

/// Which native model a name refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Logistic,
    GruSparse,
    GruBow,
    DeepPatient,
}

impl ModelKind {
    pub fn parse(name: &str) -> Result<ModelKind> {
        match name {
            "logistic" => Ok(ModelKind::Logistic),
            "gru_sparse" => Ok(ModelKind::GruSparse),
            "gru_bow" => Ok(ModelKind::GruBow),
            "deep_patient" => Ok(ModelKind::DeepPatient),
            other => Err(CliError::usage(format!(
                "unknown model {other:?}; expected logistic, gru_sparse, gru_bow or deep_patient"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::GruSparse => "gru_sparse",
            ModelKind::GruBow => "gru_bow",
            ModelKind::DeepPatient => "deep_patient",
        }
    }
}

/// Everything the stages need, encoded once.
pub struct RunContext {
    pub config: RunConfig,
    pub outcome: OutcomeKind,
    pub cohort: Cohort,
    pub ground_truth: Option<GroundTruth>,
    pub vocab: FeatureVocabulary,
    pub collapsed: ModelData,
    pub temporal: ModelData,
    pub bow: ModelData,
    pub y: Vec<f64>,
    pub out_dir: PathBuf,
}

impl RunContext {
    /// Loads the cohort, builds both vocabularies and all three encoded
    /// forms, and writes the encode-stage artifacts.
    pub fn prepare(config: RunConfig) -> Result<RunContext> {
        let outcome = config.outcome()?;
        let cohort = io::read_cohort(config.events_path()?, config.labels_path()?)
            .stage("ingest")?;
        let ground_truth = match &config.paths.ground_truth {
            Some(path) => Some(io::read_ground_truth(path).stage("ingest")?),
            None => None,
        };
        let out_dir = config.out_dir()?.to_path_buf();
        io::ensure_dir(&out_dir)?;

        let vocab = encode::build_vocabulary(&cohort, outcome, false).stage("encode")?;
        let vocab_lang = encode::build_vocabulary(&cohort, outcome, true).stage("encode")?;
        let (tensor, encode_report) = encode::encode_sparse(&cohort, &vocab).stage("encode")?;
        let docs = encode::encode_sentences(&cohort, outcome);
        let collapsed = encode::collapse_time(&tensor, &vocab);
        let temporal = tensor.to_dense_temporal();
        let bow = encode::bow_matrix(&docs, &vocab_lang).stage("encode")?;
        let y: Vec<f64> = cohort
            .labels_for(outcome)
            .iter()
            .map(|l| f64::from(l.label == LabelClass::Event))
            .collect();
        if encode_report.dropped_tokens > 0 {
            eprintln!(
                "encode: dropped {} events with out-of-vocabulary tokens",
                encode_report.dropped_tokens
            );
        }

        let tag = outcome.tag();
        let mut tensor_buf = Vec::new();
        tensor.write_to(&mut tensor_buf).stage("encode")?;
        std::fs::write(out_dir.join(format!("tensor_{tag}.txt")), tensor_buf)?;
        io::write_vocabulary(&out_dir.join(format!("vocab_{tag}.txt")), &vocab_lang)?;
        io::write_lines(
            &out_dir.join(format!("subjects_{tag}.txt")),
            &tensor.subject_ids.iter().cloned().collect::<Vec<_>>(),
        )?;
        io::write_sentences(&out_dir.join(format!("sentences_{tag}.txt")), &docs)?;

        let stats = concord_core::synth::cohort_stats(&cohort, outcome).stage("encode")?;
        io::write_table(
            &out_dir.join(format!("cohort_stats_{tag}.csv")),
            "n_subjects,n_features,sparsity,sentence_min,sentence_max,sentence_mean,sentence_sd,event_rate",
            &[vec![
                stats.n_subjects.to_string(),
                stats.n_features.to_string(),
                io::fmt6(stats.sparsity),
                stats.sentence_min.to_string(),
                stats.sentence_max.to_string(),
                io::fmt6(stats.sentence_mean),
                io::fmt6(stats.sentence_sd),
                io::fmt6(stats.event_rate),
            ]],
        )?;

        Ok(RunContext {
            config,
            outcome,
            cohort,
            ground_truth,
            vocab,
            collapsed: ModelData::Matrix(collapsed),
            temporal: ModelData::Temporal(temporal),
            bow: ModelData::Matrix(bow),
            y,
            out_dir,
        })
    }

    pub fn models(&self) -> Result<Vec<ModelKind>> {
        self.config
            .run
            .models
            .iter()
            .map(|name| ModelKind::parse(name))
            .collect()
    }

    pub fn trainer_for(&self, kind: ModelKind) -> Box<dyn Trainer> {
        let spec = self.config.train.spec();
        match kind {
            ModelKind::Logistic => Box::new(LogisticTrainer::new(spec)),
            ModelKind::GruSparse => Box::new(GruTrainer::new(
                spec,
                GruConfig {
                    units: self.config.gru.units,
                    dropout: self.config.gru.dropout,
                },
                Representation::Temporal,
            )),
            ModelKind::GruBow => Box::new(GruTrainer::new(
                spec,
                GruConfig {
                    units: self.config.gru.units,
                    dropout: self.config.gru.dropout,
                },
                Representation::Bow,
            )),
            ModelKind::DeepPatient => Box::new(DeepPatientTrainer {
                spec,
                widths: self.config.deep_patient.widths.clone(),
                corruption: self.config.deep_patient.corruption,
                head_hidden: self.config.deep_patient.head_hidden.clone(),
            }),
        }
    }

    pub fn data_for(&self, kind: ModelKind) -> &ModelData {
        match kind {
            ModelKind::Logistic | ModelKind::DeepPatient => &self.collapsed,
            ModelKind::GruSparse => &self.temporal,
            ModelKind::GruBow => &self.bow,
        }
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir
            .join(format!("{name}_{}.csv", self.outcome.tag()))
    }

    fn family_tags(&self) -> BTreeMap<String, String> {
        (0..self.vocab.n_features())
            .map(|j| {
                (
                    self.vocab.token_at(j).unwrap().to_string(),
                    self.vocab.family_at(j).unwrap().tag().to_string(),
                )
            })
            .collect()
    }
}

/// Runs the k-fold protocol for each configured model and writes the
/// metrics table.
pub fn train_stage(ctx: &RunContext) -> Result<Vec<(String, MetricsReport)>> {
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for kind in ctx.models()? {
        eprintln!("train: {} ({}-fold)", kind.name(), ctx.config.train.folds);
        let trainer = ctx.trainer_for(kind);
        let report = kfold_evaluate(
            trainer.as_ref(),
            ctx.data_for(kind),
            &ctx.y,
            ctx.config.train.folds,
            rng::mix(ctx.config.run.seed, &[0x7a, kind as u64]),
        )
        .stage("train")?;
        table.push(vec![
            kind.name().to_string(),
            io::fmt6(report.mean.sensitivity),
            io::fmt6(report.std.sensitivity),
            io::fmt6(report.mean.specificity),
            io::fmt6(report.std.specificity),
            io::fmt6(report.mean.f1),
            io::fmt6(report.std.f1),
            io::fmt6(report.mean.auc),
            io::fmt6(report.std.auc),
        ]);
        rows.push((kind.name().to_string(), report));
    }
    io::write_table(
        &ctx.artifact("metrics"),
        "model,sensitivity_mean,sensitivity_std,specificity_mean,specificity_std,f1_mean,f1_std,auc_mean,auc_std",
        &table,
    )?;
    Ok(rows)
}

/// Feature importance per model: a final model trained on the full cohort,
/// explained with permutation importance, normalized, ranked and summarized
/// by the cumulative curve.
pub fn interpret_stage(ctx: &RunContext) -> Result<Vec<ModelRanking>> {
    let mut rankings = Vec::new();
    let mut cumulative_rows = Vec::new();
    let mut n90_rows = Vec::new();
    let tokens: Vec<&str> = ctx.vocab.feature_tokens();
    for kind in ctx.models()? {
        eprintln!("interpret: {}", kind.name());
        let trainer = ctx.trainer_for(kind);
        let data = ctx.data_for(kind);
        let model = trainer
            .fit(
                data,
                &ctx.y,
                rng::mix(ctx.config.run.seed, &[0xf1, kind as u64]),
            )
            .stage("interpret")?;
        let importance = model_importance(ctx, kind, model.as_ref(), data).stage("interpret")?;
        io::write_importance(
            &ctx.out_dir
                .join(format!("importance_{}_{}.txt", kind.name(), ctx.outcome.tag())),
            &tokens,
            &importance.scores,
        )?;
        let normalized = normalize_importance(&importance).stage("interpret")?;
        let ranked = rank_features(&normalized);
        let (curve, n90) = cumulative_distribution(&normalized).stage("interpret")?;
        for (pos, value) in curve.iter().enumerate() {
            cumulative_rows.push(vec![
                kind.name().to_string(),
                (pos + 1).to_string(),
                io::fmt6(*value),
            ]);
        }
        n90_rows.push(vec![kind.name().to_string(), n90.to_string()]);
        rankings.push(ModelRanking {
            name: kind.name().to_string(),
            tokens: ranked
                .iter()
                .map(|&j| tokens[j].to_string())
                .collect(),
        });
    }
    io::write_table(
        &ctx.artifact("cumulative"),
        "model,rank,cumulative_importance",
        &cumulative_rows,
    )?;
    io::write_table(&ctx.artifact("n90"), "model,features_to_90pct", &n90_rows)?;
    Ok(rankings)
}

/// Importance for one fitted model over its own representation, aligned to
/// the feature vocabulary (reserved slots dropped).
fn model_importance(
    ctx: &RunContext,
    kind: ModelKind,
    model: &dyn Predictor,
    data: &ModelData,
) -> concord_core::Result<ImportanceVector> {
    let opts = PfiOptions {
        n_repeats: ctx.config.interpret.pfi_repeats,
        seed: rng::mix(ctx.config.run.seed, &[0x9f, kind as u64]),
    };
    let result = pfi(model, data, &ctx.y, &opts)?;
    let mut importance = result.importance;
    if matches!(kind, ModelKind::GruBow) {
        // bag-of-words columns include the [UNK] slot; drop it
        importance.scores.truncate(ctx.vocab.n_features());
    }
    Ok(importance)
}

pub struct ClusterStage {
    pub chosen_k: usize,
    pub stability: Option<f64>,
    pub token_labels: BTreeMap<String, usize>,
}

/// Co-clusters the collapsed matrix, with elbow-based selection when k is
/// not fixed, then writes assignments, diagnostics, stability, connectivity
/// and the patient-cluster event distribution.
pub fn cluster_stage(ctx: &RunContext) -> Result<ClusterStage> {
    let ModelData::Matrix(collapsed) = &ctx.collapsed else {
        unreachable!("collapsed data is a matrix");
    };
    let section = &ctx.config.cluster;
    let seed = rng::mix(ctx.config.run.seed, &[0xcc]);
    let max_k = collapsed.nrows().min(collapsed.ncols());
    let chosen_k = if section.k > 0 {
        section.k
    } else {
        let hi = section.k_max.min(max_k);
        let lo = section.k_min.min(hi).max(1);
        eprintln!("cluster: selecting k over {lo}..={hi}");
        let selection = choose_k(collapsed, lo..=hi, seed).stage("cluster")?;
        let rows: Vec<Vec<String>> = selection
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.k.to_string(),
                    io::fmt6(r.wcss),
                    format!("{:e}", r.wcss_normalized),
                    r.singleton_feature_clusters.to_string(),
                    r.nonempty_feature_clusters.to_string(),
                    r.nonempty_patient_clusters.to_string(),
                ]
            })
            .collect();
        io::write_table(
            &ctx.artifact("cluster_diagnostics"),
            "k,wcss,wcss_normalized,singleton_feature_clusters,nonempty_feature_clusters,nonempty_patient_clusters",
            &rows,
        )?;
        selection.chosen
    };
    eprintln!("cluster: co-clustering at k = {chosen_k}");
    let model = spectral_cocluster(collapsed, chosen_k, seed).stage("cluster")?;
    let tokens: Vec<&str> = ctx.vocab.feature_tokens();
    io::write_clusters(
        &ctx.out_dir
            .join(format!("clusters_features_{}.txt", ctx.outcome.tag())),
        &tokens,
        &model.feature_labels,
    )?;

    let stability = if section.bootstrap >= 2 {
        eprintln!("cluster: bootstrap stability over {} replicates", section.bootstrap);
        let report = bootstrap_stability(
            collapsed,
            chosen_k,
            section.bootstrap,
            rng::mix(ctx.config.run.seed, &[0xcd]),
            &ctx.config.rbo.params(),
        )
        .stage("cluster")?;
        io::write_table(
            &ctx.artifact("stability"),
            "mean_similarity,n_pairs,skipped_replicates",
            &[vec![
                io::fmt6(report.mean_similarity),
                report.n_pairs.to_string(),
                report.skipped_replicates.to_string(),
            ]],
        )?;
        Some(report.mean_similarity)
    } else {
        None
    };

    let (corr, _) = pearson_corr_matrix(collapsed);
    let edges = cluster_connectivity(&corr, &model.feature_labels, section.connectivity_threshold)
        .stage("cluster")?;
    io::write_table(
        &ctx.artifact("connectivity"),
        "cluster_a,cluster_b,n_pairs",
        &edges
            .iter()
            .map(|e| {
                vec![
                    e.cluster_a.to_string(),
                    e.cluster_b.to_string(),
                    e.n_pairs.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;

    let tags = io::sublabel_tags(&ctx.cohort, ctx.outcome, ctx.ground_truth.as_ref());
    let distribution = patient_cluster_tag_distribution(&model.patient_labels, &tags)
        .stage("cluster")?;
    let mut rows = Vec::new();
    for cluster_row in &distribution {
        for (tag, count) in &cluster_row.counts {
            rows.push(vec![
                cluster_row.cluster.to_string(),
                tag.clone(),
                count.to_string(),
                io::fmt6(cluster_row.proportions[tag]),
            ]);
        }
    }
    io::write_table(
        &ctx.artifact("cluster_events"),
        "cluster,sublabel,count,proportion",
        &rows,
    )?;

    let token_labels: BTreeMap<String, usize> = tokens
        .iter()
        .zip(&model.feature_labels)
        .map(|(&t, &l)| (t.to_string(), l))
        .collect();
    Ok(ClusterStage {
        chosen_k,
        stability,
        token_labels,
    })
}

/// Registered external rankings found under `out_dir/external`.
pub fn external_rankings(ctx: &RunContext) -> Result<Vec<ModelRanking>> {
    let dir = ctx.out_dir.join("external");
    let mut rankings = Vec::new();
    if !dir.is_dir() {
        return Ok(rankings);
    }
    let suffix = format!(".importance_{}.txt", ctx.outcome.tag());
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(&suffix)))
        .collect();
    entries.sort();
    for path in entries {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_suffix(&suffix))
            .unwrap_or("external")
            .to_string();
        let pairs = io::read_importance(&path)?;
        let scores: Vec<f64> = pairs.iter().map(|(_, s)| *s).collect();
        let importance = ImportanceVector {
            scores,
            provenance: concord_core::interpret::Provenance::Pfi,
            normalized: false,
        };
        let ranked = rank_features(&importance);
        rankings.push(ModelRanking {
            name,
            tokens: ranked.iter().map(|&j| pairs[j].0.clone()).collect(),
        });
    }
    Ok(rankings)
}

pub struct ConsensusStage {
    pub raw: AgreementMatrix,
    pub clustered: Option<AgreementMatrix>,
}

/// Pairwise agreement matrices (raw and clustered) plus the top-k feature
/// table.
pub fn consensus_stage(
    ctx: &RunContext,
    rankings: &[ModelRanking],
    token_labels: Option<&BTreeMap<String, usize>>,
) -> Result<ConsensusStage> {
    if rankings.len() < 2 {
        return Err(CliError::usage(
            "consensus needs at least two model rankings",
        ));
    }
    let params = ctx.config.rbo.params();
    let (raw, clustered) =
        agreement_matrices(rankings, token_labels, &params).stage("consensus")?;
    write_matrix(&ctx.artifact("agreement_raw"), &raw)?;
    if let Some(matrix) = &clustered {
        write_matrix(&ctx.artifact("agreement_clustered"), matrix)?;
    }

    let table = top_k_table(rankings, ctx.config.run.top_k, &ctx_family_tags(ctx))
        .stage("consensus")?;
    let mut rows = Vec::new();
    for (model, features) in &table {
        for feature in features {
            rows.push(vec![
                model.clone(),
                feature.rank.to_string(),
                feature.token.clone(),
                feature.family.clone(),
            ]);
        }
    }
    io::write_table(
        &ctx.artifact("top_features"),
        "model,rank,token,family",
        &rows,
    )?;
    Ok(ConsensusStage { raw, clustered })
}

fn ctx_family_tags(ctx: &RunContext) -> BTreeMap<String, String> {
    let mut map = ctx.family_tags();
    // external rankings may carry tokens absent from this run's vocabulary
    for ranking in external_rankings(ctx).unwrap_or_default() {
        for token in &ranking.tokens {
            map.entry(token.clone()).or_insert_with(|| "UNKNOWN".to_string());
        }
    }
    map
}

fn write_matrix(path: &Path, matrix: &AgreementMatrix) -> Result<()> {
    let header = format!("model,{}", matrix.model_names.join(","));
    let rows: Vec<Vec<String>> = matrix
        .model_names
        .iter()
        .zip(&matrix.values)
        .map(|(name, row)| {
            let mut cells = vec![name.clone()];
            cells.extend(row.iter().map(|v| io::fmt6(*v)));
            cells
        })
        .collect();
    io::write_table(path, &header, &rows)
}

/// Feature-family ablation over the collapsed matrix.
pub fn ablate_stage(ctx: &RunContext) -> Result<()> {
    let trainer: Box<dyn Trainer> = match ctx.config.ablation.trainer.as_str() {
        "logistic" => Box::new(LogisticTrainer::new(ctx.config.train.spec())),
        "gru_sparse" => Box::new(GruTrainer::new(
            ctx.config.train.spec(),
            GruConfig {
                units: ctx.config.gru.units,
                dropout: ctx.config.gru.dropout,
            },
            Representation::Temporal,
        )),
        other => {
            return Err(CliError::usage(format!(
                "unknown ablation trainer {other:?}"
            )))
        }
    };
    let data = if ctx.config.ablation.trainer == "gru_sparse" {
        &ctx.temporal
    } else {
        &ctx.collapsed
    };
    eprintln!("ablate: {} over 10 subsets", ctx.config.ablation.trainer);
    let rows = ablation_run(
        data,
        &ctx.y,
        &ctx.vocab,
        trainer.as_ref(),
        ctx.config.ablation.folds,
        rng::mix(ctx.config.run.seed, &[0xab]),
    )
    .stage("ablate")?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.subset.clone(),
                r.n_features.to_string(),
                io::fmt6(r.report.mean.sensitivity),
                io::fmt6(r.report.std.sensitivity),
                io::fmt6(r.report.mean.specificity),
                io::fmt6(r.report.std.specificity),
                io::fmt6(r.report.mean.f1),
                io::fmt6(r.report.std.f1),
                io::fmt6(r.report.mean.auc),
                io::fmt6(r.report.std.auc),
            ]
        })
        .collect();
    io::write_table(
        &ctx.artifact("ablation"),
        "subset,n_features,sensitivity_mean,sensitivity_std,specificity_mean,specificity_std,f1_mean,f1_std,auc_mean,auc_std",
        &table,
    )?;
    Ok(())
}

/// Importance matrix used by `ModelData::Matrix` consumers of the bag of
/// words; exposed for the integer-encoding LIME path.
#[allow(dead_code)]
pub fn bow_matrix_of(ctx: &RunContext) -> Result<&Array2<f64>> {
    match &ctx.bow {
        ModelData::Matrix(m) => Ok(m),
        _ => Err(CliError::runtime("bag-of-words data is always a matrix")),
    }
}
