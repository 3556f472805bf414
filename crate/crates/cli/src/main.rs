//! Command-line front end: synthetic cohorts, ingest, encoding, training,
//! interpretation, clustering, consensus, ablation, the full pipeline, and
//! registration of externally produced model scores.

mod config;
mod error;
mod io;
mod run;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use concord_core::consensus::cross_outcome_agreement;
use concord_core::ehr::{derive_history_flags, default_history_prefixes, EventRecord, FeatureFamily, OutcomeKind};
use concord_core::ingest::{clean_lab_rows, hospitalisation_events, merge_transfers, truncate_bnf, AdmissionRow, RawLabRow};
use concord_core::synth::generate_cohort;

use config::RunConfig;
use error::{CliError, Result, StageContext};
use run::RunContext;

#[derive(Parser)]
#[command(
    name = "concord",
    version,
    about = "Risk predictors over sparse longitudinal events and consensus of their feature rankings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct CommonArgs {
    /// Declarative run configuration (TOML); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Event file (CSV, pinned schema).
    #[arg(long)]
    events: Option<PathBuf>,
    /// Label file (CSV, pinned schema).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Ground-truth sidecar from the synthetic generator.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Outcome to analyse: sudden_death or all_cause.
    #[arg(long)]
    outcome: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated model list (logistic,gru_sparse,gru_bow,deep_patient).
    #[arg(long)]
    models: Option<String>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
}

impl CommonArgs {
    fn merged_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load_or_default(self.config.as_deref())?;
        if let Some(events) = &self.events {
            cfg.paths.events = Some(events.clone());
        }
        if let Some(labels) = &self.labels {
            cfg.paths.labels = Some(labels.clone());
        }
        if let Some(truth) = &self.ground_truth {
            cfg.paths.ground_truth = Some(truth.clone());
        }
        if let Some(out) = &self.out {
            cfg.paths.out_dir = Some(out.clone());
        }
        if let Some(outcome) = &self.outcome {
            cfg.run.outcome = outcome.clone();
        }
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(models) = &self.models {
            cfg.run.models = models.split(',').map(|m| m.trim().to_string()).collect();
        }
        if let Some(folds) = self.folds {
            cfg.train.folds = folds;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort with planted structure.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the configured subject count.
        #[arg(long)]
        n_subjects: Option<usize>,
    },
    /// Clean raw tabular extracts into the normalized event schema.
    Ingest {
        /// Raw lab rows: subject_id,day,name,value,unit
        #[arg(long)]
        labs: Option<PathBuf>,
        /// Raw admissions: subject_id,admit_day,discharge_day,diagnoses
        /// (diagnoses separated by ';').
        #[arg(long)]
        admissions: Option<PathBuf>,
        /// Raw prescriptions: subject_id,day,bnf_code
        #[arg(long)]
        prescriptions: Option<PathBuf>,
        /// Demographics: subject_id,age,sex (sex: f or m)
        #[arg(long)]
        demographics: Option<PathBuf>,
        /// Lab cleaning rules (TOML, one [[rule]] block per canonical test).
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Labels file fixing each subject's index day.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build vocabularies, the sparse tensor and sentence documents.
    Encode {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// K-fold training and the metrics table.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Feature-importance extraction for each configured model.
    Interpret {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Spectral co-clustering, stability and cluster analytics.
    Cluster {
        #[command(flatten)]
        common: CommonArgs,
        /// Fixed cluster count (overrides elbow selection).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Agreement matrices from previously written importance files.
    Consensus {
        #[command(flatten)]
        common: CommonArgs,
        /// A second run directory for cross-outcome agreement.
        #[arg(long)]
        other_run: Option<PathBuf>,
        /// Outcome tag of the other run.
        #[arg(long)]
        other_outcome: Option<String>,
    },
    /// Feature-family ablation study.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Full pipeline: encode, train, interpret, cluster, consensus,
    /// optional ablation, and a manifest with content digests.
    Pipeline {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Register an externally produced predictor for the consensus step.
    RegisterScores {
        /// Run directory holding the encode artifacts.
        #[arg(long)]
        run: PathBuf,
        /// Model name used in reports.
        #[arg(long)]
        name: String,
        /// Score file: `subject_id score` lines covering every subject.
        #[arg(long)]
        scores: PathBuf,
        /// Importance file: `token score` lines aligned to the vocabulary.
        #[arg(long)]
        importance: PathBuf,
        /// Outcome tag of the run (default sudden_death).
        #[arg(long)]
        outcome: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth { common, n_subjects } => cmd_synth(&common, n_subjects),
        Command::Ingest {
            labs,
            admissions,
            prescriptions,
            demographics,
            rules,
            labels,
            out,
        } => cmd_ingest(
            labs.as_deref(),
            admissions.as_deref(),
            prescriptions.as_deref(),
            demographics.as_deref(),
            rules.as_deref(),
            &labels,
            &out,
        ),
        Command::Encode { common } => {
            RunContext::prepare(common.merged_config()?)?;
            Ok(())
        }
        Command::Train { common } => {
            let ctx = RunContext::prepare(common.merged_config()?)?;
            run::train_stage(&ctx)?;
            Ok(())
        }
        Command::Interpret { common } => {
            let ctx = RunContext::prepare(common.merged_config()?)?;
            run::interpret_stage(&ctx)?;
            Ok(())
        }
        Command::Cluster { common, k } => {
            let mut cfg = common.merged_config()?;
            if let Some(k) = k {
                cfg.cluster.k = k;
            }
            let ctx = RunContext::prepare(cfg)?;
            run::cluster_stage(&ctx)?;
            Ok(())
        }
        Command::Consensus {
            common,
            other_run,
            other_outcome,
        } => cmd_consensus(&common, other_run.as_deref(), other_outcome.as_deref()),
        Command::Ablate { common } => {
            let mut cfg = common.merged_config()?;
            cfg.ablation.enabled = true;
            let ctx = RunContext::prepare(cfg)?;
            run::ablate_stage(&ctx)
        }
        Command::Pipeline { common } => cmd_pipeline(&common),
        Command::RegisterScores {
            run,
            name,
            scores,
            importance,
            outcome,
        } => cmd_register_scores(
            &run,
            &name,
            &scores,
            &importance,
            outcome.as_deref().unwrap_or("sudden_death"),
        ),
    }
}

fn cmd_synth(common: &CommonArgs, n_subjects: Option<usize>) -> Result<()> {
    let cfg = common.merged_config()?;
    let mut synth_cfg = cfg.synth.clone();
    synth_cfg.seed = cfg.run.seed;
    if let Some(n) = n_subjects {
        synth_cfg.n_subjects = n;
    }
    if let Some(outcome) = &common.outcome {
        synth_cfg.outcome_kind = OutcomeKind::from_tag(outcome)?;
    }
    let out = cfg.out_dir()?;
    io::ensure_dir(out)?;
    eprintln!(
        "synth: {} subjects, {} features, seed {}",
        synth_cfg.n_subjects,
        synth_cfg.n_vocab_features(),
        synth_cfg.seed
    );
    let (cohort, truth) = generate_cohort(&synth_cfg)?;
    io::write_events(&out.join("events.csv"), &cohort.events)?;
    io::write_labels(&out.join("labels.csv"), &cohort.labels)?;
    io::write_ground_truth(&out.join("ground_truth.json"), &truth)?;
    eprintln!("synth: wrote events.csv, labels.csv, ground_truth.json");
    Ok(())
}

fn read_raw_csv(path: &Path, expected_fields: usize, what: &str) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.to_string()).collect();
        if fields.len() != expected_fields {
            return Err(CliError::usage(format!(
                "{what} line {}: expected {expected_fields} fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        rows.push(fields);
    }
    Ok(rows)
}

fn cmd_ingest(
    labs: Option<&Path>,
    admissions: Option<&Path>,
    prescriptions: Option<&Path>,
    demographics: Option<&Path>,
    rules: Option<&Path>,
    labels_path: &Path,
    out: &Path,
) -> Result<()> {
    io::ensure_dir(out)?;
    let labels = io::read_labels(labels_path)?;
    let index_days: BTreeMap<String, i64> = labels
        .iter()
        .map(|l| (l.subject_id.clone(), l.index_day))
        .collect();
    let mut events: Vec<EventRecord> = Vec::new();
    let mut reports: BTreeMap<String, serde_json::Value> = BTreeMap::new();

    if let Some(path) = labs {
        let rules_path = rules
            .ok_or_else(|| CliError::usage("--rules is required when ingesting lab rows"))?;
        let rule_table = io::read_rules(rules_path)?;
        let rows: Vec<RawLabRow> = read_raw_csv(path, 5, "labs")?
            .into_iter()
            .map(|f| {
                Ok(RawLabRow {
                    subject_id: f[0].clone(),
                    day: f[1]
                        .parse()
                        .map_err(|e| CliError::usage(format!("labs: bad day: {e}")))?,
                    name: f[2].clone(),
                    value: if f[3].is_empty() {
                        None
                    } else {
                        Some(
                            f[3].parse()
                                .map_err(|e| CliError::usage(format!("labs: bad value: {e}")))?,
                        )
                    },
                    unit: if f[4].is_empty() {
                        None
                    } else {
                        Some(f[4].clone())
                    },
                })
            })
            .collect::<Result<_>>()?;
        let (lab_events, report) = clean_lab_rows(&rows, &rule_table).stage("ingest")?;
        events.extend(lab_events);
        reports.insert("labs".to_string(), serde_json::to_value(&report)?);
    }

    if let Some(path) = admissions {
        let rows: Vec<AdmissionRow> = read_raw_csv(path, 4, "admissions")?
            .into_iter()
            .map(|f| {
                Ok(AdmissionRow {
                    subject_id: f[0].clone(),
                    admit_day: f[1]
                        .parse()
                        .map_err(|e| CliError::usage(format!("admissions: bad day: {e}")))?,
                    discharge_day: f[2]
                        .parse()
                        .map_err(|e| CliError::usage(format!("admissions: bad day: {e}")))?,
                    diagnoses: f[3]
                        .split(';')
                        .filter(|d| !d.is_empty())
                        .map(|d| d.to_string())
                        .collect(),
                })
            })
            .collect::<Result<_>>()?;
        let (stays, report) = merge_transfers(&rows).stage("ingest")?;
        events.extend(hospitalisation_events(&stays).stage("ingest")?);
        reports.insert("admissions".to_string(), serde_json::to_value(&report)?);
    }

    if let Some(path) = prescriptions {
        for f in read_raw_csv(path, 3, "prescriptions")? {
            events.push(EventRecord::new(
                f[0].clone(),
                f[1].parse::<i64>()
                    .map_err(|e| CliError::usage(format!("prescriptions: bad day: {e}")))?,
                FeatureFamily::Prescription,
                truncate_bnf(&f[2]).stage("ingest")?,
            ));
        }
    }

    if let Some(path) = demographics {
        for f in read_raw_csv(path, 3, "demographics")? {
            let Some(&index_day) = index_days.get(&f[0]) else {
                continue;
            };
            events.push(
                EventRecord::new(f[0].clone(), index_day, FeatureFamily::Demographic, "age")
                    .with_value(f[1].parse::<f64>().map_err(|e| {
                        CliError::usage(format!("demographics: bad age: {e}"))
                    })?),
            );
            let sex = match f[2].as_str() {
                "f" | "F" => "sex_f",
                "m" | "M" => "sex_m",
                other => {
                    return Err(CliError::usage(format!(
                        "demographics: sex must be f or m, got {other:?}"
                    )))
                }
            };
            events.push(EventRecord::new(
                f[0].clone(),
                index_day,
                FeatureFamily::Demographic,
                sex,
            ));
        }
    }

    // history flags derive from the ingested hospitalisations
    let flags = derive_history_flags(&events, &index_days, &default_history_prefixes())
        .stage("ingest")?;
    events.extend(flags.events.clone());

    // deterministic order: subject, day, family, code
    events.sort_by(|a, b| {
        (&a.subject_id, a.event_day, &a.family, &a.code)
            .cmp(&(&b.subject_id, b.event_day, &b.family, &b.code))
    });
    io::write_events(&out.join("events.csv"), &events)?;
    std::fs::write(
        out.join("cleaning_report.json"),
        serde_json::to_string_pretty(&reports)? + "\n",
    )?;
    eprintln!("ingest: wrote {} events", events.len());
    Ok(())
}

fn cmd_consensus(
    common: &CommonArgs,
    other_run: Option<&Path>,
    other_outcome: Option<&str>,
) -> Result<()> {
    let ctx = RunContext::prepare(common.merged_config()?)?;
    let rankings = collect_rankings(&ctx)?;
    // reuse an existing cluster assignment when the cluster stage already ran
    let clusters_path = ctx
        .out_dir
        .join(format!("clusters_features_{}.txt", ctx.outcome.tag()));
    let token_labels = if clusters_path.is_file() {
        io::read_clusters(&clusters_path)?
    } else {
        run::cluster_stage(&ctx)?.token_labels
    };
    run::consensus_stage(&ctx, &rankings, Some(&token_labels))?;

    if let Some(other_dir) = other_run {
        let other_tag = other_outcome.unwrap_or("all_cause");
        let mut rows = Vec::new();
        for ranking in &rankings {
            let other_path =
                other_dir.join(format!("importance_{}_{}.txt", ranking.name, other_tag));
            if !other_path.is_file() {
                continue;
            }
            let pairs = io::read_importance(&other_path)?;
            let other_ranking = ranking_from_pairs(&ranking.name, &pairs);
            let (score, shared) = cross_outcome_agreement(
                ranking,
                &other_ranking,
                &token_labels,
                &ctx.config.rbo.params(),
            )
            .stage("consensus")?;
            rows.push(vec![
                ranking.name.clone(),
                io::fmt6(score),
                shared.to_string(),
            ]);
        }
        io::write_table(
            &ctx.artifact("cross_outcome"),
            "model,clustered_rbo,shared_tokens",
            &rows,
        )?;
    }
    Ok(())
}

fn ranking_from_pairs(
    name: &str,
    pairs: &[(String, f64)],
) -> concord_core::consensus::ModelRanking {
    let importance = concord_core::interpret::ImportanceVector {
        scores: pairs.iter().map(|(_, s)| *s).collect(),
        provenance: concord_core::interpret::Provenance::Pfi,
        normalized: false,
    };
    let ranked = concord_core::interpret::rank_features(&importance);
    concord_core::consensus::ModelRanking {
        name: name.to_string(),
        tokens: ranked.iter().map(|&j| pairs[j].0.clone()).collect(),
    }
}

/// Native rankings from importance files when present, regenerated
/// otherwise, plus registered external rankings.
fn collect_rankings(ctx: &RunContext) -> Result<Vec<concord_core::consensus::ModelRanking>> {
    let tag = ctx.outcome.tag();
    let mut rankings = Vec::new();
    let mut need_interpret = false;
    for kind in ctx.models()? {
        let path = ctx
            .out_dir
            .join(format!("importance_{}_{tag}.txt", kind.name()));
        if path.is_file() {
            let pairs = io::read_importance(&path)?;
            rankings.push(ranking_from_pairs(kind.name(), &pairs));
        } else {
            need_interpret = true;
        }
    }
    if need_interpret {
        rankings = run::interpret_stage(ctx)?;
    }
    rankings.extend(run::external_rankings(ctx)?);
    Ok(rankings)
}

fn cmd_register_scores(
    run_dir: &Path,
    name: &str,
    scores_path: &Path,
    importance_path: &Path,
    outcome: &str,
) -> Result<()> {
    let kind = OutcomeKind::from_tag(outcome)?;
    let subjects = io::read_lines(&run_dir.join(format!("subjects_{}.txt", kind.tag())))?;
    let vocab = io::read_vocabulary(&run_dir.join(format!("vocab_{}.txt", kind.tag())), kind)?;

    let scores = io::read_scores(scores_path)?;
    let missing: Vec<&String> = subjects
        .iter()
        .filter(|s| !scores.contains_key(*s))
        .take(10)
        .collect();
    if !missing.is_empty() {
        return Err(CliError::usage(format!(
            "scores file misses {} subjects; first missing: {missing:?}",
            subjects.iter().filter(|s| !scores.contains_key(*s)).count()
        )));
    }

    let importance = io::read_importance(importance_path)?;
    let expected: Vec<&str> = vocab.feature_tokens();
    let given: Vec<&str> = importance.iter().map(|(t, _)| t.as_str()).collect();
    if given != expected {
        let mismatched: Vec<&str> = expected
            .iter()
            .zip(given.iter().chain(std::iter::repeat(&"<missing>")))
            .filter(|(e, g)| *e != *g)
            .take(10)
            .map(|(e, _)| *e)
            .collect();
        return Err(CliError::usage(format!(
            "importance file is not aligned to the vocabulary; first mismatches: {mismatched:?}"
        )));
    }

    let external = run_dir.join("external");
    io::ensure_dir(&external)?;
    std::fs::copy(
        scores_path,
        external.join(format!("{name}.scores_{}.txt", kind.tag())),
    )?;
    std::fs::copy(
        importance_path,
        external.join(format!("{name}.importance_{}.txt", kind.tag())),
    )?;
    eprintln!("register-scores: {name} registered for {}", kind.tag());
    Ok(())
}

fn cmd_pipeline(common: &CommonArgs) -> Result<()> {
    let cfg = common.merged_config()?;
    let out_dir = cfg.out_dir()?.to_path_buf();
    io::ensure_dir(&out_dir)?;
    // partial outputs are marked stale until the manifest is written
    let stale_marker = out_dir.join("STALE");
    std::fs::write(&stale_marker, "pipeline in progress or aborted\n")?;

    let ctx = RunContext::prepare(cfg)?;
    let metrics = run::train_stage(&ctx)?;
    let mut rankings = run::interpret_stage(&ctx)?;
    rankings.extend(run::external_rankings(&ctx)?);
    let clusters = run::cluster_stage(&ctx)?;
    let consensus = run::consensus_stage(&ctx, &rankings, Some(&clusters.token_labels))?;
    if ctx.config.ablation.enabled {
        run::ablate_stage(&ctx)?;
    }

    // manifest with one digest per artifact
    let mut artifacts = Vec::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&ctx.out_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().and_then(|n| n.to_str()) != Some("STALE"))
        .collect();
    paths.sort();
    for path in paths {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if name == "summary.json" {
            continue;
        }
        artifacts.push(serde_json::json!({
            "file": name,
            "sha256": io::sha256_hex(&path)?,
        }));
    }
    let summary = serde_json::json!({
        "status": "complete",
        "outcome": ctx.outcome.tag(),
        "seed": ctx.config.run.seed,
        "models": ctx.config.run.models,
        "headline": {
            "chosen_k": clusters.chosen_k,
            "bootstrap_stability": clusters.stability,
            "mean_raw_rbo": consensus.raw.mean_off_diagonal(),
            "mean_clustered_rbo": consensus.clustered.as_ref().map(|m| m.mean_off_diagonal()),
            "metrics": metrics
                .iter()
                .map(|(name, report)| {
                    serde_json::json!({
                        "model": name,
                        "auc_mean": report.mean.auc,
                        "auc_std": report.std.auc,
                    })
                })
                .collect::<Vec<_>>(),
        },
        "artifacts": artifacts,
    });
    std::fs::write(
        ctx.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    std::fs::remove_file(&stale_marker)?;
    eprintln!("pipeline: complete; summary.json written");
    Ok(())
}
