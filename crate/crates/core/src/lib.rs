//! Consensus analysis for risk prediction models trained on sparse
//! longitudinal event records.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`ehr`]: domain types (events, outcome labels, cohorts) and outcome
//!   labelling rules (index-date assignment, history flags, terminal-illness
//!   filtering).
//! - [`ingest`]: cleaning rules that turn raw tabular extracts (lab rows,
//!   admissions, prescriptions) into normalized events.
//! - [`synth`]: a synthetic cohort generator with planted correlation
//!   structure and planted risk signal, so every downstream procedure can be
//!   verified against known ground truth.
//! - [`encode`]: vocabularies and the two data representations — a sparse
//!   `(subject, feature, time-bin, value)` tensor and token-sentence
//!   documents — plus bag-of-words / integer vectorizations.
//! - [`models`]: trainable predictors (logistic regression, stacked gated
//!   recurrent networks, a masked-denoising autoencoder pipeline), metrics,
//!   and the stratified k-fold / ablation harnesses.
//! - [`interpret`]: permutation feature importance, local surrogate
//!   explanations with global aggregation, ranking and cumulative-importance
//!   analysis.
//! - [`cocluster`]: spectral co-clustering of the subjects-by-features
//!   matrix, cluster-count selection, bootstrap stability and cluster
//!   analytics.
//! - [`consensus`]: rank-biased overlap, its cluster-level variant, and
//!   model agreement matrices.
//!
//! All randomized procedures take explicit seeds and are deterministic.

pub mod cocluster;
pub mod consensus;
pub mod ehr;
pub mod encode;
pub mod error;
pub mod ingest;
pub mod interpret;
pub mod models;
pub mod rng;
pub mod synth;

pub use error::{CoreError, Result};
