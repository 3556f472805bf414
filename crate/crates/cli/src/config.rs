//! Declarative run configuration. A single TOML file seeds every command;
//! command-line flags override individual fields.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use concord_core::consensus::RboParams;
use concord_core::ehr::OutcomeKind;
use concord_core::models::TrainSpec;
use concord_core::synth::SynthConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PathsSection {
    pub events: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub outcome: String,
    pub models: Vec<String>,
    pub seed: u64,
    pub top_k: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            outcome: "sudden_death".to_string(),
            models: vec![
                "logistic".to_string(),
                "gru_sparse".to_string(),
                "gru_bow".to_string(),
            ],
            seed: 42,
            top_k: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub folds: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let spec = TrainSpec::default();
        TrainSection {
            folds: 10,
            epochs: spec.epochs,
            learning_rate: spec.learning_rate,
            batch_size: spec.batch_size,
        }
    }
}

impl TrainSection {
    pub fn spec(&self) -> TrainSpec {
        TrainSpec {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            ..TrainSpec::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GruSection {
    pub units: [usize; 2],
    pub dropout: [f64; 2],
}

impl Default for GruSection {
    fn default() -> Self {
        GruSection {
            units: [100, 50],
            dropout: [0.1, 0.3],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DeepPatientSection {
    pub widths: Vec<usize>,
    pub corruption: f64,
    pub head_hidden: Vec<usize>,
}

impl Default for DeepPatientSection {
    fn default() -> Self {
        DeepPatientSection {
            widths: vec![64, 64, 64],
            corruption: 0.05,
            head_hidden: vec![32],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InterpretSection {
    pub pfi_repeats: usize,
    pub lime_samples: usize,
    pub lime_kernel_width: f64,
    pub lime_top_k: usize,
}

impl Default for InterpretSection {
    fn default() -> Self {
        InterpretSection {
            pfi_repeats: 5,
            lime_samples: 1000,
            lime_kernel_width: 0.25,
            lime_top_k: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RboSection {
    pub p: f64,
}

impl Default for RboSection {
    fn default() -> Self {
        RboSection { p: 0.9 }
    }
}

impl RboSection {
    pub fn params(&self) -> RboParams {
        RboParams {
            p: self.p,
            depth: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterSection {
    /// 0 selects k automatically over `k_min..=k_max`.
    pub k: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub bootstrap: usize,
    pub connectivity_threshold: f64,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            k: 0,
            k_min: 2,
            k_max: 10,
            bootstrap: 20,
            connectivity_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationSection {
    pub enabled: bool,
    pub trainer: String,
    pub folds: usize,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            enabled: false,
            trainer: "logistic".to_string(),
            folds: 5,
        }
    }
}

/// Full run configuration; every section has defaults so a minimal file
/// only names the paths it needs.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub paths: PathsSection,
    pub run: RunSection,
    pub train: TrainSection,
    pub gru: GruSection,
    pub deep_patient: DeepPatientSection,
    pub interpret: InterpretSection,
    pub rbo: RboSection,
    pub cluster: ClusterSection,
    pub ablation: AblationSection,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        Ok(toml::from_str(&text)?)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(RunConfig::default()),
        }
    }

    pub fn outcome(&self) -> Result<OutcomeKind> {
        Ok(OutcomeKind::from_tag(&self.run.outcome)?)
    }

    pub fn events_path(&self) -> Result<&Path> {
        self.paths
            .events
            .as_deref()
            .ok_or_else(|| CliError::usage("no events file configured (paths.events or --events)"))
    }

    pub fn labels_path(&self) -> Result<&Path> {
        self.paths
            .labels
            .as_deref()
            .ok_or_else(|| CliError::usage("no labels file configured (paths.labels or --labels)"))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.paths
            .out_dir
            .as_deref()
            .ok_or_else(|| CliError::usage("no output directory configured (paths.out_dir or --out)"))
    }
}
