use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synth::SyntheticSpec;
use crate::optimizer::OptimizerConfig;
use crate::stacking::{LearnerKind, MetaMode, StackingConfig};
use crate::{Error, Result};

/// The regular forest and the nine variants, in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RegularRf,
    OptAcc,
    OptAuc,
    RfStackBin,
    RfStackProb,
    LogStackBin,
    LogStackProb,
    KnnStackBin,
    KnnStackProb,
    PerfWrf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 10] = [
        ModelKind::RegularRf,
        ModelKind::OptAcc,
        ModelKind::OptAuc,
        ModelKind::RfStackBin,
        ModelKind::RfStackProb,
        ModelKind::LogStackBin,
        ModelKind::LogStackProb,
        ModelKind::KnnStackBin,
        ModelKind::KnnStackProb,
        ModelKind::PerfWrf,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::RegularRf => "regular_rf",
            ModelKind::OptAcc => "opt_acc",
            ModelKind::OptAuc => "opt_auc",
            ModelKind::RfStackBin => "rf_stack_bin",
            ModelKind::RfStackProb => "rf_stack_prob",
            ModelKind::LogStackBin => "log_stack_bin",
            ModelKind::LogStackProb => "log_stack_prob",
            ModelKind::KnnStackBin => "knn_stack_bin",
            ModelKind::KnnStackProb => "knn_stack_prob",
            ModelKind::PerfWrf => "perf_wrf",
        }
    }

    /// Column heading used by the markdown table.
    pub fn title(self) -> &'static str {
        match self {
            ModelKind::RegularRf => "RF",
            ModelKind::OptAcc => "Opt. Acc.",
            ModelKind::OptAuc => "Opt. AUC",
            ModelKind::RfStackBin => "RF stacked RF (binary)",
            ModelKind::RfStackProb => "RF stacked RF (prob.)",
            ModelKind::LogStackBin => "Log. stacked RF (binary)",
            ModelKind::LogStackProb => "Log. stacked RF (prob.)",
            ModelKind::KnnStackBin => "KNN stacked RF (binary)",
            ModelKind::KnnStackProb => "KNN stacked RF (prob.)",
            ModelKind::PerfWrf => "Perf. weighted RF",
        }
    }

    pub fn stacking(self) -> Option<(LearnerKind, MetaMode)> {
        match self {
            ModelKind::RfStackBin => Some((LearnerKind::RandomForest, MetaMode::Binary)),
            ModelKind::RfStackProb => Some((LearnerKind::RandomForest, MetaMode::Probability)),
            ModelKind::LogStackBin => Some((LearnerKind::Logistic, MetaMode::Binary)),
            ModelKind::LogStackProb => Some((LearnerKind::Logistic, MetaMode::Probability)),
            ModelKind::KnnStackBin => Some((LearnerKind::Knn, MetaMode::Binary)),
            ModelKind::KnnStackProb => Some((LearnerKind::Knn, MetaMode::Probability)),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.id() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(Error::Config(format!("unknown table format `{other}`"))),
        }
    }
}

/// One `[[dataset]]` entry: either a CSV with a label column or a synthetic spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: Option<String>,
    pub path: Option<PathBuf>,
    pub label: Option<String>,
    /// Columns forced to be categorical even when every cell parses as a number.
    #[serde(default)]
    pub categorical: Vec<String>,
    pub synthetic: Option<SyntheticSpec>,
    /// Generator seed; defaults to one derived from the master seed and name.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        label: String,
        categorical: Vec<String>,
    },
    Synthetic {
        spec: SyntheticSpec,
        seed: Option<u64>,
    },
}

impl DatasetSpec {
    pub fn csv(path: impl Into<PathBuf>, label: impl Into<String>) -> Self {
        Self {
            name: None,
            path: Some(path.into()),
            label: Some(label.into()),
            categorical: Vec::new(),
            synthetic: None,
            seed: None,
        }
    }

    pub fn synthetic(name: impl Into<String>, spec: SyntheticSpec) -> Self {
        Self {
            name: Some(name.into()),
            path: None,
            label: None,
            categorical: Vec::new(),
            synthetic: Some(spec),
            seed: None,
        }
    }

    pub fn source(&self) -> Result<DatasetSource> {
        match (&self.path, &self.label, &self.synthetic) {
            (Some(path), Some(label), None) => Ok(DatasetSource::Csv {
                path: path.clone(),
                label: label.clone(),
                categorical: self.categorical.clone(),
            }),
            (None, None, Some(spec)) => Ok(DatasetSource::Synthetic {
                spec: *spec,
                seed: self.seed,
            }),
            (Some(_), None, None) => Err(Error::Config(format!(
                "dataset `{}` has a path but no label column",
                self.display_name()
            ))),
            _ => Err(Error::Config(format!(
                "dataset `{}` needs either `path` and `label` or a `synthetic` table",
                self.display_name()
            ))),
        }
    }

    /// Explicit name, else the file stem, else `synthetic`.
    pub fn display_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match &self.path {
            Some(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            None => "synthetic".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "dataset")]
    pub datasets: Vec<DatasetSpec>,
    pub n_trees: usize,
    pub folds: usize,
    pub test_fraction: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub optimizer: OptimizerConfig,
    pub stacking: StackingConfig,
    pub out: Option<PathBuf>,
    pub format: TableFormat,
    /// Directories receiving debug exports of repetition 0.
    pub dump_oof: Option<PathBuf>,
    pub dump_weights: Option<PathBuf>,
    pub dump_model: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            n_trees: 100,
            folds: 5,
            test_fraction: 0.25,
            repetitions: 10,
            seed: 0,
            models: ModelKind::ALL.to_vec(),
            optimizer: OptimizerConfig::default(),
            stacking: StackingConfig::default(),
            out: None,
            format: TableFormat::Csv,
            dump_oof: None,
            dump_weights: None,
            dump_model: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parses a config file; relative paths inside it resolve against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let mut config = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut config.datasets {
            if let Some(p) = d.path.as_mut() {
                resolve(p);
            }
        }
        for p in [
            &mut config.out,
            &mut config.dump_oof,
            &mut config.dump_weights,
            &mut config.dump_model,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("model list is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for m in &self.models {
            if !seen.insert(*m) {
                return Err(Error::Config(format!("model `{m}` listed twice")));
            }
        }
        let mut names = std::collections::HashSet::new();
        for d in &self.datasets {
            d.source()?;
            if !names.insert(d.display_name()) {
                return Err(Error::Config(format!(
                    "dataset name `{}` is not unique",
                    d.display_name()
                )));
            }
        }
        if self.stacking.knn_neighbors == 0 {
            return Err(Error::Config("knn_neighbors must be at least 1".into()));
        }
        Ok(())
    }

    /// Requested models in table column order.
    pub fn ordered_models(&self) -> Vec<ModelKind> {
        let mut m = self.models.clone();
        m.sort();
        m.dedup();
        m
    }
}
