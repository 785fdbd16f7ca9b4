//! Classification heads and their shared model wrapper.

pub mod gbdt;
pub mod importance;
pub mod logistic;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gbdt::{fit_gbdt, GbdtConfig, GbdtModel, Tree, TreeNode};
pub use importance::{average_reports, total_gain_importance, Grouping, ImportanceReport};
pub use logistic::{fit_logistic, objective, LogisticConfig, LogisticModel};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Which classification head to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Lr,
    Gbdt,
}

impl HeadKind {
    pub fn token(&self) -> &'static str {
        match self {
            HeadKind::Lr => "lr",
            HeadKind::Gbdt => "gbdt",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(HeadKind::Lr),
            "gbdt" => Ok(HeadKind::Gbdt),
            other => Err(Error::Config(format!(
                "unknown head '{other}' (expected lr or gbdt)"
            ))),
        }
    }
}

/// Head selection plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "head", rename_all = "lowercase")]
pub enum HeadConfig {
    Lr(LogisticConfig),
    Gbdt(GbdtConfig),
}

impl HeadConfig {
    pub fn kind(&self) -> HeadKind {
        match self {
            HeadConfig::Lr(_) => HeadKind::Lr,
            HeadConfig::Gbdt(_) => HeadKind::Gbdt,
        }
    }
}

/// A fitted head of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Logistic(LogisticModel),
    Gbdt(GbdtModel),
}

impl TrainedModel {
    pub fn fit(
        x: &FeatureMatrix,
        y: &[usize],
        n_classes: usize,
        config: &HeadConfig,
    ) -> Result<TrainedModel> {
        match config {
            HeadConfig::Lr(cfg) => Ok(TrainedModel::Logistic(fit_logistic(x, y, n_classes, cfg)?)),
            HeadConfig::Gbdt(cfg) => Ok(TrainedModel::Gbdt(fit_gbdt(x, y, n_classes, cfg)?)),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            TrainedModel::Logistic(m) => m.n_classes(),
            TrainedModel::Gbdt(m) => m.n_classes,
        }
    }

    /// N x K matrix of class probabilities; every row sums to 1.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        match self {
            TrainedModel::Logistic(m) => m.predict_proba(x),
            TrainedModel::Gbdt(m) => m.predict_proba(x),
        }
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VersionedModel {
    format: String,
    format_version: u32,
    model: TrainedModel,
}

/// Serialize a model to the versioned JSON format. Numeric fields round-trip
/// exactly: the shortest decimal form that recovers each f64 is written.
pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let wrapped = VersionedModel {
        format: "sumfeat-model".to_string(),
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    serde_json::to_writer_pretty(BufWriter::new(file), &wrapped)
        .map_err(|e| Error::Data(format!("model serialization failed: {e}")))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let wrapped: VersionedModel = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: not a valid model file: {e}", path.display())))?;
    if wrapped.format != "sumfeat-model" || wrapped.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Data(format!(
            "{}: unsupported model format {} v{}",
            path.display(),
            wrapped.format,
            wrapped.format_version
        )));
    }
    Ok(wrapped.model)
}
