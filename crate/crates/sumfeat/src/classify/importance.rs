//! Total-gain feature importance for boosted ensembles, with optional
//! grouping by summary-statistic type (mean / std / dmean / dstd) when the
//! feature names follow the `f_<var>_<stat>` scheme.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::gbdt::{GbdtModel, TreeNode};
use crate::error::{Error, Result};
use crate::summary::STAT_NAMES;

/// How the per-type grouping turned out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "fractions")]
pub enum Grouping {
    /// Fractions of total gain per statistic type; they sum to 1.
    Grouped(BTreeMap<String, f64>),
    /// Feature names do not follow the summary scheme; per-feature gains
    /// are still reported.
    NotSummaryNames,
    /// The ensemble contains no splits, so there is no gain to attribute.
    NoSplits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// (feature name, summed split gain), in input column order.
    pub per_feature: Vec<(String, f64)>,
    pub grouping: Grouping,
}

impl ImportanceReport {
    pub fn total_gain(&self) -> f64 {
        self.per_feature.iter().map(|(_, g)| g).sum()
    }
}

fn stat_of(name: &str) -> Option<&'static str> {
    if !name.starts_with("f_") {
        return None;
    }
    STAT_NAMES
        .iter()
        .find(|stat| name.ends_with(&format!("_{stat}")))
        .copied()
}

fn group(per_feature: &[(String, f64)]) -> Grouping {
    let total: f64 = per_feature.iter().map(|(_, g)| g).sum();
    if total <= 0.0 {
        return Grouping::NoSplits;
    }
    let mut sums: BTreeMap<String, f64> =
        STAT_NAMES.iter().map(|s| (s.to_string(), 0.0)).collect();
    for (name, gain) in per_feature {
        match stat_of(name) {
            Some(stat) => *sums.get_mut(stat).unwrap() += gain,
            None => return Grouping::NotSummaryNames,
        }
    }
    for v in sums.values_mut() {
        *v /= total;
    }
    Grouping::Grouped(sums)
}

/// Sum the realized split gains of every tree per feature.
pub fn total_gain_importance(
    model: &GbdtModel,
    feature_names: &[String],
) -> Result<ImportanceReport> {
    if feature_names.len() != model.n_features {
        return Err(Error::Config(format!(
            "model has {} features but {} names were given",
            model.n_features,
            feature_names.len()
        )));
    }
    let mut gains = vec![0.0; feature_names.len()];
    for tree in &model.trees {
        for node in &tree.nodes {
            if let TreeNode::Split { feature, gain, .. } = node {
                gains[*feature] += gain.max(0.0);
            }
        }
    }
    let per_feature: Vec<(String, f64)> = feature_names
        .iter()
        .cloned()
        .zip(gains)
        .collect();
    let grouping = group(&per_feature);
    Ok(ImportanceReport {
        per_feature,
        grouping,
    })
}

/// Average per-feature gains over cross-validation folds and regroup.
/// All reports must share one feature-name layout.
pub fn average_reports(reports: &[ImportanceReport]) -> Result<ImportanceReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Config("no importance reports to average".into()))?;
    let names: Vec<&String> = first.per_feature.iter().map(|(n, _)| n).collect();
    let mut sums = vec![0.0; names.len()];
    for report in reports {
        if report.per_feature.len() != names.len() {
            return Err(Error::Config(
                "importance reports have mismatched feature sets".into(),
            ));
        }
        for (i, ((name, gain), expected)) in
            report.per_feature.iter().zip(&names).enumerate()
        {
            if name != *expected {
                return Err(Error::Config(format!(
                    "importance reports disagree on feature {i}: {name} vs {expected}"
                )));
            }
            sums[i] += gain;
        }
    }
    let k = reports.len() as f64;
    let per_feature: Vec<(String, f64)> = names
        .into_iter()
        .cloned()
        .zip(sums.into_iter().map(|s| s / k))
        .collect();
    let grouping = group(&per_feature);
    Ok(ImportanceReport {
        per_feature,
        grouping,
    })
}
