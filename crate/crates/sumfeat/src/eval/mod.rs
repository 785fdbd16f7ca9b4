//! Cross-validation driver. Every fold fits its own global statistics,
//! padding length, scaler, and model on the training portion alone; nothing
//! computed from a test instance ever reaches the training side.

pub mod folds;
pub mod metrics;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use folds::{make_folds, FoldPlan};
pub use metrics::{auprc, auroc, multiclass_metrics, MulticlassMetrics};

use crate::baselines::{fit_representation, ReprKind};
use crate::classify::{
    average_reports, total_gain_importance, HeadConfig, ImportanceReport, TrainedModel,
};
use crate::dataset::{GlobalStats, LabeledDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            seed: 42,
            stratified: true,
        }
    }
}

/// Per-metric fold values with their mean and population standard deviation
/// (divide by k) across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_fold: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    fn from_folds(per_fold: Vec<f64>) -> Self {
        let k = per_fold.len() as f64;
        let mean = per_fold.iter().sum::<f64>() / k;
        let var = per_fold.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
        MetricSummary {
            per_fold,
            mean,
            std: var.max(0.0).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub representation: ReprKind,
    pub head: HeadConfig,
    pub cv: CvConfig,
    pub dataset_hash: String,
    pub n_instances: usize,
    pub n_variables: usize,
    pub n_classes: usize,
    /// Metric name -> per-fold values and aggregates. Binary tasks report
    /// auroc/auprc; multi-class tasks report accuracy and macro
    /// precision/recall/f1.
    pub metrics: BTreeMap<String, MetricSummary>,
    /// Grouped total-gain importance averaged over folds; present for GBDT
    /// heads only.
    pub importance: Option<ImportanceReport>,
    /// Non-fatal observations gathered during evaluation.
    pub warnings: Vec<String>,
}

/// What one fold fitted on its training portion; exposed for leakage checks.
#[derive(Debug, Clone)]
pub struct FoldFit {
    pub fold: usize,
    pub global_stats: GlobalStats,
    pub l_max: usize,
}

struct FoldOutcome {
    metrics: Vec<(String, f64)>,
    importance: Option<ImportanceReport>,
    warnings: Vec<String>,
    fit: FoldFit,
}

fn run_fold(
    data: &LabeledDataset,
    plan: &FoldPlan,
    fold: usize,
    kind: ReprKind,
    head: &HeadConfig,
) -> Result<FoldOutcome> {
    let (train_idx, test_idx) = plan.split(fold);
    let train = data.subset(&train_idx)?;
    let test = data.subset(&test_idx)?;

    let (repr, x_train) = fit_representation(kind, &train)?;
    let x_test = repr.transform(&test)?;
    let model = TrainedModel::fit(&x_train, train.labels(), data.n_classes(), head)?;
    let proba = model.predict_proba(&x_test)?;

    let mut out_metrics = Vec::new();
    let mut warnings = Vec::new();
    if data.n_classes() == 2 {
        let scores: Vec<f64> = (0..proba.rows()).map(|r| proba.get(r, 1)).collect();
        out_metrics.push(("auroc".to_string(), auroc(&scores, test.labels())?));
        out_metrics.push(("auprc".to_string(), auprc(&scores, test.labels())?));
    } else {
        let pred: Vec<usize> = (0..proba.rows())
            .map(|r| {
                let row = proba.row(r);
                let mut best = 0;
                for (k, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect();
        let m = multiclass_metrics(&pred, test.labels(), data.n_classes())?;
        if !m.absent_classes.is_empty() {
            warnings.push(format!(
                "fold {fold}: classes {:?} absent from both predictions and truth",
                m.absent_classes
            ));
        }
        out_metrics.push(("accuracy".to_string(), m.accuracy));
        out_metrics.push(("precision".to_string(), m.macro_precision));
        out_metrics.push(("recall".to_string(), m.macro_recall));
        out_metrics.push(("f1".to_string(), m.macro_f1));
    }

    let importance = match &model {
        TrainedModel::Gbdt(g) => Some(total_gain_importance(g, repr.feature_names())?),
        TrainedModel::Logistic(_) => None,
    };

    Ok(FoldOutcome {
        metrics: out_metrics,
        importance,
        warnings,
        fit: FoldFit {
            fold,
            global_stats: repr.global_stats().clone(),
            l_max: repr.l_max(),
        },
    })
}

/// Full cross-validated evaluation of one (representation, head) pipeline.
pub fn run_cv(
    data: &LabeledDataset,
    kind: ReprKind,
    head: &HeadConfig,
    cv: &CvConfig,
) -> Result<EvalReport> {
    run_cv_traced(data, kind, head, cv).map(|(report, _)| report)
}

/// Like [`run_cv`] but also returns what each fold fitted on its training
/// split, so tests can assert that test data never influences the fit.
pub fn run_cv_traced(
    data: &LabeledDataset,
    kind: ReprKind,
    head: &HeadConfig,
    cv: &CvConfig,
) -> Result<(EvalReport, Vec<FoldFit>)> {
    if data.is_empty() {
        return Err(Error::Config("cannot evaluate an empty dataset".into()));
    }
    let plan = make_folds(data.labels(), cv.k, cv.seed, cv.stratified)?;

    // folds are independent; results land in fold order regardless of scheduling
    let outcomes: Vec<Result<FoldOutcome>> = (0..cv.k)
        .into_par_iter()
        .map(|fold| {
            run_fold(data, &plan, fold, kind, head)
                .map_err(|e| e.with_context(&format!("fold {fold}")))
        })
        .collect();

    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut importances = Vec::new();
    let mut warnings = Vec::new();
    let mut fits = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        for (name, value) in outcome.metrics {
            per_metric.entry(name).or_default().push(value);
        }
        if let Some(imp) = outcome.importance {
            importances.push(imp);
        }
        warnings.extend(outcome.warnings);
        fits.push(outcome.fit);
    }

    let metrics: BTreeMap<String, MetricSummary> = per_metric
        .into_iter()
        .map(|(name, values)| (name, MetricSummary::from_folds(values)))
        .collect();
    let importance = if importances.is_empty() {
        None
    } else {
        Some(average_reports(&importances)?)
    };

    let report = EvalReport {
        representation: kind,
        head: head.clone(),
        cv: cv.clone(),
        dataset_hash: data.content_hash(),
        n_instances: data.len(),
        n_variables: data.n_vars(),
        n_classes: data.n_classes(),
        metrics,
        importance,
        warnings,
    };
    Ok((report, fits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{GbdtConfig, LogisticConfig};
    use crate::io::synth::{synthesize, SignalKind, SynthesisConfig};

    fn null_dataset(seed: u64) -> LabeledDataset {
        synthesize(&SynthesisConfig {
            n_instances: 120,
            n_variables: 3,
            len_range: (8, 16),
            missing_rate: 0.3,
            n_classes: 2,
            signal: SignalKind::SlopeShift,
            effect_size: 0.0,
            seed,
        })
        .unwrap()
    }

    fn quick_gbdt() -> HeadConfig {
        HeadConfig::Gbdt(GbdtConfig {
            n_trees: 20,
            ..GbdtConfig::default()
        })
    }

    #[test]
    fn no_signal_dataset_scores_near_chance() {
        let data = null_dataset(5);
        let cv = CvConfig::default();
        let report = run_cv(&data, ReprKind::Summary, &quick_gbdt(), &cv).unwrap();
        let auc = report.metrics["auroc"].mean;
        assert!((0.4..=0.6).contains(&auc), "auroc {auc}");
    }

    #[test]
    fn rerun_with_same_seed_is_identical() {
        let data = null_dataset(6);
        let cv = CvConfig::default();
        let a = run_cv(&data, ReprKind::Summary, &quick_gbdt(), &cv).unwrap();
        let b = run_cv(&data, ReprKind::Summary, &quick_gbdt(), &cv).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn lr_on_summary_reports_binary_metrics() {
        let data = null_dataset(7);
        let cv = CvConfig {
            k: 3,
            ..CvConfig::default()
        };
        let head = HeadConfig::Lr(LogisticConfig {
            max_iters: 100,
            ..LogisticConfig::default()
        });
        let report = run_cv(&data, ReprKind::Summary, &head, &cv).unwrap();
        assert!(report.metrics.contains_key("auroc"));
        assert!(report.metrics.contains_key("auprc"));
        assert!(report.importance.is_none());
        assert_eq!(report.metrics["auroc"].per_fold.len(), 3);
    }

    #[test]
    fn raw_representation_with_lr_fails_with_imputation_hint() {
        let data = null_dataset(8);
        let cv = CvConfig {
            k: 3,
            ..CvConfig::default()
        };
        let head = HeadConfig::Lr(LogisticConfig::default());
        let err = run_cv(&data, ReprKind::Raw, &head, &cv).unwrap_err();
        assert!(err.to_string().contains("impute"), "{err}");
    }

    #[test]
    fn test_fold_perturbation_never_reaches_the_fit() {
        let data = null_dataset(9);
        let cv = CvConfig {
            k: 4,
            ..CvConfig::default()
        };
        let (_, fits) = run_cv_traced(&data, ReprKind::Summary, &quick_gbdt(), &cv).unwrap();
        let plan = make_folds(data.labels(), cv.k, cv.seed, cv.stratified).unwrap();

        // rebuild fold 0's training stats from scratch; they must hash the
        // same no matter what the test instances contain
        let (train_idx, test_idx) = plan.split(0);
        let train = data.subset(&train_idx).unwrap();
        let stats = crate::dataset::compute_global_stats(&train).unwrap();
        let bits: Vec<u64> = stats.variable_means().iter().map(|v| v.to_bits()).collect();
        let fit_bits: Vec<u64> = fits[0]
            .global_stats
            .variable_means()
            .iter()
            .map(|v| v.to_bits())
            .collect();
        assert_eq!(bits, fit_bits);
        assert_eq!(fits[0].l_max, train.max_len());
        // sanity: the test fold is nonempty and disjoint from train
        assert!(!test_idx.is_empty());
        assert!(test_idx.iter().all(|i| !train_idx.contains(i)));
    }

    #[test]
    fn multiclass_pipeline_reports_macro_metrics() {
        let data = synthesize(&SynthesisConfig {
            n_instances: 90,
            n_variables: 2,
            len_range: (6, 10),
            missing_rate: 0.2,
            n_classes: 3,
            signal: SignalKind::MeanShift,
            effect_size: 8.0,
            seed: 21,
        })
        .unwrap();
        let cv = CvConfig {
            k: 3,
            ..CvConfig::default()
        };
        let report = run_cv(&data, ReprKind::Summary, &quick_gbdt(), &cv).unwrap();
        for key in ["accuracy", "precision", "recall", "f1"] {
            assert!(report.metrics.contains_key(key), "missing {key}");
        }
        assert!(report.metrics["accuracy"].mean > 0.8);
    }
}
