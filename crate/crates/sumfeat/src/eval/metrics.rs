//! Evaluation metrics: AUROC (Mann-Whitney with ties at half weight), AUPRC
//! (average precision with tied scores collapsed into one threshold step),
//! and macro-averaged multi-class accuracy/precision/recall/F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_binary(scores: &[f64], labels: &[usize]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("scores contain NaN".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Data(format!("binary label {bad} out of range")));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Data(
            "ranking metrics are undefined when only one class is present".into(),
        ));
    }
    Ok((positives, negatives))
}

/// Area under the ROC curve via average ranks: equals the Mann-Whitney U
/// statistic normalized by P*N, with tied scores counted as half wins.
pub fn auroc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    let (positives, negatives) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));

    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the average rank
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let p = positives as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Area under the precision-recall curve as average precision:
/// sum of (R_i - R_{i-1}) * P_i over descending-score thresholds.
pub fn auprc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    let (positives, _) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    let total_pos = positives as f64;
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / total_pos;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Classes that appear in neither prediction nor truth; they contribute
    /// zeros to the macro averages and callers should surface a warning.
    pub absent_classes: Vec<usize>,
}

/// Macro-averaged metrics over all `n_classes` classes. Per-class precision,
/// recall, and F1 are 0 when their denominators vanish.
pub fn multiclass_metrics(
    pred: &[usize],
    truth: &[usize],
    n_classes: usize,
) -> Result<MulticlassMetrics> {
    if pred.len() != truth.len() {
        return Err(Error::Config(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Data("cannot score an empty prediction set".into()));
    }
    if n_classes < 2 {
        return Err(Error::Config("need at least two classes".into()));
    }
    for &v in pred.iter().chain(truth) {
        if v >= n_classes {
            return Err(Error::Data(format!(
                "class {v} out of range for {n_classes} classes"
            )));
        }
    }

    let mut tp = vec![0u64; n_classes];
    let mut fp = vec![0u64; n_classes];
    let mut fn_ = vec![0u64; n_classes];
    let mut correct = 0u64;
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
            correct += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut absent = Vec::new();
    for c in 0..n_classes {
        if tp[c] + fp[c] + fn_[c] == 0 {
            absent.push(c);
        }
        let precision = if tp[c] + fp[c] > 0 {
            tp[c] as f64 / (tp[c] + fp[c]) as f64
        } else {
            0.0
        };
        let recall = if tp[c] + fn_[c] > 0 {
            tp[c] as f64 / (tp[c] + fn_[c]) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
    }
    let k = n_classes as f64;
    Ok(MulticlassMetrics {
        accuracy: correct as f64 / pred.len() as f64,
        macro_precision: precision_sum / k,
        macro_recall: recall_sum / k,
        macro_f1: f1_sum / k,
        absent_classes: absent,
    })
}
