//! One-vs-rest ROC-AUC, macro-averaged over the classes present.

use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("AUC undefined on an empty node set")]
    EmptyNodeSet,
    #[error("AUC undefined on this node set: only one class present")]
    SingleClass,
    #[error("label {label} has no score column ({columns} columns)")]
    LabelOutOfRange { label: usize, columns: usize },
}

/// Area under the ROC curve of one score column against a binary target,
/// with tied scores counted as half a correctly ordered pair.
fn binary_auc(mut scored: Vec<(f64, bool)>) -> f64 {
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_pos = scored.iter().filter(|s| s.1).count() as f64;
    let n_neg = scored.len() as f64 - n_pos;
    // Sum of (1-based, tie-averaged) ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j + 1 < scored.len() && scored[j + 1].0 == scored[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg_rank * scored[i..=j].iter().filter(|s| s.1).count() as f64;
        i = j + 1;
    }
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

/// Macro-averaged one-vs-rest ROC-AUC of `scores` (one column per class)
/// over `nodes`. Classes with no member in `nodes` are skipped.
pub fn auc_score(scores: &Tensor, labels: &[usize], nodes: &[usize]) -> Result<f64, MetricError> {
    if nodes.is_empty() {
        return Err(MetricError::EmptyNodeSet);
    }
    let columns = scores.cols();
    let mut present = vec![false; columns];
    for &u in nodes {
        let label = labels[u];
        if label >= columns {
            return Err(MetricError::LabelOutOfRange { label, columns });
        }
        present[label] = true;
    }
    let classes: Vec<usize> = (0..columns).filter(|&c| present[c]).collect();
    if classes.len() < 2 {
        return Err(MetricError::SingleClass);
    }
    let total: f64 =
        classes.iter().map(|&c| binary_auc(nodes.iter().map(|&u| (scores.get(u, c), labels[u] == c)).collect())).sum();
    Ok(total / classes.len() as f64)
}
