use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{auc_opt, ece, recall_at_top_k, Confusion};
use crate::error::Result;

/// Headline metrics of one scored test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub n: usize,
    pub positives: usize,
    pub auc: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    /// Keyed by `k`.
    pub recall_at_k: BTreeMap<usize, Option<f64>>,
    pub ece: f64,
}

/// `scores` are calibrated probabilities.
pub fn model_metrics(scores: &[f64], labels: &[bool], threshold: f64, ks: &[usize]) -> ModelMetrics {
    let c = Confusion::at(scores, labels, threshold);
    ModelMetrics {
        n: scores.len(),
        positives: labels.iter().filter(|&&l| l).count(),
        auc: auc_opt(scores, labels),
        recall: c.recall(),
        precision: c.precision(),
        recall_at_k: ks.iter().map(|&k| (k, recall_at_top_k(scores, labels, k))).collect(),
        ece: ece(scores, labels, 10),
    }
}

/// One line of the comparison table: an algorithm under one embedding mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3Row {
    #[serde(rename = "Algorithm")]
    pub algorithm: String,
    #[serde(rename = "Embedding")]
    pub embedding: String,
    /// Mean test AUC over the top trials.
    #[serde(rename = "AUC")]
    pub auc: f64,
    #[serde(rename = "AUC_std")]
    pub auc_std: f64,
    /// Recall at the threshold of the best trial.
    #[serde(rename = "Recall")]
    pub recall: Option<f64>,
}

pub const TABLE3_ALGORITHMS: [&str; 3] = ["LR", "Early Fusion", "Late Fusion"];

/// Rows sorted by algorithm order, then embedding name.
pub fn write_table3(rows: &[Table3Row], path: &Path) -> Result<()> {
    let mut sorted = rows.to_vec();
    let rank = |a: &str| TABLE3_ALGORITHMS.iter().position(|&x| x == a).unwrap_or(usize::MAX);
    sorted.sort_by(|a, b| rank(&a.algorithm).cmp(&rank(&b.algorithm)).then_with(|| a.embedding.cmp(&b.embedding)));
    let mut w = csv::Writer::from_path(path)?;
    for r in &sorted {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table3(path: &Path) -> Result<Vec<Table3Row>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}
