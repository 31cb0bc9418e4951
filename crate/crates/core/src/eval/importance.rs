use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::{train_lr, FeatureCategory, FlatTable, LrParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct ImportanceRow {
    pub category: FeatureCategory,
    pub feature: String,
    pub importance: f64,
}

/// Signed coefficients of a logistic surrogate fit on standardized features
/// to the model's binarized predictions `score ≥ threshold`, largest
/// magnitude first. The surrogate explains the model, not the outcome.
pub fn surrogate_importance(table: &FlatTable, scores: &[f64], threshold: f64, l2: f64) -> Result<Vec<ImportanceRow>> {
    assert_eq!(table.rows.len(), scores.len(), "one score per row");
    let target: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    let pos = target.iter().filter(|&&t| t).count();
    if pos == 0 || pos == target.len() {
        return Err(Error::UndefinedMetric {
            metric: "surrogate importance",
            reason: format!("the model predicts a single class at threshold {threshold}"),
        });
    }
    let params = LrParams { l2, max_iter: 200, ..Default::default() };
    let fit = train_lr(&table.rows, &target, &params)?;
    let mut rows: Vec<ImportanceRow> = table
        .names
        .iter()
        .zip(&table.categories)
        .zip(&fit.weights)
        .map(|((n, &c), &w)| ImportanceRow { category: c, feature: n.clone(), importance: w })
        .collect();
    rows.sort_by(|a, b| b.importance.abs().total_cmp(&a.importance.abs()).then_with(|| a.feature.cmp(&b.feature)));
    Ok(rows)
}

pub fn write_importance_csv(rows: &[ImportanceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
