use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area under the ROC curve: P(s₊ > s₋) + ½·P(s₊ = s₋), from midranks.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric {
            metric: "AUC",
            reason: format!("{pos} positives and {neg} negatives"),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// `auc` that maps the single-class case to `None`.
pub fn auc_opt(scores: &[f64], labels: &[bool]) -> Option<f64> {
    auc(scores, labels).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Scores at or above `threshold` are predicted positive.
    pub fn at(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion { tp: 0, fp: 0, tn: 0, fn_: 0 };
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    /// `None` without positives.
    pub fn recall(&self) -> Option<f64> {
        let p = self.tp + self.fn_;
        (p > 0).then(|| self.tp as f64 / p as f64)
    }

    /// `None` without predicted positives.
    pub fn precision(&self) -> Option<f64> {
        let pp = self.tp + self.fp;
        (pp > 0).then(|| self.tp as f64 / pp as f64)
    }
}

/// `(recall, precision)` at a threshold; precision is `None` when nothing is
/// predicted positive and recall is 0 in that case if positives exist.
pub fn recall_precision_at_threshold(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> (Option<f64>, Option<f64>) {
    let c = Confusion::at(scores, labels, threshold);
    (c.recall(), c.precision())
}

/// Share of all positives ranked among the `k` highest scores. Equal
/// scores keep their input order.
pub fn recall_at_top_k(scores: &[f64], labels: &[bool], k: usize) -> Option<f64> {
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let hits = order.iter().take(k).filter(|&&i| labels[i]).count();
    Some(hits as f64 / pos as f64)
}

/// Mean negative log-likelihood of probabilities, clamped like the loss.
pub fn nll(probs: &[f64], labels: &[bool]) -> f64 {
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    crate::tensor::weighted_bce(probs, &y, 1.0, 1.0)
}

/// Expected calibration error over `bins` equal-width bins of `[0, 1]`;
/// a score of exactly 1 falls in the top bin.
pub fn ece(scores: &[f64], labels: &[bool], bins: usize) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let mut count = vec![0usize; bins];
    let mut score_sum = vec![0.0; bins];
    let mut pos = vec![0.0; bins];
    for (&s, &l) in scores.iter().zip(labels) {
        let b = ((s * bins as f64).floor() as usize).min(bins - 1);
        count[b] += 1;
        score_sum[b] += s;
        pos[b] += f64::from(u8::from(l));
    }
    let n = scores.len() as f64;
    (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            (c / n) * (score_sum[b] / c - pos[b] / c).abs()
        })
        .sum()
}
