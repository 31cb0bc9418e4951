//! Logistic regression on aggregated history features, with optional SMOTE
//! and Platt scaling.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{fit_platt, Calibrator};
use crate::error::{Error, Result};
use crate::eval::{auc_opt, recall_precision_at_threshold};
use crate::features::{SequenceSet, Step};
use crate::model::sigmoid;
use crate::rng::{derive_seed, fingerprint};
use crate::tensor::Tensor;
use crate::train::{mean_std, smote, Fold, SmoteParams, Standardizer, TopSummary, TrialStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureCategory {
    #[serde(rename = "PROC")]
    Proc,
    #[serde(rename = "ICD9")]
    Icd9,
    Domain,
}

impl FeatureCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureCategory::Proc => "PROC",
            FeatureCategory::Icd9 => "ICD9",
            FeatureCategory::Domain => "Domain",
        }
    }

    /// Category of a model input from its column name.
    pub fn of_input(name: &str) -> Self {
        if name.starts_with("PROC") { FeatureCategory::Proc } else { FeatureCategory::Icd9 }
    }
}

/// One row per index event.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTable {
    pub names: Vec<String>,
    pub categories: Vec<FeatureCategory>,
    pub rows: Vec<Vec<f64>>,
}

impl FlatTable {
    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn select(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.rows[i].clone()).collect()
    }
}

/// Per input: number of steps containing it, then that count over `T`.
pub fn step_counts(steps: &[Step], input_dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut counts = vec![0.0; input_dim];
    for s in steps {
        for &j in &s.x {
            counts[j as usize] += 1.0;
        }
    }
    let t = steps.len().max(1) as f64;
    let means = counts.iter().map(|c| c / t).collect();
    (counts, means)
}

fn domain_columns(set: &SequenceSet, names: &mut Vec<String>, cats: &mut Vec<FeatureCategory>) {
    names.extend(set.layout.names.iter().cloned());
    cats.extend(std::iter::repeat_n(FeatureCategory::Domain, set.layout.names.len()));
}

/// Counts and means of every input over the history, followed by the domain
/// vector `z` as given (pass standardized or raw rows).
pub fn flatten(set: &SequenceSet, z: &[Vec<f64>], use_domain: bool) -> FlatTable {
    let m = set.input_dim;
    let mut names = Vec::with_capacity(2 * m + set.layout.names.len());
    let mut categories = Vec::with_capacity(names.capacity());
    for prefix in ["count", "mean"] {
        for n in &set.input_names {
            names.push(format!("{n} ({prefix})"));
            categories.push(FeatureCategory::of_input(n));
        }
    }
    if use_domain {
        domain_columns(set, &mut names, &mut categories);
    }
    let rows = set
        .sequences
        .iter()
        .zip(z)
        .map(|(s, z)| {
            let (mut row, means) = step_counts(&s.steps, m);
            row.extend(means);
            if use_domain {
                row.extend_from_slice(z);
            }
            row
        })
        .collect();
    FlatTable { names, categories, rows }
}

/// Whether each input appears anywhere in the history, followed by `z`.
pub fn indicator_table(set: &SequenceSet, z: &[Vec<f64>]) -> FlatTable {
    let mut names = set.input_names.clone();
    let mut categories: Vec<FeatureCategory> = names.iter().map(|n| FeatureCategory::of_input(n)).collect();
    domain_columns(set, &mut names, &mut categories);
    let rows = set
        .sequences
        .iter()
        .zip(z)
        .map(|(s, z)| {
            let (counts, _) = step_counts(&s.steps, set.input_dim);
            let mut row: Vec<f64> = counts.iter().map(|&c| f64::from(u8::from(c > 0.0))).collect();
            row.extend_from_slice(z);
            row
        })
        .collect();
    FlatTable { names, categories, rows }
}

/// Mean of the per-step embeddings `x_t W_e`, followed by `z` when asked.
pub fn embedded_table(set: &SequenceSet, z: &[Vec<f64>], w_e: &Tensor, use_domain: bool) -> FlatTable {
    let e = w_e.cols();
    let mut names: Vec<String> = (0..e).map(|k| format!("embedding {k} (mean)")).collect();
    let mut categories = vec![FeatureCategory::Icd9; e];
    if use_domain {
        domain_columns(set, &mut names, &mut categories);
    }
    let rows = set
        .sequences
        .iter()
        .zip(z)
        .map(|(s, z)| {
            let mut row = vec![0.0; e];
            for step in &s.steps {
                for &j in &step.x {
                    for (k, v) in row.iter_mut().enumerate() {
                        *v += w_e.get(j as usize, k);
                    }
                }
            }
            let t = s.steps.len().max(1) as f64;
            row.iter_mut().for_each(|v| *v /= t);
            if use_domain {
                row.extend_from_slice(z);
            }
            row
        })
        .collect();
    FlatTable { names, categories, rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrParams {
    /// Penalty on the mean log-loss: `loss + l2/2·|w|²`, intercept free.
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub smote: Option<SmoteParams>,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams { l2: 1e-2, tol: 1e-6, max_iter: 100, smote: None }
    }
}

/// Weights live on standardized columns; columns constant on the training
/// rows are inactive and keep weight 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub standardizer: Standardizer,
    pub active: Vec<bool>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl LogisticModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        let x = self.standardizer.apply(row);
        self.intercept + x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>()
    }

    pub fn margins(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.margin(r)).collect()
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

fn objective(x: &[Vec<f64>], y: &[f64], w: &DVector<f64>, l2: f64, active: &[usize]) -> f64 {
    let n = x.len() as f64;
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(r, &t)| {
            let m = w[0] + active.iter().enumerate().map(|(k, &j)| w[k + 1] * r[j]).sum::<f64>();
            let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            softplus - t * m
        })
        .sum();
    loss / n + 0.5 * l2 * w.rows(1, active.len()).norm_squared()
}

/// Newton's method with step halving on already standardized rows.
fn newton(x: &[Vec<f64>], y: &[f64], l2: f64, tol: f64, max_iter: usize, active: &[usize]) -> Result<(DVector<f64>, usize, f64)> {
    let n = x.len() as f64;
    let p = active.len() + 1;
    let mut w = DVector::<f64>::zeros(p);
    let mut grad_norm = f64::INFINITY;
    for iter in 0..=max_iter {
        let mut g = DVector::<f64>::zeros(p);
        let mut h = DMatrix::<f64>::zeros(p, p);
        let mut feat = vec![0.0; p];
        for (r, &t) in x.iter().zip(y) {
            feat[0] = 1.0;
            for (k, &j) in active.iter().enumerate() {
                feat[k + 1] = r[j];
            }
            let m: f64 = feat.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            let prob = sigmoid(m);
            let d = (prob - t) / n;
            let s = prob * (1.0 - prob) / n;
            for a in 0..p {
                g[a] += d * feat[a];
                if feat[a] != 0.0 {
                    let sa = s * feat[a];
                    for b in a..p {
                        h[(a, b)] += sa * feat[b];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        for k in 1..p {
            g[k] += l2 * w[k];
            h[(k, k)] += l2;
        }
        grad_norm = g.norm();
        if !grad_norm.is_finite() {
            return Err(Error::Divergence("logistic regression gradient is not finite".into()));
        }
        if grad_norm <= tol {
            return Ok((w, iter, grad_norm));
        }
        if iter == max_iter {
            break;
        }
        let mut jitter = 1e-10;
        let step = loop {
            let mut hj = h.clone();
            for a in 0..p {
                hj[(a, a)] += jitter;
            }
            if let Some(ch) = hj.cholesky() {
                break ch.solve(&g);
            }
            jitter *= 100.0;
            if jitter > 1e3 {
                break g.clone();
            }
        };
        let current = objective(x, y, &w, l2, active);
        let mut alpha = 1.0;
        let mut next = &w - &step * alpha;
        while alpha > 1e-12 && objective(x, y, &next, l2, active) > current {
            alpha /= 2.0;
            next = &w - &step * alpha;
        }
        w = next;
    }
    Err(Error::Convergence { what: "logistic regression", iterations: max_iter, grad_norm })
}

/// Fit on raw rows: standardize with these rows' moments, optionally
/// oversample the minority class in standardized space, then run Newton.
pub fn train_lr(rows: &[Vec<f64>], labels: &[bool], params: &LrParams) -> Result<LogisticModel> {
    if rows.is_empty() {
        return Err(Error::Config("logistic regression needs at least one row".into()));
    }
    let d = rows[0].len();
    let standardizer = Standardizer::fit(rows.iter().map(|r| r.as_slice()), &vec![true; d]);
    let mut active = vec![false; d];
    for (j, a) in active.iter_mut().enumerate() {
        let first = rows[0][j];
        *a = rows.iter().any(|r| r[j] != first);
    }
    let mut x: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply(r)).collect();
    let mut y = labels.to_vec();
    if let Some(sp) = &params.smote {
        let over = smote(&x, &y, sp)?;
        x = over.features;
        y = over.labels;
    }
    let targets: Vec<f64> = y.iter().map(|&l| f64::from(u8::from(l))).collect();
    let cols: Vec<usize> = (0..d).filter(|&j| active[j]).collect();
    let (w, iterations, grad_norm) = newton(&x, &targets, params.l2, params.tol, params.max_iter, &cols)?;
    let mut weights = vec![0.0; d];
    for (k, &j) in cols.iter().enumerate() {
        weights[j] = w[k + 1];
    }
    Ok(LogisticModel { standardizer, active, weights, intercept: w[0], iterations, grad_norm })
}

/// A fitted baseline: logistic model plus Platt calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrBaseline {
    pub model: LogisticModel,
    pub calibrator: Calibrator,
}

impl LrBaseline {
    pub fn fit(
        train: (&[Vec<f64>], &[bool]),
        calib: (&[Vec<f64>], &[bool]),
        params: &LrParams,
    ) -> Result<Self> {
        let model = train_lr(train.0, train.1, params)?;
        let calibrator = fit_platt(&model.margins(calib.0), calib.1, Fold::Calib)?;
        Ok(LrBaseline { model, calibrator })
    }

    /// Calibrated probabilities.
    pub fn scores(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        self.calibrator.apply_all(&self.model.margins(rows))
    }
}

/// Search over the penalty and the SMOTE ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrGridSpec {
    pub l2: Vec<f64>,
    /// `None` disables SMOTE for that trial.
    pub smote_ratio: Vec<Option<f64>>,
    pub smote_k: usize,
    pub top_k: usize,
    pub threshold: f64,
}

impl Default for LrGridSpec {
    fn default() -> Self {
        LrGridSpec {
            l2: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0],
            smote_ratio: vec![None, Some(1.0)],
            smote_k: 5,
            top_k: 10,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrTrial {
    pub config_hash: String,
    pub l2: f64,
    pub smote_ratio: Option<f64>,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub valid_auc: Option<f64>,
    pub test_auc: Option<f64>,
    pub test_recall: Option<f64>,
    #[serde(skip)]
    pub baseline: Option<LrBaseline>,
}

#[derive(Debug, Clone)]
pub struct LrGridResult {
    pub trials: Vec<LrTrial>,
    pub top: TopSummary,
}

/// Row sets of the four folds.
#[derive(Debug, Clone, Copy)]
pub struct FoldRows<'a> {
    pub train: (&'a [Vec<f64>], &'a [bool]),
    pub valid: (&'a [Vec<f64>], &'a [bool]),
    pub calib: (&'a [Vec<f64>], &'a [bool]),
    pub test: (&'a [Vec<f64>], &'a [bool]),
}

pub fn lr_grid(spec: &LrGridSpec, data: FoldRows<'_>, seed: u64) -> Result<LrGridResult> {
    let mut points = Vec::new();
    for &l2 in &spec.l2 {
        for &ratio in &spec.smote_ratio {
            points.push((l2, ratio));
        }
    }
    if points.is_empty() {
        return Err(Error::Config("the baseline grid is empty".into()));
    }
    let mut trials: Vec<LrTrial> = points
        .into_par_iter()
        .map(|(l2, ratio)| {
            let hash = fingerprint(format!("lr:{l2}:{ratio:?}:{}", spec.smote_k).as_bytes());
            let params = LrParams {
                l2,
                smote: ratio.map(|target_ratio| SmoteParams { k: spec.smote_k, target_ratio, seed: derive_seed(seed, &hash) }),
                ..Default::default()
            };
            let mut trial = LrTrial {
                config_hash: hash,
                l2,
                smote_ratio: ratio,
                status: TrialStatus::Failed,
                error: None,
                valid_auc: None,
                test_auc: None,
                test_recall: None,
                baseline: None,
            };
            match LrBaseline::fit(data.train, data.calib, &params) {
                Ok(b) => {
                    trial.valid_auc = auc_opt(&b.model.margins(data.valid.0), data.valid.1);
                    let scores = b.scores(data.test.0);
                    trial.test_auc = auc_opt(&scores, data.test.1);
                    trial.test_recall = recall_precision_at_threshold(&scores, data.test.1, spec.threshold).0;
                    trial.status = TrialStatus::Ok;
                    trial.baseline = Some(b);
                }
                Err(e) => {
                    log::warn!("baseline trial {} failed: {e}", trial.config_hash);
                    trial.error = Some(e.to_string());
                }
            }
            trial
        })
        .collect();
    let n = trials.len();
    trials.sort_by(|a, b| {
        (a.status != TrialStatus::Ok, a.valid_auc.is_none())
            .cmp(&(b.status != TrialStatus::Ok, b.valid_auc.is_none()))
            .then_with(|| b.valid_auc.unwrap_or(0.0).total_cmp(&a.valid_auc.unwrap_or(0.0)))
            .then_with(|| a.config_hash.cmp(&b.config_hash))
    });
    let ok = trials.iter().filter(|t| t.status == TrialStatus::Ok).count();
    if ok == 0 {
        return Err(Error::AllTrialsFailed(n));
    }
    let keep = spec.top_k.min(ok);
    let aucs: Vec<f64> = trials[..keep].iter().filter_map(|t| t.test_auc).collect();
    let recalls: Vec<f64> = trials[..keep].iter().filter_map(|t| t.test_recall).collect();
    let (auc_mean, auc_std) = mean_std(&aucs);
    let (recall_mean, recall_std) = mean_std(&recalls);
    for t in trials.iter_mut().skip(1) {
        t.baseline = None;
    }
    Ok(LrGridResult { trials, top: TopSummary { n: keep, auc_mean, auc_std, recall_mean, recall_std } })
}
