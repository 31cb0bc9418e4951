use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{predict_examples, train, EpochStats, Example, Fold, TrainParams};
use crate::calibration::{fit_temperature, Calibrator};
use crate::error::{Error, Result};
use crate::eval::{auc_opt, recall_precision_at_threshold};
use crate::model::{Model, ModelConfig};
use crate::rng::{derive_seed, fingerprint};
use crate::tensor::{OptimizerKind, Tensor};

/// Axes of the search plus the settings shared by every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub hidden: Vec<usize>,
    pub layers: Vec<usize>,
    pub batch: Vec<usize>,
    pub lr: Vec<f64>,
    pub w_pos: Vec<f64>,
    pub embed_dim: usize,
    pub mlp_hidden_dims: Vec<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    pub optimizer: OptimizerKind,
    pub top_k: usize,
    pub threshold: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            hidden: vec![16, 32],
            layers: vec![1, 2],
            batch: vec![32, 64],
            lr: vec![1e-3, 3e-3],
            w_pos: vec![1.0, 4.0],
            embed_dim: 16,
            mlp_hidden_dims: vec![16],
            max_epochs: 100,
            patience: 5,
            optimizer: OptimizerKind::Adam,
            top_k: 10,
            threshold: 0.5,
        }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub hidden: usize,
    pub layers: usize,
    pub batch: usize,
    pub lr: f64,
    pub w_pos: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, empty) in [
            ("hidden", self.hidden.is_empty()),
            ("layers", self.layers.is_empty()),
            ("batch", self.batch.is_empty()),
            ("lr", self.lr.is_empty()),
            ("w_pos", self.w_pos.is_empty()),
        ] {
            if empty {
                problems.push(format!("grid axis `{name}` is empty"));
            }
        }
        if self.top_k == 0 {
            problems.push("top_k must be at least 1".into());
        }
        if problems.is_empty() { Ok(()) } else { Err(Error::Config(problems.join("; "))) }
    }

    /// Cartesian product in axis order.
    pub fn trials(&self) -> Vec<TrialConfig> {
        let mut out = Vec::new();
        for &hidden in &self.hidden {
            for &layers in &self.layers {
                for &batch in &self.batch {
                    for &lr in &self.lr {
                        for &w_pos in &self.w_pos {
                            out.push(TrialConfig { hidden, layers, batch, lr, w_pos });
                        }
                    }
                }
            }
        }
        out
    }

    fn model_config(&self, base: &ModelConfig, t: &TrialConfig, seed: u64) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            hidden_dim: t.hidden,
            n_gru_layers: t.layers,
            mlp_hidden_dims: self.mlp_hidden_dims.clone(),
            seed,
            ..base.clone()
        }
    }

    fn train_params(&self, t: &TrialConfig, seed: u64) -> TrainParams {
        TrainParams {
            lr: t.lr,
            batch_size: t.batch,
            w_pos: t.w_pos,
            w_neg: 1.0,
            max_epochs: self.max_epochs,
            patience: self.patience,
            optimizer: self.optimizer,
            seed,
        }
    }
}

/// Fingerprint of everything that determines a trial apart from the data.
pub fn config_hash(model: &ModelConfig, params: &TrainParams) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        model: &'a ModelConfig,
        params: &'a TrainParams,
    }
    let mut m = model.clone();
    m.seed = 0;
    let mut p = params.clone();
    p.seed = 0;
    fingerprint(&serde_json::to_vec(&Key { model: &m, params: &p }).expect("config serializes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub config_hash: String,
    pub config: TrialConfig,
    pub seed: u64,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub valid_auc: Option<f64>,
    pub test_auc: Option<f64>,
    /// Recall at the threshold on temperature-calibrated test scores.
    pub test_recall: Option<f64>,
    pub best_epoch: Option<usize>,
    pub calibrator: Option<Calibrator>,
    pub curve: Vec<EpochStats>,
    #[serde(skip)]
    pub model: Option<Model>,
}

/// Mean and sample standard deviation over the top trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopSummary {
    pub n: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    // shifted by the first value so identical inputs give an exact mean
    let mean = xs[0] + xs.iter().map(|x| x - xs[0]).sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl TopSummary {
    pub fn of(trials: &[&TrialResult]) -> Self {
        let aucs: Vec<f64> = trials.iter().filter_map(|t| t.test_auc).collect();
        let recalls: Vec<f64> = trials.iter().filter_map(|t| t.test_recall).collect();
        let (auc_mean, auc_std) = mean_std(&aucs);
        let (recall_mean, recall_std) = mean_std(&recalls);
        TopSummary { n: trials.len(), auc_mean, auc_std, recall_mean, recall_std }
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    /// Successful trials by descending validation AUC, then failed ones.
    pub trials: Vec<TrialResult>,
    pub top: TopSummary,
}

impl GridResult {
    pub fn best(&self) -> &TrialResult {
        &self.trials[0]
    }

    pub fn failed(&self) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter(|t| t.status == TrialStatus::Failed)
    }

    pub fn write_ledger(&self, path: &Path) -> Result<()> {
        write_ledger(&self.trials, path)
    }
}

/// Order trials by (validation AUC desc, config hash); failures last.
pub fn rank_trials(trials: &mut [TrialResult]) {
    trials.sort_by(|a, b| {
        let key = |t: &TrialResult| (t.status != TrialStatus::Ok, t.valid_auc.is_none());
        key(a)
            .cmp(&key(b))
            .then_with(|| b.valid_auc.unwrap_or(0.0).total_cmp(&a.valid_auc.unwrap_or(0.0)))
            .then_with(|| a.config_hash.cmp(&b.config_hash))
    });
}

pub fn write_ledger(trials: &[TrialResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["config_hash", "hidden", "layers", "batch", "lr", "w_pos", "valid_auc", "test_auc", "test_recall", "status"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for t in trials {
        let c = &t.config;
        w.write_record([
            t.config_hash.clone(),
            c.hidden.to_string(),
            c.layers.to_string(),
            c.batch.to_string(),
            c.lr.to_string(),
            c.w_pos.to_string(),
            opt(t.valid_auc),
            opt(t.test_auc),
            opt(t.test_recall),
            match t.status {
                TrialStatus::Ok => "ok".to_string(),
                TrialStatus::Failed => "failed".to_string(),
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The four folds as model inputs.
#[derive(Debug, Clone, Copy)]
pub struct FoldExamples<'a> {
    pub train: &'a [Example<'a>],
    pub valid: &'a [Example<'a>],
    pub calib: &'a [Example<'a>],
    pub test: &'a [Example<'a>],
}

/// Train, calibrate and score one trial.
pub fn run_trial(
    model_config: &ModelConfig,
    params: &TrainParams,
    pretrained: Option<&Tensor>,
    data: FoldExamples<'_>,
    threshold: f64,
) -> Result<(Model, Calibrator, TrialScores)> {
    let outcome = train(model_config, pretrained, data.train, data.valid, params)?;
    let logits = |ex: &[Example<'_>]| -> Result<Vec<f64>> {
        Ok(predict_examples(&outcome.model, ex)?.into_iter().map(|p| p.logit).collect())
    };
    let labels = |ex: &[Example<'_>]| ex.iter().map(|e| e.label).collect::<Vec<bool>>();
    let calibrator = fit_temperature(&logits(data.calib)?, &labels(data.calib), Fold::Calib)?;
    let test_logits = logits(data.test)?;
    let test_labels = labels(data.test);
    let calibrated = calibrator.apply_all(&test_logits);
    let scores = TrialScores {
        valid_auc: outcome.best_valid_auc,
        test_auc: auc_opt(&calibrated, &test_labels),
        test_recall: recall_precision_at_threshold(&calibrated, &test_labels, threshold).0,
        best_epoch: outcome.best_epoch,
        curve: outcome.curve,
    };
    Ok((outcome.model, calibrator, scores))
}

#[derive(Debug, Clone)]
pub struct TrialScores {
    pub valid_auc: Option<f64>,
    pub test_auc: Option<f64>,
    pub test_recall: Option<f64>,
    pub best_epoch: usize,
    pub curve: Vec<EpochStats>,
}

/// Run every grid point in parallel. Each trial's seed derives from the base
/// seed and its config hash, so results do not depend on execution order.
/// Only the top `top_k` trials keep their weights.
pub fn grid_search(
    spec: &GridSpec,
    base: &ModelConfig,
    pretrained: Option<&Tensor>,
    data: FoldExamples<'_>,
    seed: u64,
) -> Result<GridResult> {
    spec.validate()?;
    let mut trials: Vec<TrialResult> = spec
        .trials()
        .into_par_iter()
        .map(|t| {
            let probe_cfg = spec.model_config(base, &t, 0);
            let probe_params = spec.train_params(&t, 0);
            let hash = config_hash(&probe_cfg, &probe_params);
            let trial_seed = derive_seed(seed, &hash);
            let cfg = spec.model_config(base, &t, trial_seed);
            let params = spec.train_params(&t, trial_seed);
            let mut result = TrialResult {
                config_hash: hash,
                config: t,
                seed: trial_seed,
                status: TrialStatus::Failed,
                error: None,
                valid_auc: None,
                test_auc: None,
                test_recall: None,
                best_epoch: None,
                calibrator: None,
                curve: Vec::new(),
                model: None,
            };
            match run_trial(&cfg, &params, pretrained, data, spec.threshold) {
                Ok((model, calibrator, s)) => {
                    result.status = TrialStatus::Ok;
                    result.valid_auc = s.valid_auc;
                    result.test_auc = s.test_auc;
                    result.test_recall = s.test_recall;
                    result.best_epoch = Some(s.best_epoch);
                    result.calibrator = Some(calibrator);
                    result.curve = s.curve;
                    result.model = Some(model);
                }
                Err(e) => {
                    log::warn!("trial {} failed: {e}", result.config_hash);
                    result.error = Some(e.to_string());
                }
            }
            result
        })
        .collect();
    let n = trials.len();
    if trials.iter().all(|t| t.status == TrialStatus::Failed) {
        for t in &trials {
            log::error!("trial {}: {}", t.config_hash, t.error.as_deref().unwrap_or("unknown"));
        }
        return Err(Error::AllTrialsFailed(n));
    }
    rank_trials(&mut trials);
    let ok = trials.iter().filter(|t| t.status == TrialStatus::Ok).count();
    let keep = spec.top_k.min(ok);
    for t in trials.iter_mut().skip(keep) {
        t.model = None;
    }
    let top = TopSummary::of(&trials[..keep].iter().collect::<Vec<_>>());
    Ok(GridResult { trials, top })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Step;
    use crate::model::{EmbeddingMode, Fusion};
    use rand::Rng as _;

    fn base() -> ModelConfig {
        ModelConfig {
            input_dim: 10,
            embed_dim: 4,
            hidden_dim: 8,
            n_gru_layers: 1,
            fusion: Fusion::None,
            mlp_hidden_dims: vec![],
            domain_dim: 1,
            embedding: EmbeddingMode::Linear,
            seed: 0,
        }
    }

    fn data(n: usize, seed: u64) -> (Vec<Vec<Step>>, Vec<Vec<f64>>, Vec<bool>) {
        let mut r = crate::rng::rng(seed);
        let mut s = Vec::new();
        let mut z = Vec::new();
        let mut l = Vec::new();
        for i in 0..n {
            let label = i % 3 == 0;
            let mut x = vec![r.random_range(1..10)];
            if label {
                x.insert(0, 0);
            }
            s.push(vec![Step { day_offset: 0, x }]);
            z.push(vec![0.0]);
            l.push(label);
        }
        (s, z, l)
    }

    fn examples<'a>(s: &'a [Vec<Step>], z: &'a [Vec<f64>], l: &[bool]) -> Vec<Example<'a>> {
        (0..s.len()).map(|i| Example { steps: &s[i], z: &z[i], label: l[i] }).collect()
    }

    fn small_spec() -> GridSpec {
        GridSpec {
            hidden: vec![8],
            layers: vec![1],
            batch: vec![16],
            lr: vec![0.03],
            w_pos: vec![1.0],
            embed_dim: 4,
            mlp_hidden_dims: vec![],
            max_epochs: 6,
            patience: 2,
            ..Default::default()
        }
    }

    #[test]
    fn grid_of_one_summarizes_that_trial() {
        let (s, z, l) = data(60, 1);
        let ex = examples(&s, &z, &l);
        let folds = FoldExamples { train: &ex, valid: &ex, calib: &ex, test: &ex };
        let g = grid_search(&small_spec(), &base(), None, folds, 7).unwrap();
        assert_eq!(g.trials.len(), 1);
        let t = g.best();
        assert_eq!(g.top.n, 1);
        assert_eq!(g.top.auc_mean, t.test_auc.unwrap());
        assert_eq!(g.top.recall_mean, t.test_recall.unwrap());
        assert_eq!(g.top.auc_std, 0.0);
    }

    #[test]
    fn dominant_learning_rate_ranks_first() {
        let (s, z, l) = data(60, 2);
        let ex = examples(&s, &z, &l);
        let (vs, vz, vl) = data(60, 3);
        let vex = examples(&vs, &vz, &vl);
        let folds = FoldExamples { train: &ex, valid: &vex, calib: &vex, test: &vex };
        let spec = GridSpec { lr: vec![1e-9, 0.05], max_epochs: 15, patience: 15, ..small_spec() };
        let g = grid_search(&spec, &base(), None, folds, 3).unwrap();
        assert_eq!(g.best().config.lr, 0.05);
        assert!(g.best().valid_auc.unwrap() > 0.95);
        assert!(g.trials[0].model.is_some());
    }

    #[test]
    fn ranking_ignores_input_order() {
        let mk = |h: &str, auc: Option<f64>, status| TrialResult {
            config_hash: h.into(),
            config: TrialConfig { hidden: 8, layers: 1, batch: 8, lr: 0.1, w_pos: 1.0 },
            seed: 0,
            status,
            error: None,
            valid_auc: auc,
            test_auc: auc,
            test_recall: None,
            best_epoch: None,
            calibrator: None,
            curve: vec![],
            model: None,
        };
        let mut a = vec![
            mk("b", Some(0.7), TrialStatus::Ok),
            mk("a", Some(0.7), TrialStatus::Ok),
            mk("c", None, TrialStatus::Failed),
            mk("d", Some(0.9), TrialStatus::Ok),
        ];
        let mut b: Vec<TrialResult> = a.iter().rev().cloned().collect();
        rank_trials(&mut a);
        rank_trials(&mut b);
        let order = |v: &[TrialResult]| v.iter().map(|t| t.config_hash.clone()).collect::<Vec<_>>();
        assert_eq!(order(&a), ["d", "a", "b", "c"]);
        assert_eq!(order(&a), order(&b));
    }

    #[test]
    fn identical_trials_have_zero_spread() {
        assert_eq!(mean_std(&[0.7; 10]), (0.7, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 2f64.sqrt()));
    }

    #[test]
    fn ledger_columns() {
        let (s, z, l) = data(30, 4);
        let ex = examples(&s, &z, &l);
        let folds = FoldExamples { train: &ex, valid: &ex, calib: &ex, test: &ex };
        let g = grid_search(&small_spec(), &base(), None, folds, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.csv");
        g.write_ledger(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "config_hash,hidden,layers,batch,lr,w_pos,valid_auc,test_auc,test_recall,status");
        assert!(lines.next().unwrap().ends_with(",ok"));
    }

    #[test]
    fn all_failed_is_fatal() {
        let (s, z, l) = data(30, 5);
        let ex = examples(&s, &z, &l);
        let folds = FoldExamples { train: &ex, valid: &ex, calib: &ex, test: &ex };
        // batch below the allowed range fails every trial
        let spec = GridSpec { batch: vec![2], ..small_spec() };
        assert!(matches!(grid_search(&spec, &base(), None, folds, 1), Err(Error::AllTrialsFailed(1))));
    }

    #[test]
    fn hash_ignores_seed_but_not_settings() {
        let spec = small_spec();
        let t = spec.trials()[0];
        let a = config_hash(&spec.model_config(&base(), &t, 1), &spec.train_params(&t, 1));
        let b = config_hash(&spec.model_config(&base(), &t, 2), &spec.train_params(&t, 9));
        assert_eq!(a, b);
        let t2 = TrialConfig { lr: 0.5, ..t };
        assert_ne!(a, config_hash(&spec.model_config(&base(), &t2, 1), &spec.train_params(&t2, 1)));
    }
}
