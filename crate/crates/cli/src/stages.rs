use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use riskfuse::baseline::{indicator_table, FlatTable, LrBaseline, LrTrial};
use riskfuse::calibration::{fit_platt, fit_temperature, Calibrator};
use riskfuse::claims::{generate_population, ingest_claims, write_claims_file, write_ground_truth, Beneficiary, ClaimRecord};
use riskfuse::cohort::{build_cohort, cohort_summary, Cohort, PlannedRules};
use riskfuse::eval::{
    model_metrics, subgroup_report, surrogate_importance, write_importance_csv, write_subgroups_csv, write_table3,
    ImportanceRow, ModelMetrics, SubgroupRow, Table3Row,
};
use riskfuse::features::{
    featurize, CcsMap, CharlsonWeights, DomainFeatureSpec, FeatureContext, HacRules, LaceTables, SequenceSet, SubgroupKeys,
};
use riskfuse::model::{load_embedding, save_embedding, EmbeddingMode, Model};
use riskfuse::pipeline::{run_deep, run_lr, score_deep, Prepared, Variant};
use riskfuse::rng::derive_seed;
use riskfuse::tensor::{Checkpoint, Tensor};
use riskfuse::train::{Fold, FoldedData, Split, TopSummary, TrialResult};

use crate::config::RunConfig;
use crate::manifest::{file_hash, manifest_hash, Manifest};
use crate::CliError;

pub const STAGES: [&str; 8] = ["generate", "cohort", "featurize", "train", "calibrate", "evaluate", "report", "importance"];

const EMBEDDING_FILE: &str = "embedding.json";

/// Per-variant search results as stored by `train`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeepGridFile {
    pub variant: Variant,
    pub top: TopSummary,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrGridFile {
    pub embedding: EmbeddingMode,
    pub top: TopSummary,
    pub trials: Vec<LrTrial>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub algorithm: String,
    pub embedding: EmbeddingMode,
    pub metrics: ModelMetrics,
    pub top: TopSummary,
    pub calibrator: Calibrator,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsFile {
    pub task: String,
    pub threshold: f64,
    pub models: Vec<ModelReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    pub event_id: String,
    pub beneficiary_id: String,
    pub label: bool,
    pub logit: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceFile {
    pub model: String,
    /// The surrogate is fit to the model's thresholded predictions, so it
    /// explains the model rather than the outcome.
    pub target: String,
    pub rows: Vec<ImportanceRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgroupFile {
    pub model: String,
    pub fold: Fold,
    pub rows: Vec<SubgroupRow>,
}

fn lr_name(embedding: EmbeddingMode) -> String {
    format!("lr-{}", embedding.as_str())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(riskfuse::Error::from)?;
    std::fs::write(path, text + "\n").map_err(riskfuse::Error::from)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Prerequisite(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text).map_err(riskfuse::Error::from)?)
}

/// A configured run rooted at its output directory.
pub struct Workspace {
    pub cfg: RunConfig,
    pub out: PathBuf,
    hash: String,
}

impl Workspace {
    pub fn new(mut cfg: RunConfig) -> Result<Self, CliError> {
        let problems = cfg.validate();
        if !problems.is_empty() {
            return Err(CliError::Invalid(problems));
        }
        cfg.resolve_seeds();
        let out = cfg.paths.output_dir.clone();
        std::fs::create_dir_all(&out)
            .map_err(|e| CliError::Prerequisite(format!("output directory {} is not writable: {e}", out.display())))?;
        let hash = cfg.hash();
        Ok(Workspace { cfg, out, hash })
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.out.join(stage)
    }

    fn synthetic(&self) -> bool {
        self.cfg.paths.claims.is_none()
    }

    /// Stages whose artifacts `stage` reads.
    pub fn upstream(&self, stage: &str) -> Vec<&'static str> {
        let gen = if self.synthetic() { vec!["generate"] } else { vec![] };
        match stage {
            "generate" => vec![],
            "cohort" => gen,
            "featurize" => [gen, vec!["cohort"]].concat(),
            "train" => vec!["featurize"],
            "calibrate" => vec!["featurize", "train"],
            "evaluate" => vec!["featurize", "train", "calibrate"],
            "report" => vec!["featurize", "evaluate"],
            "importance" => vec!["featurize", "train", "calibrate"],
            _ => vec![],
        }
    }

    fn external_files(&self, stage: &str) -> Vec<PathBuf> {
        let p = &self.cfg.paths;
        let mut files: Vec<Option<&PathBuf>> = Vec::new();
        match stage {
            "cohort" => files.extend([p.claims.as_ref(), p.ccs_map.as_ref(), p.planned_rules.as_ref()]),
            "featurize" => files.extend([
                p.claims.as_ref(),
                p.charlson_weights.as_ref(),
                p.lace_tables.as_ref(),
                p.hac_rules.as_ref(),
                p.domain_spec.as_ref(),
            ]),
            "train" => files.push(p.pretrained_embedding.as_ref()),
            _ => {}
        }
        files.into_iter().flatten().cloned().collect()
    }

    /// Upstream manifests (verified against their outputs) and external
    /// files, by fingerprint.
    fn inputs(&self, stage: &str) -> Result<BTreeMap<String, String>, CliError> {
        let mut inputs = BTreeMap::new();
        for up in self.upstream(stage) {
            let dir = self.stage_dir(up);
            let manifest = Manifest::read(&dir).ok_or_else(|| {
                CliError::Prerequisite(format!("stage `{stage}` needs the output of `{up}`; run `riskfuse {up}` first"))
            })?;
            manifest
                .verify(&dir)
                .map_err(|e| CliError::Prerequisite(format!("{e}; rerun `riskfuse {up}`")))?;
            if manifest.config_hash != self.hash {
                log::warn!("stage `{up}` ran with a different configuration");
            }
            inputs.insert(format!("stage:{up}"), manifest_hash(&dir)?);
        }
        for f in self.external_files(stage) {
            inputs.insert(f.display().to_string(), file_hash(&f)?);
        }
        Ok(inputs)
    }

    /// The stage's manifest matches the current configuration, its inputs
    /// and its own outputs.
    pub fn is_current(&self, stage: &str) -> bool {
        let dir = self.stage_dir(stage);
        let Some(m) = Manifest::read(&dir) else { return false };
        m.config_hash == self.hash
            && m.verify(&dir).is_ok()
            && self.inputs(stage).is_ok_and(|i| i == m.inputs)
    }

    pub fn run(&self, stage: &str) -> Result<(), CliError> {
        let inputs = self.inputs(stage)?;
        let dir = self.stage_dir(stage);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(riskfuse::Error::from)?;
        }
        std::fs::create_dir_all(&dir).map_err(riskfuse::Error::from)?;
        log::info!("running stage `{stage}`");
        match stage {
            "generate" => self.generate(&dir)?,
            "cohort" => self.cohort(&dir)?,
            "featurize" => self.featurize(&dir)?,
            "train" => self.train(&dir)?,
            "calibrate" => self.calibrate(&dir)?,
            "evaluate" => self.evaluate(&dir)?,
            "report" => self.report(&dir)?,
            "importance" => self.importance(&dir)?,
            other => return Err(CliError::Invalid(vec![format!("unknown stage `{other}`")])),
        }
        Manifest {
            stage: stage.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.cfg.seed,
            config_hash: self.hash.clone(),
            inputs,
            outputs: Manifest::collect_outputs(&dir)?,
        }
        .write(&dir)
    }

    /// Every stage in order, skipping those already up to date. Returns the
    /// stages that ran.
    pub fn pipeline(&self) -> Result<Vec<&'static str>, CliError> {
        let mut ran = Vec::new();
        for stage in STAGES {
            if stage == "generate" && !self.synthetic() {
                continue;
            }
            if self.is_current(stage) {
                log::info!("stage `{stage}` is up to date");
                continue;
            }
            self.run(stage)?;
            ran.push(stage);
        }
        Ok(ran)
    }

    // loaders

    fn claims_path(&self) -> PathBuf {
        self.cfg.paths.claims.clone().unwrap_or_else(|| self.stage_dir("generate").join("claims.jsonl"))
    }

    fn load_claims(&self) -> Result<(Vec<Beneficiary>, Vec<ClaimRecord>), CliError> {
        let path = self.claims_path();
        ingest_claims(&path).map_err(|e| match e {
            riskfuse::Error::Io(io) => CliError::Prerequisite(format!("cannot read claims {}: {io}", path.display())),
            other => other.into(),
        })
    }

    fn load_ccs(&self) -> Result<CcsMap, CliError> {
        Ok(CcsMap::from_csv(&self.stage_dir("cohort").join("ccs_map.csv"))?)
    }

    fn feature_context(&self, ccs: CcsMap) -> Result<FeatureContext, CliError> {
        let p = &self.cfg.paths;
        let mut ctx = FeatureContext::new(ccs);
        if let Some(f) = &p.charlson_weights {
            ctx.charlson = CharlsonWeights::from_json_file(f)?;
        }
        if let Some(f) = &p.lace_tables {
            ctx.lace = LaceTables::from_json_file(f)?;
        }
        if let Some(f) = &p.hac_rules {
            ctx.hac = HacRules::from_json_file(f)?;
        }
        ctx.spec = match (&p.domain_spec, self.cfg.ablation.use_domain_features) {
            (_, false) => DomainFeatureSpec::empty(),
            (Some(f), true) => DomainFeatureSpec::from_json_file(f)?,
            (None, true) => DomainFeatureSpec::default(),
        };
        ctx.lookback_days = self.cfg.cohort.lookback_days;
        Ok(ctx)
    }

    fn load_set(&self) -> Result<SequenceSet, CliError> {
        Ok(SequenceSet::read(&self.stage_dir("featurize"))?)
    }

    fn load_prepared(&self) -> Result<Prepared, CliError> {
        let set = self.load_set()?;
        let split: Split = read_json(&self.stage_dir("train").join("split.json"))?;
        let data = FoldedData::new(&set, &split)?;
        Ok(Prepared { set, split, data })
    }

    fn load_embedding(&self) -> Result<Option<Tensor>, CliError> {
        let path = self.stage_dir("train").join(EMBEDDING_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let ck = Checkpoint::read(&path)?;
        Ok(ck.get("W_e").cloned())
    }

    fn lr_table(&self, prepared: &Prepared, embedding: EmbeddingMode, w: Option<&Tensor>) -> Result<FlatTable, CliError> {
        let w = match embedding {
            EmbeddingMode::Linear => None,
            EmbeddingMode::Pretrained => Some(w.ok_or_else(|| {
                CliError::Prerequisite("the pretrained embedding is missing; rerun `riskfuse train`".into())
            })?),
        };
        Ok(prepared.flat_table(w, self.cfg.ablation.use_domain_features))
    }

    fn calibrated_model(&self, v: Variant) -> Result<(Model, Calibrator), CliError> {
        let path = self.stage_dir("calibrate").join(v.name()).join("model.json");
        let ck = Checkpoint::read(&path)
            .map_err(|e| CliError::Prerequisite(format!("{e}; run `riskfuse calibrate` first")))?;
        let (model, extra) = Model::from_checkpoint(&ck)?;
        let cal: Calibrator = serde_json::from_value(extra["calibrator"].clone()).map_err(riskfuse::Error::from)?;
        Ok((model, cal))
    }

    // stages

    fn generate(&self, dir: &Path) -> Result<(), CliError> {
        let pop = generate_population(&self.cfg.synthetic)?;
        write_claims_file(&dir.join("claims.jsonl"), &pop.beneficiaries, &pop.claims)?;
        let gt = std::fs::File::create(dir.join("ground_truth.csv")).map_err(riskfuse::Error::from)?;
        write_ground_truth(gt, &pop.ground_truth)?;
        CcsMap::synthetic(&self.cfg.synthetic.vocab()).write_csv(&dir.join("ccs_map.csv"))?;
        write_json(&dir.join("signal.json"), &pop.coefficients)
    }

    fn cohort(&self, dir: &Path) -> Result<(), CliError> {
        let (benes, claims) = self.load_claims()?;
        let ccs = match &self.cfg.paths.ccs_map {
            Some(p) => CcsMap::from_csv(p)?,
            None => CcsMap::from_csv(&self.stage_dir("generate").join("ccs_map.csv"))?,
        };
        let rules = match &self.cfg.paths.planned_rules {
            Some(p) => PlannedRules::from_json_file(p)?,
            None => PlannedRules::default(),
        };
        let cohort = build_cohort(&benes, &claims, &self.cfg.cohort, &rules, &ccs)?;
        cohort.write_jsonl(&dir.join("cohort.jsonl"))?;
        ccs.write_csv(&dir.join("ccs_map.csv"))?;
        let eligible: Vec<_> = cohort.eligible().cloned().collect();
        let summary = cohort_summary(&eligible, &benes);
        let f = std::fs::File::create(dir.join("summary.csv")).map_err(riskfuse::Error::from)?;
        summary.write_csv(f)?;
        log::info!("cohort: {} index events, {} eligible", cohort.events.len(), eligible.len());
        Ok(())
    }

    fn featurize(&self, dir: &Path) -> Result<(), CliError> {
        let (benes, claims) = self.load_claims()?;
        let cohort = Cohort::read_jsonl(&self.stage_dir("cohort").join("cohort.jsonl"))?;
        let ctx = self.feature_context(self.load_ccs()?)?;
        let set = featurize(&cohort, &benes, &claims, self.cfg.task, &ctx, &self.cfg.sequence_options())?;
        log::info!("featurize: {} sequences, {} positive", set.sequences.len(), set.positives());
        set.write(dir)?;
        Ok(())
    }

    fn train(&self, dir: &Path) -> Result<(), CliError> {
        let set = self.load_set()?;
        let prepared = riskfuse::pipeline::prepare(set, &self.cfg.split)?;
        write_json(&dir.join("split.json"), &prepared.split)?;
        write_json(&dir.join("standardizer.json"), &prepared.data.standardizer)?;
        let seed = derive_seed(self.cfg.seed, "train");
        let needs_embedding = self.cfg.ablation.embedding.contains(&EmbeddingMode::Pretrained);
        let embedding = if needs_embedding {
            let w = match &self.cfg.paths.pretrained_embedding {
                Some(p) => load_embedding(p, prepared.set.input_dim, self.cfg.grid.embed_dim)?,
                None => prepared.derived_embedding(self.cfg.grid.embed_dim)?,
            };
            save_embedding(&w, &dir.join(EMBEDDING_FILE))?;
            Some(w)
        } else {
            None
        };
        for v in self.cfg.variants() {
            let g = run_deep(&prepared, &self.cfg.grid, v, embedding.as_ref(), seed)?;
            let vdir = dir.join(v.name());
            std::fs::create_dir_all(&vdir).map_err(riskfuse::Error::from)?;
            g.write_ledger(&vdir.join("trials.csv"))?;
            let best = g.best();
            let model = best.model.as_ref().expect("best trial keeps its weights");
            let extra = serde_json::json!({ "variant": v, "trial": best });
            model.to_checkpoint(extra)?.write(&vdir.join("model.json"))?;
            log::info!("{}: best valid AUC {:?}, top-{} test AUC {:.3}", v.name(), best.valid_auc, g.top.n, g.top.auc_mean);
            write_json(&vdir.join("grid.json"), &DeepGridFile { variant: v, top: g.top, trials: g.trials })?;
        }
        if self.cfg.ablation.baseline {
            for &e in &self.cfg.ablation.embedding {
                let table = self.lr_table(&prepared, e, embedding.as_ref())?;
                let g = run_lr(&prepared, &self.cfg.lr_grid, &table, seed)?;
                let ldir = dir.join(lr_name(e));
                std::fs::create_dir_all(&ldir).map_err(riskfuse::Error::from)?;
                write_lr_ledger(&g.trials, &ldir.join("trials.csv"))?;
                let best = g.trials[0].baseline.as_ref().expect("best baseline trial keeps its model");
                write_json(&ldir.join("model.json"), best)?;
                write_json(&ldir.join("grid.json"), &LrGridFile { embedding: e, top: g.top, trials: g.trials })?;
            }
        }
        Ok(())
    }

    fn calibrate(&self, dir: &Path) -> Result<(), CliError> {
        let prepared = self.load_prepared()?;
        let folds = prepared.folds();
        let calib_labels = prepared.labels(Fold::Calib);
        for v in self.cfg.variants() {
            let src = self.stage_dir("train").join(v.name()).join("model.json");
            let ck = Checkpoint::read(&src)?;
            let (model, mut extra) = Model::from_checkpoint(&ck)?;
            let logits: Vec<f64> = riskfuse::train::predict_examples(&model, &folds.calib)?.iter().map(|p| p.logit).collect();
            let cal = fit_temperature(&logits, &calib_labels, Fold::Calib)?;
            extra["calibrator"] = serde_json::to_value(&cal).map_err(riskfuse::Error::from)?;
            let vdir = dir.join(v.name());
            std::fs::create_dir_all(&vdir).map_err(riskfuse::Error::from)?;
            model.to_checkpoint(extra)?.write(&vdir.join("model.json"))?;
        }
        if self.cfg.ablation.baseline {
            let w = self.load_embedding()?;
            for &e in &self.cfg.ablation.embedding {
                let mut b: LrBaseline = read_json(&self.stage_dir("train").join(lr_name(e)).join("model.json"))?;
                let table = self.lr_table(&prepared, e, w.as_ref())?;
                let rows = table.select(&prepared.data.indices(Fold::Calib));
                b.calibrator = fit_platt(&b.model.margins(&rows), &calib_labels, Fold::Calib)?;
                write_json(&dir.join(format!("{}.json", lr_name(e))), &b)?;
            }
        }
        Ok(())
    }

    fn evaluate(&self, dir: &Path) -> Result<(), CliError> {
        let prepared = self.load_prepared()?;
        let folds = prepared.folds();
        let test_idx = prepared.data.indices(Fold::Test);
        let labels = prepared.labels(Fold::Test);
        let ev = &self.cfg.evaluation;
        let mut models = Vec::new();
        let mut scores = Vec::new();
        let mut push_scores = |name: &str, logits: &[f64], probs: &[f64]| {
            for (k, &i) in test_idx.iter().enumerate() {
                let s = &prepared.set.sequences[i];
                scores.push(ScoreRow {
                    model: name.to_string(),
                    event_id: s.event_id.clone(),
                    beneficiary_id: s.beneficiary_id.clone(),
                    label: s.label,
                    logit: logits[k],
                    probability: probs[k],
                });
            }
        };
        if self.cfg.ablation.baseline {
            let w = self.load_embedding()?;
            for &e in &self.cfg.ablation.embedding {
                let name = lr_name(e);
                let b: LrBaseline = read_json(&self.stage_dir("calibrate").join(format!("{name}.json")))?;
                let grid: LrGridFile = read_json(&self.stage_dir("train").join(&name).join("grid.json"))?;
                let table = self.lr_table(&prepared, e, w.as_ref())?;
                let rows = table.select(&test_idx);
                let logits = b.model.margins(&rows);
                let probs = b.calibrator.apply_all(&logits);
                push_scores(&name, &logits, &probs);
                models.push(ModelReport {
                    name,
                    algorithm: "LR".into(),
                    embedding: e,
                    metrics: model_metrics(&probs, &labels, ev.threshold, &ev.recall_ks),
                    top: grid.top,
                    calibrator: b.calibrator,
                });
            }
        }
        for v in self.cfg.variants() {
            let (model, cal) = self.calibrated_model(v)?;
            let grid: DeepGridFile = read_json(&self.stage_dir("train").join(v.name()).join("grid.json"))?;
            let (logits, probs) = score_deep(&model, &cal, &folds.test)?;
            push_scores(&v.name(), &logits, &probs);
            models.push(ModelReport {
                name: v.name(),
                algorithm: v.algorithm().into(),
                embedding: v.embedding,
                metrics: model_metrics(&probs, &labels, ev.threshold, &ev.recall_ks),
                top: grid.top,
                calibrator: cal,
            });
        }
        write_json(
            &dir.join("metrics.json"),
            &MetricsFile { task: self.cfg.task.as_str().into(), threshold: ev.threshold, models },
        )?;
        let mut w = csv::Writer::from_path(dir.join("scores.csv")).map_err(riskfuse::Error::from)?;
        for r in &scores {
            w.serialize(r).map_err(riskfuse::Error::from)?;
        }
        w.flush().map_err(riskfuse::Error::from)?;
        Ok(())
    }

    fn report(&self, dir: &Path) -> Result<(), CliError> {
        let metrics: MetricsFile = read_json(&self.stage_dir("evaluate").join("metrics.json"))?;
        let rows: Vec<Table3Row> = metrics
            .models
            .iter()
            .map(|m| Table3Row {
                algorithm: m.algorithm.clone(),
                embedding: m.embedding.as_str().into(),
                auc: m.top.auc_mean,
                auc_std: m.top.auc_std,
                recall: m.metrics.recall,
            })
            .collect();
        write_table3(&rows, &dir.join("table3.csv"))?;

        let Some(primary) = self.cfg.primary_variant() else { return Ok(()) };
        let set = self.load_set()?;
        let by_id: BTreeMap<&str, &SubgroupKeys> = set.sequences.iter().map(|s| (s.event_id.as_str(), &s.keys)).collect();
        let mut r = csv::Reader::from_path(self.stage_dir("evaluate").join("scores.csv")).map_err(riskfuse::Error::from)?;
        let mut keys = Vec::new();
        let mut probs = Vec::new();
        let mut labels = Vec::new();
        for row in r.deserialize::<ScoreRow>() {
            let row = row.map_err(riskfuse::Error::from)?;
            if row.model != primary.name() {
                continue;
            }
            let k = by_id.get(row.event_id.as_str()).ok_or_else(|| {
                CliError::Prerequisite(format!("scored event {} is not in the featurized set; rerun `riskfuse evaluate`", row.event_id))
            })?;
            keys.push(*k);
            probs.push(row.probability);
            labels.push(row.label);
        }
        let sub = subgroup_report(&keys, &probs, &labels, &self.cfg.evaluation.subgroups);
        write_subgroups_csv(&sub, &dir.join("subgroups.csv"))?;
        write_json(&dir.join("subgroups.json"), &SubgroupFile { model: primary.name(), fold: Fold::Test, rows: sub })
    }

    fn importance(&self, dir: &Path) -> Result<(), CliError> {
        let Some(primary) = self.cfg.primary_variant() else { return Ok(()) };
        let prepared = self.load_prepared()?;
        let (model, cal) = self.calibrated_model(primary)?;
        let all: Vec<riskfuse::train::Example<'_>> = (0..prepared.set.sequences.len())
            .map(|i| riskfuse::train::Example {
                steps: &prepared.set.sequences[i].steps,
                z: &prepared.data.z[i],
                label: prepared.set.sequences[i].label,
            })
            .collect();
        let (_, probs) = score_deep(&model, &cal, &all)?;
        let z: Vec<Vec<f64>> = prepared.set.sequences.iter().map(|s| s.z.clone()).collect();
        let table = indicator_table(&prepared.set, &z);
        let threshold = self.cfg.evaluation.threshold;
        let rows = surrogate_importance(&table, &probs, threshold, self.cfg.evaluation.importance_l2)?;
        write_importance_csv(&rows, &dir.join("importance.csv"))?;
        write_json(
            &dir.join("importance.json"),
            &ImportanceFile {
                model: primary.name(),
                target: format!("model prediction >= {threshold} (the surrogate explains the model, not the outcome)"),
                rows,
            },
        )
    }
}

fn write_lr_ledger(trials: &[LrTrial], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(riskfuse::Error::from)?;
    w.write_record(["config_hash", "l2", "smote_ratio", "valid_auc", "test_auc", "test_recall", "status"])
        .map_err(riskfuse::Error::from)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for t in trials {
        w.write_record([
            t.config_hash.clone(),
            t.l2.to_string(),
            opt(t.smote_ratio),
            opt(t.valid_auc),
            opt(t.test_auc),
            opt(t.test_recall),
            serde_json::to_value(t.status).map_err(riskfuse::Error::from)?.as_str().unwrap_or("").to_string(),
        ])
        .map_err(riskfuse::Error::from)?;
    }
    w.flush().map_err(riskfuse::Error::from)?;
    Ok(())
}
