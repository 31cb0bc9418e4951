use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use riskfuse::baseline::LrGridSpec;
use riskfuse::claims::SyntheticConfig;
use riskfuse::cohort::{CohortConfig, Task};
use riskfuse::eval::SubgroupOptions;
use riskfuse::features::SequenceOptions;
use riskfuse::model::{EmbeddingMode, Fusion};
use riskfuse::pipeline::Variant;
use riskfuse::rng::{derive_seed, fingerprint};
use riskfuse::train::{GridSpec, SplitSpec};

/// The bundled demo configuration.
pub const DEMO_CONFIG: &str = include_str!("../configs/demo.json");

/// Input files. Missing optional paths fall back to the synthetic data and
/// bundled rule sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// JSONL claims; when absent the `generate` stage provides them.
    pub claims: Option<PathBuf>,
    pub ccs_map: Option<PathBuf>,
    pub planned_rules: Option<PathBuf>,
    pub charlson_weights: Option<PathBuf>,
    pub lace_tables: Option<PathBuf>,
    pub hac_rules: Option<PathBuf>,
    pub domain_spec: Option<PathBuf>,
    /// Checkpoint holding a `W_e` tensor for the pretrained embedding mode.
    pub pretrained_embedding: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            claims: None,
            ccs_map: None,
            planned_rules: None,
            charlson_weights: None,
            lace_tables: None,
            hac_rules: None,
            domain_spec: None,
            pretrained_embedding: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub include_outpatient: bool,
    pub use_domain_features: bool,
    pub fusion: Vec<Fusion>,
    pub embedding: Vec<EmbeddingMode>,
    pub baseline: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation {
            include_outpatient: true,
            use_domain_features: true,
            fusion: vec![Fusion::Early, Fusion::Late],
            embedding: vec![EmbeddingMode::Linear, EmbeddingMode::Pretrained],
            baseline: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSection {
    pub exclude_index_step: bool,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub threshold: f64,
    pub recall_ks: Vec<usize>,
    pub subgroups: SubgroupOptions,
    pub importance_l2: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { threshold: 0.5, recall_ks: vec![10, 50, 100], subgroups: SubgroupOptions::default(), importance_l2: 1e-2 }
    }
}

/// Everything a run depends on. The root `seed` overrides the seeds of the
/// synthetic and split sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub task: Task,
    pub ablation: Ablation,
    pub synthetic: SyntheticConfig,
    pub cohort: CohortConfig,
    pub sequence: SequenceSection,
    pub split: SplitSpec,
    pub grid: GridSpec,
    pub lr_grid: LrGridSpec,
    pub evaluation: EvaluationConfig,
    pub seed: u64,
    /// Worker threads; all cores when absent.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            task: Task::Readmission,
            ablation: Ablation::default(),
            synthetic: SyntheticConfig::default(),
            cohort: CohortConfig::default(),
            sequence: SequenceSection::default(),
            split: SplitSpec::default(),
            grid: GridSpec::default(),
            lr_grid: LrGridSpec::default(),
            evaluation: EvaluationConfig::default(),
            seed: 1,
            jobs: None,
        }
    }
}

impl RunConfig {
    pub fn demo() -> Self {
        serde_json::from_str(DEMO_CONFIG).expect("bundled demo config parses")
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    /// Push the root seed into the sections that carry their own.
    pub fn resolve_seeds(&mut self) {
        self.synthetic.seed = derive_seed(self.seed, "generate");
        self.split.seed = derive_seed(self.seed, "split");
    }

    pub fn hash(&self) -> String {
        fingerprint(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn sequence_options(&self) -> SequenceOptions {
        SequenceOptions {
            include_outpatient: self.ablation.include_outpatient,
            exclude_index_step: self.sequence.exclude_index_step,
            max_steps: self.sequence.max_steps,
        }
    }

    pub fn variants(&self) -> Vec<Variant> {
        let mut out = Vec::new();
        for &embedding in &self.ablation.embedding {
            for &fusion in &self.ablation.fusion {
                out.push(Variant { fusion, embedding });
            }
        }
        out
    }

    /// Model whose scores feed the subgroup and importance reports.
    pub fn primary_variant(&self) -> Option<Variant> {
        self.variants().into_iter().next()
    }

    /// Every problem found, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.paths.claims.is_none() {
            if let Err(e) = self.synthetic.validate() {
                problems.push(e.to_string());
            }
        }
        if let Err(e) = self.split.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.grid.validate() {
            problems.push(e.to_string());
        }
        let (bmin, bmax) = riskfuse::train::TrainParams::BATCH_RANGE;
        if let Some(b) = self.grid.batch.iter().find(|b| !(bmin..=bmax).contains(*b)) {
            problems.push(format!("grid batch size {b} outside [{bmin}, {bmax}]"));
        }
        let (hmin, hmax) = riskfuse::model::ModelConfig::HIDDEN_RANGE;
        if let Some(h) = self.grid.hidden.iter().find(|h| !(hmin..=hmax).contains(*h)) {
            problems.push(format!("grid hidden size {h} outside [{hmin}, {hmax}]"));
        }
        let (lmin, lmax) = riskfuse::model::ModelConfig::LAYER_RANGE;
        if let Some(l) = self.grid.layers.iter().find(|l| !(lmin..=lmax).contains(*l)) {
            problems.push(format!("grid layer count {l} outside [{lmin}, {lmax}]"));
        }
        if self.grid.lr.iter().chain(&self.grid.w_pos).any(|v| !(*v > 0.0)) {
            problems.push("grid learning rates and positive-class weights must be positive".into());
        }
        if self.grid.max_epochs == 0 {
            problems.push("grid max_epochs must be at least 1".into());
        }
        if self.ablation.fusion.is_empty() {
            problems.push("ablation.fusion lists no fusion mode".into());
        }
        if self.ablation.embedding.is_empty() {
            problems.push("ablation.embedding lists no embedding mode".into());
        }
        if !self.ablation.use_domain_features && self.ablation.fusion.iter().any(|&f| f != Fusion::None) {
            problems.push("fusion modes other than `none` need domain features (ablation.use_domain_features is false)".into());
        }
        if self.ablation.baseline && self.lr_grid.l2.is_empty() {
            problems.push("lr_grid.l2 is empty".into());
        }
        if !(0.0..=1.0).contains(&self.evaluation.threshold) {
            problems.push(format!("evaluation threshold {} outside [0, 1]", self.evaluation.threshold));
        }
        if self.evaluation.recall_ks.contains(&0) {
            problems.push("recall_ks must be at least 1".into());
        }
        if self.jobs == Some(0) {
            problems.push("jobs must be at least 1".into());
        }
        problems
    }
}
