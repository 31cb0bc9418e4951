//! In-memory experiment steps shared by the command line and the tests:
//! split a featurized set, train deep variants and the baseline, score them.

use serde::{Deserialize, Serialize};

use crate::baseline::{embedded_table, flatten, lr_grid, FlatTable, FoldRows, LrGridResult, LrGridSpec};
use crate::calibration::Calibrator;
use crate::error::{Error, Result};
use crate::features::{SequenceSet, Step};
use crate::model::{cooccurrence_embedding, EmbeddingMode, Fusion, Model, ModelConfig};
use crate::rng::derive_seed;
use crate::tensor::Tensor;
use crate::train::{
    grid_search, positives_per_patient, predict_examples, split_patients, Example, Fold, FoldExamples,
    FoldedData, GridResult, GridSpec, Split, SplitSpec,
};

/// One deep model family in the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub fusion: Fusion,
    pub embedding: EmbeddingMode,
}

impl Variant {
    pub fn name(&self) -> String {
        format!("{}-{}", self.fusion.as_str(), self.embedding.as_str())
    }

    /// Row label in the comparison table.
    pub fn algorithm(&self) -> &'static str {
        match self.fusion {
            Fusion::None => "No Fusion",
            Fusion::Early => "Early Fusion",
            Fusion::Late => "Late Fusion",
        }
    }
}

/// A featurized set with its patient split and standardized domain vectors.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub set: SequenceSet,
    pub split: Split,
    pub data: FoldedData,
}

/// Example lists for the four folds.
#[derive(Debug, Clone)]
pub struct FoldSets<'a> {
    pub train: Vec<Example<'a>>,
    pub valid: Vec<Example<'a>>,
    pub calib: Vec<Example<'a>>,
    pub test: Vec<Example<'a>>,
}

impl<'a> FoldSets<'a> {
    pub fn view(&self) -> FoldExamples<'_> {
        FoldExamples { train: &self.train, valid: &self.valid, calib: &self.calib, test: &self.test }
    }

    pub fn get(&self, fold: Fold) -> &[Example<'a>] {
        match fold {
            Fold::Train => &self.train,
            Fold::Valid => &self.valid,
            Fold::Calib => &self.calib,
            Fold::Test => &self.test,
        }
    }
}

pub fn prepare(set: SequenceSet, spec: &SplitSpec) -> Result<Prepared> {
    let split = split_patients(&positives_per_patient(&set), spec)?;
    for w in &split.warnings {
        log::warn!("{w}");
    }
    let data = FoldedData::new(&set, &split)?;
    Ok(Prepared { set, split, data })
}

impl Prepared {
    pub fn folds(&self) -> FoldSets<'_> {
        FoldSets {
            train: self.data.examples(&self.set, Fold::Train),
            valid: self.data.examples(&self.set, Fold::Valid),
            calib: self.data.examples(&self.set, Fold::Calib),
            test: self.data.examples(&self.set, Fold::Test),
        }
    }

    pub fn labels(&self, fold: Fold) -> Vec<bool> {
        self.data.indices(fold).into_iter().map(|i| self.set.sequences[i].label).collect()
    }

    /// Deep model shape before the grid fills in the searched sizes.
    pub fn base_config(&self, variant: Variant) -> ModelConfig {
        ModelConfig {
            input_dim: self.set.input_dim,
            embed_dim: 16,
            hidden_dim: 16,
            n_gru_layers: 1,
            fusion: variant.fusion,
            mlp_hidden_dims: vec![],
            domain_dim: self.set.layout.names.len(),
            embedding: variant.embedding,
            seed: 0,
        }
    }

    /// Co-occurrence embedding from training-fold histories only.
    pub fn derived_embedding(&self, embed_dim: usize) -> Result<Tensor> {
        let seqs: Vec<&[Step]> = self
            .data
            .indices(Fold::Train)
            .into_iter()
            .map(|i| self.set.sequences[i].steps.as_slice())
            .collect();
        cooccurrence_embedding(&seqs, self.set.input_dim, embed_dim)
    }

    /// Flat table for the baseline under an embedding mode.
    pub fn flat_table(&self, embedding: Option<&Tensor>, use_domain: bool) -> FlatTable {
        let z: Vec<Vec<f64>> = self.set.sequences.iter().map(|s| s.z.clone()).collect();
        match embedding {
            None => flatten(&self.set, &z, use_domain),
            Some(w) => embedded_table(&self.set, &z, w, use_domain),
        }
    }
}

/// Grid search for one deep variant. `embedding` is required for the
/// pretrained mode.
pub fn run_deep(
    prepared: &Prepared,
    grid: &GridSpec,
    variant: Variant,
    embedding: Option<&Tensor>,
    seed: u64,
) -> Result<GridResult> {
    let pretrained = match variant.embedding {
        EmbeddingMode::Linear => None,
        EmbeddingMode::Pretrained => Some(embedding.ok_or_else(|| {
            Error::Config("the pretrained embedding mode needs an embedding table".into())
        })?),
    };
    let folds = prepared.folds();
    grid_search(grid, &prepared.base_config(variant), pretrained, folds.view(), derive_seed(seed, &variant.name()))
}

pub fn run_lr(prepared: &Prepared, spec: &LrGridSpec, table: &FlatTable, seed: u64) -> Result<LrGridResult> {
    let rows = |f: Fold| table.select(&prepared.data.indices(f));
    let (tr, va, ca, te) = (rows(Fold::Train), rows(Fold::Valid), rows(Fold::Calib), rows(Fold::Test));
    let (ltr, lva, lca, lte) =
        (prepared.labels(Fold::Train), prepared.labels(Fold::Valid), prepared.labels(Fold::Calib), prepared.labels(Fold::Test));
    let data = FoldRows { train: (&tr, &ltr), valid: (&va, &lva), calib: (&ca, &lca), test: (&te, &lte) };
    lr_grid(spec, data, derive_seed(seed, "lr"))
}

/// Raw logits and calibrated probabilities of a deep model on a fold.
pub fn score_deep(model: &Model, calibrator: &Calibrator, examples: &[Example<'_>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let logits: Vec<f64> = predict_examples(model, examples)?.into_iter().map(|p| p.logit).collect();
    let probs = calibrator.apply_all(&logits);
    Ok((logits, probs))
}
