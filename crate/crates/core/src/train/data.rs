use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Fold, Split};
use crate::error::{Error, Result};
use crate::features::{SequenceSet, Step};

/// Column moments for the numeric domain features, from the training fold.
/// Flag and one-hot columns pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub numeric: Vec<bool>,
}

impl Standardizer {
    /// Population moments over `rows`; a zero spread is replaced by 1.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, numeric: &[bool]) -> Self {
        let d = numeric.len();
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        let mut n = 0usize;
        for r in rows {
            n += 1;
            for (j, &v) in r.iter().enumerate() {
                sum[j] += v;
                sq[j] += v * v;
            }
        }
        let nf = n.max(1) as f64;
        let mean: Vec<f64> = (0..d).map(|j| if numeric[j] { sum[j] / nf } else { 0.0 }).collect();
        let std = (0..d)
            .map(|j| {
                if !numeric[j] {
                    return 1.0;
                }
                let var = (sq[j] / nf - mean[j] * mean[j]).max(0.0);
                if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 }
            })
            .collect();
        Standardizer { mean, std, numeric: numeric.to_vec() }
    }

    pub fn identity(d: usize) -> Self {
        Standardizer { mean: vec![0.0; d], std: vec![1.0; d], numeric: vec![false; d] }
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(j, &v)| if self.numeric[j] { (v - self.mean[j]) / self.std[j] } else { v })
            .collect()
    }
}

/// One model input.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub steps: &'a [Step],
    pub z: &'a [f64],
    pub label: bool,
}

/// Sequences with their fold and standardized domain vector.
#[derive(Debug, Clone)]
pub struct FoldedData {
    pub fold: Vec<Fold>,
    pub z: Vec<Vec<f64>>,
    pub standardizer: Standardizer,
}

impl FoldedData {
    /// Standardize with training-fold moments.
    pub fn new(set: &SequenceSet, split: &Split) -> Result<Self> {
        let fold = set
            .sequences
            .iter()
            .map(|s| {
                split.fold_of(&s.beneficiary_id).ok_or_else(|| {
                    Error::Config(format!("patient `{}` is not in the split", s.beneficiary_id))
                })
            })
            .collect::<Result<Vec<Fold>>>()?;
        let train_rows = set
            .sequences
            .iter()
            .zip(&fold)
            .filter(|(_, &f)| f == Fold::Train)
            .map(|(s, _)| s.z.as_slice());
        let standardizer = Standardizer::fit(train_rows, &set.layout.numeric);
        let z = set.sequences.iter().map(|s| standardizer.apply(&s.z)).collect();
        Ok(FoldedData { fold, z, standardizer })
    }

    pub fn indices(&self, fold: Fold) -> Vec<usize> {
        (0..self.fold.len()).filter(|&i| self.fold[i] == fold).collect()
    }

    pub fn examples<'a>(&'a self, set: &'a SequenceSet, fold: Fold) -> Vec<Example<'a>> {
        self.indices(fold)
            .into_iter()
            .map(|i| Example { steps: &set.sequences[i].steps, z: &self.z[i], label: set.sequences[i].label })
            .collect()
    }
}

/// Positive events per patient, the stratification key of the split.
pub fn positives_per_patient(set: &SequenceSet) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> = BTreeMap::new();
    for s in &set.sequences {
        *out.entry(s.beneficiary_id.clone()).or_default() += usize::from(s.label);
    }
    out
}
