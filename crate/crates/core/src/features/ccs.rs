use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::claims::synth::SyntheticVocab;
use crate::claims::CodeType;
use crate::error::{Error, Result};

/// Code → CCS category crosswalk.
///
/// Category ids are local per code type and dense in `[0, n)`. The last id
/// of each type is the reserved "other" bucket unknown codes fall into. In
/// the model input vector dx categories occupy `[0, n_dx)` and procedure
/// categories `[n_dx, n_dx + n_proc)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcsMap {
    dx_to_ccs: HashMap<String, u32>,
    proc_to_ccs: HashMap<String, u32>,
    n_dx_categories: u32,
    n_proc_categories: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct CcsRow {
    code: String,
    code_type: CodeType,
    ccs_id: u32,
}

impl CcsMap {
    pub const DEFAULT_TOTAL_CATEGORIES: u32 = 450;

    pub fn new(
        dx_to_ccs: HashMap<String, u32>,
        proc_to_ccs: HashMap<String, u32>,
        n_dx_categories: u32,
        n_proc_categories: u32,
    ) -> Result<Self> {
        if n_dx_categories < 2 || n_proc_categories < 2 {
            return Err(Error::Config(
                "a CCS map needs at least one real and one `other` category per code type".into(),
            ));
        }
        for (code, &id) in &dx_to_ccs {
            if id >= n_dx_categories {
                return Err(Error::Config(format!(
                    "dx code `{code}` maps to category {id} outside [0, {n_dx_categories})"
                )));
            }
        }
        for (code, &id) in &proc_to_ccs {
            if id >= n_proc_categories {
                return Err(Error::Config(format!(
                    "proc code `{code}` maps to category {id} outside [0, {n_proc_categories})"
                )));
            }
        }
        Ok(CcsMap {
            dx_to_ccs,
            proc_to_ccs,
            n_dx_categories,
            n_proc_categories,
        })
    }

    /// Crosswalk for the synthetic generator's vocabulary.
    pub fn synthetic(vocab: &SyntheticVocab) -> Self {
        let dx = (0..vocab.dx_vocab)
            .map(|j| {
                (
                    SyntheticVocab::code_string(CodeType::Dx, j),
                    vocab.category_of(CodeType::Dx, j),
                )
            })
            .collect();
        let proc_ = (0..vocab.proc_vocab)
            .map(|j| {
                (
                    SyntheticVocab::code_string(CodeType::Proc, j),
                    vocab.category_of(CodeType::Proc, j),
                )
            })
            .collect();
        CcsMap::new(dx, proc_, vocab.n_dx_categories, vocab.n_proc_categories)
            .expect("synthetic vocabulary categories are in range")
    }

    /// Read a `code,code_type,ccs_id` CSV. Category counts are one past the
    /// largest id seen per type, plus the reserved `other` bucket.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut dx = HashMap::new();
        let mut proc_ = HashMap::new();
        let (mut max_dx, mut max_proc) = (0u32, 0u32);
        for row in reader.deserialize::<CcsRow>() {
            let row = row?;
            match row.code_type {
                CodeType::Dx => {
                    max_dx = max_dx.max(row.ccs_id + 1);
                    dx.insert(row.code, row.ccs_id);
                }
                CodeType::Proc => {
                    max_proc = max_proc.max(row.ccs_id + 1);
                    proc_.insert(row.code, row.ccs_id);
                }
            }
        }
        CcsMap::new(dx, proc_, max_dx + 1, max_proc + 1)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut rows: Vec<CcsRow> = self
            .dx_to_ccs
            .iter()
            .map(|(code, &ccs_id)| CcsRow { code: code.clone(), code_type: CodeType::Dx, ccs_id })
            .chain(self.proc_to_ccs.iter().map(|(code, &ccs_id)| CcsRow {
                code: code.clone(),
                code_type: CodeType::Proc,
                ccs_id,
            }))
            .collect();
        rows.sort_by(|a, b| (a.code_type, &a.code).cmp(&(b.code_type, &b.code)));
        for row in rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn n_dx_categories(&self) -> u32 {
        self.n_dx_categories
    }

    pub fn n_proc_categories(&self) -> u32 {
        self.n_proc_categories
    }

    /// Width `M` of the one-hot input vector.
    pub fn input_dim(&self) -> usize {
        (self.n_dx_categories + self.n_proc_categories) as usize
    }

    pub fn other(&self, code_type: CodeType) -> u32 {
        match code_type {
            CodeType::Dx => self.n_dx_categories - 1,
            CodeType::Proc => self.n_proc_categories - 1,
        }
    }

    /// Local category of a code; unknown codes land in `other`.
    pub fn category(&self, code_type: CodeType, code: &str) -> u32 {
        let map = match code_type {
            CodeType::Dx => &self.dx_to_ccs,
            CodeType::Proc => &self.proc_to_ccs,
        };
        map.get(code).copied().unwrap_or_else(|| self.other(code_type))
    }

    /// Position of a local category in the model input vector.
    pub fn input_index(&self, code_type: CodeType, category: u32) -> usize {
        match code_type {
            CodeType::Dx => category as usize,
            CodeType::Proc => (self.n_dx_categories + category) as usize,
        }
    }

    /// Inverse of [`CcsMap::input_index`].
    pub fn describe_input(&self, index: usize) -> (CodeType, u32) {
        if index < self.n_dx_categories as usize {
            (CodeType::Dx, index as u32)
        } else {
            (CodeType::Proc, (index - self.n_dx_categories as usize) as u32)
        }
    }

    /// Human-readable column name for an input position.
    pub fn input_name(&self, index: usize) -> String {
        let (code_type, cat) = self.describe_input(index);
        let other = cat == self.other(code_type);
        match (code_type, other) {
            (CodeType::Dx, false) => format!("DX CCS {cat}"),
            (CodeType::Dx, true) => "DX CCS other".to_string(),
            (CodeType::Proc, false) => format!("PROC CCS {cat}"),
            (CodeType::Proc, true) => "PROC CCS other".to_string(),
        }
    }
}
