//! Charlson comorbidity, LACE and hospital-acquired-condition scoring.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CcsMap;
use crate::claims::synth::{layout, CHARLSON_WEIGHTS};
use crate::claims::{AdmissionType, CodeType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharlsonGroup {
    pub name: String,
    pub weight: u32,
    pub dx_ccs: BTreeSet<u32>,
}

/// Charlson condition groups with their weights, keyed by dx CCS category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharlsonWeights {
    pub groups: Vec<CharlsonGroup>,
}

pub const CHARLSON_GROUP_NAMES: [&str; 17] = [
    "Myocardial infarction",
    "Congestive heart failure",
    "Peripheral vascular disease",
    "Cerebrovascular disease",
    "Dementia",
    "Chronic pulmonary disease",
    "Rheumatic disease",
    "Peptic ulcer disease",
    "Mild liver disease",
    "Diabetes without chronic complication",
    "Diabetes with chronic complication",
    "Hemiplegia or paraplegia",
    "Renal disease",
    "Any malignancy",
    "Moderate or severe liver disease",
    "Metastatic solid tumor",
    "AIDS/HIV",
];

impl Default for CharlsonWeights {
    fn default() -> Self {
        CharlsonWeights {
            groups: CHARLSON_GROUP_NAMES
                .iter()
                .zip(CHARLSON_WEIGHTS)
                .enumerate()
                .map(|(g, (name, weight))| CharlsonGroup {
                    name: name.to_string(),
                    weight,
                    dx_ccs: [layout::CHARLSON_DX_START + g as u32].into_iter().collect(),
                })
                .collect(),
        }
    }
}

impl CharlsonWeights {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Sum of weights over distinct groups with any matching diagnosis.
    pub fn score<'a>(&self, dx_codes: impl IntoIterator<Item = &'a str>, ccs: &CcsMap) -> u32 {
        let categories: BTreeSet<u32> = dx_codes
            .into_iter()
            .map(|c| ccs.category(CodeType::Dx, c))
            .collect();
        self.score_categories(&categories)
    }

    pub fn score_categories(&self, dx_categories: &BTreeSet<u32>) -> u32 {
        self.groups
            .iter()
            .filter(|g| !g.dx_ccs.is_disjoint(dx_categories))
            .map(|g| g.weight)
            .sum()
    }
}

/// Convenience wrapper matching the usual call shape.
pub fn charlson_index<'a>(
    dx_history: impl IntoIterator<Item = &'a str>,
    weights: &CharlsonWeights,
    ccs: &CcsMap,
) -> u32 {
    weights.score(dx_history, ccs)
}

/// A band `[min, max]` (max open when `None`) awarding `points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: i64,
    pub max: Option<i64>,
    pub points: u32,
}

impl Band {
    const fn new(min: i64, max: Option<i64>, points: u32) -> Self {
        Band { min, max, points }
    }

    fn contains(&self, v: i64) -> bool {
        v >= self.min && self.max.is_none_or(|m| v <= m)
    }
}

/// LACE component tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaceTables {
    pub length_of_stay: Vec<Band>,
    pub acute_admission_points: u32,
    pub charlson: Vec<Band>,
    pub ed_visits: Vec<Band>,
    /// Window for the E component, in days before the index admission.
    pub ed_lookback_days: i32,
}

impl Default for LaceTables {
    fn default() -> Self {
        LaceTables {
            length_of_stay: vec![
                Band::new(i64::MIN, Some(0), 0),
                Band::new(1, Some(1), 1),
                Band::new(2, Some(2), 2),
                Band::new(3, Some(3), 3),
                Band::new(4, Some(6), 4),
                Band::new(7, Some(13), 5),
                Band::new(14, None, 7),
            ],
            acute_admission_points: 3,
            charlson: vec![
                Band::new(i64::MIN, Some(0), 0),
                Band::new(1, Some(1), 1),
                Band::new(2, Some(2), 2),
                Band::new(3, Some(3), 3),
                Band::new(4, None, 5),
            ],
            ed_visits: vec![
                Band::new(i64::MIN, Some(0), 0),
                Band::new(1, Some(1), 1),
                Band::new(2, Some(2), 2),
                Band::new(3, Some(3), 3),
                Band::new(4, None, 4),
            ],
            ed_lookback_days: 182,
        }
    }
}

impl LaceTables {
    pub const MAX_SCORE: u32 = 19;

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let tables: LaceTables = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        tables.validate()?;
        Ok(tables)
    }

    pub fn validate(&self) -> Result<()> {
        let max = |bands: &[Band]| bands.iter().map(|b| b.points).max().unwrap_or(0);
        let total = max(&self.length_of_stay)
            + self.acute_admission_points
            + max(&self.charlson)
            + max(&self.ed_visits);
        if total > Self::MAX_SCORE {
            return Err(Error::Config(format!(
                "LACE tables allow {total} points, more than {}",
                Self::MAX_SCORE
            )));
        }
        Ok(())
    }

    fn lookup(bands: &[Band], v: i64) -> u32 {
        bands.iter().find(|b| b.contains(v)).map_or(0, |b| b.points)
    }

    /// L + A + C + E.
    pub fn score(
        &self,
        length_of_stay: i32,
        admission_type: AdmissionType,
        charlson: u32,
        ed_visits: u32,
    ) -> u32 {
        let acuity = if admission_type.is_acute() { self.acute_admission_points } else { 0 };
        Self::lookup(&self.length_of_stay, length_of_stay as i64)
            + acuity
            + Self::lookup(&self.charlson, charlson as i64)
            + Self::lookup(&self.ed_visits, ed_visits as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HacRule {
    pub name: String,
    #[serde(default)]
    pub dx_ccs: BTreeSet<u32>,
    /// When non-empty, a matching procedure is also required.
    #[serde(default)]
    pub proc_ccs: BTreeSet<u32>,
}

impl HacRule {
    fn matches(&self, dx: &BTreeSet<u32>, procs: &BTreeSet<u32>) -> bool {
        let dx_ok = !self.dx_ccs.is_disjoint(dx);
        let proc_ok = self.proc_ccs.is_empty() || !self.proc_ccs.is_disjoint(procs);
        dx_ok && proc_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HacRules {
    pub rules: Vec<HacRule>,
}

pub const HAC_NAMES: [&str; 12] = [
    "Foreign Object Retained After Surgery",
    "Air Embolism",
    "Blood Incompatibility",
    "Pressure Ulcer Stages III & IV",
    "Falls and Trauma",
    "Catheter-Associated Urinary Tract Infection (UTI)",
    "Vascular Catheter-Associated Infection",
    "Manifestations of Poor Glycemic Control",
    "Surgical Site Infection, Mediastinitis, Following Coronary Artery Bypass Graft (CABG)",
    "Surgical Site Infection Following Certain Orthopedic Procedures",
    "Surgical Site Infection Following Bariatric Surgery for Obesity",
    "Deep Vein Thrombosis and Pulmonary Embolism Following Certain Orthopedic Procedure",
];

impl Default for HacRules {
    /// HAC `i` is dx category `20 + i`; the last four also need the
    /// procedure their name refers to.
    fn default() -> Self {
        HacRules {
            rules: HAC_NAMES
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    let proc_ccs = if i >= 8 {
                        [layout::HAC_PROC[(i - 8) % layout::HAC_PROC.len()]].into_iter().collect()
                    } else {
                        BTreeSet::new()
                    };
                    HacRule {
                        name: name.to_string(),
                        dx_ccs: [layout::HAC_DX_START + i as u32].into_iter().collect(),
                        proc_ccs,
                    }
                })
                .collect(),
        }
    }
}

impl HacRules {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn names(&self) -> Vec<String> {
        self.rules.iter().map(|r| r.name.clone()).collect()
    }

    /// One 0/1 flag per rule.
    pub fn flags<'a>(
        &self,
        dx_codes: impl IntoIterator<Item = &'a str>,
        proc_codes: impl IntoIterator<Item = &'a str>,
        ccs: &CcsMap,
    ) -> Vec<u8> {
        let dx: BTreeSet<u32> = dx_codes.into_iter().map(|c| ccs.category(CodeType::Dx, c)).collect();
        let procs: BTreeSet<u32> =
            proc_codes.into_iter().map(|c| ccs.category(CodeType::Proc, c)).collect();
        self.rules.iter().map(|r| u8::from(r.matches(&dx, &procs))).collect()
    }
}
