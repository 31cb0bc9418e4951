use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeatureContext;
use crate::claims::synth::{drg_code, facility_id, ADMISSION_SOURCES, N_DRGS, N_FACILITIES};
use crate::claims::{
    AdmissionType, Beneficiary, ClaimRecord, ClaimType, CodeType, Day, Disposition, Gender,
    MedicareStatus, Race,
};
use crate::cohort::{age_range, InpatientStay, AGE_RANGES};
use crate::error::{Error, Result};

/// Table 2(a) grouping of a domain feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureGroup {
    Comorbidity,
    Clinical,
    Demographic,
    Others,
}

/// One entry of the domain vector. Open vocabularies carry their level list;
/// values outside it fall into an extra `other` level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "feature", rename_all = "snake_case")]
pub enum DomainFeature {
    Charlson,
    LengthOfStay,
    PriorInpatient,
    PriorOutpatient,
    PriorEd,
    Lace,
    AdmissionType,
    AdmissionSource { levels: Vec<String> },
    Disposition,
    DischargeDxCcs,
    HacFlags,
    Drg { levels: Vec<String> },
    DxCount,
    AgeGroup,
    Gender,
    Race,
    DualEligible,
    MedicareStatus,
    Facility { levels: Vec<String> },
}

impl DomainFeature {
    pub fn key(&self) -> &'static str {
        match self {
            DomainFeature::Charlson => "charlson",
            DomainFeature::LengthOfStay => "length_of_stay",
            DomainFeature::PriorInpatient => "prior_inpatient",
            DomainFeature::PriorOutpatient => "prior_outpatient",
            DomainFeature::PriorEd => "prior_ed",
            DomainFeature::Lace => "lace",
            DomainFeature::AdmissionType => "admission_type",
            DomainFeature::AdmissionSource { .. } => "admission_source",
            DomainFeature::Disposition => "disposition",
            DomainFeature::DischargeDxCcs => "discharge_dx_ccs",
            DomainFeature::HacFlags => "hac_flags",
            DomainFeature::Drg { .. } => "drg",
            DomainFeature::DxCount => "dx_count",
            DomainFeature::AgeGroup => "age_group",
            DomainFeature::Gender => "gender",
            DomainFeature::Race => "race",
            DomainFeature::DualEligible => "dual_eligible",
            DomainFeature::MedicareStatus => "medicare_status",
            DomainFeature::Facility { .. } => "facility",
        }
    }

    pub fn group(&self) -> FeatureGroup {
        use DomainFeature::*;
        match self {
            Charlson | DischargeDxCcs | HacFlags => FeatureGroup::Comorbidity,
            LengthOfStay | PriorInpatient | PriorOutpatient | PriorEd | Lace | AdmissionType
            | AdmissionSource { .. } | Disposition | Drg { .. } | DxCount => FeatureGroup::Clinical,
            AgeGroup | Gender | Race | DualEligible | MedicareStatus => FeatureGroup::Demographic,
            Facility { .. } => FeatureGroup::Others,
        }
    }
}

const ADMISSION_TYPES: [AdmissionType; 4] = [
    AdmissionType::Emergent,
    AdmissionType::Urgent,
    AdmissionType::Elective,
    AdmissionType::Other,
];

const DISPOSITIONS: [Disposition; 7] = [
    Disposition::Home,
    Disposition::TransferAcute,
    Disposition::Snf,
    Disposition::Hospice,
    Disposition::Ama,
    Disposition::Expired,
    Disposition::Other,
];

fn with_other(levels: &[String]) -> Vec<String> {
    let mut out = levels.to_vec();
    if !out.iter().any(|l| l == "other") {
        out.push("other".into());
    }
    out
}

fn level_of(levels: &[String], value: &str) -> usize {
    levels
        .iter()
        .position(|l| l == value)
        .unwrap_or_else(|| levels.iter().position(|l| l == "other").expect("other level present"))
}

/// Ordered list of domain features making up `z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainFeatureSpec {
    pub features: Vec<DomainFeature>,
}

impl Default for DomainFeatureSpec {
    fn default() -> Self {
        use DomainFeature::*;
        DomainFeatureSpec {
            features: vec![
                Charlson,
                LengthOfStay,
                PriorInpatient,
                PriorOutpatient,
                PriorEd,
                Lace,
                AdmissionType,
                AdmissionSource { levels: ADMISSION_SOURCES.iter().map(|s| s.to_string()).collect() },
                Disposition,
                DischargeDxCcs,
                HacFlags,
                Drg { levels: (0..N_DRGS).map(drg_code).collect() },
                DxCount,
                AgeGroup,
                Gender,
                Race,
                DualEligible,
                MedicareStatus,
                Facility { levels: (0..N_FACILITIES).map(facility_id).collect() },
            ],
        }
    }
}

impl DomainFeatureSpec {
    pub fn empty() -> Self {
        DomainFeatureSpec { features: Vec::new() }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let spec: DomainFeatureSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f.key()) {
                return Err(Error::Config(format!("domain feature `{}` listed twice", f.key())));
            }
        }
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.features.iter().any(|f| f.key() == key)
    }
}

/// Column names of `z`, which columns are numeric (standardized downstream)
/// and which Table 2(a) group each column belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub names: Vec<String>,
    pub numeric: Vec<bool>,
    pub groups: Vec<FeatureGroup>,
}

impl FeatureLayout {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn push(&mut self, name: String, numeric: bool, group: FeatureGroup) {
        self.names.push(name);
        self.numeric.push(numeric);
        self.groups.push(group);
    }
}

/// Everything known about one beneficiary that the domain vector reads.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    pub beneficiary: &'a Beneficiary,
    /// All claims of the beneficiary, sorted.
    pub claims: &'a [ClaimRecord],
    /// All resolved stays of the beneficiary, sorted.
    pub stays: &'a [InpatientStay],
}

impl<'a> History<'a> {
    /// Claims admitted in `[admit - days, admit)`.
    pub fn claims_before(&self, admit: Day, days: i32) -> impl Iterator<Item = &'a ClaimRecord> {
        self.claims
            .iter()
            .filter(move |c| c.admit_date < admit && c.admit_date >= admit - days)
    }

    /// Stays admitted in `[admit - days, admit)`.
    pub fn stays_before(&self, admit: Day, days: i32) -> impl Iterator<Item = &'a InpatientStay> {
        self.stays
            .iter()
            .filter(move |s| s.admit_date < admit && s.admit_date >= admit - days)
    }

    pub fn count_claims(&self, admit: Day, days: i32, kind: ClaimType) -> usize {
        self.claims_before(admit, days).filter(|c| c.claim_type == kind).count()
    }
}

/// Charlson index over the lookback window including the index stay.
pub fn history_charlson(stay: &InpatientStay, history: &History<'_>, ctx: &FeatureContext) -> u32 {
    let dx = history
        .claims_before(stay.admit_date, ctx.lookback_days)
        .flat_map(|c| c.dx_codes.iter())
        .chain(stay.all_dx.iter())
        .map(String::as_str);
    ctx.charlson.score(dx, &ctx.ccs)
}

/// LACE score of an index stay.
pub fn lace_score(stay: &InpatientStay, history: &History<'_>, charlson: u32, ctx: &FeatureContext) -> u32 {
    let ed = history.count_claims(stay.admit_date, ctx.lace.ed_lookback_days, ClaimType::Ed);
    ctx.lace.score(stay.length_of_stay(), stay.admission_type, charlson, ed as u32)
}

impl DomainFeatureSpec {
    pub fn layout(&self, ctx: &FeatureContext) -> FeatureLayout {
        let mut layout = FeatureLayout { names: Vec::new(), numeric: Vec::new(), groups: Vec::new() };
        for f in &self.features {
            let g = f.group();
            let mut one_hot = |prefix: &str, levels: Vec<String>| {
                for l in levels {
                    layout.push(format!("{prefix}: {l}"), false, g);
                }
            };
            match f {
                DomainFeature::Charlson => layout.push("Charlson index".into(), true, g),
                DomainFeature::LengthOfStay => layout.push("Length of stay".into(), true, g),
                DomainFeature::PriorInpatient => {
                    layout.push("Inpatient admissions during previous 12 months".into(), true, g)
                }
                DomainFeature::PriorOutpatient => {
                    layout.push("Outpatient visits during previous 12 months".into(), true, g)
                }
                DomainFeature::PriorEd => {
                    layout.push("ED visits during previous 12 months".into(), true, g)
                }
                DomainFeature::Lace => layout.push("LACE score".into(), true, g),
                DomainFeature::AdmissionType => one_hot(
                    "Admission type",
                    ADMISSION_TYPES.iter().map(|a| a.as_str().to_string()).collect(),
                ),
                DomainFeature::AdmissionSource { levels } => {
                    one_hot("Admission source", with_other(levels))
                }
                DomainFeature::Disposition => one_hot(
                    "Discharge disposition",
                    DISPOSITIONS.iter().map(|d| d.as_str().to_string()).collect(),
                ),
                DomainFeature::DischargeDxCcs => one_hot(
                    "Discharge diagnosis",
                    (0..ctx.ccs.n_dx_categories() as usize).map(|i| ctx.ccs.input_name(i)).collect(),
                ),
                DomainFeature::HacFlags => {
                    for name in ctx.hac.names() {
                        layout.push(format!("HAC: {name}"), false, g);
                    }
                }
                DomainFeature::Drg { levels } => one_hot("DRG", with_other(levels)),
                DomainFeature::DxCount => layout.push("Number of diagnosis codes".into(), true, g),
                DomainFeature::AgeGroup => {
                    one_hot("Age group", AGE_RANGES.iter().map(|s| s.to_string()).collect())
                }
                DomainFeature::Gender => {
                    one_hot("Gender", Gender::ALL.iter().map(|x| x.label().to_string()).collect())
                }
                DomainFeature::Race => {
                    one_hot("Race", Race::ALL.iter().map(|x| x.label().to_string()).collect())
                }
                DomainFeature::DualEligible => layout.push("Dual eligible".into(), false, g),
                DomainFeature::MedicareStatus => one_hot(
                    "Medicare status",
                    MedicareStatus::ALL.iter().map(|x| x.label().to_string()).collect(),
                ),
                DomainFeature::Facility { levels } => one_hot("Facility", with_other(levels)),
            }
        }
        layout
    }
}

/// Raw (unstandardized) domain vector of an index stay, in `ctx.spec` order.
pub fn build_domain_vector(
    stay: &InpatientStay,
    age_at_admission: i32,
    history: &History<'_>,
    ctx: &FeatureContext,
) -> Vec<f64> {
    let admit = stay.admit_date;
    let bene = history.beneficiary;
    let charlson = history_charlson(stay, history, ctx);
    let mut z = Vec::new();
    let one_hot = |z: &mut Vec<f64>, width: usize, hot: usize| {
        z.extend((0..width).map(|i| if i == hot { 1.0 } else { 0.0 }));
    };
    for f in &ctx.spec.features {
        match f {
            DomainFeature::Charlson => z.push(charlson as f64),
            DomainFeature::LengthOfStay => z.push(stay.length_of_stay() as f64),
            DomainFeature::PriorInpatient => {
                z.push(history.stays_before(admit, ctx.lookback_days).count() as f64)
            }
            DomainFeature::PriorOutpatient => {
                z.push(history.count_claims(admit, ctx.lookback_days, ClaimType::Outpatient) as f64)
            }
            DomainFeature::PriorEd => {
                z.push(history.count_claims(admit, ctx.lookback_days, ClaimType::Ed) as f64)
            }
            DomainFeature::Lace => z.push(lace_score(stay, history, charlson, ctx) as f64),
            DomainFeature::AdmissionType => {
                let hot = ADMISSION_TYPES.iter().position(|a| *a == stay.admission_type).unwrap_or(3);
                one_hot(&mut z, ADMISSION_TYPES.len(), hot)
            }
            DomainFeature::AdmissionSource { levels } => {
                let levels = with_other(levels);
                one_hot(&mut z, levels.len(), level_of(&levels, &stay.admission_source))
            }
            DomainFeature::Disposition => {
                let hot = DISPOSITIONS.iter().position(|d| *d == stay.discharge_disposition).unwrap_or(6);
                one_hot(&mut z, DISPOSITIONS.len(), hot)
            }
            DomainFeature::DischargeDxCcs => {
                let cat = ctx.ccs.category(CodeType::Dx, &stay.principal_dx);
                one_hot(&mut z, ctx.ccs.n_dx_categories() as usize, cat as usize)
            }
            DomainFeature::HacFlags => {
                let flags = ctx.hac.flags(
                    stay.all_dx.iter().map(String::as_str),
                    stay.all_proc.iter().map(String::as_str),
                    &ctx.ccs,
                );
                z.extend(flags.into_iter().map(f64::from));
            }
            DomainFeature::Drg { levels } => {
                let levels = with_other(levels);
                let hot = level_of(&levels, stay.drg.as_deref().unwrap_or("other"));
                one_hot(&mut z, levels.len(), hot)
            }
            DomainFeature::DxCount => z.push(stay.all_dx.len() as f64),
            DomainFeature::AgeGroup => {
                one_hot(&mut z, AGE_RANGES.len(), age_range(Some(age_at_admission)))
            }
            DomainFeature::Gender => {
                let hot = Gender::ALL.iter().position(|g| *g == bene.gender).unwrap_or(0);
                one_hot(&mut z, Gender::ALL.len(), hot)
            }
            DomainFeature::Race => {
                let hot = Race::ALL.iter().position(|r| *r == bene.race).unwrap_or(0);
                one_hot(&mut z, Race::ALL.len(), hot)
            }
            DomainFeature::DualEligible => z.push(f64::from(u8::from(bene.dual_eligible))),
            DomainFeature::MedicareStatus => {
                let hot =
                    MedicareStatus::ALL.iter().position(|m| *m == bene.medicare_status).unwrap_or(0);
                one_hot(&mut z, MedicareStatus::ALL.len(), hot)
            }
            DomainFeature::Facility { levels } => {
                let levels = with_other(levels);
                one_hot(&mut z, levels.len(), level_of(&levels, &stay.facility_id))
            }
        }
    }
    z
}
