//! Cohort construction: transfer resolution, index-event eligibility and
//! 30-day readmission / mortality targets.

mod stays;
mod summary;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::claims::synth::{drg_code, layout};
use crate::claims::{Beneficiary, ClaimRecord, CodeType, Day, Disposition};
use crate::error::{Error, Result};
use crate::features::CcsMap;

pub use stays::{merge_stays, resolve_stays, InpatientStay};
pub use summary::{age_range, cohort_summary, AxisSummary, CohortSummary, SectionSummary, AGE_RANGES};

/// Eligibility policy. "Short stay requiring acute care" is LOS within
/// `max_los_days` and either an emergent/urgent admission or an acute DRG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub max_los_days: i32,
    pub acute_drgs: BTreeSet<String>,
    pub min_age: i32,
    pub lookback_days: i32,
    pub followup_days: i32,
    pub readmission_window_days: i32,
    pub mortality_window_days: i32,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            max_los_days: 30,
            acute_drgs: (0..10).map(drg_code).collect(),
            min_age: 65,
            lookback_days: 365,
            followup_days: 30,
            readmission_window_days: 30,
            mortality_window_days: 30,
        }
    }
}

/// Planned-admission rule set, as local CCS category ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedRules {
    pub planned_proc_ccs: BTreeSet<u32>,
    pub maintenance_dx_ccs: BTreeSet<u32>,
    pub acute_override_dx_ccs: BTreeSet<u32>,
}

impl Default for PlannedRules {
    /// Miniature rule set keyed to the synthetic vocabulary.
    fn default() -> Self {
        PlannedRules {
            planned_proc_ccs: layout::PLANNED_PROC.into_iter().collect(),
            maintenance_dx_ccs: layout::MAINTENANCE_DX.into_iter().collect(),
            acute_override_dx_ccs: layout::ACUTE_OVERRIDE_DX.into_iter().collect(),
        }
    }
}

impl PlannedRules {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Planned unless the principal diagnosis is acute or a complication.
    pub fn is_planned(&self, stay: &InpatientStay, ccs: &CcsMap) -> bool {
        let principal = ccs.category(CodeType::Dx, &stay.principal_dx);
        if self.acute_override_dx_ccs.contains(&principal) {
            return false;
        }
        self.maintenance_dx_ccs.contains(&principal)
            || stay
                .all_proc
                .iter()
                .any(|p| self.planned_proc_ccs.contains(&ccs.category(CodeType::Proc, p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    Age,
    ExpiredInpatient,
    TransferredOut,
    EnrollmentGap,
    NotAcuteShortStay,
}

/// Why an otherwise eligible event is left out of the mortality task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MortalityExclusion {
    AgainstMedicalAdvice,
    Hospice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEvent {
    pub stay: InpatientStay,
    pub age_at_admission: i32,
    pub readmit_label: bool,
    pub readmit_stay: Option<InpatientStay>,
    pub mortality_label: bool,
    pub exclusion_reason: Option<ExclusionReason>,
    /// Some stay, planned or not, was admitted within the readmission window.
    #[serde(default)]
    pub any_readmission: bool,
    #[serde(default)]
    pub mortality_exclusion: Option<MortalityExclusion>,
    /// Audit flag: the counted death happened during a later inpatient stay.
    #[serde(default)]
    pub death_during_readmission: bool,
}

impl IndexEvent {
    pub fn event_id(&self) -> &str {
        self.stay.stay_id()
    }

    pub fn beneficiary_id(&self) -> &str {
        &self.stay.beneficiary_id
    }

    pub fn is_eligible(&self) -> bool {
        self.exclusion_reason.is_none()
    }

    /// Eligible and not excluded from the mortality denominator.
    pub fn in_mortality_task(&self) -> bool {
        self.is_eligible() && self.mortality_exclusion.is_none()
    }
}

/// Prediction target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Readmission,
    Mortality,
}

impl Task {
    pub fn includes(self, event: &IndexEvent) -> bool {
        match self {
            Task::Readmission => event.is_eligible(),
            Task::Mortality => event.in_mortality_task(),
        }
    }

    pub fn label(self, event: &IndexEvent) -> bool {
        match self {
            Task::Readmission => event.readmit_label,
            Task::Mortality => event.mortality_label,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Readmission => "readmission",
            Task::Mortality => "mortality",
        }
    }
}

/// Screen stays for index-event eligibility. Every stay comes back; the
/// ineligible ones carry exactly one exclusion reason and no labels.
pub fn select_index_events(
    stays: &[InpatientStay],
    beneficiary: &Beneficiary,
    cfg: &CohortConfig,
) -> Vec<IndexEvent> {
    stays
        .iter()
        .map(|stay| {
            let age = beneficiary.age_at(stay.admit_date);
            IndexEvent {
                stay: stay.clone(),
                age_at_admission: age,
                readmit_label: false,
                readmit_stay: None,
                mortality_label: false,
                exclusion_reason: exclusion(stay, beneficiary, age, cfg),
                any_readmission: false,
                mortality_exclusion: None,
                death_during_readmission: false,
            }
        })
        .collect()
}

fn exclusion(
    stay: &InpatientStay,
    beneficiary: &Beneficiary,
    age: i32,
    cfg: &CohortConfig,
) -> Option<ExclusionReason> {
    if age < cfg.min_age && !beneficiary.medicare_status.is_esrd() {
        return Some(ExclusionReason::Age);
    }
    if stay.discharge_disposition == Disposition::Expired {
        return Some(ExclusionReason::ExpiredInpatient);
    }
    if stay.discharge_disposition == Disposition::TransferAcute {
        return Some(ExclusionReason::TransferredOut);
    }
    // Follow-up enrollment is only required while the beneficiary is alive.
    let mut followup_end = stay.discharge_date + cfg.followup_days;
    if let Some(death) = beneficiary.death_date {
        if death >= stay.discharge_date {
            followup_end = followup_end.min(death);
        }
    }
    if !beneficiary.continuously_enrolled(stay.admit_date - cfg.lookback_days, followup_end) {
        return Some(ExclusionReason::EnrollmentGap);
    }
    let acute = stay.admission_type.is_acute()
        || stay.drg.as_ref().is_some_and(|d| cfg.acute_drgs.contains(d));
    if stay.length_of_stay() > cfg.max_los_days || !acute {
        return Some(ExclusionReason::NotAcuteShortStay);
    }
    None
}

/// Credit each eligible index event with the first stay admitted within
/// `(discharge, discharge + window]` when it is unplanned. A stay is
/// credited to at most one index event.
///
/// `events` and `stays` belong to one beneficiary and are chronological.
pub fn label_readmission(
    events: &mut [IndexEvent],
    stays: &[InpatientStay],
    rules: &PlannedRules,
    ccs: &CcsMap,
    cfg: &CohortConfig,
) {
    let mut claimed: HashSet<String> = HashSet::new();
    for event in events.iter_mut().filter(|e| e.is_eligible()) {
        let discharge = event.stay.discharge_date;
        let window_end = discharge + cfg.readmission_window_days;
        let candidate = stays
            .iter()
            .filter(|s| s.beneficiary_id == event.stay.beneficiary_id)
            .filter(|s| s.admit_date > discharge && s.admit_date <= window_end)
            .min_by(|a, b| (a.admit_date, a.stay_id()).cmp(&(b.admit_date, b.stay_id())));
        let Some(candidate) = candidate else {
            continue;
        };
        event.any_readmission = true;
        if claimed.contains(candidate.stay_id()) || rules.is_planned(candidate, ccs) {
            continue;
        }
        claimed.insert(candidate.stay_id().to_string());
        event.readmit_label = true;
        event.readmit_stay = Some(candidate.clone());
    }
}

/// Death within `(discharge, discharge + window]`, unless the patient left
/// against medical advice or entered hospice before dying; those events are
/// flagged out of the mortality task.
pub fn label_mortality(
    events: &mut [IndexEvent],
    beneficiary: &Beneficiary,
    stays: &[InpatientStay],
    cfg: &CohortConfig,
) {
    let Some(death) = beneficiary.death_date else {
        return;
    };
    for event in events.iter_mut().filter(|e| e.is_eligible()) {
        let discharge = event.stay.discharge_date;
        if !(death > discharge && death <= discharge + cfg.mortality_window_days) {
            continue;
        }
        if event.stay.discharge_disposition == Disposition::Ama {
            event.mortality_exclusion = Some(MortalityExclusion::AgainstMedicalAdvice);
            continue;
        }
        let later: Vec<&InpatientStay> = stays
            .iter()
            .filter(|s| s.admit_date > discharge && s.admit_date <= death)
            .collect();
        let hospice = event.stay.discharge_disposition == Disposition::Hospice
            || later.iter().any(|s| s.discharge_disposition == Disposition::Hospice);
        if hospice {
            event.mortality_exclusion = Some(MortalityExclusion::Hospice);
            continue;
        }
        event.mortality_label = true;
        event.death_during_readmission = later.iter().any(|s| s.discharge_date >= death);
    }
}

/// Labelled index events for every beneficiary, grouped by beneficiary id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Cohort {
    pub events: Vec<IndexEvent>,
}

impl Cohort {
    pub fn eligible(&self) -> impl Iterator<Item = &IndexEvent> {
        self.events.iter().filter(|e| e.is_eligible())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        use std::io::BufRead;
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut events = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(Cohort { events })
    }
}

/// Run the whole cohort pipeline. Beneficiaries are processed independently
/// and results concatenated in beneficiary id order.
pub fn build_cohort(
    beneficiaries: &[Beneficiary],
    claims: &[ClaimRecord],
    cfg: &CohortConfig,
    rules: &PlannedRules,
    ccs: &CcsMap,
) -> Result<Cohort> {
    let lookup: BTreeMap<&str, &Beneficiary> = beneficiaries
        .iter()
        .map(|b| (b.beneficiary_id.as_str(), b))
        .collect();
    let mut by_bene: BTreeMap<&str, Vec<ClaimRecord>> = BTreeMap::new();
    for c in claims {
        by_bene.entry(c.beneficiary_id.as_str()).or_default().push(c.clone());
    }
    let groups: Vec<(&str, Vec<ClaimRecord>)> = by_bene.into_iter().collect();
    let per_bene: Vec<Result<Vec<IndexEvent>>> = groups
        .par_iter()
        .map(|(id, claims)| {
            let bene = lookup
                .get(id)
                .ok_or_else(|| Error::MissingBeneficiary(id.to_string()))?;
            let mut sorted = claims.clone();
            crate::claims::sort_claims(&mut sorted);
            let stays = resolve_stays(&sorted);
            let mut events = select_index_events(&stays, bene, cfg);
            label_readmission(&mut events, &stays, rules, ccs, cfg);
            label_mortality(&mut events, bene, &stays, cfg);
            Ok(events)
        })
        .collect();
    let mut events = Vec::new();
    for r in per_bene {
        events.extend(r?);
    }
    Ok(Cohort { events })
}

/// Claims of one beneficiary strictly before `day` and within the lookback.
pub fn history_window<'a>(
    claims: &'a [ClaimRecord],
    beneficiary_id: &str,
    admit: Day,
    lookback_days: i32,
) -> impl Iterator<Item = &'a ClaimRecord> {
    let beneficiary_id = beneficiary_id.to_string();
    claims.iter().filter(move |c| {
        c.beneficiary_id == beneficiary_id
            && c.admit_date < admit
            && c.admit_date >= admit - lookback_days
    })
}
