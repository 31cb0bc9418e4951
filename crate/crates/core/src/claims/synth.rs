//! Synthetic claims populations with planted, recoverable outcome signal.
//!
//! Each patient gets a year of outpatient/ED history followed by a chain of
//! inpatient admissions. At every admission the generator evaluates a
//! logistic model over (Charlson score, length of stay, prior ED visits,
//! selected CCS categories) and draws 30-day mortality and readmission
//! outcomes from it, then emits the claims that realise those outcomes.
//!
//! Codes are synthetic strings whose CCS category is recoverable from
//! [`SyntheticVocab`]; the bundled rule files (Charlson groups, HAC rules,
//! planned-readmission lists) are keyed to the reserved category ranges in
//! [`layout`].

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::GroundTruth;
use super::types::*;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng, Rng};

/// Reserved local CCS ids used by the bundled default rule files.
pub mod layout {
    /// Charlson condition group `g` (0-based) lives in dx category `1 + g`.
    pub const CHARLSON_DX_START: u32 = 1;
    pub const N_CHARLSON_GROUPS: u32 = 17;
    /// HAC `i` (0-based) is signalled by dx category `20 + i`.
    pub const HAC_DX_START: u32 = 20;
    pub const N_HAC: u32 = 12;
    pub const MAINTENANCE_DX: [u32; 2] = [40, 41];
    pub const ACUTE_OVERRIDE_DX: [u32; 3] = [42, 43, 44];
    pub const GENERAL_DX_START: u32 = 45;
    pub const PLANNED_PROC: [u32; 2] = [1, 2];
    /// Procedure categories some HAC rules additionally require.
    pub const HAC_PROC: [u32; 3] = [3, 4, 5];
    pub const GENERAL_PROC_START: u32 = 6;
    pub const MIN_DX_CATEGORIES: u32 = 50;
    pub const MIN_PROC_CATEGORIES: u32 = 10;
}

/// Code naming for the synthetic vocabulary.
///
/// Dx code `D{j:05}` belongs to dx category `j % (n_dx_categories - 1)`;
/// the last category of each code type is the reserved "other" bucket.
/// Procedure codes follow the same scheme with prefix `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticVocab {
    pub dx_vocab: u32,
    pub proc_vocab: u32,
    pub n_dx_categories: u32,
    pub n_proc_categories: u32,
}

impl SyntheticVocab {
    fn stride(&self, code_type: CodeType) -> u32 {
        match code_type {
            CodeType::Dx => self.n_dx_categories - 1,
            CodeType::Proc => self.n_proc_categories - 1,
        }
    }

    fn vocab(&self, code_type: CodeType) -> u32 {
        match code_type {
            CodeType::Dx => self.dx_vocab,
            CodeType::Proc => self.proc_vocab,
        }
    }

    pub fn code_string(code_type: CodeType, index: u32) -> String {
        match code_type {
            CodeType::Dx => format!("D{index:05}"),
            CodeType::Proc => format!("P{index:05}"),
        }
    }

    /// Category of the `index`-th code of a type.
    pub fn category_of(&self, code_type: CodeType, index: u32) -> u32 {
        index % self.stride(code_type)
    }

    /// A random code belonging to `category`, or `None` when the vocabulary
    /// is too small to contain one.
    pub fn code_for(&self, code_type: CodeType, category: u32, rng: &mut Rng) -> Option<String> {
        let stride = self.stride(code_type);
        let vocab = self.vocab(code_type);
        if category >= stride || category >= vocab {
            return None;
        }
        let variants = (vocab - category).div_ceil(stride);
        let index = category + stride * rng.random_range(0..variants);
        Some(Self::code_string(code_type, index))
    }
}

/// Logit contributions for one outcome.
///
/// Inputs are rescaled before weighting: Charlson by 1/4, length of stay by
/// 1/7 days, prior-year ED visits by 1/3, CCS presence as 0/1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OutcomeSignal {
    pub intercept: f64,
    pub charlson: f64,
    pub length_of_stay: f64,
    pub ed_visits: f64,
    #[serde(default)]
    pub ccs: Vec<CcsSignal>,
}

pub const CHARLSON_SCALE: f64 = 4.0;
pub const LOS_SCALE: f64 = 7.0;
pub const ED_SCALE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcsSignal {
    pub code_type: CodeType,
    pub ccs: u32,
    pub weight: f64,
}

impl OutcomeSignal {
    pub fn logit(&self, x: &SignalInputs) -> f64 {
        let mut z = self.intercept
            + self.charlson * x.charlson as f64 / CHARLSON_SCALE
            + self.length_of_stay * x.length_of_stay as f64 / LOS_SCALE
            + self.ed_visits * x.ed_visits as f64 / ED_SCALE;
        for s in &self.ccs {
            let present = match s.code_type {
                CodeType::Dx => x.dx_categories.contains(&s.ccs),
                CodeType::Proc => x.proc_categories.contains(&s.ccs),
            };
            if present {
                z += s.weight;
            }
        }
        z
    }
}

/// Values the outcome model sees at one admission.
#[derive(Debug, Clone, Default)]
pub struct SignalInputs {
    pub charlson: u32,
    pub length_of_stay: i32,
    pub ed_visits: u32,
    /// Categories on the admission or on any claim in the prior year.
    pub dx_categories: BTreeSet<u32>,
    pub proc_categories: BTreeSet<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SignalSpec {
    pub readmission: OutcomeSignal,
    pub mortality: OutcomeSignal,
}

impl SignalSpec {
    pub fn zeros(readmit_intercept: f64, mortality_intercept: f64) -> Self {
        SignalSpec {
            readmission: OutcomeSignal {
                intercept: readmit_intercept,
                ..Default::default()
            },
            mortality: OutcomeSignal {
                intercept: mortality_intercept,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_patients: usize,
    pub dx_vocab: u32,
    pub proc_vocab: u32,
    pub n_dx_categories: u32,
    pub n_proc_categories: u32,
    /// Mean number of outpatient/ED claims per patient over the history window.
    pub mean_claims_per_patient: f64,
    pub signal_spec: SignalSpec,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_patients: 2000,
            dx_vocab: 1200,
            proc_vocab: 600,
            n_dx_categories: 280,
            n_proc_categories: 170,
            mean_claims_per_patient: 8.0,
            signal_spec: SignalSpec {
                readmission: OutcomeSignal {
                    intercept: -2.2,
                    charlson: 0.8,
                    length_of_stay: 0.6,
                    ed_visits: 0.5,
                    ccs: vec![
                        CcsSignal { code_type: CodeType::Dx, ccs: 45, weight: 0.9 },
                        CcsSignal { code_type: CodeType::Dx, ccs: 46, weight: -0.7 },
                        CcsSignal { code_type: CodeType::Proc, ccs: 6, weight: 0.8 },
                    ],
                },
                mortality: OutcomeSignal {
                    intercept: -3.6,
                    charlson: 1.0,
                    length_of_stay: 0.8,
                    ed_visits: 0.2,
                    ccs: vec![CcsSignal { code_type: CodeType::Dx, ccs: 47, weight: 1.0 }],
                },
            },
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn vocab(&self) -> SyntheticVocab {
        SyntheticVocab {
            dx_vocab: self.dx_vocab,
            proc_vocab: self.proc_vocab,
            n_dx_categories: self.n_dx_categories,
            n_proc_categories: self.n_proc_categories,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_patients == 0 {
            problems.push("n_patients must be positive".to_string());
        }
        if self.dx_vocab == 0 || self.proc_vocab == 0 {
            problems.push("dx_vocab and proc_vocab must be positive".to_string());
        }
        if self.n_dx_categories < layout::MIN_DX_CATEGORIES {
            problems.push(format!(
                "n_dx_categories must be at least {}",
                layout::MIN_DX_CATEGORIES
            ));
        }
        if self.n_proc_categories < layout::MIN_PROC_CATEGORIES {
            problems.push(format!(
                "n_proc_categories must be at least {}",
                layout::MIN_PROC_CATEGORIES
            ));
        }
        if !(self.mean_claims_per_patient > 0.0 && self.mean_claims_per_patient.is_finite()) {
            problems.push("mean_claims_per_patient must be > 0".to_string());
        }
        for (name, sig) in [
            ("readmission", &self.signal_spec.readmission),
            ("mortality", &self.signal_spec.mortality),
        ] {
            let weights = [sig.intercept, sig.charlson, sig.length_of_stay, sig.ed_visits];
            if weights.iter().chain(sig.ccs.iter().map(|c| &c.weight)).any(|w| !w.is_finite()) {
                problems.push(format!("{name} signal weights must be finite"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub beneficiaries: Vec<Beneficiary>,
    pub claims: Vec<ClaimRecord>,
    pub ground_truth: Vec<GroundTruth>,
    /// The generative coefficients outcomes were drawn from.
    pub coefficients: SignalSpec,
}

pub const HISTORY_START: (i32, u32, u32) = (2010, 1, 1);
pub const INDEX_START: (i32, u32, u32) = (2011, 1, 1);
pub const INDEX_END: (i32, u32, u32) = (2011, 12, 31);
pub const ENROLLMENT_END: (i32, u32, u32) = (2012, 12, 31);

fn ymd((y, m, d): (i32, u32, u32)) -> Day {
    Day::from_ymd(y, m, d).expect("valid constant date")
}

pub const ADMISSION_SOURCES: [&str; 5] = [
    "emergency_room",
    "physician_referral",
    "clinic_referral",
    "transfer_from_hospital",
    "other",
];

pub const N_FACILITIES: usize = 20;
pub const N_DRGS: usize = 20;

pub fn facility_id(i: usize) -> String {
    format!("F{:03}", i + 1)
}

pub fn drg_code(i: usize) -> String {
    format!("DRG{:02}", i + 1)
}

pub fn generate_population(cfg: &SyntheticConfig) -> Result<Population> {
    cfg.validate()?;
    let patients: Vec<PatientOutput> = (0..cfg.n_patients)
        .into_par_iter()
        .map(|p| {
            let mut r = rng(derive_seed(cfg.seed, &format!("patient-{p}")));
            simulate_patient(cfg, p, &mut r)
        })
        .collect();

    let mut beneficiaries = Vec::with_capacity(patients.len());
    let mut claims = Vec::new();
    let mut ground_truth = Vec::new();
    for out in patients {
        beneficiaries.push(out.beneficiary);
        claims.extend(out.claims);
        ground_truth.extend(out.ground_truth);
    }
    beneficiaries.sort_by(|a, b| a.beneficiary_id.cmp(&b.beneficiary_id));
    sort_claims(&mut claims);
    Ok(Population {
        beneficiaries,
        claims,
        ground_truth,
        coefficients: cfg.signal_spec.clone(),
    })
}

struct PatientOutput {
    beneficiary: Beneficiary,
    claims: Vec<ClaimRecord>,
    ground_truth: Vec<GroundTruth>,
}

/// Per-patient chronic state that recurs on claims.
struct Profile {
    charlson_codes: Vec<String>,
    charlson_score: u32,
    chronic_general: Vec<String>,
}

struct Emitted {
    day: Day,
    claim_type: ClaimType,
    dx_categories: Vec<u32>,
    proc_categories: Vec<u32>,
}

fn bernoulli(rng: &mut Rng, p: f64) -> bool {
    rng.random_bool(p.clamp(0.0, 1.0))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn poisson(rng: &mut Rng, mean: f64) -> usize {
    Poisson::new(mean).expect("positive finite mean").sample(rng) as usize
}

fn pick_weighted<T: Copy>(rng: &mut Rng, items: &[(T, f64)]) -> T {
    let index = WeightedIndex::new(items.iter().map(|(_, w)| *w)).expect("non-empty positive weights");
    items[index.sample(rng)].0
}

/// Standard Charlson weights, in group order.
pub const CHARLSON_WEIGHTS: [u32; 17] = [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 3, 6, 6];

fn simulate_patient(cfg: &SyntheticConfig, p: usize, rng: &mut Rng) -> PatientOutput {
    let vocab = cfg.vocab();
    let id = format!("B{:06}", p + 1);
    let history_start = ymd(HISTORY_START);
    let index_start = ymd(INDEX_START);
    let index_end = ymd(INDEX_END);
    let enrollment_end = ymd(ENROLLMENT_END);

    // Demographics.
    let stratum = rng.random::<f64>();
    let (age_years, medicare_status) = if stratum < 0.88 {
        (rng.random_range(65..95), MedicareStatus::AgedNoEsrd)
    } else if stratum < 0.93 {
        let age = rng.random_range(55..90);
        let status = if age >= 65 { MedicareStatus::AgedEsrd } else { MedicareStatus::EsrdOnly };
        (age, status)
    } else {
        (rng.random_range(45..65), MedicareStatus::Disabled)
    };
    let birth_date = index_start - (age_years * 365 + age_years / 4) - rng.random_range(0..365);
    let gender = if bernoulli(rng, 0.4152) { Gender::Male } else { Gender::Female };
    let race = pick_weighted(
        rng,
        &[
            (Race::Unknown, 0.0012),
            (Race::White, 0.8668),
            (Race::Black, 0.0861),
            (Race::Other, 0.0099),
            (Race::Asian, 0.0131),
            (Race::Hispanic, 0.0186),
            (Race::NorthAmericanNative, 0.0044),
        ],
    );
    let dual_eligible = bernoulli(rng, 0.2);
    let enrollment_start = if bernoulli(rng, 0.08) {
        history_start + rng.random_range(60..540)
    } else {
        history_start
    };

    // Chronic conditions.
    let frailty = rng.random::<f64>();
    let mut profile = Profile {
        charlson_codes: Vec::new(),
        charlson_score: 0,
        chronic_general: Vec::new(),
    };
    for g in 0..layout::N_CHARLSON_GROUPS {
        if bernoulli(rng, 0.02 + 0.22 * frailty * frailty) {
            if let Some(code) = vocab.code_for(CodeType::Dx, layout::CHARLSON_DX_START + g, rng) {
                profile.charlson_codes.push(code);
                profile.charlson_score += CHARLSON_WEIGHTS[g as usize];
            }
        }
    }
    let general_dx = general_dx_categories(&vocab);
    let general_proc = general_proc_categories(&vocab);
    for _ in 0..rng.random_range(1..=4) {
        let cat = general_dx[rng.random_range(0..general_dx.len())];
        if let Some(code) = vocab.code_for(CodeType::Dx, cat, rng) {
            profile.chronic_general.push(code);
        }
    }

    let mut claims: Vec<ClaimRecord> = Vec::new();
    let mut emitted: Vec<Emitted> = Vec::new();
    let mut ground_truth = Vec::new();
    let mut next_claim = 0usize;
    let claim_id = |next: &mut usize| {
        *next += 1;
        format!("{id}-{:03}", *next)
    };

    // Outpatient / ED background over the history and index years.
    let n_background = poisson(rng, cfg.mean_claims_per_patient * (0.5 + frailty));
    let mut background_days: Vec<Day> = (0..n_background)
        .map(|_| history_start + rng.random_range(0..(index_end - history_start)))
        .collect();
    background_days.sort();
    for day in background_days {
        let claim_type = if bernoulli(rng, 0.3) { ClaimType::Ed } else { ClaimType::Outpatient };
        let mut dx = Vec::new();
        let chronic: Vec<&String> =
            profile.charlson_codes.iter().chain(&profile.chronic_general).collect();
        if !chronic.is_empty() && bernoulli(rng, 0.7) {
            dx.push(chronic[rng.random_range(0..chronic.len())].clone());
        }
        if dx.is_empty() || bernoulli(rng, 0.4) {
            let cat = general_dx[rng.random_range(0..general_dx.len())];
            dx.extend(vocab.code_for(CodeType::Dx, cat, rng));
        }
        let mut procs = Vec::new();
        if bernoulli(rng, 0.3) {
            let cat = general_proc[rng.random_range(0..general_proc.len())];
            procs.extend(vocab.code_for(CodeType::Proc, cat, rng));
        }
        let claim = ClaimRecord {
            claim_id: claim_id(&mut next_claim),
            beneficiary_id: id.clone(),
            claim_type,
            admit_date: day,
            discharge_date: day,
            dx_codes: dx,
            proc_codes: procs,
            drg: None,
            admission_type: if claim_type == ClaimType::Ed {
                AdmissionType::Emergent
            } else {
                AdmissionType::Other
            },
            admission_source: if claim_type == ClaimType::Ed {
                "emergency_room".into()
            } else {
                "physician_referral".into()
            },
            discharge_disposition: Disposition::Home,
            facility_id: facility_id(rng.random_range(0..N_FACILITIES)),
        };
        emitted.push(emitted_from(&vocab, &claim));
        claims.push(claim);
    }

    // Inpatient admissions.
    let mut death_date: Option<Day> = None;
    let mut admit = index_start + rng.random_range(0..180);
    let mut kind = AdmissionKind::First;
    while admit <= index_end {
        let los = if bernoulli(rng, 0.02) {
            rng.random_range(31..46)
        } else {
            Exp::new(0.25_f64).expect("positive rate").sample(rng).floor().min(30.0) as i32
        };
        let discharge = admit + los;
        let admission_type = match kind {
            AdmissionKind::Planned => AdmissionType::Elective,
            _ => pick_weighted(
                rng,
                &[
                    (AdmissionType::Emergent, 0.55),
                    (AdmissionType::Urgent, 0.2),
                    (AdmissionType::Elective, 0.2),
                    (AdmissionType::Other, 0.05),
                ],
            ),
        };

        // Codes for the whole stay.
        let principal_cat = match kind {
            AdmissionKind::Planned => {
                layout::MAINTENANCE_DX[rng.random_range(0..layout::MAINTENANCE_DX.len())]
            }
            AdmissionKind::Unplanned if bernoulli(rng, 0.5) => {
                layout::ACUTE_OVERRIDE_DX[rng.random_range(0..layout::ACUTE_OVERRIDE_DX.len())]
            }
            _ => general_dx[rng.random_range(0..general_dx.len())],
        };
        let mut dx: Vec<String> = vocab.code_for(CodeType::Dx, principal_cat, rng).into_iter().collect();
        if dx.is_empty() {
            dx.push(SyntheticVocab::code_string(CodeType::Dx, 0));
        }
        dx.extend(profile.charlson_codes.iter().cloned());
        dx.extend(profile.chronic_general.iter().filter(|_| bernoulli(rng, 0.6)).cloned());
        for _ in 0..rng.random_range(0..3) {
            let cat = general_dx[rng.random_range(0..general_dx.len())];
            dx.extend(vocab.code_for(CodeType::Dx, cat, rng));
        }
        let mut procs: Vec<String> = Vec::new();
        if matches!(kind, AdmissionKind::Planned) {
            let cat = layout::PLANNED_PROC[rng.random_range(0..layout::PLANNED_PROC.len())];
            procs.extend(vocab.code_for(CodeType::Proc, cat, rng));
        }
        for _ in 0..rng.random_range(0..3) {
            let cat = general_proc[rng.random_range(0..general_proc.len())];
            procs.extend(vocab.code_for(CodeType::Proc, cat, rng));
        }
        if bernoulli(rng, 0.04) {
            let hac = rng.random_range(0..layout::N_HAC);
            dx.extend(vocab.code_for(CodeType::Dx, layout::HAC_DX_START + hac, rng));
            if hac >= 8 {
                let cat = layout::HAC_PROC[(hac as usize - 8) % layout::HAC_PROC.len()];
                procs.extend(vocab.code_for(CodeType::Proc, cat, rng));
            }
        }
        dedup_in_order(&mut dx);
        dedup_in_order(&mut procs);

        let drg = drg_code(rng.random_range(0..N_DRGS));
        let source = match admission_type {
            AdmissionType::Emergent | AdmissionType::Urgent => "emergency_room",
            AdmissionType::Elective => {
                if bernoulli(rng, 0.5) { "physician_referral" } else { "clinic_referral" }
            }
            AdmissionType::Other => "other",
        };
        let expired_inpatient = bernoulli(rng, 0.015);
        let final_disposition = if expired_inpatient {
            Disposition::Expired
        } else {
            pick_weighted(
                rng,
                &[
                    (Disposition::Home, 0.72),
                    (Disposition::Snf, 0.16),
                    (Disposition::Hospice, 0.03),
                    (Disposition::Ama, 0.02),
                    (Disposition::Other, 0.07),
                ],
            )
        };
        let transfer = los >= 2 && bernoulli(rng, 0.05);
        let facility = rng.random_range(0..N_FACILITIES);
        let base = ClaimRecord {
            claim_id: String::new(),
            beneficiary_id: id.clone(),
            claim_type: ClaimType::Inpatient,
            admit_date: admit,
            discharge_date: discharge,
            dx_codes: dx.clone(),
            proc_codes: procs.clone(),
            drg: Some(drg),
            admission_type,
            admission_source: source.to_string(),
            discharge_disposition: final_disposition,
            facility_id: facility_id(facility),
        };
        if transfer {
            let split = admit + rng.random_range(1..los);
            let split_codes = dx.len().div_ceil(2);
            let first = ClaimRecord {
                claim_id: claim_id(&mut next_claim),
                discharge_date: split,
                dx_codes: dx[..split_codes].to_vec(),
                proc_codes: procs.clone(),
                discharge_disposition: Disposition::TransferAcute,
                ..base.clone()
            };
            let mut second_dx = vec![dx[0].clone()];
            second_dx.extend(dx[split_codes..].iter().cloned());
            dedup_in_order(&mut second_dx);
            let second = ClaimRecord {
                claim_id: claim_id(&mut next_claim),
                admit_date: split + rng.random_range(0..2).min(discharge - split),
                dx_codes: second_dx,
                proc_codes: Vec::new(),
                admission_source: "transfer_from_hospital".into(),
                facility_id: facility_id((facility + 1) % N_FACILITIES),
                ..base.clone()
            };
            for c in [first, second] {
                emitted.push(emitted_from(&vocab, &c));
                claims.push(c);
            }
        } else {
            let c = ClaimRecord {
                claim_id: claim_id(&mut next_claim),
                ..base.clone()
            };
            emitted.push(emitted_from(&vocab, &c));
            claims.push(c);
        }

        if expired_inpatient {
            death_date = Some(discharge);
            break;
        }

        // Outcome model inputs at this discharge.
        let mut inputs = SignalInputs {
            charlson: profile.charlson_score,
            length_of_stay: los,
            ..Default::default()
        };
        for e in &emitted {
            let in_window = e.day >= admit - 365 && e.day <= discharge;
            if !in_window {
                continue;
            }
            if e.claim_type == ClaimType::Ed && e.day < admit {
                inputs.ed_visits += 1;
            }
            inputs.dx_categories.extend(e.dx_categories.iter().copied());
            inputs.proc_categories.extend(e.proc_categories.iter().copied());
        }

        let dies = bernoulli(rng, sigmoid(cfg.signal_spec.mortality.logit(&inputs)));
        let readmits = !dies && bernoulli(rng, sigmoid(cfg.signal_spec.readmission.logit(&inputs)));
        ground_truth.push(GroundTruth {
            beneficiary_id: id.clone(),
            index_discharge_date: discharge,
            readmit_label: readmits,
            mortality_label: dies,
        });

        if dies {
            death_date = Some(discharge + rng.random_range(1..=30));
            break;
        }
        if readmits {
            admit = discharge + rng.random_range(1..=30);
            kind = AdmissionKind::Unplanned;
        } else if bernoulli(rng, 0.08) {
            admit = discharge + rng.random_range(1..=30);
            kind = AdmissionKind::Planned;
        } else if bernoulli(rng, 0.6) {
            admit = discharge + rng.random_range(31..=240);
            kind = AdmissionKind::Other;
        } else {
            break;
        }
    }

    if let Some(death) = death_date {
        claims.retain(|c| c.admit_date <= death);
    }
    let enrollment_stop = death_date.map_or(enrollment_end, |d| d.min(enrollment_end));
    let beneficiary = Beneficiary {
        beneficiary_id: id,
        birth_date,
        gender,
        race,
        dual_eligible,
        medicare_status,
        enrollment_intervals: vec![Interval(enrollment_start, enrollment_stop.max(enrollment_start))],
        death_date,
    };
    PatientOutput {
        beneficiary,
        claims,
        ground_truth,
    }
}

#[derive(Clone, Copy)]
enum AdmissionKind {
    First,
    Unplanned,
    Planned,
    Other,
}

fn dedup_in_order(codes: &mut Vec<String>) {
    let mut seen = BTreeSet::new();
    codes.retain(|c| seen.insert(c.clone()));
}

fn emitted_from(vocab: &SyntheticVocab, claim: &ClaimRecord) -> Emitted {
    let cat = |code_type, code: &String| -> Option<u32> {
        code[1..].parse::<u32>().ok().map(|i| vocab.category_of(code_type, i))
    };
    Emitted {
        day: claim.admit_date,
        claim_type: claim.claim_type,
        dx_categories: claim.dx_codes.iter().filter_map(|c| cat(CodeType::Dx, c)).collect(),
        proc_categories: claim.proc_codes.iter().filter_map(|c| cat(CodeType::Proc, c)).collect(),
    }
}

fn general_dx_categories(vocab: &SyntheticVocab) -> Vec<u32> {
    std::iter::once(0)
        .chain(layout::GENERAL_DX_START..vocab.n_dx_categories - 1)
        .collect()
}

fn general_proc_categories(vocab: &SyntheticVocab) -> Vec<u32> {
    std::iter::once(0)
        .chain(layout::GENERAL_PROC_START..vocab.n_proc_categories - 1)
        .collect()
}
