use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::domain::{build_domain_vector, history_charlson, FeatureLayout, History};
use super::FeatureContext;
use crate::claims::{Beneficiary, ClaimRecord, ClaimType, CodeType, Day, Gender, MedicareStatus, Race};
use crate::cohort::{resolve_stays, Cohort, IndexEvent, InpatientStay, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceOptions {
    /// Keep outpatient and ED claims as time steps.
    pub include_outpatient: bool,
    /// Drop the index stay from the sequence (it is the last step otherwise).
    pub exclude_index_step: bool,
    /// Keep only the most recent steps.
    pub max_steps: Option<usize>,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        SequenceOptions { include_outpatient: true, exclude_index_step: false, max_steps: None }
    }
}

/// One time step: days relative to the index admission and the sorted
/// positions of the set bits of the one-hot vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub day_offset: i32,
    pub x: Vec<u32>,
}

/// Attributes the subgroup report partitions on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupKeys {
    pub age: i32,
    pub gender: Gender,
    pub race: Race,
    pub medicare_status: MedicareStatus,
    pub charlson: u32,
    /// Procedure CCS categories on the index stay.
    pub proc_ccs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientSequence {
    pub event_id: String,
    pub beneficiary_id: String,
    pub index_admit: Day,
    pub steps: Vec<Step>,
    pub z: Vec<f64>,
    pub label: bool,
    pub keys: SubgroupKeys,
}

impl PatientSequence {
    /// Dense one-hot row of step `t`.
    pub fn dense_step(&self, t: usize, input_dim: usize) -> Vec<f64> {
        let mut row = vec![0.0; input_dim];
        for &i in &self.steps[t].x {
            row[i as usize] = 1.0;
        }
        row
    }
}

fn one_hot<'a>(
    dx: impl IntoIterator<Item = &'a String>,
    procs: impl IntoIterator<Item = &'a String>,
    ctx: &FeatureContext,
) -> Vec<u32> {
    let ccs = &ctx.ccs;
    let set: BTreeSet<u32> = dx
        .into_iter()
        .map(|c| ccs.input_index(CodeType::Dx, ccs.category(CodeType::Dx, c)) as u32)
        .chain(
            procs
                .into_iter()
                .map(|c| ccs.input_index(CodeType::Proc, ccs.category(CodeType::Proc, c)) as u32),
        )
        .collect();
    set.into_iter().collect()
}

/// Time steps for an index stay: each prior stay and (optionally) each
/// outpatient/ED claim admitted in the lookback window, in chronological
/// order with ties broken by claim id, then the index stay itself.
pub fn build_sequence(
    stay: &InpatientStay,
    history: &History<'_>,
    ctx: &FeatureContext,
    opts: &SequenceOptions,
) -> Result<Vec<Step>> {
    let admit = stay.admit_date;
    let mut events: Vec<(Day, &str, Vec<u32>)> = history
        .stays_before(admit, ctx.lookback_days)
        .map(|s| (s.admit_date, s.stay_id(), one_hot(&s.all_dx, &s.all_proc, ctx)))
        .collect();
    if opts.include_outpatient {
        events.extend(
            history
                .claims_before(admit, ctx.lookback_days)
                .filter(|c| c.claim_type != ClaimType::Inpatient)
                .map(|c| (c.admit_date, c.claim_id.as_str(), one_hot(&c.dx_codes, &c.proc_codes, ctx))),
        );
    }
    events.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut steps: Vec<Step> = events
        .into_iter()
        .filter(|(_, _, x)| !x.is_empty())
        .map(|(day, _, x)| Step { day_offset: day - admit, x })
        .collect();
    if !opts.exclude_index_step {
        let x = one_hot(&stay.all_dx, &stay.all_proc, ctx);
        if !x.is_empty() {
            steps.push(Step { day_offset: 0, x });
        }
    }
    if let Some(max) = opts.max_steps {
        if steps.len() > max {
            steps.drain(..steps.len() - max);
        }
    }
    if steps.is_empty() {
        return Err(Error::EmptySequence(stay.stay_id().to_string()));
    }
    Ok(steps)
}

/// Model input for one index event.
pub fn build_patient_sequence(
    event: &IndexEvent,
    history: &History<'_>,
    task: Task,
    ctx: &FeatureContext,
    opts: &SequenceOptions,
) -> Result<PatientSequence> {
    let stay = &event.stay;
    let steps = build_sequence(stay, history, ctx, opts)?;
    let z = build_domain_vector(stay, event.age_at_admission, history, ctx);
    let bene = history.beneficiary;
    let proc_ccs: BTreeSet<u32> =
        stay.all_proc.iter().map(|c| ctx.ccs.category(CodeType::Proc, c)).collect();
    Ok(PatientSequence {
        event_id: event.event_id().to_string(),
        beneficiary_id: event.beneficiary_id().to_string(),
        index_admit: stay.admit_date,
        steps,
        z,
        label: task.label(event),
        keys: SubgroupKeys {
            age: event.age_at_admission,
            gender: bene.gender,
            race: bene.race,
            medicare_status: bene.medicare_status,
            charlson: history_charlson(stay, history, ctx),
            proc_ccs: proc_ccs.into_iter().collect(),
        },
    })
}

/// Featurized cohort for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSet {
    pub task: Task,
    pub input_dim: usize,
    pub input_names: Vec<String>,
    pub layout: FeatureLayout,
    pub sequences: Vec<PatientSequence>,
}

#[derive(Serialize, Deserialize)]
struct SequenceHeader {
    task: Task,
    input_dim: usize,
    input_names: Vec<String>,
    layout: FeatureLayout,
}

pub const SEQUENCES_FILE: &str = "sequences.jsonl";
pub const LAYOUT_FILE: &str = "layout.json";

impl SequenceSet {
    pub fn labels(&self) -> Vec<bool> {
        self.sequences.iter().map(|s| s.label).collect()
    }

    pub fn positives(&self) -> usize {
        self.sequences.iter().filter(|s| s.label).count()
    }

    /// Writes `layout.json` and `sequences.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let header = SequenceHeader {
            task: self.task,
            input_dim: self.input_dim,
            input_names: self.input_names.clone(),
            layout: self.layout.clone(),
        };
        std::fs::write(dir.join(LAYOUT_FILE), serde_json::to_string_pretty(&header)?)?;
        let mut w = BufWriter::new(std::fs::File::create(dir.join(SEQUENCES_FILE))?);
        for s in &self.sequences {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let header: SequenceHeader =
            serde_json::from_str(&std::fs::read_to_string(dir.join(LAYOUT_FILE))?)?;
        let reader = BufReader::new(std::fs::File::open(dir.join(SEQUENCES_FILE))?);
        let mut sequences = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s: PatientSequence = serde_json::from_str(&line)
                .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            if s.z.len() != header.layout.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("z has {} entries, layout has {}", s.z.len(), header.layout.len()),
                });
            }
            sequences.push(s);
        }
        Ok(SequenceSet {
            task: header.task,
            input_dim: header.input_dim,
            input_names: header.input_names,
            layout: header.layout,
            sequences,
        })
    }
}

/// Featurize every event of the cohort that belongs to `task`.
pub fn featurize(
    cohort: &Cohort,
    beneficiaries: &[Beneficiary],
    claims: &[ClaimRecord],
    task: Task,
    ctx: &FeatureContext,
    opts: &SequenceOptions,
) -> Result<SequenceSet> {
    let lookup: BTreeMap<&str, &Beneficiary> =
        beneficiaries.iter().map(|b| (b.beneficiary_id.as_str(), b)).collect();
    let mut claims_by: BTreeMap<&str, Vec<ClaimRecord>> = BTreeMap::new();
    for c in claims {
        claims_by.entry(c.beneficiary_id.as_str()).or_default().push(c.clone());
    }
    let mut events_by: BTreeMap<&str, Vec<&IndexEvent>> = BTreeMap::new();
    for e in cohort.events.iter().filter(|e| task.includes(e)) {
        events_by.entry(e.beneficiary_id()).or_default().push(e);
    }
    let groups: Vec<(&str, Vec<&IndexEvent>)> = events_by.into_iter().collect();
    let per_bene: Vec<Result<Vec<PatientSequence>>> = groups
        .par_iter()
        .map(|(id, events)| {
            let bene = lookup.get(id).ok_or_else(|| Error::MissingBeneficiary(id.to_string()))?;
            let mut bene_claims = claims_by.get(id).cloned().unwrap_or_default();
            crate::claims::sort_claims(&mut bene_claims);
            let stays = resolve_stays(&bene_claims);
            let history = History { beneficiary: bene, claims: &bene_claims, stays: &stays };
            events
                .iter()
                .map(|e| build_patient_sequence(e, &history, task, ctx, opts))
                .collect()
        })
        .collect();
    let mut sequences = Vec::new();
    for r in per_bene {
        sequences.extend(r?);
    }
    Ok(SequenceSet {
        task,
        input_dim: ctx.ccs.input_dim(),
        input_names: (0..ctx.ccs.input_dim()).map(|i| ctx.ccs.input_name(i)).collect(),
        layout: ctx.spec.layout(ctx),
        sequences,
    })
}
