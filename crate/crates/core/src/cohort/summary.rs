use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::IndexEvent;
use crate::claims::{Beneficiary, Gender, Race};
use crate::error::Result;

/// Age bands of the descriptive table; the last band is open-ended.
pub const AGE_RANGES: [&str; 7] = ["Unknown", "<65", "65~69", "70~74", "75~79", "80~84", ">85"];

/// Band index into [`AGE_RANGES`].
pub fn age_range(age: Option<i32>) -> usize {
    match age {
        None => 0,
        Some(a) if a < 65 => 1,
        Some(a) if a >= 85 => 6,
        Some(a) => 2 + ((a - 65) / 5) as usize,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisSummary {
    pub axis: &'static str,
    pub levels: Vec<&'static str>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl AxisSummary {
    fn new(axis: &'static str, levels: Vec<&'static str>) -> Self {
        let counts = vec![0; levels.len()];
        AxisSummary { axis, levels, counts, total: 0 }
    }

    fn add(&mut self, level: usize) {
        self.counts[level] += 1;
        self.total += 1;
    }

    /// Percentages of the total; all zero for an empty axis.
    pub fn percentages(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| if self.total == 0 { 0.0 } else { 100.0 * c as f64 / self.total as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionSummary {
    pub title: &'static str,
    pub total_beneficiaries: usize,
    pub axes: Vec<AxisSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub sections: Vec<SectionSummary>,
}

/// Beneficiary counts by race, gender and age range for the eligible cohort
/// and for the beneficiaries with at least one positive event per target.
/// A beneficiary's age is taken at their first index admission.
pub fn cohort_summary(events: &[IndexEvent], beneficiaries: &[Beneficiary]) -> CohortSummary {
    let lookup: BTreeMap<&str, &Beneficiary> =
        beneficiaries.iter().map(|b| (b.beneficiary_id.as_str(), b)).collect();
    let select = |pred: &dyn Fn(&IndexEvent) -> bool| {
        let mut first: BTreeMap<&str, &IndexEvent> = BTreeMap::new();
        let mut hit: BTreeMap<&str, bool> = BTreeMap::new();
        for e in events.iter().filter(|e| e.is_eligible()) {
            first.entry(e.beneficiary_id()).or_insert(e);
            *hit.entry(e.beneficiary_id()).or_default() |= pred(e);
        }
        first
            .into_iter()
            .filter(|(id, _)| hit[id])
            .map(|(id, e)| (id, e.age_at_admission))
            .collect::<Vec<_>>()
    };
    let sections = [
        ("Final Cohort", select(&|_| true)),
        ("30-day Readmission", select(&|e| e.any_readmission)),
        ("Unplanned 30-day readmission", select(&|e| e.readmit_label)),
        ("Unexpected 30-day mortality", select(&|e| e.mortality_label)),
    ];
    CohortSummary {
        sections: sections
            .into_iter()
            .map(|(title, members)| {
                let mut race = AxisSummary::new("RACE", Race::ALL.iter().map(|r| r.label()).collect());
                let mut gender =
                    AxisSummary::new("Gender", Gender::ALL.iter().map(|g| g.label()).collect());
                let mut age = AxisSummary::new("Age Range", AGE_RANGES.to_vec());
                for (id, age_at) in &members {
                    let bene = lookup.get(id);
                    match bene {
                        Some(b) => {
                            race.add(Race::ALL.iter().position(|r| *r == b.race).unwrap_or(0));
                            gender.add(Gender::ALL.iter().position(|g| *g == b.gender).unwrap_or(0));
                            age.add(age_range(Some(*age_at)));
                        }
                        None => {
                            race.add(0);
                            age.add(age_range(None));
                        }
                    }
                }
                SectionSummary {
                    title,
                    total_beneficiaries: members.len(),
                    axes: vec![race, gender, age],
                }
            })
            .collect(),
    }
}

impl CohortSummary {
    /// Descriptive-statistics layout: per section and axis a header row of
    /// level names, a `Counts` row and a `Percentage` row, padded to seven
    /// level columns plus `Total`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        const WIDTH: usize = 7;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["Cohort".to_string(), "Row".to_string()];
        header.extend((1..=WIDTH).map(|i| format!("C{i}")));
        header.push("Total".into());
        w.write_record(&header)?;
        for section in &self.sections {
            let cohort = format!(
                "{} (Total beneficiaries: {})",
                section.title, section.total_beneficiaries
            );
            for axis in &section.axes {
                let pad = |mut cells: Vec<String>| {
                    cells.resize(WIDTH, String::new());
                    cells
                };
                let mut row = vec![cohort.clone(), axis.axis.to_string()];
                row.extend(pad(axis.levels.iter().map(|l| l.to_string()).collect()));
                row.push("Total".into());
                w.write_record(&row)?;

                let mut row = vec![cohort.clone(), "Counts".to_string()];
                row.extend(pad(axis.counts.iter().map(|c| c.to_string()).collect()));
                row.push(axis.total.to_string());
                w.write_record(&row)?;

                let mut row = vec![cohort.clone(), "Percentage".to_string()];
                row.extend(pad(axis.percentages().iter().map(|p| format!("{p:.2}%")).collect()));
                row.push(String::new());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
