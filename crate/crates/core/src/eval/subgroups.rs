use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{auc_opt, recall_precision_at_threshold};
use crate::claims::{Gender, MedicareStatus, Race};
use crate::cohort::{age_range, AGE_RANGES};
use crate::error::Result;
use crate::features::SubgroupKeys;

pub const CHARLSON_BANDS: [&str; 3] = ["0-2", "3-5", "6+"];

pub fn charlson_band(score: u32) -> usize {
    match score {
        0..=2 => 0,
        3..=5 => 1,
        _ => 2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubgroupOptions {
    /// Groups smaller than this are flagged.
    pub n_min: usize,
    pub threshold: f64,
    /// Procedure categories to report; empty means the most frequent ones.
    pub proc_ccs: Vec<u32>,
    pub max_proc_groups: usize,
}

impl Default for SubgroupOptions {
    fn default() -> Self {
        SubgroupOptions { n_min: 50, threshold: 0.5, proc_ccs: Vec::new(), max_proc_groups: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRow {
    pub partition: String,
    pub group: String,
    pub n: usize,
    pub prevalence: Option<f64>,
    /// `None` for single-class groups.
    pub auc: Option<f64>,
    pub recall: Option<f64>,
    pub small: bool,
}

fn row(partition: &str, group: &str, idx: &[usize], scores: &[f64], labels: &[bool], opts: &SubgroupOptions) -> SubgroupRow {
    let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
    let pos = l.iter().filter(|&&x| x).count();
    SubgroupRow {
        partition: partition.to_string(),
        group: group.to_string(),
        n: idx.len(),
        prevalence: (!idx.is_empty()).then(|| pos as f64 / idx.len() as f64),
        auc: auc_opt(&s, &l),
        recall: recall_precision_at_threshold(&s, &l, opts.threshold).0,
        small: idx.len() < opts.n_min,
    }
}

fn partition_rows(
    out: &mut Vec<SubgroupRow>,
    partition: &str,
    groups: &[&str],
    group_of: impl Fn(usize) -> usize,
    scores: &[f64],
    labels: &[bool],
    opts: &SubgroupOptions,
) {
    let mut members = vec![Vec::new(); groups.len()];
    for i in 0..scores.len() {
        members[group_of(i)].push(i);
    }
    for (g, idx) in groups.iter().zip(&members) {
        out.push(row(partition, g, idx, scores, labels, opts));
    }
}

/// Procedure categories ordered by how many events carry them.
pub fn frequent_procedures(keys: &[&SubgroupKeys], limit: usize) -> Vec<u32> {
    let mut count: BTreeMap<u32, usize> = BTreeMap::new();
    for k in keys {
        for &c in &k.proc_ccs {
            *count.entry(c).or_default() += 1;
        }
    }
    let mut cats: Vec<(u32, usize)> = count.into_iter().collect();
    cats.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    cats.into_iter().take(limit).map(|(c, _)| c).collect()
}

/// Metrics per group for each partition of the scored events. Every
/// partition's group sizes add up to the number of events; groups of a
/// fixed enumeration are listed even when empty.
pub fn subgroup_report(
    keys: &[&SubgroupKeys],
    scores: &[f64],
    labels: &[bool],
    opts: &SubgroupOptions,
) -> Vec<SubgroupRow> {
    assert!(keys.len() == scores.len() && scores.len() == labels.len());
    let mut out = Vec::new();
    partition_rows(&mut out, "All", &["All"], |_| 0, scores, labels, opts);
    partition_rows(&mut out, "Age", &AGE_RANGES, |i| age_range(Some(keys[i].age)), scores, labels, opts);
    let genders: Vec<&str> = Gender::ALL.iter().map(|g| g.label()).collect();
    partition_rows(
        &mut out,
        "Gender",
        &genders,
        |i| Gender::ALL.iter().position(|&g| g == keys[i].gender).expect("listed"),
        scores,
        labels,
        opts,
    );
    let races: Vec<&str> = Race::ALL.iter().map(|r| r.label()).collect();
    partition_rows(
        &mut out,
        "Race",
        &races,
        |i| Race::ALL.iter().position(|&r| r == keys[i].race).expect("listed"),
        scores,
        labels,
        opts,
    );
    partition_rows(&mut out, "Charlson index", &CHARLSON_BANDS, |i| charlson_band(keys[i].charlson), scores, labels, opts);
    let statuses: Vec<&str> = MedicareStatus::ALL.iter().map(|s| s.label()).collect();
    partition_rows(
        &mut out,
        "Medicare status",
        &statuses,
        |i| MedicareStatus::ALL.iter().position(|&s| s == keys[i].medicare_status).expect("listed"),
        scores,
        labels,
        opts,
    );
    let procs = if opts.proc_ccs.is_empty() {
        frequent_procedures(keys, opts.max_proc_groups)
    } else {
        opts.proc_ccs.clone()
    };
    for c in procs {
        partition_rows(
            &mut out,
            &format!("Procedure PROC CCS {c}"),
            &["With", "Without"],
            |i| usize::from(!keys[i].proc_ccs.contains(&c)),
            scores,
            labels,
            opts,
        );
    }
    out
}

pub fn write_subgroups_csv(rows: &[SubgroupRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn keys(n: usize) -> Vec<SubgroupKeys> {
        let mut r = crate::rng::rng(1);
        (0..n)
            .map(|i| SubgroupKeys {
                age: r.random_range(60..95),
                gender: Gender::ALL[i % 2],
                race: Race::ALL[r.random_range(0..7)],
                medicare_status: MedicareStatus::ALL[r.random_range(0..4)],
                charlson: r.random_range(0..9),
                proc_ccs: if i % 3 == 0 { vec![7] } else { vec![] },
            })
            .collect()
    }

    #[test]
    fn groups_sum_to_cohort_and_whole_group_matches_global() {
        let k = keys(300);
        let refs: Vec<&SubgroupKeys> = k.iter().collect();
        let mut r = crate::rng::rng(2);
        let labels: Vec<bool> = (0..300).map(|_| r.random_bool(0.3)).collect();
        let scores: Vec<f64> = (0..300).map(|_| r.random::<f64>()).collect();
        let rows = subgroup_report(&refs, &scores, &labels, &SubgroupOptions::default());
        let mut per: BTreeMap<&str, usize> = BTreeMap::new();
        for row in &rows {
            *per.entry(row.partition.as_str()).or_default() += row.n;
        }
        assert!(per.values().all(|&n| n == 300), "{per:?}");
        let all = &rows[0];
        assert_eq!(all.auc, auc_opt(&scores, &labels));
        assert_eq!(all.recall, recall_precision_at_threshold(&scores, &labels, 0.5).0);
        let bands: Vec<&str> = rows.iter().filter(|r| r.partition == "Charlson index").map(|r| r.group.as_str()).collect();
        assert_eq!(bands, CHARLSON_BANDS);
        assert!(rows.iter().any(|r| r.partition == "Procedure PROC CCS 7" && r.group == "With" && r.n == 100));
    }

    #[test]
    fn single_class_group_has_null_auc_and_small_flag() {
        let k = keys(4);
        let refs: Vec<&SubgroupKeys> = k.iter().collect();
        let rows = subgroup_report(&refs, &[0.1, 0.2, 0.3, 0.4], &[false; 4], &SubgroupOptions::default());
        assert!(rows[0].auc.is_none() && rows[0].small);
        assert_eq!(rows[0].prevalence, Some(0.0));
    }

    #[test]
    fn charlson_bands() {
        assert_eq!([0, 2, 3, 5, 6, 20].map(charlson_band), [0, 0, 1, 1, 2, 2]);
    }
}
