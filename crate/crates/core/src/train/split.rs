use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng, shuffle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fold {
    Train,
    Valid,
    Calib,
    Test,
}

impl Fold {
    pub const ALL: [Fold; 4] = [Fold::Train, Fold::Valid, Fold::Calib, Fold::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Fold::Train => "train",
            Fold::Valid => "valid",
            Fold::Calib => "calib",
            Fold::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub calib: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.70, valid: 0.15, calib: 0.05, test: 0.10, seed: 1 }
    }
}

impl SplitSpec {
    pub const MIN_PATIENTS: usize = 20;

    pub fn fractions(&self) -> [f64; 4] {
        [self.train, self.valid, self.calib, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.fractions();
        if f.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions {f:?} must be in [0, 1] and sum to 1")));
        }
        Ok(())
    }
}

/// Patient-level fold assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub assignment: BTreeMap<String, Fold>,
    /// Patients per stratum {0, 1, 2+ positive events}.
    pub strata: [usize; 3],
    pub warnings: Vec<String>,
}

impl Split {
    pub fn fold_of(&self, patient: &str) -> Option<Fold> {
        self.assignment.get(patient).copied()
    }

    pub fn count(&self, fold: Fold) -> usize {
        self.assignment.values().filter(|&&f| f == fold).count()
    }
}

/// Assign patients to folds.
///
/// Patients are grouped into strata by their number of positive events
/// (0, 1, 2+), shuffled within each stratum and laid end to end. Walking
/// that order, each patient goes to the fold furthest below its target
/// share so far, which keeps every fold within one patient of its quota
/// and spreads each stratum across folds in proportion.
pub fn split_patients(positives: &BTreeMap<String, usize>, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if positives.len() < SplitSpec::MIN_PATIENTS {
        return Err(Error::Config(format!(
            "need at least {} patients to split, have {}",
            SplitSpec::MIN_PATIENTS,
            positives.len()
        )));
    }
    let mut strata: [Vec<&str>; 3] = Default::default();
    for (id, &n) in positives {
        strata[n.min(2)].push(id.as_str());
    }
    let mut warnings = Vec::new();
    let mut order = Vec::with_capacity(positives.len());
    for (k, members) in strata.iter_mut().enumerate() {
        if members.is_empty() {
            let label = ["0", "1", "2+"][k];
            warnings.push(format!("stratum with {label} positive events is empty"));
            continue;
        }
        shuffle(members, &mut rng(derive_seed(spec.seed, &format!("split-stratum-{k}"))));
        order.extend(members.iter().copied());
    }
    let fractions = spec.fractions();
    let mut counts = [0usize; 4];
    let mut assignment = BTreeMap::new();
    for (i, id) in order.into_iter().enumerate() {
        let seen = (i + 1) as f64;
        let pick = (0..4)
            .max_by(|&a, &b| {
                let da = seen * fractions[a] - counts[a] as f64;
                let db = seen * fractions[b] - counts[b] as f64;
                // ties go to the earlier fold
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("four folds");
        counts[pick] += 1;
        assignment.insert(id.to_string(), Fold::ALL[pick]);
    }
    Ok(Split { assignment, strata: strata.map(|s| s.len()), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patients(n: usize, positives: impl Fn(usize) -> usize) -> BTreeMap<String, usize> {
        (0..n).map(|i| (format!("P{i:04}"), positives(i))).collect()
    }

    #[test]
    fn hundred_patients_split_70_15_5_10() {
        let s = split_patients(&patients(100, |_| 0), &SplitSpec::default()).unwrap();
        let counts: Vec<usize> = Fold::ALL.iter().map(|&f| s.count(f)).collect();
        for (got, want) in counts.iter().zip([70, 15, 5, 10]) {
            assert!(got.abs_diff(want) <= 1, "{counts:?}");
        }
        assert_eq!(s.warnings.len(), 2);
    }

    #[test]
    fn deterministic_and_disjoint() {
        let p = patients(137, |i| i % 5 / 2);
        for seed in 0..1000 {
            let spec = SplitSpec { seed, ..Default::default() };
            let a = split_patients(&p, &spec).unwrap();
            // a map gives each patient exactly one fold; check coverage
            assert_eq!(a.assignment.len(), p.len());
            if seed < 5 {
                assert_eq!(a, split_patients(&p, &spec).unwrap());
            }
        }
        let a = split_patients(&p, &SplitSpec { seed: 1, ..Default::default() }).unwrap();
        let b = split_patients(&p, &SplitSpec { seed: 2, ..Default::default() }).unwrap();
        assert_ne!(a.assignment, b.assignment);
    }

    #[test]
    fn strata_are_spread_proportionally() {
        let p = patients(1000, |i| if i % 10 == 0 { 1 } else { 0 });
        let s = split_patients(&p, &SplitSpec::default()).unwrap();
        let pos_train = p.iter().filter(|(id, &n)| n == 1 && s.fold_of(id) == Some(Fold::Train)).count();
        assert!(pos_train.abs_diff(70) <= 2, "{pos_train}");
    }

    #[test]
    fn bad_specs() {
        let p = patients(10, |_| 0);
        assert!(split_patients(&p, &SplitSpec::default()).is_err());
        let spec = SplitSpec { train: 0.9, ..Default::default() };
        assert!(split_patients(&patients(50, |_| 0), &spec).is_err());
    }
}
