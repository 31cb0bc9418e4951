use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::claims::{AdmissionType, ClaimRecord, ClaimType, Day, Disposition};

/// One hospitalisation after transfer chains have been collapsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpatientStay {
    pub beneficiary_id: String,
    pub admit_date: Day,
    pub discharge_date: Day,
    pub merged_claim_ids: Vec<String>,
    pub principal_dx: String,
    pub all_dx: Vec<String>,
    pub all_proc: Vec<String>,
    pub drg: Option<String>,
    pub admission_type: AdmissionType,
    pub admission_source: String,
    pub discharge_disposition: Disposition,
    pub facility_id: String,
}

impl InpatientStay {
    pub fn from_claim(claim: &ClaimRecord) -> Self {
        InpatientStay {
            beneficiary_id: claim.beneficiary_id.clone(),
            admit_date: claim.admit_date,
            discharge_date: claim.discharge_date,
            merged_claim_ids: vec![claim.claim_id.clone()],
            principal_dx: claim.dx_codes.first().cloned().unwrap_or_default(),
            all_dx: dedup(claim.dx_codes.iter()),
            all_proc: dedup(claim.proc_codes.iter()),
            drg: claim.drg.clone(),
            admission_type: claim.admission_type,
            admission_source: claim.admission_source.clone(),
            discharge_disposition: claim.discharge_disposition,
            facility_id: claim.facility_id.clone(),
        }
    }

    /// Id of the first claim in the chain; unique per stay.
    pub fn stay_id(&self) -> &str {
        &self.merged_claim_ids[0]
    }

    pub fn length_of_stay(&self) -> i32 {
        self.discharge_date - self.admit_date
    }

    /// Whether `next` continues this stay as an acute-care transfer.
    fn absorbs(&self, next: &InpatientStay) -> bool {
        self.beneficiary_id == next.beneficiary_id
            && self.discharge_disposition == Disposition::TransferAcute
            && next.admit_date <= self.discharge_date + 1
    }

    fn absorb(&mut self, next: InpatientStay) {
        self.admit_date = self.admit_date.min(next.admit_date);
        self.discharge_date = self.discharge_date.max(next.discharge_date);
        self.merged_claim_ids.extend(next.merged_claim_ids);
        self.all_dx = dedup(self.all_dx.iter().chain(&next.all_dx));
        self.all_proc = dedup(self.all_proc.iter().chain(&next.all_proc));
        if next.drg.is_some() {
            self.drg = next.drg;
        }
        self.discharge_disposition = next.discharge_disposition;
        self.facility_id = next.facility_id;
    }
}

fn dedup<'a>(codes: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    codes.filter(|c| seen.insert(c.as_str())).cloned().collect()
}

/// Collapse inpatient claims into stays.
///
/// A claim discharged as `transfer_acute` absorbs the next inpatient claim of
/// the same beneficiary when that claim is admitted no later than the day
/// after. The merged stay keeps the first claim's admission details and
/// principal diagnosis, the last claim's disposition and facility, and the
/// union of all codes. Claims must be sorted per beneficiary; non-inpatient
/// claims are ignored.
pub fn resolve_stays(claims: &[ClaimRecord]) -> Vec<InpatientStay> {
    merge_stays(
        claims
            .iter()
            .filter(|c| c.claim_type == ClaimType::Inpatient)
            .map(InpatientStay::from_claim)
            .collect(),
    )
}

/// The merge step of [`resolve_stays`], applicable to already-resolved stays.
pub fn merge_stays(stays: Vec<InpatientStay>) -> Vec<InpatientStay> {
    let mut out: Vec<InpatientStay> = Vec::with_capacity(stays.len());
    for stay in stays {
        match out.last_mut() {
            Some(current) if current.absorbs(&stay) => current.absorb(stay),
            _ => out.push(stay),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::tests::inpatient;

    #[test]
    fn transfer_pair_merges() {
        let a = inpatient("A", 0, 3, Disposition::TransferAcute, &["D1"], &["P1"]);
        let mut b = inpatient("B", 3, 7, Disposition::Home, &["D2"], &["P1", "P2"]);
        b.facility_id = "F2".into();
        let stays = resolve_stays(&[a, b]);
        assert_eq!(stays.len(), 1);
        let s = &stays[0];
        assert_eq!((s.admit_date, s.discharge_date), (Day(0), Day(7)));
        assert_eq!(s.discharge_disposition, Disposition::Home);
        assert_eq!(s.facility_id, "F2");
        assert_eq!(s.principal_dx, "D1");
        assert_eq!(s.all_dx, vec!["D1", "D2"]);
        assert_eq!(s.all_proc, vec!["P1", "P2"]);
        assert_eq!(s.merged_claim_ids, vec!["A", "B"]);
    }

    #[test]
    fn single_claim_is_identity() {
        let a = inpatient("A", 0, 3, Disposition::Home, &["D1"], &[]);
        let stays = resolve_stays(std::slice::from_ref(&a));
        assert_eq!(stays, vec![InpatientStay::from_claim(&a)]);
    }

    #[test]
    fn three_claim_chain_unions_codes() {
        let a = inpatient("A", 0, 2, Disposition::TransferAcute, &["D1"], &["P1"]);
        let b = inpatient("B", 3, 5, Disposition::TransferAcute, &["D2", "D1"], &[]);
        let c = inpatient("C", 5, 9, Disposition::Snf, &["D3"], &["P3"]);
        let stays = resolve_stays(&[a.clone(), b.clone(), c.clone()]);
        assert_eq!(stays.len(), 1);

        // Oracle: fold the pairwise merge by hand.
        let mut folded = InpatientStay::from_claim(&a);
        folded.absorb(InpatientStay::from_claim(&b));
        folded.absorb(InpatientStay::from_claim(&c));
        assert_eq!(stays[0], folded);
        assert_eq!(stays[0].all_dx, vec!["D1", "D2", "D3"]);
        assert_eq!(stays[0].discharge_disposition, Disposition::Snf);
    }

    #[test]
    fn gap_of_two_days_does_not_merge() {
        let a = inpatient("A", 0, 2, Disposition::TransferAcute, &["D1"], &[]);
        let b = inpatient("B", 4, 6, Disposition::Home, &["D2"], &[]);
        assert_eq!(resolve_stays(&[a, b]).len(), 2);
    }

    #[test]
    fn non_transfer_same_day_admission_stays_separate() {
        let a = inpatient("A", 0, 2, Disposition::Home, &["D1"], &[]);
        let b = inpatient("B", 2, 6, Disposition::Home, &["D2"], &[]);
        assert_eq!(resolve_stays(&[a, b]).len(), 2);
    }
}
