use std::fmt;
use std::ops::{Add, Sub};

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Integer day number counted from 1970-01-01.
///
/// Serialized as an ISO-8601 calendar date (`YYYY-MM-DD`); all window
/// arithmetic happens on the integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Day(pub i32);

impl Day {
    fn epoch() -> NaiveDate {
        NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Day> {
        NaiveDate::from_ymd_opt(year, month, day).map(Day::from_date)
    }

    pub fn from_date(date: NaiveDate) -> Day {
        Day((date - Self::epoch()).num_days() as i32)
    }

    pub fn to_date(self) -> NaiveDate {
        Self::epoch() + chrono::Duration::days(self.0 as i64)
    }

    pub fn parse(s: &str) -> Result<Day> {
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map(Day::from_date)
            .map_err(|e| Error::Config(format!("bad date `{s}`: {e}")))
    }

    /// Whole calendar years elapsed from `birth` to `self`.
    pub fn years_since(self, birth: Day) -> i32 {
        use chrono::Datelike;
        let (now, born) = (self.to_date(), birth.to_date());
        let mut age = now.year() - born.year();
        if (now.month(), now.day()) < (born.month(), born.day()) {
            age -= 1;
        }
        age
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_date().format("%Y-%m-%d"))
    }
}

impl Add<i32> for Day {
    type Output = Day;
    fn add(self, days: i32) -> Day {
        Day(self.0 + days)
    }
}

impl Sub<i32> for Day {
    type Output = Day;
    fn sub(self, days: i32) -> Day {
        Day(self.0 - days)
    }
}

impl Sub<Day> for Day {
    type Output = i32;
    fn sub(self, other: Day) -> i32 {
        self.0 - other.0
    }
}

impl Serialize for Day {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Day {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Day, D::Error> {
        let s = String::deserialize(deserializer)?;
        NaiveDate::parse_from_str(&s, "%Y-%m-%d")
            .map(Day::from_date)
            .map_err(|e| serde::de::Error::custom(format!("bad date `{s}`: {e}")))
    }
}

/// Which code system a CCS category belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeType {
    Dx,
    Proc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimType {
    Inpatient,
    Outpatient,
    Ed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionType {
    Emergent,
    Urgent,
    Elective,
    Other,
}

impl AdmissionType {
    pub fn is_acute(self) -> bool {
        matches!(self, AdmissionType::Emergent | AdmissionType::Urgent)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AdmissionType::Emergent => "emergent",
            AdmissionType::Urgent => "urgent",
            AdmissionType::Elective => "elective",
            AdmissionType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Home,
    TransferAcute,
    Snf,
    Hospice,
    Ama,
    Expired,
    Other,
}

impl Disposition {
    pub fn as_str(self) -> &'static str {
        match self {
            Disposition::Home => "home",
            Disposition::TransferAcute => "transfer_acute",
            Disposition::Snf => "snf",
            Disposition::Hospice => "hospice",
            Disposition::Ama => "ama",
            Disposition::Expired => "expired",
            Disposition::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn label(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
        }
    }
}

/// Race categories as tabulated in cohort summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    Unknown,
    White,
    Black,
    Other,
    Asian,
    Hispanic,
    NorthAmericanNative,
}

impl Race {
    pub const ALL: [Race; 7] = [
        Race::Unknown,
        Race::White,
        Race::Black,
        Race::Other,
        Race::Asian,
        Race::Hispanic,
        Race::NorthAmericanNative,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Race::Unknown => "Unknown",
            Race::White => "White",
            Race::Black => "Black",
            Race::Other => "Other",
            Race::Asian => "Asian",
            Race::Hispanic => "Hispanic",
            Race::NorthAmericanNative => "North American Native",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedicareStatus {
    AgedNoEsrd,
    AgedEsrd,
    Disabled,
    EsrdOnly,
}

impl MedicareStatus {
    pub const ALL: [MedicareStatus; 4] = [
        MedicareStatus::AgedNoEsrd,
        MedicareStatus::AgedEsrd,
        MedicareStatus::Disabled,
        MedicareStatus::EsrdOnly,
    ];

    /// Eligibility through end stage renal disease waives the age criterion.
    pub fn is_esrd(self) -> bool {
        matches!(self, MedicareStatus::AgedEsrd | MedicareStatus::EsrdOnly)
    }

    pub fn label(self) -> &'static str {
        match self {
            MedicareStatus::AgedNoEsrd => "Aged without ESRD",
            MedicareStatus::AgedEsrd => "Aged with ESRD",
            MedicareStatus::Disabled => "Disabled",
            MedicareStatus::EsrdOnly => "ESRD only",
        }
    }
}

/// One enrollment span, inclusive on both ends. Serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval(pub Day, pub Day);

impl Interval {
    pub fn start(&self) -> Day {
        self.0
    }

    pub fn end(&self) -> Day {
        self.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub claim_id: String,
    pub beneficiary_id: String,
    pub claim_type: ClaimType,
    pub admit_date: Day,
    pub discharge_date: Day,
    /// First entry is the principal diagnosis.
    pub dx_codes: Vec<String>,
    pub proc_codes: Vec<String>,
    pub drg: Option<String>,
    pub admission_type: AdmissionType,
    pub admission_source: String,
    pub discharge_disposition: Disposition,
    pub facility_id: String,
}

impl ClaimRecord {
    pub fn validate(&self) -> Result<()> {
        let id = &self.claim_id;
        if self.claim_id.is_empty() {
            return Err(Error::validation("claim", id, "claim_id", "must not be empty"));
        }
        if self.beneficiary_id.is_empty() {
            return Err(Error::validation("claim", id, "beneficiary_id", "must not be empty"));
        }
        if self.admit_date > self.discharge_date {
            return Err(Error::validation(
                "claim",
                id,
                "admit_date",
                format!(
                    "{} is after discharge_date {}",
                    self.admit_date, self.discharge_date
                ),
            ));
        }
        if self.claim_type == ClaimType::Inpatient && self.dx_codes.is_empty() {
            return Err(Error::validation(
                "claim",
                id,
                "dx_codes",
                "must be non-empty for inpatient claims",
            ));
        }
        if self.claim_type == ClaimType::Ed && self.admit_date != self.discharge_date {
            return Err(Error::validation(
                "claim",
                id,
                "discharge_date",
                "must equal admit_date for ED claims",
            ));
        }
        Ok(())
    }

    pub fn principal_dx(&self) -> Option<&str> {
        self.dx_codes.first().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beneficiary {
    pub beneficiary_id: String,
    pub birth_date: Day,
    pub gender: Gender,
    pub race: Race,
    pub dual_eligible: bool,
    pub medicare_status: MedicareStatus,
    pub enrollment_intervals: Vec<Interval>,
    pub death_date: Option<Day>,
}

impl Beneficiary {
    pub fn validate(&self) -> Result<()> {
        let id = &self.beneficiary_id;
        if id.is_empty() {
            return Err(Error::validation("beneficiary", id, "beneficiary_id", "must not be empty"));
        }
        for (i, iv) in self.enrollment_intervals.iter().enumerate() {
            if iv.start() > iv.end() {
                return Err(Error::validation(
                    "beneficiary",
                    id,
                    "enrollment_intervals",
                    format!("interval {i} starts after it ends"),
                ));
            }
            if i > 0 && self.enrollment_intervals[i - 1].end() >= iv.start() {
                return Err(Error::validation(
                    "beneficiary",
                    id,
                    "enrollment_intervals",
                    format!("interval {i} overlaps or precedes interval {}", i - 1),
                ));
            }
        }
        if let Some(death) = self.death_date {
            if death < self.birth_date {
                return Err(Error::validation(
                    "beneficiary",
                    id,
                    "death_date",
                    "precedes birth_date",
                ));
            }
        }
        Ok(())
    }

    /// True when `[from, to]` lies inside a single run of contiguous enrollment.
    /// Adjacent intervals (`end + 1 == next.start`) count as contiguous.
    pub fn continuously_enrolled(&self, from: Day, to: Day) -> bool {
        let mut run: Option<(Day, Day)> = None;
        for iv in &self.enrollment_intervals {
            run = match run {
                Some((start, end)) if iv.start() <= end + 1 => Some((start, end.max(iv.end()))),
                _ => Some((iv.start(), iv.end())),
            };
            if let Some((start, end)) = run {
                if start <= from && end >= to {
                    return true;
                }
            }
        }
        false
    }

    pub fn age_at(&self, day: Day) -> i32 {
        day.years_since(self.birth_date)
    }
}

/// Sort order shared by ingestion and generation: beneficiary, then
/// chronological, then claim id.
pub fn sort_claims(claims: &mut [ClaimRecord]) {
    claims.sort_by(|a, b| {
        (&a.beneficiary_id, a.admit_date, a.discharge_date, &a.claim_id).cmp(&(
            &b.beneficiary_id,
            b.admit_date,
            b.discharge_date,
            &b.claim_id,
        ))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bene(intervals: Vec<(i32, i32)>) -> Beneficiary {
        Beneficiary {
            beneficiary_id: "B1".into(),
            birth_date: Day(-20000),
            gender: Gender::Female,
            race: Race::White,
            dual_eligible: false,
            medicare_status: MedicareStatus::AgedNoEsrd,
            enrollment_intervals: intervals
                .into_iter()
                .map(|(a, b)| Interval(Day(a), Day(b)))
                .collect(),
            death_date: None,
        }
    }

    #[test]
    fn day_round_trips_through_iso() {
        let d = Day::from_ymd(2011, 3, 14).unwrap();
        assert_eq!(d.to_string(), "2011-03-14");
        assert_eq!(Day::parse("2011-03-14").unwrap(), d);
        assert_eq!(Day::from_ymd(1970, 1, 1).unwrap(), Day(0));
        assert_eq!(Day::from_ymd(2011, 1, 1).unwrap(), Day(14975));
    }

    #[test]
    fn age_respects_birthday() {
        let birth = Day::from_ymd(1940, 6, 15).unwrap();
        assert_eq!(Day::from_ymd(2005, 6, 14).unwrap().years_since(birth), 64);
        assert_eq!(Day::from_ymd(2005, 6, 15).unwrap().years_since(birth), 65);
    }

    #[test]
    fn enrollment_coverage() {
        let b = bene(vec![(0, 99), (100, 200), (300, 400)]);
        assert!(b.continuously_enrolled(Day(10), Day(200)));
        assert!(!b.continuously_enrolled(Day(10), Day(201)));
        assert!(!b.continuously_enrolled(Day(-1), Day(50)));
        assert!(b.continuously_enrolled(Day(300), Day(400)));
        assert!(!b.continuously_enrolled(Day(250), Day(350)));
    }

    #[test]
    fn claim_invariants() {
        let mut c = ClaimRecord {
            claim_id: "C1".into(),
            beneficiary_id: "B1".into(),
            claim_type: ClaimType::Ed,
            admit_date: Day(5),
            discharge_date: Day(6),
            dx_codes: vec![],
            proc_codes: vec![],
            drg: None,
            admission_type: AdmissionType::Emergent,
            admission_source: "emergency_room".into(),
            discharge_disposition: Disposition::Home,
            facility_id: "F1".into(),
        };
        assert!(matches!(c.validate(), Err(Error::Validation { field: "discharge_date", .. })));
        c.claim_type = ClaimType::Inpatient;
        assert!(matches!(c.validate(), Err(Error::Validation { field: "dx_codes", .. })));
        c.dx_codes.push("D00001".into());
        c.admit_date = Day(7);
        assert!(matches!(c.validate(), Err(Error::Validation { field: "admit_date", .. })));
    }
}
