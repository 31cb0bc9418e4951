use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{sort_claims, Beneficiary, ClaimRecord, Day};
use crate::error::{Error, Result};

/// One line of a claims file, discriminated by its `kind` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Beneficiary(Beneficiary),
    Claim(ClaimRecord),
}

/// Read a line-delimited JSON claims file.
///
/// The whole file is rejected on the first malformed or invalid line. On
/// success beneficiaries are sorted by id and claims chronologically within
/// each beneficiary.
pub fn ingest_claims(path: &Path) -> Result<(Vec<Beneficiary>, Vec<ClaimRecord>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut beneficiaries = Vec::new();
    let mut claims = Vec::new();
    let mut bene_ids = HashSet::new();
    let mut claim_ids = HashSet::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let at_line = |e: Error| Error::Parse {
            line: line_no,
            message: e.to_string(),
        };
        match record {
            Record::Beneficiary(b) => {
                b.validate().map_err(at_line)?;
                if !bene_ids.insert(b.beneficiary_id.clone()) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("duplicate beneficiary `{}`", b.beneficiary_id),
                    });
                }
                beneficiaries.push(b);
            }
            Record::Claim(c) => {
                c.validate().map_err(at_line)?;
                if !claim_ids.insert(c.claim_id.clone()) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("duplicate claim `{}`", c.claim_id),
                    });
                }
                claims.push(c);
            }
        }
    }

    beneficiaries.sort_by(|a, b| a.beneficiary_id.cmp(&b.beneficiary_id));
    sort_claims(&mut claims);
    Ok((beneficiaries, claims))
}

/// Write beneficiaries then claims, one JSON object per line.
pub fn write_claims<W: Write>(
    out: W,
    beneficiaries: &[Beneficiary],
    claims: &[ClaimRecord],
) -> Result<()> {
    let mut out = BufWriter::new(out);
    for b in beneficiaries {
        serde_json::to_writer(&mut out, &Record::Beneficiary(b.clone()))?;
        out.write_all(b"\n")?;
    }
    for c in claims {
        serde_json::to_writer(&mut out, &Record::Claim(c.clone()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_claims_file(
    path: &Path,
    beneficiaries: &[Beneficiary],
    claims: &[ClaimRecord],
) -> Result<()> {
    write_claims(File::create(path)?, beneficiaries, claims)
}

/// One simulated discharge with the outcomes the generator drew for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beneficiary_id: String,
    pub index_discharge_date: Day,
    #[serde(with = "bool_as_int")]
    pub readmit_label: bool,
    #[serde(with = "bool_as_int")]
    pub mortality_label: bool,
}

mod bool_as_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("expected 0 or 1, got {other}"))),
        }
    }
}

/// CSV with header `beneficiary_id,index_discharge_date,readmit_label,mortality_label`.
pub fn write_ground_truth<W: Write>(out: W, rows: &[GroundTruth]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    let mut reader = csv::Reader::from_path(path)?;
    let rows = reader.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::types::*;

    fn claim(id: &str, admit: i32, discharge: i32) -> ClaimRecord {
        ClaimRecord {
            claim_id: id.into(),
            beneficiary_id: "B1".into(),
            claim_type: ClaimType::Inpatient,
            admit_date: Day(admit),
            discharge_date: Day(discharge),
            dx_codes: vec!["D00001".into()],
            proc_codes: vec![],
            drg: Some("DRG01".into()),
            admission_type: AdmissionType::Emergent,
            admission_source: "emergency_room".into(),
            discharge_disposition: Disposition::Home,
            facility_id: "F001".into(),
        }
    }

    fn bene() -> Beneficiary {
        Beneficiary {
            beneficiary_id: "B1".into(),
            birth_date: Day::from_ymd(1940, 1, 1).unwrap(),
            gender: Gender::Male,
            race: Race::Black,
            dual_eligible: true,
            medicare_status: MedicareStatus::AgedNoEsrd,
            enrollment_intervals: vec![Interval(Day(0), Day(20000))],
            death_date: None,
        }
    }

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn ingest_sorts_claims() {
        let lines = vec![
            serde_json::to_string(&Record::Claim(claim("C2", 15000, 15004))).unwrap(),
            serde_json::to_string(&Record::Beneficiary(bene())).unwrap(),
            serde_json::to_string(&Record::Claim(claim("C1", 14990, 14993))).unwrap(),
        ];
        let f = write_lines(&lines);
        let (benes, claims) = ingest_claims(f.path()).unwrap();
        assert_eq!(benes.len(), 1);
        assert_eq!(claims.len(), 2);
        assert_eq!(claims[0].claim_id, "C1");
        assert_eq!(claims[1].claim_id, "C2");
    }

    #[test]
    fn inverted_dates_reject_the_file() {
        let lines = vec![
            serde_json::to_string(&Record::Beneficiary(bene())).unwrap(),
            serde_json::to_string(&Record::Claim(claim("C9", 15010, 15004))).unwrap(),
        ];
        let f = write_lines(&lines);
        let err = ingest_claims(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{msg}");
        assert!(msg.contains("C9") && msg.contains("admit_date"), "{msg}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let lines = vec![
            serde_json::to_string(&Record::Beneficiary(bene())).unwrap(),
            "{\"kind\":\"claim\",".to_string(),
        ];
        let f = write_lines(&lines);
        assert!(matches!(ingest_claims(f.path()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn dates_are_iso_strings_on_the_wire() {
        let s = serde_json::to_string(&Record::Claim(claim("C1", 14975, 14976))).unwrap();
        assert!(s.contains("\"admit_date\":\"2011-01-01\""), "{s}");
        assert!(s.starts_with("{\"kind\":\"claim\""), "{s}");
    }

    #[test]
    fn ground_truth_header() {
        let mut buf = Vec::new();
        write_ground_truth(
            &mut buf,
            &[GroundTruth {
                beneficiary_id: "B1".into(),
                index_discharge_date: Day(14975),
                readmit_label: true,
                mortality_label: false,
            }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "beneficiary_id,index_discharge_date,readmit_label,mortality_label\nB1,2011-01-01,1,0\n"
        );
    }
}
