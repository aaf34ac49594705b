//! Claims-file ingestion.
//!
//! Columns: `occurrence_date`, `report_date`, `settlement_date` (empty for
//! open claims), `indemnity`, `expense`, `injury_class` (optional). Dates
//! are `YYYY-MM-DD` and become years from the origin at 365 days a year.
//! Amounts of open claims may be empty.

use crate::error::{CliError, Result};
use atrp_core::calibration::ClaimRecord;
use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const DAYS_PER_YEAR: f64 = 365.0;
const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub origin: NaiveDate,
    /// Rejected share above which ingestion fails.
    pub max_reject_share: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { origin: NaiveDate::from_ymd_opt(1989, 11, 22).expect("valid date"), max_reject_share: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the file, header on line 1.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub records: Vec<ClaimRecord>,
    pub rejected: Vec<RejectedRow>,
}

#[derive(Debug, Deserialize)]
struct Row {
    occurrence_date: String,
    report_date: String,
    #[serde(default)]
    settlement_date: Option<String>,
    #[serde(default)]
    indemnity: Option<String>,
    #[serde(default)]
    expense: Option<String>,
    #[serde(default)]
    injury_class: Option<String>,
}

fn years_since(origin: NaiveDate, field: &str, s: &str) -> std::result::Result<f64, String> {
    let d = NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).map_err(|e| format!("{field} {s:?}: {e}"))?;
    Ok((d - origin).num_days() as f64 / DAYS_PER_YEAR)
}

fn blank(s: &Option<String>) -> bool {
    s.as_deref().is_none_or(|v| v.trim().is_empty())
}

fn amount(field: &str, s: &Option<String>, open: bool) -> std::result::Result<f64, String> {
    if blank(s) {
        return if open { Ok(0.0) } else { Err(format!("{field} is missing for a settled claim")) };
    }
    let raw = s.as_deref().unwrap_or_default().trim();
    let v: f64 = raw.parse().map_err(|_| format!("{field} {raw:?} is not a number"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("{field} {v} is negative or not finite"));
    }
    Ok(v)
}

fn parse_row(row: &Row, origin: NaiveDate) -> std::result::Result<ClaimRecord, String> {
    let occurrence = years_since(origin, "occurrence_date", &row.occurrence_date)?;
    let report = years_since(origin, "report_date", &row.report_date)?;
    let settlement = match &row.settlement_date {
        s if blank(s) => None,
        Some(s) => Some(years_since(origin, "settlement_date", s)?),
        None => None,
    };
    if report < occurrence {
        return Err("report_date precedes occurrence_date".into());
    }
    if settlement.is_some_and(|s| s < report) {
        return Err("settlement_date precedes report_date".into());
    }
    let open = settlement.is_none();
    let class = match &row.injury_class {
        c if blank(c) => None,
        Some(c) => Some(c.trim().parse::<usize>().map_err(|_| format!("injury_class {c:?} is not a non-negative integer"))?),
        None => None,
    };
    let rec = ClaimRecord {
        occurrence,
        report,
        settlement,
        indemnity: amount("indemnity", &row.indemnity, open)?,
        expense: amount("expense", &row.expense, open)?,
        class,
    };
    rec.validate().map_err(|e| e.to_string())?;
    Ok(rec)
}

/// Parses a claims table, listing rejected rows by line number.
pub fn read_claims<R: Read>(reader: R, opts: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Input(format!("header: {e}")))?.clone();
    for need in ["occurrence_date", "report_date", "indemnity", "expense"] {
        if !headers.iter().any(|h| h == need) {
            return Err(CliError::Input(format!("missing column `{need}`")));
        }
    }
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (k, result) in rdr.deserialize::<Row>().enumerate() {
        let fallback_line = k as u64 + 2;
        match result {
            Ok(row) => match parse_row(&row, opts.origin) {
                Ok(r) => records.push(r),
                Err(reason) => rejected.push(RejectedRow { line: fallback_line, reason }),
            },
            Err(e) => {
                let line = e.position().map_or(fallback_line, |p| p.line());
                rejected.push(RejectedRow { line, reason: e.to_string() });
            }
        }
    }
    let total = records.len() + rejected.len();
    if total > 0 && rejected.len() as f64 > opts.max_reject_share * total as f64 {
        let first = &rejected[0];
        return Err(CliError::TooManyRejects {
            rejected: rejected.len(),
            total,
            limit: opts.max_reject_share,
            first: format!("line {}: {}", first.line, first.reason),
        });
    }
    Ok(Ingested { records, rejected })
}

pub fn ingest_claims(path: &Path, opts: &IngestOptions) -> Result<Ingested> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_claims(std::io::BufReader::new(f), opts)
}

fn to_date(origin: NaiveDate, years: f64) -> String {
    let days = (years * DAYS_PER_YEAR).round() as i64;
    (origin + Duration::days(days)).format(DATE_FORMAT).to_string()
}

/// Writes records in the ingestion layout, rounding times to whole days.
pub fn write_claims<W: Write>(records: &[ClaimRecord], origin: NaiveDate, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| CliError::Input(e.to_string());
    w.write_record(["occurrence_date", "report_date", "settlement_date", "indemnity", "expense", "injury_class"]).map_err(err)?;
    for r in records {
        let settled = r.settlement.map(|s| to_date(origin, s)).unwrap_or_default();
        let money = |v: f64| if r.settlement.is_some() { format!("{v:.2}") } else { String::new() };
        w.write_record([
            to_date(origin, r.occurrence),
            to_date(origin, r.report),
            settled,
            money(r.indemnity),
            money(r.expense),
            r.class.map(|c| c.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Input(e.to_string()))
}

/// What is known at valuation time `t`: claims reported by `t`, with
/// settlement and amounts hidden for claims still open.
pub fn observed_at(records: &[ClaimRecord], t: f64) -> Vec<ClaimRecord> {
    records
        .iter()
        .filter(|r| r.report <= t)
        .map(|r| match r.settlement {
            Some(s) if s <= t => *r,
            _ => ClaimRecord { settlement: None, indemnity: 0.0, expense: 0.0, ..*r },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<Ingested> {
        read_claims(text.as_bytes(), &IngestOptions::default())
    }

    #[test]
    fn header_only_gives_no_records() {
        let got = read("occurrence_date,report_date,settlement_date,indemnity,expense\n").unwrap();
        assert!(got.records.is_empty() && got.rejected.is_empty());
    }

    #[test]
    fn missing_required_column_is_an_input_error() {
        assert!(matches!(read("occurrence_date,report_date,indemnity\n"), Err(CliError::Input(_))));
    }

    #[test]
    fn reject_share_above_limit_aborts() {
        let mut text = String::from("occurrence_date,report_date,settlement_date,indemnity,expense\n");
        for _ in 0..19 {
            text.push_str("1990-01-01,1990-02-01,,,\n");
        }
        text.push_str("1990-01-01,1989-12-01,,,\n");
        // 1 in 20 is exactly 5%
        assert_eq!(read(&text).unwrap().rejected.len(), 1);
        text.push_str("bad-date,1990-02-01,,,\n");
        assert!(matches!(read(&text), Err(CliError::TooManyRejects { rejected: 2, total: 21, .. })));
    }

    #[test]
    fn dates_round_trip_through_the_writer() {
        let origin = IngestOptions::default().origin;
        let recs = vec![ClaimRecord { occurrence: 1.0, report: 2.0, settlement: Some(3.0), indemnity: 10.0, expense: 2.5, class: Some(3) }];
        let mut buf = Vec::new();
        write_claims(&recs, origin, &mut buf).unwrap();
        let back = read(std::str::from_utf8(&buf).unwrap()).unwrap().records;
        assert_eq!(back, recs);
    }

    #[test]
    fn observation_hides_the_future() {
        let r = ClaimRecord { occurrence: 1.0, report: 1.5, settlement: Some(3.0), indemnity: 10.0, expense: 2.0, class: None };
        let late = ClaimRecord { report: 2.5, ..r };
        let seen = observed_at(&[r, late], 2.0);
        assert_eq!(seen.len(), 1);
        assert_eq!((seen[0].settlement, seen[0].indemnity), (None, 0.0));
        assert_eq!(observed_at(&[r], 3.0)[0], r);
    }
}
