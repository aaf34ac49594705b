use crate::distributions::N_CLASSES;
use crate::error::{Error, Result};
use crate::financial::PaymentType;
use crate::reserving::ReportedClaim;
use serde::{Deserialize, Serialize};

/// One claim file. Times are in years from the time origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub occurrence: f64,
    pub report: f64,
    #[serde(default)]
    pub settlement: Option<f64>,
    #[serde(default)]
    pub indemnity: f64,
    #[serde(default)]
    pub expense: f64,
    #[serde(default)]
    pub class: Option<usize>,
}

impl ClaimRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.occurrence.is_finite() && self.report.is_finite()) {
            return bad("record times must be finite".into());
        }
        if self.report < self.occurrence {
            return bad(format!("report {} precedes occurrence {}", self.report, self.occurrence));
        }
        if let Some(s) = self.settlement {
            if !(s >= self.report) || !s.is_finite() {
                return bad(format!("settlement {s} precedes report {}", self.report));
            }
        }
        if !(self.indemnity >= 0.0 && self.indemnity.is_finite() && self.expense >= 0.0 && self.expense.is_finite()) {
            return bad("amounts must be finite and non-negative".into());
        }
        if self.class.is_some_and(|c| c >= N_CLASSES) {
            return bad(format!("injury class must be below {N_CLASSES}"));
        }
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.settlement.is_some()
    }

    pub fn reporting_delay(&self) -> f64 {
        self.report - self.occurrence
    }

    pub fn settlement_delay(&self) -> Option<f64> {
        self.settlement.map(|s| s - self.report)
    }

    pub fn amount(&self, kind: PaymentType) -> f64 {
        match kind {
            PaymentType::Indemnity => self.indemnity,
            PaymentType::Expense => self.expense,
        }
    }

    pub fn to_reported(&self) -> ReportedClaim<f64> {
        ReportedClaim { occurrence: self.occurrence, report: self.report, settlement: self.settlement, class: self.class }
    }
}

/// A deflated payment with its settlement delay, for severity fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityObservation {
    pub amount: f64,
    /// Settlement delay in years.
    pub zeta: f64,
    pub class: Option<usize>,
}

/// Closed-claim payments deflated to the inflation base: `amount · e^{−α (s + offset)}`
/// with `s` the settlement time.
pub fn severity_observations(records: &[ClaimRecord], kind: PaymentType, alpha: f64, offset: f64) -> Vec<SeverityObservation> {
    records
        .iter()
        .filter_map(|r| {
            let s = r.settlement?;
            Some(SeverityObservation {
                amount: r.amount(kind) * (-alpha * (s + offset)).exp(),
                zeta: s - r.report,
                class: r.class,
            })
        })
        .collect()
}

/// `(payment time, nominal amount)` pairs of closed claims.
pub fn payments(records: &[ClaimRecord], kind: PaymentType) -> (Vec<f64>, Vec<f64>) {
    records.iter().filter_map(|r| Some((r.settlement?, r.amount(kind)))).unzip()
}
