//! Net inflation/discount factors for deflated payment amounts.

use crate::error::{Error, Result};
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// Where the inflation integral stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflationMode {
    /// Inflate to the payment time: `exp(α x − β (x − t))`.
    #[default]
    ToPayment,
    /// Inflate only to the valuation time: `exp(α t − β (x − t))`.
    ToValuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentType {
    Indemnity,
    Expense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinancialAssumptions<T> {
    /// Forces of inflation per year for indemnity and expense.
    pub alpha1: T,
    pub alpha2: T,
    /// Forces of interest per year for indemnity and expense.
    pub beta1: T,
    pub beta2: T,
    /// Valuation time `t` in years from the origin.
    pub valuation_time: T,
    #[serde(default)]
    pub mode: InflationMode,
    /// Years between the inflation base date and the time origin.
    #[serde(default)]
    pub inflation_offset: T,
}

impl<T: Real> FinancialAssumptions<T> {
    pub fn new(alpha1: T, alpha2: T, beta1: T, beta2: T, valuation_time: T) -> Self {
        Self { alpha1, alpha2, beta1, beta2, valuation_time, mode: InflationMode::ToPayment, inflation_offset: T::zero() }
    }

    /// No inflation and no discounting.
    pub fn neutral(valuation_time: T) -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero(), valuation_time)
    }

    pub fn rates(&self, kind: PaymentType) -> (T, T) {
        match kind {
            PaymentType::Indemnity => (self.alpha1, self.beta1),
            PaymentType::Expense => (self.alpha2, self.beta2),
        }
    }

    /// Factor without the `x ≥ t` check; payments before the valuation
    /// time accumulate interest up to it.
    pub fn factor_unchecked(&self, kind: PaymentType, x: T) -> T {
        let (alpha, beta) = self.rates(kind);
        let t = self.valuation_time;
        let inflate_to = match self.mode {
            InflationMode::ToPayment => x,
            InflationMode::ToValuation => t,
        };
        (alpha * (inflate_to + self.inflation_offset) - beta * (x - t)).exp()
    }

    pub fn factor(&self, kind: PaymentType, x: T) -> Result<T> {
        if x < self.valuation_time {
            return Err(Error::Domain(format!(
                "payment time {x} precedes the valuation time {}",
                self.valuation_time
            )));
        }
        Ok(self.factor_unchecked(kind, x))
    }
}

/// `A_k(x)` for payment type 1 (indemnity) or 2 (expense).
pub fn net_discount_factor<T: Real>(fa: &FinancialAssumptions<T>, payment_type: u8, x: T) -> Result<T> {
    let kind = match payment_type {
        1 => PaymentType::Indemnity,
        2 => PaymentType::Expense,
        other => return Err(Error::InvalidParameter(format!("payment type must be 1 or 2, got {other}"))),
    };
    fa.factor(kind, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn worked_values() {
        let fa = FinancialAssumptions::new(0.0, 0.0, 0.06, 0.06, 10.0);
        assert_relative_eq!(net_discount_factor(&fa, 1, 12.0).unwrap(), (-0.12f64).exp(), max_relative = 1e-15);
        let fa = FinancialAssumptions::new(0.045692, 0.0, 0.0, 0.0, 10.0);
        assert_relative_eq!(net_discount_factor(&fa, 1, 12.0).unwrap(), (0.045692f64 * 12.0).exp(), max_relative = 1e-15);
        assert_eq!(net_discount_factor(&FinancialAssumptions::neutral(3.0), 2, 7.0).unwrap(), 1.0);
    }

    #[test]
    fn domain_checks() {
        let fa = FinancialAssumptions::new(0.01, 0.01, 0.02, 0.02, 5.0);
        assert!(net_discount_factor(&fa, 1, 4.0).is_err());
        assert!(net_discount_factor(&fa, 3, 6.0).is_err());
    }

    #[test]
    fn equal_rates_flatten_the_curve() {
        let fa = FinancialAssumptions::new(0.04, 0.04, 0.04, 0.04, 2.0);
        let a = fa.factor(PaymentType::Indemnity, 2.5).unwrap();
        let b = fa.factor(PaymentType::Indemnity, 9.0).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
        assert_relative_eq!(a, (0.08f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn valuation_mode_ignores_payment_time_for_inflation() {
        let mut fa = FinancialAssumptions::new(0.05, 0.05, 0.0, 0.0, 3.0);
        fa.mode = InflationMode::ToValuation;
        assert_relative_eq!(fa.factor(PaymentType::Expense, 8.0).unwrap(), (0.15f64).exp(), max_relative = 1e-15);
    }
}
