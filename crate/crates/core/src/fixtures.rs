//! Reference models and synthetic data used by tests, examples and the CLI
//! demo configuration.
//!
//! Delay parameters are in years; severities are deflated dollar amounts.

use crate::calibration::ClaimRecord;
use crate::distributions::{Dependence, GeneralizedGamma, LognormalComponent, PositiveDistribution, SeverityModel};
use crate::financial::FinancialAssumptions;
use crate::montecarlo::ExposureModels;
use crate::reserving::{OpenClaim, RbnsInfoSet, ReserveModels};
use crate::rng::{stream, Role};
use crate::trend::TrendSpec;
use rand::Rng;

pub const KAPPA_INDEMNITY: f64 = 0.29504;
pub const KAPPA_EXPENSE: f64 = 1.23178;
pub const ALPHA_INDEMNITY: f64 = 0.045692;
pub const ALPHA_EXPENSE: f64 = 0.041744;
pub const DISCOUNT_RATE: f64 = 0.06;
pub const FRANK_THETA: f64 = 1.413523;
/// Mean of the reference exponential reporting delay, years.
pub const REPORTING_MEAN: f64 = 1.52;
/// Expected occurrences per unit of `Λ` in the reference exposure fixture.
pub const REFERENCE_OCCURRENCE_RATE: f64 = 20.0;

/// Settlement delay `ζ`.
pub fn settlement_delay() -> GeneralizedGamma<f64> {
    GeneralizedGamma { a: 3.33246873, b: 0.67977335, c: 0.3645056 }
}

pub fn indemnity_severity() -> SeverityModel<f64> {
    SeverityModel {
        p0: 0.5605836,
        components: vec![
            LognormalComponent { weight: 0.7193306, mu: 8.590078, sigma: 1.316284 },
            LognormalComponent { weight: 0.2806694, mu: 9.603317, sigma: 0.2598194 },
        ],
        kappa: KAPPA_INDEMNITY,
        phi: None,
    }
}

/// The published weights sum to 0.9999995; the model renormalises on use.
pub fn expense_severity() -> SeverityModel<f64> {
    SeverityModel {
        p0: 0.1683231,
        components: vec![
            LognormalComponent { weight: 0.3142661, mu: -0.05958437, sigma: 1.1458589 },
            LognormalComponent { weight: 0.6857334, mu: 0.9696933, sigma: 0.7298423 },
        ],
        kappa: KAPPA_EXPENSE,
        phi: None,
    }
}

pub fn reserve_models() -> ReserveModels<f64> {
    ReserveModels {
        settlement: PositiveDistribution::GeneralizedGamma(settlement_delay()),
        indemnity: indemnity_severity(),
        expense: expense_severity(),
        dependence: Dependence::Coupled,
    }
}

/// Reference inflation with a common discount rate `beta`.
pub fn financial(valuation_time: f64, beta: f64) -> FinancialAssumptions<f64> {
    FinancialAssumptions::new(ALPHA_INDEMNITY, ALPHA_EXPENSE, beta, beta, valuation_time)
}

/// Valuation time of [`synthetic_portfolio`].
pub const PORTFOLIO_VALUATION: usize = 4;

/// Nine open claims over reporting years 2–4 at `t = 4`.
pub fn synthetic_portfolio() -> RbnsInfoSet<f64> {
    let claims = [
        (1.10, 0.30, 2),
        (0.80, 0.90, 2),
        (1.50, 0.45, 2),
        (2.05, 0.20, 3),
        (1.60, 0.90, 3),
        (2.60, 0.15, 3),
        (3.10, 0.10, 4),
        (3.30, 0.30, 4),
        (3.85, 0.05, 4),
    ];
    RbnsInfoSet::from_claims(
        PORTFOLIO_VALUATION,
        claims.iter().map(|&(t_occ, xi, accident_year)| OpenClaim { t_occ, xi, class: None, accident_year }),
    )
    .expect("fixture claims are aligned with their reporting years")
}

/// The first five claims of [`synthetic_portfolio`].
pub fn small_portfolio() -> RbnsInfoSet<f64> {
    let all = synthetic_portfolio();
    RbnsInfoSet::from_claims(PORTFOLIO_VALUATION, all.claims().copied().take(5)).expect("subset of a valid set")
}

pub fn reporting_delay() -> PositiveDistribution<f64> {
    PositiveDistribution::Exponential { rate: 1.0 / REPORTING_MEAN }
}

/// Power-trend exposure with exponential renewals.
///
/// `Λ(t) = t^γ` in years; the renewal rate only scales the expected count,
/// which leaves every proportion unchanged.
pub fn exposure_models(gamma: f64) -> ExposureModels {
    ExposureModels {
        trend: TrendSpec::Power { gamma },
        renewal: PositiveDistribution::Exponential { rate: REFERENCE_OCCURRENCE_RATE },
        reporting: reporting_delay(),
        settlement: PositiveDistribution::GeneralizedGamma(settlement_delay()),
        indemnity: indemnity_severity(),
        expense: expense_severity(),
        dependence: Dependence::Coupled,
    }
}

/// Trend driving an accelerated settlement-delay sequence: `Λ(t) = t^1.2`.
pub fn accelerated_settlement_trend() -> TrendSpec<f64> {
    TrendSpec::Power { gamma: 1.2 }
}

/// Closed claims generated from the reference models.
///
/// Occurrences are uniform over `[0, span)` years, reporting is exponential
/// with mean [`REPORTING_MEAN`], settlement follows [`settlement_delay`], and
/// amounts are the delay-shifted severities inflated to the settlement time.
pub fn synthetic_records(n: usize, span: f64, seed: u64) -> Vec<ClaimRecord> {
    let gg = settlement_delay();
    let (x, y) = (indemnity_severity(), expense_severity());
    let rep = reporting_delay();
    (0..n)
        .map(|k| {
            let mut rng = stream(seed, k as u64, 0, Role::Auxiliary);
            let occurrence = span * rng.random::<f64>();
            let report = occurrence + rep.sample(&mut rng);
            let zeta = gg.sample(&mut rng);
            let s = report + zeta;
            let indemnity = x.sample(zeta, None, &mut rng) * (ALPHA_INDEMNITY * s).exp();
            let expense = y.sample(zeta, None, &mut rng) * (ALPHA_EXPENSE * s).exp();
            ClaimRecord { occurrence, report, settlement: Some(s), indemnity, expense, class: None }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_valid() {
        assert_eq!(synthetic_portfolio().counts(), vec![0, 3, 3, 3]);
        assert_eq!(small_portfolio().total_claims(), 5);
        reserve_models().validate().unwrap();
        exposure_models(1.0).validate().unwrap();
        let recs = synthetic_records(100, 10.0, 1);
        assert!(recs.iter().all(|r| r.validate().is_ok() && r.is_closed()));
    }
}
