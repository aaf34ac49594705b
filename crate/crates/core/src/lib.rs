//! Conditional aggregate trend renewal process (ATRP) engine for micro-level
//! loss reserving.
//!
//! The analytic layers (special functions, quadrature, trend functions,
//! distributions, financial factors, conditional moments, risk measures) are
//! generic over the scalar type through [`Real`]; simulation and estimation
//! work in `f64` and use the aliases exported at the crate root.

pub mod calibration;
pub mod distributions;
pub mod error;
pub mod financial;
pub mod fixtures;
pub mod montecarlo;
pub mod optimize;
pub mod quadrature;
pub mod real;
pub mod reserving;
pub mod riskmetrics;
pub mod rng;
pub mod special;
pub mod stats;
pub mod trend;

pub use error::{Error, Result};
pub use real::Real;

pub type TrendSpec = trend::TrendSpec<f64>;
pub type PositiveDistribution = distributions::PositiveDistribution<f64>;
pub type RenewalDistribution = distributions::RenewalDistribution<f64>;
pub type DelayDistribution = distributions::DelayDistribution<f64>;
pub type GeneralizedGamma = distributions::GeneralizedGamma<f64>;
pub type SeverityModel = distributions::SeverityModel<f64>;
pub type LognormalComponent = distributions::LognormalComponent<f64>;
pub type FrankCopula = distributions::FrankCopula<f64>;
pub type Dependence = distributions::Dependence<f64>;
pub type TruncatedDelay = distributions::TruncatedDelay<f64>;
pub type FinancialAssumptions = financial::FinancialAssumptions<f64>;
pub type OccurrenceHistory = trend::OccurrenceHistory<f64>;
pub type OpenClaim = reserving::OpenClaim<f64>;
pub type RbnsInfoSet = reserving::RbnsInfoSet<f64>;
pub type ReserveModels = reserving::ReserveModels<f64>;
