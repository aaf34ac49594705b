//! Scenario configuration.
//!
//! Every rate and time field carries its unit in the key (`*_per_year`,
//! `*_years`); unknown keys are rejected. Any rate or multiplier may be a
//! list, in which case the run covers the Cartesian product of all lists.

use crate::error::{CliError, Result};
use atrp_core::calibration::KappaMode;
use atrp_core::financial::InflationMode;
use atrp_core::montecarlo::{DependenceMode, TrpSampler};
use atrp_core::TrendSpec;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A single value or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

impl<T> From<T> for OneOrMany<T> {
    fn from(v: T) -> Self {
        Self::One(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub valuation: Valuation,
    pub rates: Rates,
    pub simulation: Simulation,
    pub dependence: DependenceConfig,
    pub delays: Delays,
    pub exposure: Exposure,
    pub report: ReportOptions,
    pub calibration: CalibrationConfig,
    pub bootstrap: BootstrapConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Valuation {
    /// Valuation time `t`, whole years after the origin.
    pub t_years: usize,
    /// Calendar date of time zero.
    pub origin_date: NaiveDate,
    /// Share of rejected input rows that aborts ingestion.
    pub max_reject_share: f64,
}

impl Default for Valuation {
    fn default() -> Self {
        Self {
            t_years: 4,
            origin_date: NaiveDate::from_ymd_opt(1989, 11, 22).expect("valid date"),
            max_reject_share: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rates {
    /// Indemnity inflation; taken from the model bundle when absent.
    pub alpha1_per_year: Option<OneOrMany<f64>>,
    /// Expense inflation; taken from the model bundle when absent.
    pub alpha2_per_year: Option<OneOrMany<f64>>,
    pub beta1_per_year: OneOrMany<f64>,
    /// Expense discount rate; tied to `beta1_per_year` when absent.
    pub beta2_per_year: Option<OneOrMany<f64>>,
    pub inflation_mode: InflationMode,
    /// Years between the inflation base date and the origin.
    pub inflation_offset_years: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            alpha1_per_year: None,
            alpha2_per_year: None,
            beta1_per_year: OneOrMany::One(0.0),
            beta2_per_year: None,
            inflation_mode: InflationMode::ToPayment,
            inflation_offset_years: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Streams {
    /// Every grid point reuses the same seed.
    #[default]
    Common,
    /// Grid point `k` uses `seed + k`.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    pub n_sims: usize,
    pub seed: u64,
    /// Worker threads. Results never depend on it, so it is left out of reports.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    pub streams: Streams,
    pub trp_sampler: TrpSampler,
}

impl Default for Simulation {
    fn default() -> Self {
        Self { n_sims: 10_000, seed: 0, threads: None, streams: Streams::Common, trp_sampler: TrpSampler::Inversion }
    }
}

/// Dependence between indemnity and expense.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DependenceConfig {
    #[default]
    FromModels,
    KappaCoupled,
    Independent,
    /// Frank copula; `theta` defaults to the calibrated value.
    FrankCopula { theta: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Delays {
    pub reporting_multiplier: OneOrMany<f64>,
    pub settlement_multiplier: OneOrMany<f64>,
    /// Settlement delays of successive claims form a trend renewal process
    /// with this trend (time in years) and the settlement law as renewal.
    pub settlement_trend: Option<TrendSpec>,
}

impl Default for Delays {
    fn default() -> Self {
        Self { reporting_multiplier: 1.0.into(), settlement_multiplier: 1.0.into(), settlement_trend: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Exposure {
    /// Occurrence trend(s), time in years.
    pub occurrence_trend: OneOrMany<TrendSpec>,
    /// Rate of the exponential renewal law, events per unit of cumulative trend.
    pub renewal_rate_per_unit_trend: f64,
    pub horizon_years: f64,
    /// Extension `h` for unearned-premium proportions.
    pub extension_years: f64,
}

impl Default for Exposure {
    fn default() -> Self {
        Self {
            occurrence_trend: OneOrMany::One(TrendSpec::Power { gamma: 1.0 }),
            renewal_rate_per_unit_trend: atrp_core::fixtures::REFERENCE_OCCURRENCE_RATE,
            horizon_years: 1.0,
            extension_years: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    CsvTables,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportOptions {
    pub quantile_levels: Vec<f64>,
    /// Normal-mixture components fitted to simulated totals; 0 skips the fit.
    pub mixture_components: usize,
    pub formats: Vec<ReportFormat>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            quantile_levels: atrp_core::riskmetrics::DEFAULT_LEVELS.to_vec(),
            mixture_components: 2,
            formats: vec![ReportFormat::Json, ReportFormat::CsvTables, ReportFormat::Text],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSetting {
    Fixed(f64),
    Named(KappaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaKeyword {
    Estimate,
}

impl KappaSetting {
    pub fn mode(self) -> KappaMode {
        match self {
            Self::Fixed(kappa) => KappaMode::Fixed { kappa },
            Self::Named(KappaKeyword::Estimate) => KappaMode::estimate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Estimate injury-class location shifts.
    pub covariates: bool,
    /// `"estimate"` or a fixed value.
    pub kappa: KappaSetting,
    pub severity_components: usize,
    /// Fewer positive indemnity/expense pairs than this skips the copula fit.
    pub min_copula_pairs: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            covariates: false,
            kappa: KappaSetting::Named(KappaKeyword::Estimate),
            severity_components: 2,
            min_copula_pairs: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub settlement: bool,
    pub inflation: bool,
    pub resample_severities: bool,
    /// Re-estimate `κ` in every scenario instead of holding it at the base fit.
    pub refit_kappa: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { settlement: true, inflation: true, resample_severities: true, refit_kappa: false }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            valuation: Valuation::default(),
            rates: Rates::default(),
            simulation: Simulation::default(),
            dependence: DependenceConfig::default(),
            delays: Delays::default(),
            exposure: Exposure::default(),
            report: ReportOptions::default(),
            calibration: CalibrationConfig::default(),
            bootstrap: BootstrapConfig::default(),
        }
    }
}

fn check_list(name: &str, v: &OneOrMany<f64>, ok: impl Fn(f64) -> bool, what: &str) -> Result<()> {
    let vals = v.values();
    if vals.is_empty() {
        return Err(CliError::Config(format!("{name}: list is empty")));
    }
    match vals.iter().find(|&&x| !ok(x)) {
        Some(x) => Err(CliError::Config(format!("{name}: {x} is not {what}"))),
        None => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64| x.is_finite();
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if self.valuation.t_years == 0 {
            return Err(CliError::Config("valuation.t_years must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.valuation.max_reject_share) {
            return Err(CliError::Config("valuation.max_reject_share must lie in [0, 1]".into()));
        }
        let r = &self.rates;
        for (name, v) in [("rates.alpha1_per_year", &r.alpha1_per_year), ("rates.alpha2_per_year", &r.alpha2_per_year), ("rates.beta2_per_year", &r.beta2_per_year)] {
            if let Some(v) = v {
                check_list(name, v, finite, "finite")?;
            }
        }
        check_list("rates.beta1_per_year", &r.beta1_per_year, finite, "finite")?;
        if !r.inflation_offset_years.is_finite() {
            return Err(CliError::Config("rates.inflation_offset_years must be finite".into()));
        }
        if self.simulation.n_sims == 0 {
            return Err(CliError::Config("simulation.n_sims must be at least 1".into()));
        }
        if self.simulation.threads == Some(0) {
            return Err(CliError::Config("simulation.threads must be at least 1".into()));
        }
        check_list("delays.reporting_multiplier", &self.delays.reporting_multiplier, positive, "positive")?;
        check_list("delays.settlement_multiplier", &self.delays.settlement_multiplier, positive, "positive")?;
        if let Some(t) = &self.delays.settlement_trend {
            t.validate().map_err(|e| CliError::Config(format!("delays.settlement_trend: {e}")))?;
        }
        let ex = &self.exposure;
        let trends = ex.occurrence_trend.values();
        if trends.is_empty() {
            return Err(CliError::Config("exposure.occurrence_trend: list is empty".into()));
        }
        for t in &trends {
            t.validate().map_err(|e| CliError::Config(format!("exposure.occurrence_trend: {e}")))?;
        }
        for (name, v) in [
            ("exposure.renewal_rate_per_unit_trend", ex.renewal_rate_per_unit_trend),
            ("exposure.horizon_years", ex.horizon_years),
            ("exposure.extension_years", ex.extension_years),
        ] {
            if !positive(v) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(p) = self.report.quantile_levels.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(CliError::Config(format!("report.quantile_levels: {p} is not in (0, 1)")));
        }
        if self.report.mixture_components > 8 {
            return Err(CliError::Config("report.mixture_components must be at most 8".into()));
        }
        if self.calibration.severity_components == 0 {
            return Err(CliError::Config("calibration.severity_components must be at least 1".into()));
        }
        if let DependenceConfig::FrankCopula { theta: Some(th) } = self.dependence {
            if !(th.is_finite() && th != 0.0) {
                return Err(CliError::Config(format!("dependence.theta must be finite and non-zero, got {th}")));
            }
        }
        Ok(())
    }

    /// Resolves the dependence mode against a calibrated copula parameter.
    pub fn dependence_mode(&self, fitted_theta: Option<f64>) -> Result<DependenceMode> {
        Ok(match self.dependence {
            DependenceConfig::FromModels => DependenceMode::FromModels,
            DependenceConfig::KappaCoupled => DependenceMode::KappaCoupled,
            DependenceConfig::Independent => DependenceMode::Independent,
            DependenceConfig::FrankCopula { theta } => {
                let theta = theta.or(fitted_theta).ok_or_else(|| {
                    CliError::Config("dependence: frank_copula needs `theta` when the bundle has no copula fit".into())
                })?;
                DependenceMode::FrankCopula { theta }
            }
        })
    }
}
