//! Versioned model bundle: fitted parameters saved by `calibrate` and read
//! back by every scenario command.

use crate::config::CalibrationConfig;
use crate::error::{CliError, Result};
use atrp_core::calibration::{
    fit_frank_itau, fit_generalized_gamma, fit_inflation, fit_severity_em, payments, severity_observations, ClaimRecord,
    FitDiagnostics, FrankFit, SeverityFitOptions,
};
use atrp_core::distributions::{Dependence, PositiveDistribution};
use atrp_core::financial::PaymentType;
use atrp_core::fixtures as fx;
use atrp_core::reserving::ReserveModels;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const BUNDLE_FORMAT: &str = "atrp-model-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub name: String,
    pub estimate: f64,
    /// Absent when the information matrix was singular or not computed.
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub name: String,
    pub n: usize,
    pub log_likelihood: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub parameters: Vec<ParameterEstimate>,
}

impl FitSummary {
    fn from_diagnostics(name: &str, n: usize, d: &FitDiagnostics) -> Self {
        let se = d.standard_errors();
        Self {
            name: name.into(),
            n,
            log_likelihood: Some(d.log_likelihood).filter(|v| v.is_finite()),
            converged: d.converged,
            iterations: d.iterations,
            parameters: d
                .parameter_names
                .iter()
                .zip(&d.estimates)
                .enumerate()
                .map(|(k, (p, &estimate))| ParameterEstimate {
                    name: p.clone(),
                    estimate,
                    se: se.get(k).copied().filter(|v| v.is_finite() && *v >= 0.0),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DataCounts {
    pub records: usize,
    pub reported: usize,
    pub closed: usize,
    pub open: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    /// Valuation time the parameters were estimated at, years.
    pub valuation_years: usize,
    /// Settlement delay, severities and their dependence.
    pub models: ReserveModels<f64>,
    /// Reporting delay, years.
    pub reporting: PositiveDistribution<f64>,
    pub alpha1_per_year: f64,
    pub alpha2_per_year: f64,
    /// Sampling variances of the two inflation rates.
    pub alpha_variance: [f64; 2],
    /// Covariance of the generalized-gamma `(a, b, c)` estimates.
    pub settlement_covariance: Option<[[f64; 3]; 3]>,
    /// Frank copula fitted to deflated positive indemnity/expense pairs.
    pub copula: Option<FrankFit>,
    pub fits: Vec<FitSummary>,
    pub counts: DataCounts,
}

impl ModelBundle {
    /// The reference models shipped with the engine.
    pub fn reference() -> Self {
        Self {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            valuation_years: fx::PORTFOLIO_VALUATION,
            models: fx::reserve_models(),
            reporting: fx::reporting_delay(),
            alpha1_per_year: fx::ALPHA_INDEMNITY,
            alpha2_per_year: fx::ALPHA_EXPENSE,
            alpha_variance: [0.0, 0.0],
            settlement_covariance: None,
            copula: Some(FrankFit { theta: fx::FRANK_THETA, theta_se: 0.0, tau: atrp_core::distributions::frank_tau(fx::FRANK_THETA), tau_se: 0.0 }),
            fits: Vec::new(),
            counts: DataCounts::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // check the envelope first so that old or foreign files fail clearly
        #[derive(Deserialize)]
        struct Envelope {
            format: String,
            version: u32,
        }
        let env: Envelope = serde_json::from_str(text).map_err(|e| CliError::Bundle(e.to_string()))?;
        if env.format != BUNDLE_FORMAT {
            return Err(CliError::Bundle(format!("format {:?} is not {BUNDLE_FORMAT:?}", env.format)));
        }
        if env.version != BUNDLE_VERSION {
            return Err(CliError::Bundle(format!("version {} is not supported (expected {BUNDLE_VERSION})", env.version)));
        }
        let b: Self = serde_json::from_str(text).map_err(|e| CliError::Bundle(e.to_string()))?;
        b.models.validate().map_err(|e| CliError::Bundle(e.to_string()))?;
        b.reporting.validate().map_err(|e| CliError::Bundle(e.to_string()))?;
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn theta(&self) -> Option<f64> {
        self.copula.map(|c| c.theta)
    }
}

/// Fits every model component from the claims observed at valuation time `t`.
///
/// Delays, inflation and severities use the claims settled by `t`; the
/// reporting delay uses every claim reported by `t`.
pub fn calibrate(observed: &[ClaimRecord], t: usize, opts: &CalibrationConfig) -> Result<ModelBundle> {
    let tt = t as f64;
    let reported: Vec<&ClaimRecord> = observed.iter().filter(|r| r.report <= tt).collect();
    let closed: Vec<ClaimRecord> = reported.iter().filter(|r| r.settlement.is_some_and(|s| s <= tt)).map(|r| **r).collect();
    let counts = DataCounts { records: observed.len(), reported: reported.len(), closed: closed.len(), open: reported.len() - closed.len() };
    if reported.is_empty() {
        return Err(atrp_core::Error::InsufficientData { got: 0, need: 1 }.into());
    }

    let mean_report = reported.iter().map(|r| r.reporting_delay()).sum::<f64>() / reported.len() as f64;
    if !(mean_report > 0.0) {
        return Err(CliError::Input("every reporting delay is zero".into()));
    }
    let reporting = PositiveDistribution::Exponential { rate: 1.0 / mean_report };

    let delays: Vec<f64> = closed.iter().filter_map(|r| r.settlement_delay()).collect();
    let (gg, gg_diag) = fit_generalized_gamma(&delays)?;
    let cov = gg_diag.covariance_matrix();
    let mut settlement_covariance = [[0.0; 3]; 3];
    let mut cov_ok = cov.nrows() == 3 && cov.ncols() == 3;
    for (r, row) in settlement_covariance.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            if cov_ok {
                *v = cov[(r, c)];
                cov_ok &= v.is_finite();
            }
        }
    }

    let mut fits = vec![FitSummary::from_diagnostics("settlement", delays.len(), &gg_diag)];
    let mut alpha = [0.0; 2];
    let mut alpha_variance = [0.0; 2];
    for (k, kind) in [PaymentType::Indemnity, PaymentType::Expense].into_iter().enumerate() {
        let (times, amounts) = payments(&closed, kind);
        let f = fit_inflation(&times, &amounts)?;
        alpha[k] = f.alpha;
        alpha_variance[k] = if f.alpha_se.is_finite() { f.alpha_se * f.alpha_se } else { 0.0 };
        fits.push(FitSummary {
            name: format!("inflation_{}", kind_name(kind)),
            n: times.len(),
            log_likelihood: None,
            converged: f.converged,
            iterations: f.iterations,
            parameters: vec![
                ParameterEstimate { name: "alpha".into(), estimate: f.alpha, se: Some(f.alpha_se).filter(|v| v.is_finite()) },
                ParameterEstimate { name: "intercept".into(), estimate: f.intercept, se: None },
                ParameterEstimate { name: "dispersion".into(), estimate: f.dispersion, se: None },
            ],
        });
    }

    let sev_opts = SeverityFitOptions {
        kappa: opts.kappa.mode(),
        components: opts.severity_components,
        classes: opts.covariates,
        seed: opts.seed,
        ..SeverityFitOptions::default()
    };
    let mut severities = Vec::new();
    let mut deflated = Vec::new();
    for (k, kind) in [PaymentType::Indemnity, PaymentType::Expense].into_iter().enumerate() {
        let obs = severity_observations(&closed, kind, alpha[k], 0.0);
        let fit = fit_severity_em(&obs, &sev_opts)?;
        fits.push(FitSummary::from_diagnostics(&format!("severity_{}", kind_name(kind)), obs.len(), &fit.diagnostics));
        deflated.push(obs.iter().map(|o| o.amount).collect::<Vec<_>>());
        severities.push(fit.model);
    }
    let expense = severities.pop().expect("two fits");
    let indemnity = severities.pop().expect("two fits");

    let (x, y): (Vec<f64>, Vec<f64>) =
        deflated[0].iter().zip(&deflated[1]).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (*a, *b)).unzip();
    let copula = if x.len() >= opts.min_copula_pairs { fit_frank_itau(&x, &y).ok() } else { None };

    let models = ReserveModels { settlement: PositiveDistribution::GeneralizedGamma(gg), indemnity, expense, dependence: Dependence::Coupled };
    models.validate()?;
    Ok(ModelBundle {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        valuation_years: t,
        models,
        reporting,
        alpha1_per_year: alpha[0],
        alpha2_per_year: alpha[1],
        alpha_variance,
        settlement_covariance: cov_ok.then_some(settlement_covariance),
        copula,
        fits,
        counts,
    })
}

fn kind_name(kind: PaymentType) -> &'static str {
    match kind {
        PaymentType::Indemnity => "indemnity",
        PaymentType::Expense => "expense",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_bundle_round_trips() {
        let b = ModelBundle::reference();
        assert_eq!(ModelBundle::from_json(&b.to_json()).unwrap(), b);
    }

    #[test]
    fn foreign_versions_are_refused() {
        let text = ModelBundle::reference().to_json().replace("\"version\": 1", "\"version\": 99");
        assert!(matches!(ModelBundle::from_json(&text), Err(CliError::Bundle(_))));
        assert!(ModelBundle::from_json("{\"format\": \"x\", \"version\": 1}").is_err());
    }

    #[test]
    fn calibration_recovers_rough_reference_values() {
        let recs = fx::synthetic_records(1_500, 10.0, 3);
        let opts = CalibrationConfig { kappa: crate::config::KappaSetting::Fixed(fx::KAPPA_INDEMNITY), ..Default::default() };
        let b = calibrate(&recs, 30, &opts).unwrap();
        assert_eq!(b.counts.closed, 1_500);
        let mean_report = 1.0 / match b.reporting {
            PositiveDistribution::Exponential { rate } => rate,
            _ => unreachable!(),
        };
        assert!((mean_report - fx::REPORTING_MEAN).abs() < 0.15);
        assert!(b.settlement_covariance.is_some());
        assert!(b.copula.is_some());
        assert!((b.alpha1_per_year - fx::ALPHA_INDEMNITY).abs() < 0.1);
    }
}
