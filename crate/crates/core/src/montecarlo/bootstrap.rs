use super::rbns::RbnsSimulator;
use super::{chunked, with_pool, SimConfig};
use crate::calibration::{fit_severity_em_from, severity_observations, ClaimRecord, KappaMode, SeverityFitOptions};
use crate::distributions::{GeneralizedGamma, PositiveDistribution};
use crate::error::{Error, Result};
use crate::financial::{FinancialAssumptions, PaymentType};
use crate::optimize::{covariance_factor, mvn_transform};
use crate::reserving::{RbnsInfoSet, ReserveModels};
use crate::rng::{stream, Role};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Fitted models and the asymptotic covariances of their estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBase {
    /// Settlement must be a generalized gamma when its parameters are perturbed.
    pub models: ReserveModels<f64>,
    pub fa: FinancialAssumptions<f64>,
    /// Covariance of the settlement-delay MLE `(a, b, c)`.
    pub settlement_covariance: [[f64; 3]; 3],
    /// Variances of the inflation estimates `(α₁, α₂)`.
    pub alpha_variance: [f64; 2],
    /// Options for the per-scenario severity refit; EM starts from the base
    /// severities.
    pub severity_options: SeverityFitOptions,
    /// Re-estimate `κ` in every refit with the mode in `severity_options`;
    /// otherwise `κ` stays at each base model's value.
    #[serde(default)]
    pub refit_kappa: bool,
}

/// Which sources of estimation error enter each scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterUncertainty {
    pub settlement: bool,
    pub inflation: bool,
    /// Deflate, resample the closed claims and refit the severities.
    pub resample_severities: bool,
}

impl ParameterUncertainty {
    pub fn full() -> Self {
        Self { settlement: true, inflation: true, resample_severities: true }
    }

    /// Degenerate uncertainty: every scenario uses the base models.
    pub fn none() -> Self {
        Self { settlement: false, inflation: false, resample_severities: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BootstrapDiagnostics {
    pub requested: usize,
    /// Scenarios dropped because a parameter draw was invalid or a refit failed.
    pub failed: usize,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSample {
    /// One reserve draw per retained scenario.
    pub totals: Vec<f64>,
    pub diagnostics: BootstrapDiagnostics,
}

impl BootstrapSample {
    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.totals)
    }

    pub fn sd(&self) -> f64 {
        crate::stats::variance(&self.totals).sqrt()
    }
}

/// Largest share of scenarios that may be dropped.
const MAX_FAILED_SHARE: f64 = 0.01;

/// Reserve distribution with parameter uncertainty.
///
/// For scenario `s`: draw the settlement parameters from the asymptotic
/// normal of their MLE (on the log scale), draw `(α₁, α₂)` from the quasi-likelihood normal,
/// deflate the closed claims with the drawn rates, resample them with
/// replacement and refit both severities by EM, then simulate one reserve
/// path (path index `s`) under the perturbed models. Scenarios whose draw is
/// invalid or whose refit fails are dropped and counted.
pub fn bootstrap_parameter_uncertainty(
    records: &[ClaimRecord],
    info: &RbnsInfoSet<f64>,
    base: &BootstrapBase,
    uncertainty: &ParameterUncertainty,
    cfg: &SimConfig,
) -> Result<BootstrapSample> {
    cfg.validate()?;
    let closed: Vec<ClaimRecord> = records.iter().filter(|r| r.is_closed()).copied().collect();
    if uncertainty.resample_severities && closed.is_empty() {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    let gg0 = match &base.models.settlement {
        PositiveDistribution::GeneralizedGamma(g) => Some(*g),
        _ => None,
    };
    if uncertainty.settlement && gg0.is_none() {
        return Err(Error::Unsupported("settlement uncertainty needs a generalized gamma settlement model".into()));
    }
    // draws are made on the log scale, with the delta-method covariance,
    // so that every perturbed parameter stays positive
    let theta0 = gg0.map_or([1.0; 3], |g| [g.a, g.b, g.c]);
    let log0: Vec<f64> = theta0.iter().map(|v| v.ln()).collect();
    let cov = DMatrix::from_fn(3, 3, |r, c| base.settlement_covariance[r][c] / (theta0[r] * theta0[c]));
    let factor = covariance_factor(&cov)
        .ok_or_else(|| Error::InvalidParameter("settlement covariance is not positive semidefinite".into()))?;
    for v in base.alpha_variance {
        if !(v >= 0.0) {
            return Err(Error::InvalidParameter(format!("inflation variance must be ≥ 0, got {v}")));
        }
    }
    let sev_opts = SeverityFitOptions { covariance: false, ..base.severity_options };
    // validate the base configuration once so systematic errors surface directly
    RbnsSimulator::new(info, &base.models, &base.fa, cfg)?;

    let scenario = |s: u64| -> std::result::Result<f64, String> {
        let mut rng = stream(cfg.seed, s, 0, Role::Parameters);
        let mut models = base.models.clone();
        let mut fa = base.fa;
        if uncertainty.settlement {
            let z: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let p: Vec<f64> = mvn_transform(&log0, &factor, &z).into_iter().map(f64::exp).collect();
            let gg = GeneralizedGamma::new(p[0], p[1], p[2]).map_err(|e| format!("settlement draw {p:?}: {e}"))?;
            models.settlement = PositiveDistribution::GeneralizedGamma(gg);
        }
        if uncertainty.inflation {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            fa.alpha1 += base.alpha_variance[0].sqrt() * z1;
            fa.alpha2 += base.alpha_variance[1].sqrt() * z2;
        }
        if uncertainty.resample_severities {
            let mut pick = stream(cfg.seed, s, 0, Role::Resample);
            let n = closed.len();
            let sample: Vec<ClaimRecord> = (0..n).map(|_| closed[pick.random_range(0..n)]).collect();
            let offset = fa.inflation_offset;
            let xs = severity_observations(&sample, PaymentType::Indemnity, fa.alpha1, offset);
            let ys = severity_observations(&sample, PaymentType::Expense, fa.alpha2, offset);
            let refit = |obs, start: &crate::distributions::SeverityModel<f64>, what: &str| {
                let kappa = if base.refit_kappa { sev_opts.kappa } else { KappaMode::Fixed { kappa: start.kappa } };
                let opts = SeverityFitOptions { seed: s, kappa, ..sev_opts };
                fit_severity_em_from(obs, &opts, start).map(|f| f.model).map_err(|e| format!("{what} refit: {e}"))
            };
            models.indemnity = refit(&xs, &base.models.indemnity, "indemnity")?;
            models.expense = refit(&ys, &base.models.expense, "expense")?;
        }
        let sim = RbnsSimulator::new(info, &models, &fa, cfg).map_err(|e| e.to_string())?;
        let mut cells = vec![0.0; info.valuation_time * info.valuation_time];
        Ok(sim.path(s, &mut cells))
    };
    let parts = with_pool(cfg.threads, || chunked(cfg.n_sims, |range| range.map(|s| scenario(s as u64)).collect::<Vec<_>>()))?;
    let mut totals = Vec::with_capacity(cfg.n_sims);
    let mut diagnostics = BootstrapDiagnostics { requested: cfg.n_sims, ..Default::default() };
    for r in parts.into_iter().flatten() {
        match r {
            Ok(v) => totals.push(v),
            Err(m) => {
                diagnostics.failed += 1;
                if diagnostics.messages.len() < 20 {
                    diagnostics.messages.push(m);
                }
            }
        }
    }
    if diagnostics.failed as f64 > MAX_FAILED_SHARE * cfg.n_sims as f64 {
        return Err(Error::NonConvergence {
            iterations: diagnostics.failed,
            message: format!(
                "{} of {} scenarios failed (limit {:.0}%): {}",
                diagnostics.failed,
                cfg.n_sims,
                100.0 * MAX_FAILED_SHARE,
                diagnostics.messages.first().cloned().unwrap_or_default()
            ),
            best_objective: f64::NAN,
        });
    }
    Ok(BootstrapSample { totals, diagnostics })
}
