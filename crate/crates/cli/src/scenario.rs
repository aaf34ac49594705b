//! Scenario grid expansion and execution.

use crate::bundle::ModelBundle;
use crate::config::{ScenarioConfig, Simulation, Streams};
use crate::error::{CliError, Result};
use crate::ingest::RejectedRow;
use crate::report::{
    BootstrapSummary, Coordinates, DataSummary, ExposureSummary, InputDigest, MixtureSummary, MomentTables, ReportHeader,
    ReserveReport, ScenarioResult, SettlementProcess, SimulationSummary, Triangle,
};
use atrp_core::calibration::{fit_normal_mixture, ClaimRecord, SeverityFitOptions};
use atrp_core::distributions::PositiveDistribution;
use atrp_core::financial::FinancialAssumptions;
use atrp_core::montecarlo::{
    bootstrap_parameter_uncertainty, ibnr_proportions, simulate_exposure, simulate_rbns, simulate_trp_settlement,
    upr_proportions, BootstrapBase, DelayScale, DependenceMode, ExposureModels, ExposureSample, ParameterUncertainty,
    RbnsSample, SimConfig,
};
use atrp_core::reserving::{build_info_sets, ConditionalMoments, RbnsInfoSet, ReserveModels};
use atrp_core::riskmetrics::{risk_measures, LevelMeasure};
use atrp_core::TrendSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Exact conditional moments plus simulation of the RBNS reserve.
    Reserve,
    /// Simulation of the RBNS reserve only.
    Simulate,
    Ibnr,
    Upr,
    Bootstrap,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Reserve => "reserve",
            Self::Simulate => "simulate",
            Self::Ibnr => "ibnr",
            Self::Upr => "upr",
            Self::Bootstrap => "bootstrap",
        }
    }

    fn uses_exposure(self) -> bool {
        matches!(self, Self::Ibnr | Self::Upr)
    }
}

/// Data and models a scenario run works from.
#[derive(Debug, Clone)]
pub struct Inputs {
    /// Claims as known at the valuation time (see [`crate::ingest::observed_at`]).
    pub records: Option<Vec<ClaimRecord>>,
    pub rejected: Vec<RejectedRow>,
    pub bundle: ModelBundle,
    pub digests: Vec<InputDigest>,
}

/// One point of the scenario grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub coordinates: Coordinates,
}

/// Cartesian product of every list in the configuration, in a fixed order:
/// α₁, α₂, β₁, β₂, reporting and settlement multipliers, occurrence trend.
pub fn expand_grid(command: Command, cfg: &ScenarioConfig, bundle: &ModelBundle) -> Vec<GridPoint> {
    let r = &cfg.rates;
    let a1 = r.alpha1_per_year.as_ref().map_or(vec![bundle.alpha1_per_year], |v| v.values());
    let a2 = r.alpha2_per_year.as_ref().map_or(vec![bundle.alpha2_per_year], |v| v.values());
    let b1 = r.beta1_per_year.values();
    let b2: Vec<Option<f64>> = r.beta2_per_year.as_ref().map_or(vec![None], |v| v.values().into_iter().map(Some).collect());
    let exposure = command.uses_exposure();
    let mr = if exposure { cfg.delays.reporting_multiplier.values() } else { vec![1.0] };
    let ms = cfg.delays.settlement_multiplier.values();
    let trends: Vec<Option<TrendSpec>> =
        if exposure { cfg.exposure.occurrence_trend.values().into_iter().map(Some).collect() } else { vec![None] };
    let mut out = Vec::new();
    for &alpha1 in &a1 {
        for &alpha2 in &a2 {
            for &beta1 in &b1 {
                for &beta2 in &b2 {
                    for &m_r in &mr {
                        for &m_s in &ms {
                            for trend in &trends {
                                let index = out.len() + 1;
                                let seed = match cfg.simulation.streams {
                                    Streams::Common => cfg.simulation.seed,
                                    Streams::Independent => cfg.simulation.seed.wrapping_add(index as u64 - 1),
                                };
                                out.push(GridPoint {
                                    index,
                                    coordinates: Coordinates {
                                        alpha1_per_year: alpha1,
                                        alpha2_per_year: alpha2,
                                        beta1_per_year: beta1,
                                        beta2_per_year: beta2.unwrap_or(beta1),
                                        reporting_multiplier: m_r,
                                        settlement_multiplier: m_s,
                                        occurrence_trend: *trend,
                                        seed,
                                    },
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn financial(cfg: &ScenarioConfig, c: &Coordinates, valuation_time: f64) -> FinancialAssumptions<f64> {
    let mut fa = FinancialAssumptions::new(c.alpha1_per_year, c.alpha2_per_year, c.beta1_per_year, c.beta2_per_year, valuation_time);
    fa.mode = cfg.rates.inflation_mode;
    fa.inflation_offset = cfg.rates.inflation_offset_years;
    fa
}

fn sim_config(cfg: &ScenarioConfig, c: &Coordinates) -> SimConfig {
    SimConfig {
        n_sims: cfg.simulation.n_sims,
        seed: c.seed,
        threads: cfg.simulation.threads,
        horizon: cfg.exposure.horizon_years,
        extension: cfg.exposure.extension_years,
        dependence: DependenceMode::FromModels,
        delay_scale: DelayScale { reporting: c.reporting_multiplier, settlement: c.settlement_multiplier },
    }
}

fn sim_tables(t: usize, s: &RbnsSample) -> (Triangle, Triangle) {
    (
        Triangle::from_cells(t, s.cells.iter().map(|c| (c.i, c.j, c.mean))),
        Triangle::from_cells(t, s.cells.iter().map(|c| (c.i, c.j, c.sd))),
    )
}

fn summarize_simulation(
    cfg: &ScenarioConfig,
    t: usize,
    s: &RbnsSample,
    process: SettlementProcess,
    notes: &mut Vec<String>,
) -> Result<SimulationSummary> {
    let risk = risk_measures(&s.totals, &cfg.report.quantile_levels)?;
    let mixture = match cfg.report.mixture_components {
        0 => None,
        k => match fit_normal_mixture(&s.totals, k) {
            Ok(fit) => {
                let levels = cfg
                    .report
                    .quantile_levels
                    .iter()
                    .map(|&p| Ok(LevelMeasure { level: p, var: fit.var(p)?, tvar: fit.tvar(p)? }))
                    .collect::<atrp_core::Result<Vec<_>>>()?;
                Some(MixtureSummary { fit, levels })
            }
            Err(e) => {
                notes.push(format!("normal mixture not fitted: {e}"));
                None
            }
        },
    };
    let (cell_means, cell_sds) = sim_tables(t, s);
    Ok(SimulationSummary {
        settlement_process: process,
        standard_error: s.standard_error(),
        risk,
        cell_means,
        cell_sds,
        mixture,
        excluded: s.excluded.clone(),
        warnings: s.warnings.clone(),
    })
}

fn exact_moments(info: &RbnsInfoSet<f64>, models: &ReserveModels<f64>, fa: &FinancialAssumptions<f64>, m_s: f64) -> Result<MomentTables> {
    let mut scaled = models.clone();
    if m_s != 1.0 {
        scaled.settlement = scaled.settlement.scaled(m_s);
    }
    let s = ConditionalMoments::new(info, &scaled, fa)?.summary()?;
    let t = info.valuation_time;
    Ok(MomentTables {
        cell_means: Triangle::from_cells(t, s.cells.iter().map(|c| (c.i, c.j, c.mean))),
        cell_sds: Triangle::from_cells(t, s.cells.iter().map(|c| (c.i, c.j, c.sd))),
        year_means: s.year_means,
        total_mean: s.total_mean,
        total_sd: s.total_sd,
        cv: s.cv,
        excluded: s.excluded,
        warnings: s.warnings,
    })
}

fn exposure_summary(at_t: &ExposureSample, later: Option<&ExposureSample>, extension: f64) -> Result<ExposureSummary> {
    let mean_u = |v: &[u64]| v.iter().map(|&x| x as f64).sum::<f64>() / v.len().max(1) as f64;
    let mean_f = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    Ok(ExposureSummary {
        horizon_years: at_t.horizon,
        extension_years: later.map(|_| extension),
        ibnr: ibnr_proportions(at_t)?,
        upr: later.map(|l| upr_proportions(at_t, l)).transpose()?,
        mean_occurred_count: mean_u(&at_t.n_occ),
        mean_ibnr_count: mean_u(&at_t.n_tc),
        mean_occurred_cost: mean_f(&at_t.z_occ),
        mean_ibnr_cost: mean_f(&at_t.z_tc),
        saturated_paths: at_t.saturated_paths,
    })
}

fn run_point(
    command: Command,
    cfg: &ScenarioConfig,
    inputs: &Inputs,
    info: Option<&RbnsInfoSet<f64>>,
    dependence: DependenceMode,
    point: &GridPoint,
    notes: &mut Vec<String>,
) -> Result<ScenarioResult> {
    let c = &point.coordinates;
    let t = cfg.valuation.t_years;
    let models = dependence.apply(&inputs.bundle.models)?;
    let simcfg = sim_config(cfg, c);
    let mut result = ScenarioResult { index: point.index, coordinates: c.clone(), moments: None, simulation: None, exposure: None, bootstrap: None };
    match command {
        Command::Reserve | Command::Simulate => {
            let info = info.expect("checked by the caller");
            let fa = financial(cfg, c, t as f64);
            let trend = cfg.delays.settlement_trend;
            if command == Command::Reserve && trend.is_none() {
                result.moments = Some(exact_moments(info, &models, &fa, c.settlement_multiplier)?);
            }
            let (sample, process) = match &trend {
                None => (simulate_rbns(info, &models, &fa, &simcfg)?, SettlementProcess::Iid),
                Some(tr) => (
                    simulate_trp_settlement(info, tr, &models.settlement, &models, &fa, &simcfg, cfg.simulation.trp_sampler)?,
                    SettlementProcess::TrendRenewal,
                ),
            };
            result.simulation = Some(summarize_simulation(cfg, t, &sample, process, notes)?);
        }
        Command::Ibnr | Command::Upr => {
            let em = ExposureModels {
                trend: c.occurrence_trend.expect("exposure grid carries a trend"),
                renewal: PositiveDistribution::Exponential { rate: cfg.exposure.renewal_rate_per_unit_trend },
                reporting: inputs.bundle.reporting.clone(),
                settlement: models.settlement.clone(),
                indemnity: models.indemnity.clone(),
                expense: models.expense.clone(),
                dependence: models.dependence,
            };
            let fa = financial(cfg, c, cfg.exposure.horizon_years);
            let at_t = simulate_exposure(&em, &fa, &simcfg)?;
            let later = if command == Command::Upr {
                let mut ext = simcfg;
                ext.horizon = simcfg.horizon + simcfg.extension;
                Some(simulate_exposure(&em, &fa, &ext)?)
            } else {
                None
            };
            result.exposure = Some(exposure_summary(&at_t, later.as_ref(), cfg.exposure.extension_years)?);
        }
        Command::Bootstrap => {
            let info = info.expect("checked by the caller");
            let records = inputs.records.as_deref().expect("checked by the caller");
            let settlement_covariance = inputs.bundle.settlement_covariance.ok_or_else(|| {
                CliError::Config("bootstrap needs a bundle with a settlement-delay covariance (calibrate from data)".into())
            })?;
            let fa = financial(cfg, c, t as f64);
            let base = BootstrapBase {
                models: models.clone(),
                fa,
                settlement_covariance,
                alpha_variance: inputs.bundle.alpha_variance,
                severity_options: SeverityFitOptions {
                    // held at each base model's κ unless refit_kappa is set
                    kappa: cfg.calibration.kappa.mode(),
                    components: models.indemnity.components.len(),
                    classes: cfg.calibration.covariates,
                    tol: 1e-6,
                    covariance: false,
                    ..SeverityFitOptions::default()
                },
                refit_kappa: cfg.bootstrap.refit_kappa,
            };
            let uncertainty = ParameterUncertainty {
                settlement: cfg.bootstrap.settlement,
                inflation: cfg.bootstrap.inflation,
                resample_severities: cfg.bootstrap.resample_severities,
            };
            let boot = bootstrap_parameter_uncertainty(records, info, &base, &uncertainty, &simcfg)?;
            let plain = simulate_rbns(info, &base.models, &base.fa, &simcfg)?;
            result.bootstrap = Some(BootstrapSummary {
                uncertainty,
                risk: risk_measures(&boot.totals, &cfg.report.quantile_levels)?,
                baseline: risk_measures(&plain.totals, &cfg.report.quantile_levels)?,
                requested: boot.diagnostics.requested,
                failed: boot.diagnostics.failed,
                messages: boot.diagnostics.messages,
            });
        }
    }
    Ok(result)
}

/// Runs every grid point of `command` and assembles the report.
pub fn run_scenario(command: Command, cfg: &ScenarioConfig, inputs: &Inputs) -> Result<ReserveReport> {
    cfg.validate()?;
    let t = cfg.valuation.t_years;
    let mut diagnostics = Vec::new();
    let needs_claims = matches!(command, Command::Reserve | Command::Simulate | Command::Bootstrap);
    let info = match (&inputs.records, needs_claims) {
        (Some(recs), _) => {
            let reported: Vec<_> = recs.iter().map(ClaimRecord::to_reported).collect();
            Some(build_info_sets(&reported, t))
        }
        (None, true) => return Err(CliError::Config(format!("`{}` needs a claims file (--data)", command.name()))),
        (None, false) => None,
    };
    if !command.uses_exposure() {
        if cfg.delays.reporting_multiplier.values() != [1.0] {
            diagnostics.push(format!("delays.reporting_multiplier does not affect `{}` and was not expanded", command.name()));
        }
        if cfg.exposure.occurrence_trend.values().len() > 1 {
            diagnostics.push(format!("exposure.occurrence_trend does not affect `{}` and was not expanded", command.name()));
        }
    }
    if command == Command::Reserve && cfg.delays.settlement_trend.is_some() {
        diagnostics.push("exact moments assume iid settlement delays; only the simulation uses delays.settlement_trend".into());
    }
    let dependence = cfg.dependence_mode(inputs.bundle.theta())?;
    let data = match (&inputs.records, &info) {
        (Some(recs), Some(info)) => {
            Some(DataSummary { records: recs.len(), rejected: inputs.rejected.clone(), open_claims: info.counts(), info_sets: info.diagnostics.clone() })
        }
        _ => None,
    };
    let grid = expand_grid(command, cfg, &inputs.bundle);
    let mut scenarios = Vec::with_capacity(grid.len());
    let empty = info.as_ref().is_some_and(|i| i.total_claims() == 0) && needs_claims;
    if empty {
        diagnostics.push(format!("no claims are open at t = {t}: the RBNS reserve is zero"));
    }
    for point in &grid {
        if empty {
            scenarios.push(ScenarioResult { index: point.index, coordinates: point.coordinates.clone(), moments: None, simulation: None, exposure: None, bootstrap: None });
            continue;
        }
        let mut notes = Vec::new();
        let r = run_point(command, cfg, inputs, info.as_ref(), dependence, point, &mut notes)
            .map_err(|e| e.in_scenario(format!("{}: {}", point.index, point.coordinates)))?;
        diagnostics.extend(notes.into_iter().map(|n| format!("scenario {}: {n}", point.index)));
        scenarios.push(r);
    }
    Ok(ReserveReport {
        header: ReportHeader {
            tool: "atrp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.name().into(),
            seed: cfg.simulation.seed,
            n_sims: cfg.simulation.n_sims,
            streams: cfg.simulation.streams,
            inputs: inputs.digests.clone(),
            config: ScenarioConfig { simulation: Simulation { threads: None, ..cfg.simulation.clone() }, ..cfg.clone() },
        },
        data,
        bundle: inputs.bundle.clone(),
        scenarios,
        diagnostics,
    })
}
