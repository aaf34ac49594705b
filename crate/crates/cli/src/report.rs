//! Report model and emitters.
//!
//! JSON is the canonical form and round-trips exactly. CSV tables use the
//! run-off layout: row `i` is the reporting year, column `j` the development
//! year, and only the lower triangle `i + j ≥ t + 2` is filled. The text
//! form is for reading.

use crate::bundle::ModelBundle;
use crate::config::{ReportFormat, ScenarioConfig, Streams};
use crate::error::{CliError, Result};
use crate::ingest::RejectedRow;
use atrp_core::calibration::NormalMixtureFit;
use atrp_core::montecarlo::{ParameterUncertainty, Proportions};
use atrp_core::reserving::{ExcludedClaim, InfoSetDiagnostics};
use atrp_core::riskmetrics::{LevelMeasure, RiskSummary};
use atrp_core::TrendSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    /// File name without its directory, so reports do not depend on where
    /// the inputs live.
    pub name: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_bytes(role: &str, name: &str, bytes: &[u8]) -> Self {
        Self { role: role.into(), name: name.into(), sha256: hex::encode(Sha256::digest(bytes)) }
    }

    pub fn of_file(role: &str, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        Ok(Self::of_bytes(role, &name, &bytes))
    }
}

/// Everything needed to reproduce the numbers below it. Worker counts and
/// wall-clock times are deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub n_sims: usize,
    pub streams: Streams,
    pub inputs: Vec<InputDigest>,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub records: usize,
    pub rejected: Vec<RejectedRow>,
    /// Open claims per reporting year at the valuation time.
    pub open_claims: Vec<usize>,
    pub info_sets: InfoSetDiagnostics,
}

/// Grid coordinates of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub alpha1_per_year: f64,
    pub alpha2_per_year: f64,
    pub beta1_per_year: f64,
    pub beta2_per_year: f64,
    pub reporting_multiplier: f64,
    pub settlement_multiplier: f64,
    pub occurrence_trend: Option<TrendSpec>,
    pub seed: u64,
}

impl std::fmt::Display for Coordinates {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "alpha1={} alpha2={} beta1={} beta2={} m_r={} m_s={}",
            self.alpha1_per_year,
            self.alpha2_per_year,
            self.beta1_per_year,
            self.beta2_per_year,
            self.reporting_multiplier,
            self.settlement_multiplier
        )?;
        if let Some(t) = &self.occurrence_trend {
            write!(f, " trend={}", trend_label(t))?;
        }
        write!(f, " seed={}", self.seed)
    }
}

pub fn trend_label(t: &TrendSpec) -> String {
    match *t {
        TrendSpec::Constant { lambda } => format!("constant({lambda})"),
        TrendSpec::Power { gamma } => format!("power({gamma})"),
        TrendSpec::GammaMixture { p1, p2, alpha1, alpha2, lambda1, lambda2 } => {
            format!("gamma_mixture({p1};{p2};{alpha1};{alpha2};{lambda1};{lambda2})")
        }
    }
}

/// Lower-triangle table; `rows[i − 1][j − 1]` is `None` where `i + j ≤ t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub t: usize,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Triangle {
    pub fn from_cells(t: usize, cells: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<Vec<Option<f64>>> =
            (1..=t).map(|i| (1..=t).map(|j| (i + j >= t + 2).then_some(0.0)).collect()).collect();
        for (i, j, v) in cells {
            if (1..=t).contains(&i) && (1..=t).contains(&j) && i + j >= t + 2 {
                rows[i - 1][j - 1] = Some(v);
            }
        }
        Self { t, rows }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTables {
    pub cell_means: Triangle,
    pub cell_sds: Triangle,
    pub year_means: Vec<f64>,
    pub total_mean: f64,
    pub total_sd: f64,
    pub cv: f64,
    pub excluded: Vec<ExcludedClaim>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSummary {
    pub fit: NormalMixtureFit,
    pub levels: Vec<LevelMeasure<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettlementProcess {
    Iid,
    TrendRenewal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub settlement_process: SettlementProcess,
    pub risk: RiskSummary<f64>,
    pub standard_error: f64,
    pub cell_means: Triangle,
    pub cell_sds: Triangle,
    pub mixture: Option<MixtureSummary>,
    pub excluded: Vec<ExcludedClaim>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureSummary {
    pub horizon_years: f64,
    pub extension_years: Option<f64>,
    pub ibnr: Proportions,
    pub upr: Option<Proportions>,
    pub mean_occurred_count: f64,
    pub mean_ibnr_count: f64,
    pub mean_occurred_cost: f64,
    pub mean_ibnr_cost: f64,
    pub saturated_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub uncertainty: ParameterUncertainty,
    pub risk: RiskSummary<f64>,
    /// Same seed and paths with the parameters held at the base fit.
    pub baseline: RiskSummary<f64>,
    pub requested: usize,
    pub failed: usize,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub index: usize,
    pub coordinates: Coordinates,
    pub moments: Option<MomentTables>,
    pub simulation: Option<SimulationSummary>,
    pub exposure: Option<ExposureSummary>,
    pub bootstrap: Option<BootstrapSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReserveReport {
    pub header: ReportHeader,
    pub data: Option<DataSummary>,
    pub bundle: ModelBundle,
    pub scenarios: Vec<ScenarioResult>,
    pub diagnostics: Vec<String>,
}

impl ReserveReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("report: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn levels(&self) -> &[f64] {
        &self.header.config.report.quantile_levels
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Renders a triangle as CSV text.
pub fn triangle_csv(tri: &Triangle) -> String {
    let mut s = String::from("reporting_year");
    for j in 1..=tri.t {
        let _ = write!(s, ",dev_{j}");
    }
    s.push('\n');
    for (i, row) in tri.rows.iter().enumerate() {
        let _ = write!(s, "{}", i + 1);
        for v in row {
            let _ = write!(s, ",{}", opt(*v));
        }
        s.push('\n');
    }
    s
}

fn summary_csv(r: &ReserveReport) -> String {
    let levels = r.levels();
    let mut head = vec![
        "scenario", "alpha1_per_year", "alpha2_per_year", "beta1_per_year", "beta2_per_year", "reporting_multiplier",
        "settlement_multiplier", "occurrence_trend", "seed", "exact_mean", "exact_sd", "sim_mean", "sim_sd", "sim_cv",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    for p in levels {
        head.push(format!("var_{p}"));
        head.push(format!("tvar_{p}"));
    }
    for h in ["risk_capital", "ibnr_count", "ibnr_cost", "upr_count", "upr_cost", "bootstrap_mean", "bootstrap_sd", "bootstrap_failed"] {
        head.push(h.into());
    }
    let mut s = head.join(",");
    s.push('\n');
    for sc in &r.scenarios {
        let c = &sc.coordinates;
        let mut row = vec![
            sc.index.to_string(),
            num(c.alpha1_per_year),
            num(c.alpha2_per_year),
            num(c.beta1_per_year),
            num(c.beta2_per_year),
            num(c.reporting_multiplier),
            num(c.settlement_multiplier),
            c.occurrence_trend.as_ref().map(trend_label).unwrap_or_default(),
            c.seed.to_string(),
            opt(sc.moments.as_ref().map(|m| m.total_mean)),
            opt(sc.moments.as_ref().map(|m| m.total_sd)),
        ];
        let risk = sc.simulation.as_ref().map(|s| &s.risk);
        row.push(opt(risk.map(|r| r.mean)));
        row.push(opt(risk.map(|r| r.sd)));
        row.push(opt(risk.map(|r| r.cv)));
        for &p in levels {
            let l = risk.and_then(|r| r.at(p));
            row.push(opt(l.map(|l| l.var)));
            row.push(opt(l.map(|l| l.tvar)));
        }
        row.push(opt(risk.and_then(|r| r.risk_capital)));
        let ex = sc.exposure.as_ref();
        row.push(opt(ex.map(|e| e.ibnr.count_based)));
        row.push(opt(ex.map(|e| e.ibnr.cost_based)));
        row.push(opt(ex.and_then(|e| e.upr).map(|u| u.count_based)));
        row.push(opt(ex.and_then(|e| e.upr).map(|u| u.cost_based)));
        let b = sc.bootstrap.as_ref();
        row.push(opt(b.map(|b| b.risk.mean)));
        row.push(opt(b.map(|b| b.risk.sd)));
        row.push(b.map(|b| b.failed.to_string()).unwrap_or_default());
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn text_triangle(out: &mut String, title: &str, tri: &Triangle) {
    let _ = writeln!(out, "  {title}");
    let _ = write!(out, "  {:>8}", "year");
    for j in 1..=tri.t {
        let _ = write!(out, " {:>16}", format!("dev {j}"));
    }
    out.push('\n');
    for (i, row) in tri.rows.iter().enumerate() {
        let _ = write!(out, "  {:>8}", i + 1);
        for v in row {
            match v {
                Some(v) => {
                    let _ = write!(out, " {v:>16.2}");
                }
                None => {
                    let _ = write!(out, " {:>16}", ".");
                }
            }
        }
        out.push('\n');
    }
}

fn text_risk(out: &mut String, title: &str, r: &RiskSummary<f64>) {
    let _ = writeln!(out, "  {title}: n = {}, mean = {:.2}, sd = {:.2}, cv = {:.4}", r.n, r.mean, r.sd, r.cv);
    let _ = writeln!(out, "  {:>8} {:>18} {:>18}", "level", "VaR", "TVaR");
    for l in &r.levels {
        let _ = writeln!(out, "  {:>8} {:>18.2} {:>18.2}", l.level, l.var, l.tvar);
    }
    if let Some(rc) = r.risk_capital {
        let _ = writeln!(out, "  risk capital (TVaR 95% - TVaR 60%) = {rc:.2}");
    }
}

pub fn render_text(r: &ReserveReport) -> String {
    let h = &r.header;
    let mut out = String::new();
    let _ = writeln!(out, "{} {} — {}", h.tool, h.version, h.command);
    let streams = match h.streams {
        Streams::Common => "common",
        Streams::Independent => "independent",
    };
    let _ = writeln!(out, "seed {}, {} paths, {streams} random numbers across scenarios", h.seed, h.n_sims);
    let _ = writeln!(out, "valuation t = {} years", h.config.valuation.t_years);
    for i in &h.inputs {
        let _ = writeln!(out, "input {}: {} (sha256 {})", i.role, i.name, i.sha256);
    }
    if let Some(d) = &r.data {
        let _ = writeln!(out, "records: {} accepted, {} rejected; open claims by reporting year: {:?}", d.records, d.rejected.len(), d.open_claims);
    }
    let b = &r.bundle;
    let _ = writeln!(out, "model inflation: alpha1 = {:.6}, alpha2 = {:.6}; copula theta = {}", b.alpha1_per_year, b.alpha2_per_year, b.theta().map_or("n/a".into(), |t| format!("{t:.6}")));
    for sc in &r.scenarios {
        let _ = writeln!(out, "\nScenario {}: {}", sc.index, sc.coordinates);
        if let Some(m) = &sc.moments {
            text_triangle(&mut out, "Expected payments by cell (exact)", &m.cell_means);
            text_triangle(&mut out, "Standard deviation by cell (exact)", &m.cell_sds);
            let _ = writeln!(out, "  exact total: mean = {:.2}, sd = {:.2}, cv = {:.4}", m.total_mean, m.total_sd, m.cv);
            for w in &m.warnings {
                let _ = writeln!(out, "  warning: {w}");
            }
        }
        if let Some(s) = &sc.simulation {
            if sc.moments.is_none() {
                text_triangle(&mut out, "Expected payments by cell (simulated)", &s.cell_means);
            }
            text_risk(&mut out, "Simulated reserve", &s.risk);
            let _ = writeln!(out, "  standard error of the mean = {:.2}", s.standard_error);
            if let Some(mx) = &s.mixture {
                let _ = writeln!(out, "  normal mixture ({} components): mean = {:.2}, sd = {:.2}", mx.fit.weights.len(), mx.fit.mean(), mx.fit.sd());
                for l in &mx.levels {
                    let _ = writeln!(out, "  {:>8} {:>18.2} {:>18.2}", l.level, l.var, l.tvar);
                }
            }
            if !s.excluded.is_empty() {
                let _ = writeln!(out, "  excluded claims: {}", s.excluded.len());
            }
        }
        if let Some(e) = &sc.exposure {
            let _ = writeln!(out, "  horizon {} years: IBNR share count = {:.6}, cost = {:.6}", e.horizon_years, e.ibnr.count_based, e.ibnr.cost_based);
            if let (Some(u), Some(h)) = (e.upr, e.extension_years) {
                let _ = writeln!(out, "  extension {h} years: UPR share count = {:.6}, cost = {:.6}", u.count_based, u.cost_based);
            }
            let _ = writeln!(out, "  mean occurred claims = {:.4}, of which IBNR = {:.4}", e.mean_occurred_count, e.mean_ibnr_count);
            if e.saturated_paths > 0 {
                let _ = writeln!(out, "  saturated paths: {}", e.saturated_paths);
            }
        }
        if let Some(bs) = &sc.bootstrap {
            text_risk(&mut out, "With parameter uncertainty", &bs.risk);
            text_risk(&mut out, "Parameters fixed", &bs.baseline);
            let _ = writeln!(out, "  failed scenarios: {} of {}", bs.failed, bs.requested);
        }
    }
    if !r.diagnostics.is_empty() {
        out.push_str("\nDiagnostics\n");
        for d in &r.diagnostics {
            let _ = writeln!(out, "  {d}");
        }
    }
    out
}

fn write_file(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes the report in the requested format into `dir`; returns the files.
pub fn emit_report(r: &ReserveReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => write_file(dir, "report.json", &r.to_json(), &mut written)?,
        ReportFormat::Text => write_file(dir, "report.txt", &render_text(r), &mut written)?,
        ReportFormat::CsvTables => {
            write_file(dir, "summary.csv", &summary_csv(r), &mut written)?;
            for sc in &r.scenarios {
                let k = sc.index;
                if let Some(m) = &sc.moments {
                    write_file(dir, &format!("scenario_{k:03}_exact_cell_means.csv"), &triangle_csv(&m.cell_means), &mut written)?;
                    write_file(dir, &format!("scenario_{k:03}_exact_cell_sds.csv"), &triangle_csv(&m.cell_sds), &mut written)?;
                }
                if let Some(s) = &sc.simulation {
                    write_file(dir, &format!("scenario_{k:03}_sim_cell_means.csv"), &triangle_csv(&s.cell_means), &mut written)?;
                    write_file(dir, &format!("scenario_{k:03}_sim_cell_sds.csv"), &triangle_csv(&s.cell_sds), &mut written)?;
                }
            }
        }
    }
    Ok(written)
}
