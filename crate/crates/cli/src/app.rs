//! Command-line surface.

use crate::bundle::{calibrate, ModelBundle};
use crate::config::{ReportFormat, ScenarioConfig};
use crate::error::{CliError, Result};
use crate::ingest::{ingest_claims, observed_at, write_claims, IngestOptions};
use crate::report::{emit_report, InputDigest, ReserveReport};
use crate::scenario::{run_scenario, Command, Inputs};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "atrp", version, about = "Micro-level loss reserving with the conditional aggregate trend renewal process")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Scenario configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `simulation.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `simulation.n_sims`.
    #[arg(long, global = true)]
    pub sims: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "atrp-out")]
    pub out: PathBuf,
    /// Claims file (CSV).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Saved model bundle; calibrates from `--data` when absent.
    #[arg(long, global = true)]
    pub bundle: Option<PathBuf>,
    /// Use the built-in reference models instead of calibrating.
    #[arg(long, global = true)]
    pub reference_models: bool,
    /// Report formats; defaults to `report.formats` from the configuration.
    #[arg(long, global = true, value_enum)]
    pub format: Vec<FormatArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    Text,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::CsvTables,
            FormatArg::Text => ReportFormat::Text,
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Cmd {
    /// Fit the models to a claims file and save a bundle.
    Calibrate,
    /// Exact moments and simulated distribution of the RBNS reserve.
    Reserve,
    /// Simulated distribution of the RBNS reserve.
    Simulate,
    /// IBNR proportions at the exposure horizon.
    Ibnr,
    /// IBNR and unearned-premium proportions.
    Upr,
    /// Reserve distribution with parameter uncertainty.
    Bootstrap,
    /// Re-render a saved JSON report.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write a synthetic claims file drawn from the reference models.
    Generate {
        #[arg(long, default_value_t = 300)]
        claims: usize,
        /// Occurrences are uniform over this many years.
        #[arg(long, default_value_t = 4.0)]
        span_years: f64,
    },
}

/// Loads the configuration and applies command-line overrides.
pub fn load_config(common: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.simulation.seed = s;
    }
    if let Some(n) = common.sims {
        cfg.simulation.n_sims = n;
    }
    if common.threads.is_some() {
        cfg.simulation.threads = common.threads;
    }
    if !common.format.is_empty() {
        cfg.report.formats = common.format.iter().map(|&f| f.into()).collect();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ingest_options(cfg: &ScenarioConfig) -> IngestOptions {
    IngestOptions { origin: cfg.valuation.origin_date, max_reject_share: cfg.valuation.max_reject_share }
}

/// Reads the claims file and bundle (calibrating when needed).
pub fn gather_inputs(common: &Common, cfg: &ScenarioConfig) -> Result<Inputs> {
    let t = cfg.valuation.t_years;
    let mut digests = Vec::new();
    if let Some(p) = &common.config {
        digests.push(InputDigest::of_file("config", p)?);
    }
    let (records, rejected) = match &common.data {
        Some(p) => {
            digests.push(InputDigest::of_file("data", p)?);
            let ing = ingest_claims(p, &ingest_options(cfg))?;
            (Some(observed_at(&ing.records, t as f64)), ing.rejected)
        }
        None => (None, Vec::new()),
    };
    let bundle = match (&common.bundle, &records) {
        (Some(p), _) => {
            digests.push(InputDigest::of_file("bundle", p)?);
            ModelBundle::load(p)?
        }
        (None, _) if common.reference_models => ModelBundle::reference(),
        (None, Some(recs)) => calibrate(recs, t, &cfg.calibration)?,
        (None, None) => {
            return Err(CliError::Config("no models: pass --bundle, --data or --reference-models".into()));
        }
    };
    Ok(Inputs { records, rejected, bundle, digests })
}

fn emit_all(report: &ReserveReport, formats: &[ReportFormat], out: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for &f in formats {
        files.extend(emit_report(report, f, out)?);
    }
    Ok(files)
}

/// Executes a parsed command line; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let common = &cli.common;
    let cfg = load_config(common)?;
    let out = &common.out;
    let command = match &cli.command {
        Cmd::Calibrate => {
            let path = common.data.as_ref().ok_or_else(|| CliError::Config("`calibrate` needs --data".into()))?;
            let ing = ingest_claims(path, &ingest_options(&cfg))?;
            let t = cfg.valuation.t_years;
            let bundle = calibrate(&observed_at(&ing.records, t as f64), t, &cfg.calibration)?;
            std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
            let file = out.join("bundle.json");
            bundle.save(&file)?;
            return Ok(vec![file]);
        }
        Cmd::Report { input } => {
            let report = ReserveReport::load(input)?;
            let formats = if common.format.is_empty() { report.header.config.report.formats.clone() } else { cfg.report.formats.clone() };
            return emit_all(&report, &formats, out);
        }
        Cmd::Generate { claims, span_years } => {
            if !(span_years.is_finite() && *span_years > 0.0) {
                return Err(CliError::Config(format!("--span-years must be positive, got {span_years}")));
            }
            let recs = atrp_core::fixtures::synthetic_records(*claims, *span_years, cfg.simulation.seed);
            let seen = observed_at(&recs, cfg.valuation.t_years as f64);
            std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
            let file = out.join("claims.csv");
            let f = std::fs::File::create(&file).map_err(|e| CliError::io(&file, e))?;
            write_claims(&seen, cfg.valuation.origin_date, std::io::BufWriter::new(f))?;
            return Ok(vec![file]);
        }
        Cmd::Reserve => Command::Reserve,
        Cmd::Simulate => Command::Simulate,
        Cmd::Ibnr => Command::Ibnr,
        Cmd::Upr => Command::Upr,
        Cmd::Bootstrap => Command::Bootstrap,
    };
    let inputs = gather_inputs(common, &cfg)?;
    let report = run_scenario(command, &cfg, &inputs)?;
    emit_all(&report, &cfg.report.formats, out)
}
