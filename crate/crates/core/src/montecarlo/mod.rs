//! Reproducible simulation of reserves, exposure processes and parameter
//! uncertainty.
//!
//! Every variate is drawn from a stream keyed by `(seed, path, item, role)`
//! (see [`crate::rng`]), and per-path results are combined in fixed-size
//! chunks merged in index order. Outputs are therefore bit-identical for a
//! given seed whatever the worker count.

mod bootstrap;
mod exposure;
mod rbns;
mod trp_settlement;

pub use bootstrap::{bootstrap_parameter_uncertainty, BootstrapBase, BootstrapDiagnostics, BootstrapSample, ParameterUncertainty};
pub use exposure::{ibnr_proportions, simulate_exposure, upr_proportions, ExposureModels, ExposureSample, Proportions};
pub use rbns::{simulate_rbns, CellStats, RbnsSample, RbnsSimulator};
pub use trp_settlement::{simulate_trp_settlement, TrpSampler, REJECTION_BUDGET};

use crate::distributions::{Dependence, FrankCopula};
use crate::error::{Error, Result};
use crate::reserving::ReserveModels;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Paths per accumulation chunk; fixed so that merge order never depends on
/// the thread pool.
pub const CHUNK: usize = 4096;

/// Dependence between indemnity and expense used by a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DependenceMode {
    /// Use the models exactly as given.
    #[default]
    FromModels,
    /// Keep the delay coupling `κ`, no copula.
    KappaCoupled,
    /// `κ = 0` and no copula: severities independent of each other and of `ζ`.
    Independent,
    /// `κ = 0` with a Frank copula between the unshifted severities.
    FrankCopula { theta: f64 },
}

impl DependenceMode {
    pub fn apply(&self, models: &ReserveModels<f64>) -> Result<ReserveModels<f64>> {
        let mut m = models.clone();
        match *self {
            Self::FromModels => {}
            Self::KappaCoupled => m.dependence = Dependence::Coupled,
            Self::Independent => {
                m.indemnity.kappa = 0.0;
                m.expense.kappa = 0.0;
                m.dependence = Dependence::Coupled;
            }
            Self::FrankCopula { theta } => {
                m.indemnity.kappa = 0.0;
                m.expense.kappa = 0.0;
                m.dependence = Dependence::Frank(FrankCopula::new(theta)?);
            }
        }
        Ok(m)
    }
}

/// Multipliers on the reporting and settlement delay scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayScale {
    pub reporting: f64,
    pub settlement: f64,
}

impl Default for DelayScale {
    fn default() -> Self {
        Self { reporting: 1.0, settlement: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_sims: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Never changes results.
    pub threads: Option<usize>,
    /// Exposure horizon `t` in years.
    pub horizon: f64,
    /// Extension `h` in years for unearned-premium projections.
    pub extension: f64,
    pub dependence: DependenceMode,
    pub delay_scale: DelayScale,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_sims: 100_000,
            seed: 0,
            threads: None,
            horizon: 1.0,
            extension: 0.5,
            dependence: DependenceMode::FromModels,
            delay_scale: DelayScale::default(),
        }
    }
}

impl SimConfig {
    pub fn new(n_sims: usize, seed: u64) -> Self {
        Self { n_sims, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sims == 0 {
            return Err(Error::InvalidParameter("n_sims must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        let DelayScale { reporting, settlement } = self.delay_scale;
        if !(reporting > 0.0 && reporting.is_finite() && settlement > 0.0 && settlement.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delay multipliers must be positive, got reporting {reporting}, settlement {settlement}"
            )));
        }
        Ok(())
    }
}

/// Runs `f` on a pool of the requested size (or the global pool).
pub(crate) fn with_pool<R: Send, F: FnOnce() -> R + Send>(threads: Option<usize>, f: F) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot build a pool of {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Evaluates `chunk(range)` for consecutive ranges of `CHUNK` paths in
/// parallel and returns the chunk results in path order.
pub(crate) fn chunked<R, F>(n: usize, chunk: F) -> Vec<R>
where
    R: Send,
    F: Fn(std::ops::Range<usize>) -> R + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| chunk(c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect()
}

/// Runs `chunked` and fails on the first (lowest-index) error.
pub(crate) fn try_chunked<R, F>(n: usize, chunk: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(std::ops::Range<usize>) -> Result<R> + Sync,
{
    chunked(n, chunk).into_iter().collect()
}
