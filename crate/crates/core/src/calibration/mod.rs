//! Parameter estimation from claim-level records.

mod copula;
mod delay;
mod inflation;
mod mixture;
mod records;
mod severity;

pub use copula::{fit_frank_itau, FrankFit};
pub use delay::fit_generalized_gamma;
pub use inflation::{fit_inflation, InflationFit};
pub use mixture::{fit_normal_mixture, NormalMixtureFit};
pub use records::{payments, severity_observations, ClaimRecord, SeverityObservation};
pub use severity::{fit_severity_em, fit_severity_em_from, KappaMode, SeverityFit, SeverityFitOptions};

pub use crate::riskmetrics::{heterogeneity_stats, inverse_variance_weights};

use crate::optimize::spd_inverse;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Likelihood, convergence and asymptotic covariance of a fit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub parameter_names: Vec<String>,
    pub estimates: Vec<f64>,
    /// Row-major asymptotic covariance of `estimates`.
    pub covariance: Vec<Vec<f64>>,
    pub aic: f64,
    pub bic: f64,
    pub restarts: usize,
}

impl FitDiagnostics {
    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.covariance.len()).map(|i| self.covariance[i][i].max(0.0).sqrt()).collect()
    }

    pub fn standard_error(&self, name: &str) -> Option<f64> {
        let i = self.parameter_names.iter().position(|n| n == name)?;
        Some(self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.covariance.len();
        DMatrix::from_fn(n, n, |r, c| self.covariance[r][c])
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

/// Inverse observed information, or NaNs when the Hessian is not positive
/// definite.
fn covariance_from_hessian(neg_ll_hessian: &DMatrix<f64>) -> Vec<Vec<f64>> {
    match spd_inverse(neg_ll_hessian) {
        Some(c) => matrix_rows(&c),
        None => vec![vec![f64::NAN; neg_ll_hessian.ncols()]; neg_ll_hessian.nrows()],
    }
}

fn information_criteria(ll: f64, k: usize, n: usize) -> (f64, f64) {
    (2.0 * k as f64 - 2.0 * ll, k as f64 * (n as f64).ln() - 2.0 * ll)
}
