use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

const MIN_RECORDS: usize = 50;
const MIN_SPAN_YEARS: f64 = 2.0;

/// Quasi-Poisson log-linear trend of payment amounts over calendar time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflationFit {
    /// Force of inflation per year.
    pub alpha: f64,
    /// Log mean amount at time 0.
    pub intercept: f64,
    pub alpha_se: f64,
    /// Covariance of `(intercept, alpha)`.
    pub covariance: [[f64; 2]; 2],
    /// Pearson dispersion estimate.
    pub dispersion: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits `E[amount] = exp(b₀ + α · time)` by iteratively reweighted least
/// squares with variance proportional to the mean; the covariance is the
/// Pearson-scaled inverse Fisher information.
pub fn fit_inflation(times: &[f64], amounts: &[f64]) -> Result<InflationFit> {
    let n = times.len();
    if n != amounts.len() {
        return Err(Error::InvalidParameter("times and amounts differ in length".into()));
    }
    if n < MIN_RECORDS {
        return Err(Error::InsufficientData { got: n, need: MIN_RECORDS });
    }
    if amounts.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("amounts must be non-negative and times finite".into()));
    }
    let (tmin, tmax) = times.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    if tmax - tmin < MIN_SPAN_YEARS {
        return Err(Error::Precondition(format!(
            "payment times span {:.3} years; at least {MIN_SPAN_YEARS} are needed",
            tmax - tmin
        )));
    }
    let total: f64 = amounts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Precondition("all amounts are zero".into()));
    }
    let tbar = times.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = times.iter().map(|t| t - tbar).collect();
    let (mut b0, mut b1) = ((total / n as f64).ln(), 0.0);
    let mut converged = false;
    let mut iterations = 0;
    loop {
        // Fisher scoring for the log link: information Σ μ x xᵀ, score Σ (y − μ) x
        let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
        let (mut g0, mut g1) = (0.0, 0.0);
        for k in 0..n {
            let mu = (b0 + b1 * x[k]).exp();
            s00 += mu;
            s01 += mu * x[k];
            s11 += mu * x[k] * x[k];
            g0 += amounts[k] - mu;
            g1 += (amounts[k] - mu) * x[k];
        }
        let det = s00 * s11 - s01 * s01;
        if !(det > 0.0) {
            return Err(Error::Precondition("degenerate design in the inflation regression".into()));
        }
        let d0 = (s11 * g0 - s01 * g1) / det;
        let d1 = (s00 * g1 - s01 * g0) / det;
        b0 += d0;
        b1 += d1;
        iterations += 1;
        if d0.abs() < 1e-12 * b0.abs().max(1.0) && d1.abs() < 1e-12 {
            converged = true;
        }
        if converged || iterations >= 200 {
            break;
        }
    }
    // information at the final estimate
    let (mut i00, mut i01, mut i11, mut pearson) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let mu = (b0 + b1 * x[k]).exp();
        i00 += mu;
        i01 += mu * x[k];
        i11 += mu * x[k] * x[k];
        pearson += (amounts[k] - mu) * (amounts[k] - mu) / mu;
    }
    let dispersion = pearson / (n - 2) as f64;
    let det = i00 * i11 - i01 * i01;
    // centred-time covariance, then mapped to the uncentred intercept
    let (c00, c01, c11) = (dispersion * i11 / det, -dispersion * i01 / det, dispersion * i00 / det);
    let v_int = c00 - 2.0 * tbar * c01 + tbar * tbar * c11;
    let c_int_alpha = c01 - tbar * c11;
    Ok(InflationFit {
        alpha: b1,
        intercept: b0 - b1 * tbar,
        alpha_se: c11.max(0.0).sqrt(),
        covariance: [[v_int, c_int_alpha], [c_int_alpha, c11]],
        dispersion,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_log_linear() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 1000.0 * (0.04 * t).exp()).collect();
        let f = fit_inflation(&t, &y).unwrap();
        assert!((f.alpha - 0.04).abs() < 1e-6);
        assert!((f.intercept - 1000f64.ln()).abs() < 1e-6);
        let flat = vec![5.0; 100];
        assert!(fit_inflation(&t, &flat).unwrap().alpha.abs() < 1e-10);
    }

    #[test]
    fn needs_two_years_of_spread() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        assert!(matches!(fit_inflation(&t, &vec![1.0; 100]), Err(Error::Precondition(_))));
    }
}
