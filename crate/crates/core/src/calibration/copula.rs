use crate::distributions::{frank_tau, frank_theta_from_tau, FrankCopula};
use crate::error::{Error, Result};
use crate::stats::kendall_tau;
use serde::{Deserialize, Serialize};

const MIN_PAIRS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrankFit {
    /// `0` reports independence (sample tau exactly zero).
    pub theta: f64,
    pub theta_se: f64,
    pub tau: f64,
    pub tau_se: f64,
}

impl FrankFit {
    /// The fitted copula, or `None` at independence.
    pub fn copula(&self) -> Option<FrankCopula<f64>> {
        FrankCopula::new(self.theta).ok()
    }
}

/// Frank copula by inversion of Kendall's tau ("itau").
pub fn fit_frank_itau(x: &[f64], y: &[f64]) -> Result<FrankFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("pair columns differ in length".into()));
    }
    if x.len() < MIN_PAIRS {
        return Err(Error::InsufficientData { got: x.len(), need: MIN_PAIRS });
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::Precondition("a margin has a single distinct value".into()));
    }
    let kt = kendall_tau(x, y)?;
    if kt.tau.abs() >= 1.0 - 1e-12 {
        return Err(Error::InvalidParameter(format!("sample tau {} is ±1: theta is unbounded", kt.tau)));
    }
    let theta = frank_theta_from_tau(kt.tau)?.unwrap_or(0.0);
    // delta method through dτ/dθ
    let h = 1e-5 * theta.abs().max(1.0);
    let slope = (frank_tau(theta + h) - frank_tau(theta - h)) / (2.0 * h);
    Ok(FrankFit { theta, theta_se: kt.se / slope, tau: kt.tau, tau_se: kt.se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn comonotone_pairs_fail() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        assert!(fit_frank_itau(&x, &x).is_err());
    }

    #[test]
    fn round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for &theta in &[0.5, 1.413523, 5.0] {
            let c = FrankCopula::new(theta).unwrap();
            let (x, y): (Vec<f64>, Vec<f64>) = (0..20_000).map(|_| c.sample(&mut rng)).unzip();
            let f = fit_frank_itau(&x, &y).unwrap();
            assert!((f.theta - theta).abs() < 4.0 * f.theta_se, "{theta}: {f:?}");
        }
    }
}
