use crate::error::{Error, Result};
use crate::optimize::brent_root;
use crate::real::Real;
use crate::rng::open_unit;
use crate::special::debye1;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Frank copula `C(u,v) = −(1/θ) ln{1 + (e^{−θu}−1)(e^{−θv}−1)/(e^{−θ}−1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrankCopula<T> {
    pub theta: T,
}

impl<T: Real> FrankCopula<T> {
    pub fn new(theta: T) -> Result<Self> {
        if theta == T::zero() || !theta.is_finite() {
            return Err(Error::InvalidParameter(format!("Frank theta must be finite and non-zero, got {theta}")));
        }
        Ok(Self { theta })
    }

    pub fn cdf(&self, u: T, v: T) -> T {
        let t = self.theta;
        let num = (-t * u).exp_m1() * (-t * v).exp_m1();
        -(num / (-t).exp_m1()).ln_1p() / t
    }

    /// `C(u,v) − uv`, given both arguments and their complements.
    ///
    /// Near the upper corner the direct difference cancels; Frank is
    /// radially symmetric, and flipping one argument maps `C_θ` to `C_{−θ}`,
    /// so the gap is always evaluated at the small arguments.
    pub fn excess(&self, u: T, u_bar: T, v: T, v_bar: T) -> T {
        let half = T::lit(0.5);
        let t = self.theta;
        match (u > half, v > half) {
            (false, false) => frank_gap(t, u, v),
            (true, true) => frank_gap(t, u_bar, v_bar),
            (true, false) => -frank_gap(-t, u_bar, v),
            (false, true) => -frank_gap(-t, u, v_bar),
        }
    }

    pub fn density(&self, u: T, v: T) -> T {
        let t = self.theta;
        let em = (-t).exp_m1();
        let a = (-t * u).exp_m1();
        let b = (-t * v).exp_m1();
        let den = em + a * b;
        -t * em * (-t * (u + v)).exp() / (den * den)
    }

    /// Solves `∂C/∂u (u, v) = w` for `v`.
    pub fn conditional_inverse(&self, u: T, w: T) -> T {
        let t = self.theta;
        let one = T::one();
        let num = w * (-t).exp_m1();
        let den = w + (one - w) * (-t * u).exp();
        let v = -(num / den).ln_1p() / t;
        v.max(T::zero()).min(one)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (T, T) {
        let u = T::lit(open_unit(rng));
        let w = T::lit(open_unit(rng));
        (u, self.conditional_inverse(u, w))
    }

    pub fn tau(&self) -> T {
        T::lit(frank_tau(self.theta.to_f64_lossy()))
    }
}

fn frank_gap<T: Real>(t: T, a: T, b: T) -> T {
    let num = (-t * a).exp_m1() * (-t * b).exp_m1();
    -(num / (-t).exp_m1()).ln_1p() / t - a * b
}

/// Kendall's tau of the Frank family, `1 − (4/θ)(1 − D₁(θ))`.
pub fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-4 {
        return theta / 9.0 - theta.powi(3) / 900.0;
    }
    1.0 - 4.0 / theta * (1.0 - debye1(theta))
}

/// Inverts `frank_tau`. Returns `None` for `τ = 0`, the independence limit.
pub fn frank_theta_from_tau(tau: f64) -> Result<Option<f64>> {
    if !(tau.abs() < 1.0) {
        return Err(Error::Domain(format!("Kendall tau must lie in (−1, 1), got {tau}")));
    }
    if tau == 0.0 {
        return Ok(None);
    }
    let sign = tau.signum();
    let target = tau.abs();
    let mut hi = 1.0;
    while frank_tau(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Domain(format!("Kendall tau {tau} too close to ±1")));
        }
    }
    let root = brent_root(|t| frank_tau(t) - target, 0.0, hi, 1e-14, 500)
        .ok_or_else(|| Error::Domain("tau inversion failed to bracket".into()))?;
    Ok(Some(sign * root))
}
