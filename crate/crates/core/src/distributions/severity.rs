use crate::error::{Error, Result};
use crate::real::{Real, DAYS_PER_YEAR};
use crate::special::norm_cdf;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Number of injury categories carried by the covariate shift vector.
pub const N_CLASSES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalComponent<T> {
    pub weight: T,
    pub mu: T,
    pub sigma: T,
}

/// Zero-inflated lognormal mixture whose log-location moves with the
/// settlement delay: `ln X = ln X̃ + κ ln(1 + 365 ζ) + φ_class`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityModel<T> {
    pub p0: T,
    pub components: Vec<LognormalComponent<T>>,
    pub kappa: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<T>>,
}

impl<T: Real> SeverityModel<T> {
    pub fn new(p0: T, components: Vec<LognormalComponent<T>>, kappa: T, phi: Option<Vec<T>>) -> Result<Self> {
        let m = Self { p0, components, kappa, phi };
        m.validate()?;
        Ok(m)
    }

    /// Point mass at zero.
    pub fn zero() -> Self {
        Self {
            p0: T::one(),
            components: vec![LognormalComponent { weight: T::one(), mu: T::zero(), sigma: T::zero() }],
            kappa: T::zero(),
            phi: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 >= T::zero() && self.p0 <= T::one()) {
            return Err(Error::InvalidParameter(format!("p0 must lie in [0,1], got {}", self.p0)));
        }
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("severity needs at least one component".into()));
        }
        let mut total = T::zero();
        for c in &self.components {
            if !(c.weight >= T::zero()) || !(c.sigma >= T::zero()) || !c.mu.is_finite() || !c.sigma.is_finite() {
                return Err(Error::InvalidParameter(format!("invalid lognormal component {c:?}")));
            }
            total = total + c.weight;
        }
        // published weights are rounded, so allow a small slack
        if (total - T::one()).abs() > T::lit(1e-5) {
            return Err(Error::InvalidParameter(format!("component weights sum to {total}, expected 1")));
        }
        if !self.kappa.is_finite() {
            return Err(Error::InvalidParameter("kappa must be finite".into()));
        }
        if let Some(phi) = &self.phi {
            if phi.len() != N_CLASSES || phi.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("phi must hold {N_CLASSES} finite shifts")));
            }
        }
        Ok(())
    }

    fn weight_total(&self) -> T {
        self.components.iter().fold(T::zero(), |s, c| s + c.weight)
    }

    /// Covariate shift for a class; absent class or vector contributes 0.
    pub fn class_shift(&self, class: Option<usize>) -> T {
        match (&self.phi, class) {
            (Some(phi), Some(k)) if k < phi.len() => phi[k],
            _ => T::zero(),
        }
    }

    /// Total log-location shift `κ ln(1 + 365 ζ) + φ_class`.
    pub fn log_shift(&self, zeta: T, class: Option<usize>) -> T {
        self.kappa * (T::lit(DAYS_PER_YEAR) * zeta).ln_1p() + self.class_shift(class)
    }

    pub fn cdf(&self, x: T, zeta: T, class: Option<usize>) -> T {
        if x < T::zero() {
            return T::zero();
        }
        if x == T::zero() {
            return self.p0;
        }
        let shift = self.log_shift(zeta, class);
        self.p0 + (T::one() - self.p0) * self.positive_cdf(x.ln() - shift)
    }

    /// Mixture CDF of the log amount on the positive part.
    pub fn positive_cdf(&self, z: T) -> T {
        let tot = self.weight_total();
        let mut s = T::zero();
        for c in &self.components {
            let v = if c.sigma > T::zero() {
                norm_cdf((z - c.mu) / c.sigma)
            } else if z >= c.mu {
                T::one()
            } else {
                T::zero()
            };
            s = s + c.weight * v;
        }
        s / tot
    }

    /// Mixture survival function of the log amount on the positive part.
    pub fn positive_sf(&self, z: T) -> T {
        let tot = self.weight_total();
        let mut s = T::zero();
        for c in &self.components {
            let v = if c.sigma > T::zero() {
                crate::special::norm_sf((z - c.mu) / c.sigma)
            } else if z >= c.mu {
                T::zero()
            } else {
                T::one()
            };
            s = s + c.weight * v;
        }
        s / tot
    }

    /// Density of the log amount on the positive part (continuous components only).
    pub fn positive_log_pdf(&self, z: T) -> T {
        let tot = self.weight_total();
        let mut s = T::zero();
        for c in &self.components {
            if c.sigma > T::zero() {
                let u = (z - c.mu) / c.sigma;
                s = s + c.weight * crate::special::norm_pdf(u) / c.sigma;
            }
        }
        s / tot
    }

    /// Moment of order `r` of `X̃` (no delay or class shift).
    pub fn base_moment(&self, r: T) -> T {
        if self.p0 >= T::one() {
            return T::zero();
        }
        let tot = self.weight_total();
        let mut s = T::zero();
        for c in &self.components {
            s = s + c.weight * (r * c.mu + r * r * c.sigma * c.sigma / T::lit(2.0)).exp();
        }
        (T::one() - self.p0) * s / tot
    }

    /// `E[X^r | ζ]` for the given class.
    pub fn moment(&self, zeta: T, class: Option<usize>, r: T) -> T {
        let m = self.base_moment(r);
        if m == T::zero() {
            return m;
        }
        m * (r * self.log_shift(zeta, class)).exp()
    }

    /// Conditional moment of order 1 or 2.
    pub fn conditional_moment(&self, zeta: T, class: Option<usize>, order: u8) -> Result<T> {
        if !(zeta >= T::zero()) {
            return Err(Error::Domain(format!("settlement delay must be ≥ 0, got {zeta}")));
        }
        match order {
            1 | 2 => Ok(self.moment(zeta, class, T::lit(order as f64))),
            _ => Err(Error::InvalidParameter(format!("moment order must be 1 or 2, got {order}"))),
        }
    }

    /// Draws `X̃`: zero with probability `p0`, else a lognormal component.
    pub fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u: f64 = rng.random();
        if u < self.p0.to_f64_lossy() {
            // keep the stream aligned whether or not the draw is zero
            let _: f64 = rng.random();
            let _: f64 = rng.sample(StandardNormal);
            return T::zero();
        }
        let tot = self.weight_total().to_f64_lossy();
        let pick: f64 = rng.random::<f64>() * tot;
        let mut acc = 0.0;
        let mut chosen = self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight.to_f64_lossy();
            if pick < acc {
                chosen = *c;
                break;
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        (chosen.mu + chosen.sigma * T::lit(z)).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, zeta: T, class: Option<usize>, rng: &mut R) -> T {
        let x = self.sample_base(rng);
        if x == T::zero() {
            x
        } else {
            x * self.log_shift(zeta, class).exp()
        }
    }

    /// Draws the positive-part mixture by inversion at a given uniform, used
    /// when the uniform comes from a copula.
    pub fn base_quantile(&self, u: T) -> T {
        if u <= self.p0 {
            return T::zero();
        }
        let target = (u - self.p0) / (T::one() - self.p0);
        self.positive_log_quantile(target).exp()
    }

    pub fn positive_log_quantile(&self, p: T) -> T {
        let p = p.to_f64_lossy();
        let (lo, hi) = self.log_support();
        let f = |z: f64| self.positive_cdf(T::lit(z)).to_f64_lossy() - p;
        let root = crate::optimize::brent_root(f, lo, hi, 1e-13, 300).unwrap_or(if p < 0.5 { lo } else { hi });
        T::lit(root)
    }

    /// A log-amount range containing all but a negligible fraction of mass.
    pub fn log_support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.components {
            let (m, s) = (c.mu.to_f64_lossy(), c.sigma.to_f64_lossy());
            lo = lo.min(m - 40.0 * s - 1.0);
            hi = hi.max(m + 40.0 * s + 1.0);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn model(kappa: f64) -> SeverityModel<f64> {
        SeverityModel::new(
            0.3,
            vec![
                LognormalComponent { weight: 0.6, mu: 1.0, sigma: 0.5 },
                LognormalComponent { weight: 0.4, mu: 2.0, sigma: 0.2 },
            ],
            kappa,
            None,
        )
        .unwrap()
    }

    #[test]
    fn cdf_limits() {
        let m = model(0.3);
        assert_eq!(m.cdf(0.0, 1.0, None), 0.3);
        assert_relative_eq!(m.cdf(1e12, 1.0, None), 1.0, epsilon = 1e-12);
        assert_eq!(m.cdf(-1.0, 1.0, None), 0.0);
    }

    #[test]
    fn kappa_zero_ignores_delay() {
        let m = model(0.0);
        assert_eq!(m.cdf(5.0, 0.0, None), m.cdf(5.0, 3.0, None));
        assert_eq!(m.moment(0.0, None, 1.0), m.moment(7.0, None, 1.0));
    }

    #[test]
    fn doubling_the_coupling_base_scales_by_power() {
        let m = model(0.7);
        let z = 0.4;
        let z2 = (2.0 * (1.0 + 365.0 * z) - 1.0) / 365.0;
        assert_relative_eq!(m.moment(z2, None, 1.0) / m.moment(z, None, 1.0), 2f64.powf(0.7), max_relative = 1e-12);
    }

    #[test]
    fn class_shift_applies() {
        let mut phi = vec![0.0; N_CLASSES];
        phi[3] = 0.5;
        let m = SeverityModel { phi: Some(phi), ..model(0.0) };
        m.validate().unwrap();
        assert_relative_eq!(m.moment(0.0, Some(3), 1.0), m.moment(0.0, None, 1.0) * 0.5f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(m.cdf(4.0 * 0.5f64.exp(), 0.0, Some(3)), m.cdf(4.0, 0.0, Some(0)), max_relative = 1e-12);
    }

    #[test]
    fn degenerate_components() {
        let m = SeverityModel::new(0.0, vec![LognormalComponent { weight: 1.0, mu: 1.0, sigma: 0.0 }], 0.5, None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let expect = (1.0 + 0.5 * (366.0f64).ln()).exp();
        assert_relative_eq!(m.sample(1.0, None, &mut rng), expect, max_relative = 1e-12);
        let z = SeverityModel::<f64>::zero();
        assert_eq!(z.sample(1.0, None, &mut rng), 0.0);
        assert_eq!(z.moment(1.0, None, 2.0), 0.0);
    }

    #[test]
    fn quantile_inverts_positive_cdf() {
        let m = model(0.0);
        for &p in &[0.01, 0.4, 0.99] {
            let z = m.positive_log_quantile(p);
            assert_relative_eq!(m.positive_cdf(z), p, epsilon = 1e-11);
        }
        assert_eq!(m.base_quantile(0.2), 0.0);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let bad = SeverityModel::new(0.0, vec![LognormalComponent { weight: 0.5, mu: 0.0, sigma: 1.0 }], 0.0, None);
        assert!(bad.is_err());
    }
}
