use super::positive::PositiveDistribution;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::open_unit;
use rand::Rng;

/// A delay law restricted to the window `(lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDelay<T> {
    base: PositiveDistribution<T>,
    lower: T,
    upper: T,
    mass: T,
    // solve in the upper tail when the lower bound sits past the median
    use_tail: bool,
}

impl<T: Real> TruncatedDelay<T> {
    pub fn new(base: PositiveDistribution<T>, lower: T, upper: T) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::InvalidParameter(format!("truncation needs lower < upper, got ({lower}, {upper}]")));
        }
        let mass = base.interval_mass(lower, upper);
        if !(mass > T::zero()) {
            return Err(Error::DegenerateWindow { lower: lower.to_f64_lossy(), upper: upper.to_f64_lossy() });
        }
        let use_tail = base.cdf(lower) > T::lit(0.5);
        Ok(Self { base, lower, upper, mass, use_tail })
    }

    pub fn base(&self) -> &PositiveDistribution<T> {
        &self.base
    }
    pub fn lower(&self) -> T {
        self.lower
    }
    pub fn upper(&self) -> T {
        self.upper
    }
    /// Base probability of the window.
    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn cdf(&self, v: T) -> T {
        if v <= self.lower {
            return T::zero();
        }
        if v >= self.upper {
            return T::one();
        }
        (self.base.interval_mass(self.lower, v) / self.mass).min(T::one())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        if let PositiveDistribution::PointMass { at } = self.base {
            return at;
        }
        let u = T::lit(open_unit(rng));
        let x = if self.use_tail {
            let s_lo = self.base.sf(self.lower);
            let q = s_lo - u * self.mass;
            self.base.quantile_pq(T::one() - q, q)
        } else {
            let p = self.base.cdf(self.lower) + u * self.mass;
            self.base.quantile_pq(p, T::one() - p)
        };
        // inversion round-off can leak just outside the window
        if x <= self.lower {
            let next = self.lower + (self.upper - self.lower) * T::lit(1e-12);
            next.min(self.upper)
        } else {
            x.min(self.upper)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::GeneralizedGamma;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn table2() -> PositiveDistribution<f64> {
        PositiveDistribution::GeneralizedGamma(GeneralizedGamma::new(3.33246873, 0.67977335, 0.3645056).unwrap())
    }

    #[test]
    fn endpoints_and_ratio() {
        let base = table2();
        let td = TruncatedDelay::new(base.clone(), 1.0, 3.0).unwrap();
        assert_eq!(td.cdf(3.0), 1.0);
        assert_eq!(td.cdf(1.0), 0.0);
        let expect = (base.cdf(2.0) - base.cdf(1.0)) / (base.cdf(3.0) - base.cdf(1.0));
        assert_relative_eq!(td.cdf(2.0), expect, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_window_is_an_error() {
        let pm = PositiveDistribution::PointMass { at: 0.5 };
        assert!(matches!(TruncatedDelay::new(pm, 1.0, 2.0), Err(Error::DegenerateWindow { .. })));
        assert!(TruncatedDelay::new(table2(), 2.0, 2.0).is_err());
    }

    #[test]
    fn far_tail_samples_stay_inside() {
        let td = TruncatedDelay::new(table2(), 40.0, 41.0).unwrap();
        assert!(td.mass() > 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let x = td.sample(&mut rng);
            assert!(x > 40.0 && x <= 41.0, "{x}");
        }
    }
}
