use super::gengamma::GeneralizedGamma;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, QuadOptions};
use crate::real::Real;
use crate::rng::open_unit;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A distribution on the positive half line, used both for renewal
/// inter-arrival times and for reporting/settlement delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PositiveDistribution<T> {
    Exponential { rate: T },
    GeneralizedGamma(GeneralizedGamma<T>),
    /// Degenerate law at a single point.
    PointMass { at: T },
    /// User supplied CDF, linearly interpolated between knots.
    /// Knots start at `(0, 0)`, end at probability 1 and are non-decreasing.
    Tabulated { x: Vec<T>, p: Vec<T> },
}

pub type RenewalDistribution<T> = PositiveDistribution<T>;
pub type DelayDistribution<T> = PositiveDistribution<T>;

impl<T: Real> PositiveDistribution<T> {
    pub fn unit_exponential() -> Self {
        Self::Exponential { rate: T::one() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Exponential { rate } => {
                if !(*rate > T::zero()) || !rate.is_finite() {
                    return Err(Error::InvalidParameter(format!("exponential rate must be positive, got {rate}")));
                }
            }
            Self::GeneralizedGamma(g) => g.validate()?,
            Self::PointMass { at } => {
                if !(*at >= T::zero()) || !at.is_finite() {
                    return Err(Error::InvalidParameter(format!("point mass location must be ≥ 0, got {at}")));
                }
            }
            Self::Tabulated { x, p } => {
                let ok = x.len() >= 2
                    && x.len() == p.len()
                    && x[0] == T::zero()
                    && p[0] == T::zero()
                    && (p[p.len() - 1] - T::one()).abs() <= T::lit(1e-12)
                    && x.windows(2).all(|w| w[1] > w[0])
                    && p.windows(2).all(|w| w[1] >= w[0]);
                if !ok {
                    return Err(Error::InvalidParameter(
                        "tabulated CDF needs increasing knots from (0,0) to probability 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn cdf(&self, x: T) -> T {
        if x <= T::zero() {
            // F(0) = 0 for every family except an atom at zero
            return match self {
                Self::PointMass { at } if *at == T::zero() && x == T::zero() => T::one(),
                _ => T::zero(),
            };
        }
        match self {
            Self::Exponential { rate } => -(-*rate * x).exp_m1(),
            Self::GeneralizedGamma(g) => g.cdf(x),
            Self::PointMass { at } => {
                if x >= *at {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Tabulated { x: xs, p } => interp(xs, p, x),
        }
    }

    pub fn sf(&self, x: T) -> T {
        match self {
            Self::Exponential { rate } if x > T::zero() => (-*rate * x).exp(),
            Self::GeneralizedGamma(g) => g.sf(x),
            _ => T::one() - self.cdf(x),
        }
    }

    /// Density with respect to Lebesgue measure; an atom reports zero
    /// off its location and infinity on it.
    pub fn pdf(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        match self {
            Self::Exponential { rate } => *rate * (-*rate * x).exp(),
            Self::GeneralizedGamma(g) => g.pdf(x),
            Self::PointMass { at } => {
                if x == *at {
                    T::infinity()
                } else {
                    T::zero()
                }
            }
            Self::Tabulated { x: xs, p } => {
                let i = match xs.iter().position(|&k| k > x) {
                    Some(0) => return T::zero(),
                    Some(i) => i,
                    None => return T::zero(),
                };
                (p[i] - p[i - 1]) / (xs[i] - xs[i - 1])
            }
        }
    }

    /// Quantile from the lower probability `p` and its complement `q`.
    pub fn quantile_pq(&self, p: T, q: T) -> T {
        match self {
            Self::Exponential { rate } => {
                if p < T::lit(0.5) {
                    -(-p).ln_1p() / *rate
                } else {
                    -q.ln() / *rate
                }
            }
            Self::GeneralizedGamma(g) => g.quantile_pq(p, q),
            Self::PointMass { at } => *at,
            Self::Tabulated { x, p: ps } => {
                let i = ps.iter().position(|&k| k >= p).unwrap_or(ps.len() - 1).max(1);
                let (p0, p1) = (ps[i - 1], ps[i]);
                if p1 == p0 {
                    x[i]
                } else {
                    x[i - 1] + (x[i] - x[i - 1]) * (p - p0) / (p1 - p0)
                }
            }
        }
    }

    pub fn mean(&self) -> T {
        match self {
            Self::Exponential { rate } => T::one() / *rate,
            Self::GeneralizedGamma(g) => g.mean(),
            Self::PointMass { at } => *at,
            Self::Tabulated { x, p } => {
                let mut m = T::zero();
                for i in 1..x.len() {
                    m = m + (p[i] - p[i - 1]) * (x[i] + x[i - 1]) / T::lit(2.0);
                }
                m
            }
        }
    }

    /// Same family with every draw multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        match self {
            Self::Exponential { rate } => Self::Exponential { rate: *rate / factor },
            Self::GeneralizedGamma(g) => Self::GeneralizedGamma(g.scaled(factor)),
            Self::PointMass { at } => Self::PointMass { at: *at * factor },
            Self::Tabulated { x, p } => Self::Tabulated { x: x.iter().map(|&v| v * factor).collect(), p: p.clone() },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            Self::GeneralizedGamma(g) => g.sample(rng),
            Self::PointMass { at } => *at,
            _ => {
                let u = T::lit(open_unit(rng));
                self.quantile_pq(u, T::one() - u)
            }
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Self::PointMass { .. })
    }

    /// `∫_(lo, hi] g dF`.
    pub fn integrate<G: FnMut(T) -> T>(&self, lo: T, hi: T, mut g: G, opts: &QuadOptions<T>) -> T {
        if hi <= lo {
            return T::zero();
        }
        match self {
            Self::PointMass { at } => {
                if *at > lo && *at <= hi {
                    g(*at)
                } else {
                    T::zero()
                }
            }
            Self::Tabulated { x, .. } => {
                let mut pts = vec![lo.max(T::zero())];
                pts.extend(x.iter().copied().filter(|&k| k > lo && k < hi));
                pts.push(hi.max(T::zero()));
                let pts = dedup(pts);
                integrate_pieces(|v| g(v) * self.pdf(v), &pts, opts).value
            }
            _ => {
                let lo = lo.max(T::zero());
                if hi <= lo {
                    return T::zero();
                }
                integrate_pieces(|v| g(v) * self.pdf(v), &[lo, hi], opts).value
            }
        }
    }

    /// Probability of `(lo, hi]`, computed on the tail that keeps precision.
    pub fn interval_mass(&self, lo: T, hi: T) -> T {
        if hi <= lo {
            return T::zero();
        }
        if self.cdf(lo) > T::lit(0.5) {
            self.sf(lo) - self.sf(hi)
        } else {
            self.cdf(hi) - self.cdf(lo)
        }
    }
}

fn dedup<T: Real>(mut v: Vec<T>) -> Vec<T> {
    v.dedup_by(|a, b| a == b);
    v
}

fn interp<T: Real>(xs: &[T], ps: &[T], x: T) -> T {
    match xs.iter().position(|&k| k >= x) {
        None => T::one(),
        Some(0) => ps[0],
        Some(i) => ps[i - 1] + (ps[i] - ps[i - 1]) * (x - xs[i - 1]) / (xs[i] - xs[i - 1]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_matches_generalized_gamma() {
        let e = PositiveDistribution::Exponential { rate: 2.0 };
        let g = PositiveDistribution::GeneralizedGamma(GeneralizedGamma::new(1.0, 1.0, 0.5).unwrap());
        for &x in &[0.1, 0.5, 1.0, 4.0] {
            assert_relative_eq!(e.cdf(x), g.cdf(x), max_relative = 1e-12);
            assert_relative_eq!(e.pdf(x), g.pdf(x), max_relative = 1e-12);
        }
        assert_relative_eq!(e.mean(), 0.5);
    }

    #[test]
    fn tabulated_interpolation() {
        let t = PositiveDistribution::Tabulated { x: vec![0.0, 1.0, 3.0], p: vec![0.0, 0.5, 1.0] };
        t.validate().unwrap();
        assert_relative_eq!(t.cdf(0.5), 0.25);
        assert_relative_eq!(t.cdf(2.0), 0.75);
        assert_relative_eq!(t.quantile_pq(0.75, 0.25), 2.0);
        assert_relative_eq!(t.pdf(2.0), 0.25);
        assert_relative_eq!(t.mean(), 0.5 * 0.5 + 0.5 * 2.0);
        let m = t.integrate(0.0, 3.0, |v| v, &QuadOptions::default());
        assert_relative_eq!(m, t.mean(), epsilon = 1e-10);
    }

    #[test]
    fn point_mass_integration() {
        let d = PositiveDistribution::PointMass { at: 2.0 };
        assert_eq!(d.integrate(1.0, 2.0, |v| v * 10.0, &QuadOptions::default()), 20.0);
        assert_eq!(d.integrate(2.0, 3.0, |v| v * 10.0, &QuadOptions::default()), 0.0);
        assert_eq!(d.interval_mass(1.0, 2.0), 1.0);
        assert_eq!(d.cdf(1.999), 0.0);
    }

    #[test]
    fn scaling_multiplies_mean() {
        let g = PositiveDistribution::GeneralizedGamma(GeneralizedGamma::new(3.0, 0.7, 0.4).unwrap());
        assert_relative_eq!(g.scaled(2.0).mean(), 2.0 * g.mean(), max_relative = 1e-12);
        let e = PositiveDistribution::Exponential { rate: 4.0 };
        assert_relative_eq!(e.scaled(0.5).mean(), 0.125);
    }
}
