//! Trend functions and trend renewal processes.
//!
//! A TRP[F, λ] has event times `T_k` such that `Λ(T_k)` is an ordinary
//! renewal process with inter-arrival law `F`. All public functions take and
//! return time in years; a mixture trend is parameterised in days and is
//! converted internally at 365 days per year.

use crate::distributions::RenewalDistribution;
use crate::error::{Error, Result};
use crate::optimize::{brent_root, golden_section, nelder_mead};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};
use crate::real::{Real, DAYS_PER_YEAR};
use crate::rng::{stream, Role};
use crate::special::{gamma_p, ln_gamma};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    Years,
    Days,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendFamily {
    Constant,
    Power,
    GammaMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrendSpec<T> {
    /// `λ(t) = lambda` per year.
    Constant { lambda: T },
    /// `Λ(t) = t^gamma`, `t` in years.
    Power { gamma: T },
    /// `λ(u) = p1 g(u; α1, λ1) + p2 g(u; α2, λ2)` with `g` a gamma density
    /// and `u` in days. `Λ(∞) = p1 + p2` is finite.
    GammaMixture { p1: T, p2: T, alpha1: T, alpha2: T, lambda1: T, lambda2: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceHistory<T> {
    pub times: Vec<T>,
    pub horizon: T,
    /// The trend ran out of mass before the horizon.
    #[serde(default)]
    pub saturated: bool,
}

impl<T: Real> OccurrenceHistory<T> {
    pub fn new(times: Vec<T>, horizon: T) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("occurrence times must be strictly increasing".into()));
        }
        if times.first().is_some_and(|&t| t < T::zero()) || times.last().is_some_and(|&t| t > horizon) {
            return Err(Error::InvalidParameter("occurrence times must lie in [0, horizon]".into()));
        }
        Ok(Self { times, horizon, saturated: false })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> T {
        self.times.last().copied().unwrap_or(T::zero())
    }
}

fn gamma_density<T: Real>(u: T, alpha: T, rate: T) -> T {
    if u <= T::zero() {
        return if alpha < T::one() {
            T::infinity()
        } else if alpha == T::one() {
            rate
        } else {
            T::zero()
        };
    }
    (alpha * rate.ln() + (alpha - T::one()) * u.ln() - rate * u - ln_gamma(alpha)).exp()
}

impl<T: Real> TrendSpec<T> {
    pub fn family(&self) -> TrendFamily {
        match self {
            Self::Constant { .. } => TrendFamily::Constant,
            Self::Power { .. } => TrendFamily::Power,
            Self::GammaMixture { .. } => TrendFamily::GammaMixture,
        }
    }

    /// Unit of the native time argument of the parameterisation.
    pub fn unit(&self) -> TimeUnit {
        match self {
            Self::GammaMixture { .. } => TimeUnit::Days,
            _ => TimeUnit::Years,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("trend: {what}")));
        match *self {
            Self::Constant { lambda } if !(lambda > T::zero()) || !lambda.is_finite() => bad("lambda must be positive"),
            Self::Power { gamma } if !(gamma > T::zero()) || !gamma.is_finite() => bad("gamma must be positive"),
            Self::GammaMixture { p1, p2, alpha1, alpha2, lambda1, lambda2 } => {
                if !(p1 >= T::zero() && p2 >= T::zero()) || !(p1 + p2 > T::zero()) {
                    return bad("mixture weights must be non-negative with positive sum");
                }
                if !(alpha1 > T::zero() && alpha2 > T::zero() && lambda1 > T::zero() && lambda2 > T::zero()) {
                    return bad("mixture shapes and rates must be positive");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `Λ(∞)`, or `None` when unbounded.
    pub fn total_mass(&self) -> Option<T> {
        match *self {
            Self::GammaMixture { p1, p2, .. } => Some(p1 + p2),
            _ => None,
        }
    }

    fn mixture_native(&self, u: T) -> T {
        match *self {
            Self::GammaMixture { p1, p2, alpha1, alpha2, lambda1, lambda2 } => {
                p1 * gamma_p(alpha1, lambda1 * u) + p2 * gamma_p(alpha2, lambda2 * u)
            }
            _ => unreachable!(),
        }
    }

    /// `Λ(t)`; infallible variant for `t ≥ 0` (negative inputs map to 0).
    pub fn lambda_cum(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        match *self {
            Self::Constant { lambda } => lambda * t,
            Self::Power { gamma } => t.powf(gamma),
            Self::GammaMixture { .. } => self.mixture_native(t * T::lit(DAYS_PER_YEAR)),
        }
    }

    /// `Λ(t)` with the domain check.
    pub fn cumulative(&self, t: T) -> Result<T> {
        if !(t >= T::zero()) {
            return Err(Error::Domain(format!("cumulative trend needs t ≥ 0, got {t}")));
        }
        Ok(self.lambda_cum(t))
    }

    /// `λ(t)` per year.
    pub fn intensity(&self, t: T) -> T {
        match *self {
            Self::Constant { lambda } => lambda,
            Self::Power { gamma } => {
                if t <= T::zero() {
                    return if gamma < T::one() {
                        T::infinity()
                    } else if gamma == T::one() {
                        T::one()
                    } else {
                        T::zero()
                    };
                }
                gamma * t.powf(gamma - T::one())
            }
            Self::GammaMixture { p1, p2, alpha1, alpha2, lambda1, lambda2 } => {
                let u = t * T::lit(DAYS_PER_YEAR);
                T::lit(DAYS_PER_YEAR) * (p1 * gamma_density(u, alpha1, lambda1) + p2 * gamma_density(u, alpha2, lambda2))
            }
        }
    }

    /// `Λ⁻¹(s)` in years. Saturates for a finite-mass trend.
    pub fn inverse(&self, s: T) -> Result<T> {
        if !(s >= T::zero()) {
            return Err(Error::Domain(format!("inverse trend needs s ≥ 0, got {s}")));
        }
        if s == T::zero() {
            return Ok(T::zero());
        }
        match *self {
            Self::Constant { lambda } => Ok(s / lambda),
            Self::Power { gamma } => Ok(s.powf(T::one() / gamma)),
            Self::GammaMixture { p1, p2, .. } => {
                let limit = p1 + p2;
                if s >= limit {
                    return Err(Error::Saturated { requested: s.to_f64_lossy(), limit: limit.to_f64_lossy() });
                }
                let target = s.to_f64_lossy();
                let g = |u: f64| self.mixture_native(T::lit(u)).to_f64_lossy() - target;
                let mut hi = 1.0;
                while g(hi) < 0.0 {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return Err(Error::Saturated { requested: target, limit: limit.to_f64_lossy() });
                    }
                }
                let u = brent_root(g, 0.0, hi, 1e-15 * hi, 500).unwrap_or(hi);
                Ok(T::lit(u / DAYS_PER_YEAR))
            }
        }
    }
}

/// `Λ(t)` with the domain check.
pub fn cumulative_trend<T: Real>(spec: &TrendSpec<T>, t: T) -> Result<T> {
    spec.cumulative(t)
}

/// `Λ⁻¹(s)`.
pub fn inverse_cumulative_trend<T: Real>(spec: &TrendSpec<T>, s: T) -> Result<T> {
    spec.inverse(s)
}

/// Simulates event times on `[0, horizon]` by a renewal walk in transformed
/// time. A finite-mass trend that saturates returns the events generated so
/// far with `saturated = true`.
pub fn sample_trp<T: Real, R: Rng + ?Sized>(
    spec: &TrendSpec<T>,
    renewal: &RenewalDistribution<T>,
    horizon: T,
    rng: &mut R,
) -> Result<OccurrenceHistory<T>> {
    if !(horizon > T::zero()) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let mut times = Vec::new();
    let mut s = T::zero();
    let mut saturated = false;
    loop {
        let tau = renewal.sample(rng);
        s = s + tau;
        let t = match spec.inverse(s) {
            Ok(t) => t,
            Err(Error::Saturated { .. }) => {
                saturated = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if t > horizon {
            break;
        }
        // a zero inter-arrival cannot produce a new distinct event
        if times.last().is_some_and(|&p: &T| !(t > p)) {
            continue;
        }
        times.push(t);
    }
    Ok(OccurrenceHistory { times, horizon, saturated })
}

/// Conditional intensity `h(Λ(t) − Λ(T_last)) λ(t)` where `h = f/F̄`.
pub fn conditional_intensity<T: Real>(
    spec: &TrendSpec<T>,
    renewal: &RenewalDistribution<T>,
    history: &OccurrenceHistory<T>,
    t: T,
) -> Result<T> {
    let last = history.last();
    if t < last {
        return Err(Error::Precondition(format!("evaluation time {t} precedes the last event {last}")));
    }
    let age = spec.lambda_cum(t) - spec.lambda_cum(last);
    let rate = spec.intensity(t);
    if let RenewalDistribution::Exponential { rate: r } = renewal {
        return Ok(*r * rate);
    }
    let sf = renewal.sf(age);
    if !(sf > T::zero()) {
        return Err(Error::Divergence { age: age.to_f64_lossy() });
    }
    Ok(renewal.pdf(age) / sf * rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub spec: TrendSpec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// TRP log-likelihood of an observed history.
pub fn trp_log_likelihood(spec: &TrendSpec<f64>, renewal: &RenewalDistribution<f64>, history: &OccurrenceHistory<f64>) -> f64 {
    let mut ll = 0.0;
    let mut prev = 0.0;
    for &t in &history.times {
        let s = spec.lambda_cum(t);
        let f = renewal.pdf(s - prev);
        let rate = spec.intensity(t);
        ll += f.ln() + rate.ln();
        prev = s;
    }
    let tail = renewal.sf(spec.lambda_cum(history.horizon) - prev);
    ll += tail.ln();
    if ll.is_finite() {
        ll
    } else {
        f64::NEG_INFINITY
    }
}

/// Maximum-likelihood trend for a fixed renewal law.
pub fn fit_trend(history: &OccurrenceHistory<f64>, family: TrendFamily, renewal: &RenewalDistribution<f64>) -> Result<TrendFit> {
    let n = history.len();
    if n < 10 {
        return Err(Error::InsufficientData { got: n, need: 10 });
    }
    let h = history.horizon;
    let nll = |spec: TrendSpec<f64>| -trp_log_likelihood(&spec, renewal, history);
    match family {
        TrendFamily::Constant | TrendFamily::Power => {
            let make = |x: f64| match family {
                TrendFamily::Constant => TrendSpec::Constant { lambda: x.exp() },
                _ => TrendSpec::Power { gamma: x.exp() },
            };
            // moment-matching centre, then scan and refine
            let m = renewal.mean();
            let centre = match family {
                TrendFamily::Constant => (n as f64 * m / h).ln(),
                _ if h > 1.0 + 1e-9 => ((n as f64 * m).ln() / h.ln()).max(1e-3).ln(),
                _ => 0.0,
            };
            let grid: Vec<f64> = (0..=80).map(|i| centre - 4.0 + 8.0 * i as f64 / 80.0).collect();
            let vals: Vec<f64> = grid.iter().map(|&x| nll(make(x))).collect();
            let best = (0..grid.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(40);
            let lo = grid[best.saturating_sub(1)];
            let hi = grid[(best + 1).min(grid.len() - 1)];
            let (x, v) = golden_section(|x| nll(make(x)), lo, hi, 1e-12);
            if !v.is_finite() {
                return Err(Error::NonConvergence { iterations: grid.len(), message: "likelihood not finite".into(), best_objective: v });
            }
            Ok(TrendFit { spec: make(x), log_likelihood: -v, iterations: grid.len(), converged: true })
        }
        TrendFamily::GammaMixture => {
            let days: Vec<f64> = history.times.iter().map(|t| t * DAYS_PER_YEAR).collect();
            let mean_d = days.iter().sum::<f64>() / n as f64;
            let total = n as f64 * renewal.mean();
            let make = |p: &[f64]| TrendSpec::GammaMixture {
                p1: p[0].exp(),
                p2: p[1].exp(),
                alpha1: p[2].exp(),
                alpha2: p[3].exp(),
                lambda1: p[4].exp(),
                lambda2: p[5].exp(),
            };
            let mut best: Option<crate::optimize::Minimum> = None;
            for (split, a1, a2) in [(0.5, 2.0, 6.0), (0.3, 1.5, 4.0), (0.7, 3.0, 10.0), (0.5, 1.0, 1.0)] {
                let x0 = [
                    (split * total).ln(),
                    ((1.0 - split) * total).ln(),
                    f64::ln(a1),
                    f64::ln(a2),
                    (a1 / (0.5 * mean_d)).ln(),
                    (a2 / (1.5 * mean_d)).ln(),
                ];
                let m = nelder_mead(|p| nll(make(p)), &x0, &[0.3; 6], 1e-10, 20_000);
                if best.as_ref().is_none_or(|b| m.value < b.value) {
                    best = Some(m);
                }
            }
            let b = best.expect("at least one start");
            if !b.converged || !b.value.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: b.iterations,
                    message: format!("mixture trend fit did not settle; best parameters {:?}", make(&b.x)),
                    best_objective: b.value,
                });
            }
            Ok(TrendFit { spec: make(&b.x), log_likelihood: -b.value, iterations: b.iterations, converged: true })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalMethod {
    /// Quadrature up to index 4, Monte Carlo beyond.
    Auto,
    Quadrature,
    MonteCarlo { paths: usize, seed: u64 },
}

/// Largest index evaluated by nested quadrature.
pub const QUADRATURE_MAX_INDEX: usize = 4;

/// `P(ζ_k ≤ t)` when the delays `ζ_1, ζ_2, …` form a TRP[F, λ]:
/// `∫ F(Λ(u+t) − Λ(u)) dF^{*(k−1)}(Λ(u))`.
pub fn trp_delay_marginal_cdf(
    spec: &TrendSpec<f64>,
    renewal: &RenewalDistribution<f64>,
    k: usize,
    t: f64,
    method: MarginalMethod,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("delay index starts at 1".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be ≥ 0, got {t}")));
    }
    // F evaluated at the transformed increment following transformed time s
    let conditional = |s: f64| -> f64 {
        match spec.inverse(s) {
            Ok(u) => renewal.cdf(spec.lambda_cum(u + t) - s),
            Err(_) => 0.0,
        }
    };
    if k == 1 {
        return Ok(renewal.cdf(spec.lambda_cum(t)));
    }
    if let TrendSpec::Constant { lambda } = spec {
        return Ok(renewal.cdf(lambda * t));
    }
    let method = match method {
        MarginalMethod::Auto if k <= QUADRATURE_MAX_INDEX && !renewal.is_atomic() => MarginalMethod::Quadrature,
        MarginalMethod::Auto => MarginalMethod::MonteCarlo { paths: 100_000, seed: 0 },
        m => m,
    };
    match method {
        MarginalMethod::Quadrature => {
            if k > QUADRATURE_MAX_INDEX {
                return Err(Error::Unsupported(format!(
                    "nested quadrature is limited to k ≤ {QUADRATURE_MAX_INDEX}; got k = {k}"
                )));
            }
            if let RenewalDistribution::PointMass { at } = renewal {
                return Ok(conditional((k - 1) as f64 * at));
            }
            let opts = QuadOptions::with_tol(1e-12, 1e-10);
            let density = |s: f64| convolution_density(renewal, k - 1, s);
            let r = integrate_to_infinity(|s| conditional(s) * density(s), 0.0, &opts);
            Ok(r.value.clamp(0.0, 1.0))
        }
        MarginalMethod::MonteCarlo { paths, seed } => {
            let mut acc = 0.0;
            for p in 0..paths {
                let mut rng = stream(seed, p as u64, k as u64, Role::Auxiliary);
                let mut s = 0.0;
                for _ in 0..k - 1 {
                    s += renewal.sample(&mut rng);
                }
                acc += conditional(s);
            }
            Ok(acc / paths as f64)
        }
        MarginalMethod::Auto => unreachable!(),
    }
}

// density of the n-fold convolution of the renewal law, n ≤ 3
fn convolution_density(renewal: &RenewalDistribution<f64>, n: usize, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let opts = QuadOptions::with_tol(1e-13, 1e-9);
    match n {
        1 => renewal.pdf(s),
        n => integrate(|r| convolution_density(renewal, n - 1, r) * renewal.pdf(s - r), 0.0, s, &opts).value,
    }
}

/// Draws `(T_k)` for a history given a stream seed; convenience for tests and tooling.
pub fn sample_trp_seeded(
    spec: &TrendSpec<f64>,
    renewal: &RenewalDistribution<f64>,
    horizon: f64,
    seed: u64,
    path: u64,
) -> Result<OccurrenceHistory<f64>> {
    let mut rng = stream(seed, path, 0, Role::Occurrence);
    sample_trp(spec, renewal, horizon, &mut rng)
}

/// Inter-arrival times in transformed time, `Λ(T_k) − Λ(T_{k−1})`.
pub fn transformed_gaps<T: Real>(spec: &TrendSpec<T>, history: &OccurrenceHistory<T>) -> Vec<T> {
    let mut prev = T::zero();
    history
        .times
        .iter()
        .map(|&t| {
            let s = spec.lambda_cum(t);
            let g = s - prev;
            prev = s;
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::GeneralizedGamma;
    use approx::assert_relative_eq;

    fn mixture() -> TrendSpec<f64> {
        TrendSpec::GammaMixture { p1: 0.6, p2: 0.4, alpha1: 2.0, alpha2: 5.0, lambda1: 0.01, lambda2: 0.004 }
    }

    #[test]
    fn closed_forms() {
        assert_eq!(TrendSpec::Constant { lambda: 2.0 }.cumulative(3.0).unwrap(), 6.0);
        assert_relative_eq!(TrendSpec::Power { gamma: 1.2 }.cumulative(4.0).unwrap(), 4f64.powf(1.2), max_relative = 1e-15);
        assert_eq!(mixture().cumulative(0.0).unwrap(), 0.0);
        assert!(mixture().cumulative(-1.0).is_err());
        assert_eq!(TrendSpec::Power { gamma: 1.0 }.inverse(8.0).unwrap(), 8.0);
    }

    #[test]
    fn mixture_round_trip_and_saturation() {
        let m = mixture();
        for &s in &[1e-6, 0.1, 0.5, 0.9, 0.999_999] {
            let t = m.inverse(s).unwrap();
            assert_relative_eq!(m.lambda_cum(t), s, max_relative = 1e-10);
        }
        assert!(matches!(m.inverse(1.5), Err(Error::Saturated { .. })));
        assert_eq!(m.total_mass(), Some(1.0));
    }

    #[test]
    fn intensity_is_derivative() {
        for spec in [TrendSpec::Power { gamma: 1.5 }, mixture(), TrendSpec::Constant { lambda: 3.0 }] {
            let t = 0.8;
            let h = 1e-6;
            let d = (spec.lambda_cum(t + h) - spec.lambda_cum(t - h)) / (2.0 * h);
            assert_relative_eq!(d, spec.intensity(t), max_relative = 1e-6);
        }
    }

    #[test]
    fn deterministic_renewal_gives_lattice() {
        let h = sample_trp_seeded(&TrendSpec::Constant { lambda: 1.0 }, &RenewalDistribution::PointMass { at: 1.0 }, 5.5, 1, 0).unwrap();
        assert_eq!(h.times, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn saturating_trend_truncates() {
        let h = sample_trp_seeded(&mixture(), &RenewalDistribution::PointMass { at: 0.3 }, 1e6, 1, 0).unwrap();
        assert!(h.saturated);
        assert_eq!(h.times.len(), 3);
    }

    #[test]
    fn unit_hazard_reproduces_trend() {
        let spec = TrendSpec::Power { gamma: 1.5 };
        let hist = OccurrenceHistory::new(vec![0.2, 0.7], 1.0).unwrap();
        let r = RenewalDistribution::unit_exponential();
        assert_relative_eq!(conditional_intensity(&spec, &r, &hist, 0.9).unwrap(), spec.intensity(0.9));
        assert!(matches!(conditional_intensity(&spec, &r, &hist, 0.5), Err(Error::Precondition(_))));
    }

    #[test]
    fn hazard_divergence() {
        let spec = TrendSpec::Constant { lambda: 1.0 };
        let r = RenewalDistribution::Tabulated { x: vec![0.0, 1.0], p: vec![0.0, 1.0] };
        let hist = OccurrenceHistory::new(vec![], 5.0).unwrap();
        assert!(matches!(conditional_intensity(&spec, &r, &hist, 2.0), Err(Error::Divergence { .. })));
    }

    #[test]
    fn generalized_gamma_hazard() {
        let g = GeneralizedGamma::new(3.33246873, 0.67977335, 0.3645056).unwrap();
        let r = RenewalDistribution::GeneralizedGamma(g);
        let hist = OccurrenceHistory::new(vec![], 1.0).unwrap();
        let v = conditional_intensity(&TrendSpec::Constant { lambda: 1.0 }, &r, &hist, 0.5).unwrap();
        assert_relative_eq!(v, g.pdf(0.5) / (1.0 - g.cdf(0.5)), max_relative = 1e-12);
    }

    #[test]
    fn marginal_first_index_and_constant_trend() {
        let r = RenewalDistribution::GeneralizedGamma(GeneralizedGamma::new(2.0, 1.0, 0.5).unwrap());
        let p = TrendSpec::Power { gamma: 1.2 };
        assert_relative_eq!(
            trp_delay_marginal_cdf(&p, &r, 1, 0.7, MarginalMethod::Auto).unwrap(),
            r.cdf(0.7f64.powf(1.2))
        );
        let c = TrendSpec::Constant { lambda: 2.0 };
        for k in 1..6 {
            assert_relative_eq!(trp_delay_marginal_cdf(&c, &r, k, 0.3, MarginalMethod::Auto).unwrap(), r.cdf(0.6));
        }
        assert!(matches!(
            trp_delay_marginal_cdf(&p, &r, 5, 0.3, MarginalMethod::Quadrature),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn fit_requires_ten_events() {
        let h = OccurrenceHistory::new(vec![0.1, 0.2], 1.0).unwrap();
        assert!(matches!(
            fit_trend(&h, TrendFamily::Constant, &RenewalDistribution::unit_exponential()),
            Err(Error::InsufficientData { got: 2, need: 10 })
        ));
    }
}
