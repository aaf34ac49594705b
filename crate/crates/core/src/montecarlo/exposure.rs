use super::{chunked, with_pool, SimConfig};
use crate::distributions::{DelayDistribution, Dependence, RenewalDistribution, SeverityModel};
use crate::error::{Error, Result};
use crate::financial::{FinancialAssumptions, PaymentType};
use crate::rng::{open_unit, stream, Role};
use crate::trend::{sample_trp, TrendSpec};
use serde::{Deserialize, Serialize};

/// Occurrence process, delays and severities for unconditional simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureModels {
    pub trend: TrendSpec<f64>,
    pub renewal: RenewalDistribution<f64>,
    pub reporting: DelayDistribution<f64>,
    pub settlement: DelayDistribution<f64>,
    pub indemnity: SeverityModel<f64>,
    pub expense: SeverityModel<f64>,
    pub dependence: Dependence<f64>,
}

impl ExposureModels {
    pub fn validate(&self) -> Result<()> {
        self.trend.validate()?;
        self.renewal.validate()?;
        self.reporting.validate()?;
        self.settlement.validate()?;
        self.indemnity.validate()?;
        self.expense.validate()
    }
}

/// Per-path occurrence (`occ`), claims-made (`cm`, reported by the horizon)
/// and tail-coverage (`tc`, reported after it) costs and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureSample {
    pub horizon: f64,
    pub z_occ: Vec<f64>,
    pub z_cm: Vec<f64>,
    pub z_tc: Vec<f64>,
    pub n_occ: Vec<u64>,
    pub n_cm: Vec<u64>,
    pub n_tc: Vec<u64>,
    /// Paths on which a finite-mass trend ran out before the horizon.
    pub saturated_paths: usize,
}

impl ExposureSample {
    pub fn len(&self) -> usize {
        self.z_occ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_occ.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportions {
    pub count_based: f64,
    pub cost_based: f64,
}

struct PathDraw {
    z_cm: f64,
    z_tc: f64,
    n_cm: u64,
    n_tc: u64,
    saturated: bool,
}

/// Simulates occurrences on `[0, cfg.horizon]` and, for every event, its
/// reporting and settlement delays and payments, split by whether the claim
/// is reported by the horizon.
///
/// Each path's occurrence stream depends only on `(seed, path)` and each
/// event's streams on `(seed, path, event index)`, so samples at nested
/// horizons share their events and delay multipliers act on common draws.
pub fn simulate_exposure(models: &ExposureModels, fa: &FinancialAssumptions<f64>, cfg: &SimConfig) -> Result<ExposureSample> {
    cfg.validate()?;
    models.validate()?;
    let horizon = cfg.horizon;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let seed = cfg.seed;
    let (mr, ms) = (cfg.delay_scale.reporting, cfg.delay_scale.settlement);
    let one_path = |p: u64| -> Result<PathDraw> {
        let mut occ = stream(seed, p, 0, Role::Occurrence);
        let hist = sample_trp(&models.trend, &models.renewal, horizon, &mut occ)?;
        let mut d = PathDraw { z_cm: 0.0, z_tc: 0.0, n_cm: 0, n_tc: 0, saturated: hist.saturated };
        for (k, &t_occ) in hist.times.iter().enumerate() {
            let k = k as u64;
            let xi = mr * models.reporting.sample(&mut stream(seed, p, k, Role::Reporting));
            let zeta = ms * models.settlement.sample(&mut stream(seed, p, k, Role::Settlement));
            let (x0, y0) = match &models.dependence {
                Dependence::Coupled => (
                    models.indemnity.sample_base(&mut stream(seed, p, k, Role::Indemnity)),
                    models.expense.sample_base(&mut stream(seed, p, k, Role::Expense)),
                ),
                Dependence::Frank(cop) => {
                    let mut rc = stream(seed, p, k, Role::Copula);
                    let u = open_unit(&mut rc);
                    let w = open_unit(&mut rc);
                    (models.indemnity.base_quantile(u), models.expense.base_quantile(cop.conditional_inverse(u, w)))
                }
            };
            let x = if x0 > 0.0 { x0 * models.indemnity.log_shift(zeta, None).exp() } else { 0.0 };
            let y = if y0 > 0.0 { y0 * models.expense.log_shift(zeta, None).exp() } else { 0.0 };
            let when = t_occ + xi + zeta;
            let cost = fa.factor_unchecked(PaymentType::Indemnity, when) * x + fa.factor_unchecked(PaymentType::Expense, when) * y;
            if t_occ + xi <= horizon {
                d.n_cm += 1;
                d.z_cm += cost;
            } else {
                d.n_tc += 1;
                d.z_tc += cost;
            }
        }
        Ok(d)
    };
    let parts = with_pool(cfg.threads, || {
        chunked(cfg.n_sims, |range| range.map(|p| one_path(p as u64)).collect::<Result<Vec<_>>>())
    })?;
    let n = cfg.n_sims;
    let mut s = ExposureSample {
        horizon,
        z_occ: Vec::with_capacity(n),
        z_cm: Vec::with_capacity(n),
        z_tc: Vec::with_capacity(n),
        n_occ: Vec::with_capacity(n),
        n_cm: Vec::with_capacity(n),
        n_tc: Vec::with_capacity(n),
        saturated_paths: 0,
    };
    for part in parts {
        for d in part? {
            s.z_occ.push(d.z_cm + d.z_tc);
            s.z_cm.push(d.z_cm);
            s.z_tc.push(d.z_tc);
            s.n_occ.push(d.n_cm + d.n_tc);
            s.n_cm.push(d.n_cm);
            s.n_tc.push(d.n_tc);
            s.saturated_paths += usize::from(d.saturated);
        }
    }
    Ok(s)
}

fn sum_u(v: &[u64]) -> f64 {
    v.iter().sum::<u64>() as f64
}

fn sum_f(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// `E[N_tc]/E[N_occ]` and `E[Z_tc]/E[Z_occ]` from sample means.
pub fn ibnr_proportions(s: &ExposureSample) -> Result<Proportions> {
    let n_occ = sum_u(&s.n_occ);
    if n_occ == 0.0 {
        return Err(Error::UndefinedRatio("no occurrences on any path".into()));
    }
    let z_occ = sum_f(&s.z_occ);
    if !(z_occ > 0.0) {
        return Err(Error::UndefinedRatio("occurrence cost is zero on every path".into()));
    }
    Ok(Proportions { count_based: sum_u(&s.n_tc) / n_occ, cost_based: (sum_f(&s.z_tc) / z_occ).clamp(0.0, 1.0) })
}

/// `(E[N_occ(t+h)] − E[N_occ(t)]) / E[N_occ(t+h)]` and its cost analogue,
/// from two samples drawn with the same seed at horizons `t < t + h`.
pub fn upr_proportions(at_t: &ExposureSample, at_t_plus_h: &ExposureSample) -> Result<Proportions> {
    if !(at_t_plus_h.horizon > at_t.horizon) {
        return Err(Error::Precondition(format!(
            "extension must be positive: horizons {} and {}",
            at_t.horizon, at_t_plus_h.horizon
        )));
    }
    if at_t.len() != at_t_plus_h.len() {
        return Err(Error::Precondition("samples must have the same number of paths".into()));
    }
    let (n0, n1) = (sum_u(&at_t.n_occ), sum_u(&at_t_plus_h.n_occ));
    if n1 == 0.0 {
        return Err(Error::UndefinedRatio("no occurrences by t + h on any path".into()));
    }
    let (z0, z1) = (sum_f(&at_t.z_occ), sum_f(&at_t_plus_h.z_occ));
    if !(z1 > 0.0) {
        return Err(Error::UndefinedRatio("occurrence cost by t + h is zero on every path".into()));
    }
    Ok(Proportions {
        count_based: ((n1 - n0) / n1).clamp(0.0, 1.0),
        cost_based: ((z1 - z0) / z1).clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{LognormalComponent, PositiveDistribution};

    fn models(reporting: PositiveDistribution<f64>) -> ExposureModels {
        let sev = SeverityModel::new(0.1, vec![LognormalComponent { weight: 1.0, mu: 0.0, sigma: 0.4 }], 0.0, None).unwrap();
        ExposureModels {
            trend: TrendSpec::Constant { lambda: 3.0 },
            renewal: PositiveDistribution::unit_exponential(),
            reporting,
            settlement: PositiveDistribution::Exponential { rate: 0.5 },
            indemnity: sev.clone(),
            expense: sev,
            dependence: Dependence::Coupled,
        }
    }

    #[test]
    fn path_identities_and_immediate_reporting() {
        let fa = FinancialAssumptions::new(0.02, 0.02, 0.05, 0.05, 1.0);
        let cfg = SimConfig { horizon: 1.0, ..SimConfig::new(2000, 3) };
        let s = simulate_exposure(&models(PositiveDistribution::PointMass { at: 0.0 }), &fa, &cfg).unwrap();
        assert!(s.z_tc.iter().all(|&z| z == 0.0));
        assert!(s.n_tc.iter().all(|&n| n == 0));
        let s = simulate_exposure(&models(PositiveDistribution::Exponential { rate: 1.0 }), &fa, &cfg).unwrap();
        for p in 0..s.len() {
            assert_eq!(s.z_occ[p], s.z_cm[p] + s.z_tc[p]);
            assert_eq!(s.n_occ[p], s.n_cm[p] + s.n_tc[p]);
        }
        let r = ibnr_proportions(&s).unwrap();
        assert!(r.count_based > 0.0 && r.count_based < 1.0);
    }

    #[test]
    fn nested_horizons_share_events() {
        let fa = FinancialAssumptions::new(0.02, 0.02, 0.05, 0.05, 1.0);
        let m = models(PositiveDistribution::Exponential { rate: 1.0 });
        let a = simulate_exposure(&m, &fa, &SimConfig { horizon: 0.5, ..SimConfig::new(3000, 9) }).unwrap();
        let b = simulate_exposure(&m, &fa, &SimConfig { horizon: 1.0, ..SimConfig::new(3000, 9) }).unwrap();
        assert!(a.n_occ.iter().zip(&b.n_occ).all(|(x, y)| x <= y));
        let u = upr_proportions(&a, &b).unwrap();
        // homogeneous Poisson: half of the exposure is unearned
        assert!((u.count_based - 0.5).abs() < 0.02, "{u:?}");
        assert!(upr_proportions(&b, &a).is_err());
    }
}
