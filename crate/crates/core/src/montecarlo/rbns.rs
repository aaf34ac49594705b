use super::{try_chunked, with_pool, SimConfig};
use crate::distributions::{Dependence, TruncatedDelay};
use crate::error::{Error, Result};
use crate::financial::{FinancialAssumptions, PaymentType};
use crate::reserving::{ExcludedClaim, RbnsInfoSet, ReserveModels};
use crate::rng::{open_unit, stream, Role};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub i: usize,
    pub j: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Simulated reserve draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbnsSample {
    pub totals: Vec<f64>,
    pub cells: Vec<CellStats>,
    pub excluded: Vec<ExcludedClaim>,
    pub warnings: Vec<String>,
}

impl RbnsSample {
    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.totals)
    }

    pub fn sd(&self) -> f64 {
        if self.totals.len() < 2 {
            return 0.0;
        }
        crate::stats::variance(&self.totals).sqrt()
    }

    /// Monte Carlo standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        self.sd() / (self.totals.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PreparedClaim {
    /// Position in the information set's claim order; keys the streams.
    pub id: u64,
    pub year: usize,
    pub t_occ: f64,
    pub report: f64,
    pub class: Option<usize>,
    pub lower: f64,
    pub upper: f64,
    pub delay: Option<TruncatedDelay<f64>>,
}

/// Per-path reserve generator for a fixed information set and model.
#[derive(Debug, Clone)]
pub struct RbnsSimulator {
    t: usize,
    seed: u64,
    pub(crate) claims: Vec<PreparedClaim>,
    models: ReserveModels<f64>,
    fa: FinancialAssumptions<f64>,
    cells: Vec<(usize, usize)>,
    // index of cell (i, t + 2 − i) for reporting year i
    year_offset: Vec<usize>,
    excluded: Vec<ExcludedClaim>,
    warnings: Vec<String>,
}

fn first_j(t: usize, i: usize) -> usize {
    (t + 2).saturating_sub(i)
}

impl RbnsSimulator {
    /// Prepares the truncated settlement laws. Claims whose window carries no
    /// probability are excluded with a warning, as in the moment evaluator.
    pub fn new(
        info: &RbnsInfoSet<f64>,
        models: &ReserveModels<f64>,
        fa: &FinancialAssumptions<f64>,
        cfg: &SimConfig,
    ) -> Result<Self> {
        Self::build(info, models, fa, cfg, true)
    }

    pub(crate) fn build(
        info: &RbnsInfoSet<f64>,
        models: &ReserveModels<f64>,
        fa: &FinancialAssumptions<f64>,
        cfg: &SimConfig,
        truncate: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut models = cfg.dependence.apply(models)?;
        if cfg.delay_scale.settlement != 1.0 {
            models.settlement = models.settlement.scaled(cfg.delay_scale.settlement);
        }
        models.validate()?;
        let t = info.valuation_time;
        if (fa.valuation_time - t as f64).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "financial valuation time {} differs from the information-set valuation {t}",
                fa.valuation_time
            )));
        }
        let mut cells = Vec::new();
        let mut year_offset = vec![0; t + 1];
        for i in 2..=t {
            year_offset[i] = cells.len();
            for j in first_j(t, i)..=t {
                cells.push((i, j));
            }
        }
        let mut claims = Vec::new();
        let mut excluded = Vec::new();
        let mut warnings = Vec::new();
        let mut id = 0u64;
        for i in 1..=t {
            for (idx, c) in info.years[i - 1].iter().enumerate() {
                let this = id;
                id += 1;
                let (lo, hi) = c.window(t);
                let delay = if !truncate {
                    None
                } else {
                    match TruncatedDelay::new(models.settlement.clone(), lo, hi) {
                        Ok(d) => Some(d),
                        Err(Error::DegenerateWindow { .. }) | Err(Error::InvalidParameter(_)) => {
                            let reason = format!("settlement window ({lo:.6}, {hi:.6}] has zero probability");
                            warnings.push(format!("reporting year {i}, claim {idx}: excluded, {reason}"));
                            excluded.push(ExcludedClaim { accident_year: i, index: idx, reason });
                            continue;
                        }
                        Err(e) => return Err(e),
                    }
                };
                if !truncate && !(hi > lo) {
                    let reason = format!("settlement window ({lo:.6}, {hi:.6}] is empty");
                    warnings.push(format!("reporting year {i}, claim {idx}: excluded, {reason}"));
                    excluded.push(ExcludedClaim { accident_year: i, index: idx, reason });
                    continue;
                }
                claims.push(PreparedClaim {
                    id: this,
                    year: i,
                    t_occ: c.t_occ,
                    report: c.report_time(),
                    class: c.class,
                    lower: lo,
                    upper: hi,
                    delay,
                });
            }
        }
        Ok(Self { t, seed: cfg.seed, claims, models, fa: *fa, cells, year_offset, excluded, warnings })
    }

    pub fn open_claims(&self) -> usize {
        self.claims.len()
    }

    pub(crate) fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws `ζ` for claim `k` on path `path` from its truncated law.
    pub(crate) fn draw_delay(&self, k: usize, path: u64) -> f64 {
        let c = &self.claims[k];
        let mut rng = stream(self.seed, path, c.id, Role::Settlement);
        c.delay.as_ref().expect("truncated law prepared").sample(&mut rng)
    }

    /// Discounted payment `A₁X + A₂Y` of claim `k` settling after delay `zeta`.
    pub(crate) fn payment(&self, k: usize, zeta: f64, path: u64) -> f64 {
        let c = &self.claims[k];
        let (mx, my) = (&self.models.indemnity, &self.models.expense);
        let (x0, y0) = match &self.models.dependence {
            Dependence::Coupled => {
                let mut rx = stream(self.seed, path, c.id, Role::Indemnity);
                let mut ry = stream(self.seed, path, c.id, Role::Expense);
                (mx.sample_base(&mut rx), my.sample_base(&mut ry))
            }
            Dependence::Frank(cop) => {
                let mut rc = stream(self.seed, path, c.id, Role::Copula);
                let u = open_unit(&mut rc);
                let w = open_unit(&mut rc);
                let v = cop.conditional_inverse(u, w);
                (mx.base_quantile(u), my.base_quantile(v))
            }
        };
        let x = if x0 > 0.0 { x0 * mx.log_shift(zeta, c.class).exp() } else { 0.0 };
        let y = if y0 > 0.0 { y0 * my.log_shift(zeta, c.class).exp() } else { 0.0 };
        let when = c.report + zeta;
        self.fa.factor_unchecked(PaymentType::Indemnity, when) * x + self.fa.factor_unchecked(PaymentType::Expense, when) * y
    }

    /// Cell index of the payment of claim `k` at delay `zeta`.
    pub(crate) fn cell_of(&self, k: usize, zeta: f64) -> usize {
        let c = &self.claims[k];
        let fj = first_j(self.t, c.year);
        // ζ ∈ (i+j−2−r, i+j−1−r]  ⇔  j = ⌈r + ζ⌉ − i + 1
        let j = ((c.report + zeta).ceil() as i64 - c.year as i64 + 1).clamp(fj as i64, self.t as i64) as usize;
        self.year_offset[c.year] + (j - fj)
    }

    /// Total reserve on one path, adding cell amounts into `cells`.
    pub fn path(&self, path: u64, cells: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for k in 0..self.claims.len() {
            let zeta = self.draw_delay(k, path);
            let v = self.payment(k, zeta, path);
            cells[self.cell_of(k, zeta)] += v;
            total += v;
        }
        total
    }

    /// Runs paths `0..n`, with delays supplied per path by `zetas`.
    pub(crate) fn run_with<Z>(&self, n: usize, threads: Option<usize>, zetas: Z) -> Result<RbnsSample>
    where
        Z: Fn(u64, &mut [f64]) -> Result<()> + Sync,
    {
        let nc = self.cells.len();
        let parts = with_pool(threads, || {
            try_chunked(n, |range| {
                let mut totals = Vec::with_capacity(range.len());
                let mut sum = vec![0.0; nc];
                let mut sq = vec![0.0; nc];
                let mut z = vec![0.0; self.claims.len()];
                let mut cell = vec![0.0; nc];
                for p in range {
                    let p = p as u64;
                    zetas(p, &mut z)?;
                    cell.iter_mut().for_each(|v| *v = 0.0);
                    let mut total = 0.0;
                    for (k, &zeta) in z.iter().enumerate() {
                        let v = self.payment(k, zeta, p);
                        cell[self.cell_of(k, zeta)] += v;
                        total += v;
                    }
                    for q in 0..nc {
                        sum[q] += cell[q];
                        sq[q] += cell[q] * cell[q];
                    }
                    totals.push(total);
                }
                Ok((totals, sum, sq))
            })
        })??;
        let mut totals = Vec::with_capacity(n);
        let mut sum = vec![0.0; nc];
        let mut sq = vec![0.0; nc];
        for (t, s, q) in parts {
            totals.extend(t);
            for c in 0..nc {
                sum[c] += s[c];
                sq[c] += q[c];
            }
        }
        let nf = n as f64;
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(c, &(i, j))| {
                let mean = sum[c] / nf;
                let var = if n > 1 { ((sq[c] - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
                CellStats { i, j, mean, sd: var.sqrt() }
            })
            .collect();
        Ok(RbnsSample { totals, cells, excluded: self.excluded.clone(), warnings: self.warnings.clone() })
    }

    pub fn run(&self, n: usize, threads: Option<usize>) -> Result<RbnsSample> {
        self.run_with(n, threads, |p, z| {
            for (k, v) in z.iter_mut().enumerate() {
                *v = self.draw_delay(k, p);
            }
            Ok(())
        })
    }
}

/// Simulates `W(t)`: for every path and open claim, draws `ζ` from its
/// doubly truncated law, then `(X, Y)` given `ζ` under the dependence mode,
/// and sums the discounted payments.
pub fn simulate_rbns(
    info: &RbnsInfoSet<f64>,
    models: &ReserveModels<f64>,
    fa: &FinancialAssumptions<f64>,
    cfg: &SimConfig,
) -> Result<RbnsSample> {
    RbnsSimulator::new(info, models, fa, cfg)?.run(cfg.n_sims, cfg.threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{GeneralizedGamma, LognormalComponent, PositiveDistribution, SeverityModel};
    use crate::reserving::OpenClaim;

    fn small() -> (RbnsInfoSet<f64>, ReserveModels<f64>) {
        let claims = vec![
            OpenClaim { t_occ: 0.2, xi: 1.3, class: None, accident_year: 2 },
            OpenClaim { t_occ: 1.1, xi: 1.5, class: None, accident_year: 3 },
            OpenClaim { t_occ: 2.5, xi: 0.7, class: None, accident_year: 4 },
        ];
        let info = RbnsInfoSet::from_claims(4, claims).unwrap();
        let sev = SeverityModel::new(0.2, vec![LognormalComponent { weight: 1.0, mu: 1.0, sigma: 0.5 }], 0.1, None).unwrap();
        let models = ReserveModels {
            settlement: PositiveDistribution::GeneralizedGamma(GeneralizedGamma::new(3.33246873, 0.67977335, 0.3645056).unwrap()),
            indemnity: sev.clone(),
            expense: sev,
            dependence: Dependence::Coupled,
        };
        (info, models)
    }

    #[test]
    fn cells_add_up_and_paths_are_reproducible() {
        let (info, models) = small();
        let fa = FinancialAssumptions::new(0.04, 0.04, 0.06, 0.06, 4.0);
        let cfg = SimConfig::new(5000, 11);
        let a = simulate_rbns(&info, &models, &fa, &cfg).unwrap();
        let b = simulate_rbns(&info, &models, &fa, &SimConfig { threads: Some(1), ..cfg }).unwrap();
        assert_eq!(a, b);
        let cell_total: f64 = a.cells.iter().map(|c| c.mean).sum();
        assert!((cell_total - a.mean()).abs() <= 1e-9 * a.mean());
        assert_eq!(a.cells.len(), 6);
    }

    #[test]
    fn zero_severities_give_zero_paths() {
        let (info, mut models) = small();
        models.indemnity = SeverityModel::zero();
        models.expense = SeverityModel::zero();
        let fa = FinancialAssumptions::new(0.04, 0.04, 0.06, 0.06, 4.0);
        let s = simulate_rbns(&info, &models, &fa, &SimConfig::new(100, 1)).unwrap();
        assert!(s.totals.iter().all(|&v| v == 0.0));
    }
}
