//! RBNS information sets and the conditional first and second moments of
//! predicted payments by cell of the run-off triangle.
//!
//! Claim `k` of reporting year `i` has report time `r = T + ξ`. At integer
//! valuation time `t` its settlement delay is known to lie in
//! `(t − r, t + i − 1 − r]`; the payment falls in development year `j` when
//! `ζ ∈ (i + j − 2 − r, i + j − 1 − r]`. Claims are conditionally independent
//! given the information sets, so every moment reduces to univariate
//! integrals per claim and cell.

use crate::distributions::{base_cross_moment, DelayDistribution, Dependence, SeverityModel};
use crate::error::{Error, Result};
use crate::financial::{FinancialAssumptions, PaymentType};
use crate::quadrature::QuadOptions;
use crate::real::Real;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenClaim<T> {
    /// Occurrence time `T_k`, years from the origin.
    pub t_occ: T,
    /// Reporting delay `ξ_k` in years.
    pub xi: T,
    #[serde(default)]
    pub class: Option<usize>,
    /// Reporting year `i`, with `i − 1 < T + ξ ≤ i`.
    pub accident_year: usize,
}

impl<T: Real> OpenClaim<T> {
    pub fn report_time(&self) -> T {
        self.t_occ + self.xi
    }

    /// Settlement-delay window `(t − r, t + i − 1 − r]`.
    pub fn window(&self, t: usize) -> (T, T) {
        let r = self.report_time();
        let tt = T::lit(t as f64);
        (tt - r, tt + T::lit(self.accident_year as f64) - T::one() - r)
    }

    /// Settlement-delay interval that pays in development year `j`.
    pub fn cell_interval(&self, t: usize, j: usize) -> (T, T) {
        let (lo, hi) = self.window(t);
        let r = self.report_time();
        let base = T::lit((self.accident_year + j) as f64);
        ((base - T::lit(2.0) - r).max(lo), (base - T::one() - r).min(hi))
    }
}

/// A claim as recorded: occurrence, report and (if closed) settlement times in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedClaim<T> {
    pub occurrence: T,
    pub report: T,
    #[serde(default)]
    pub settlement: Option<T>,
    #[serde(default)]
    pub class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InfoSetDiagnostics {
    /// Reported after the valuation time (IBNR at `t`).
    pub reported_after_valuation: usize,
    /// Settled on or before the valuation time.
    pub settled: usize,
    /// Reported at or before the origin, outside every reporting year.
    pub before_origin: usize,
    /// Inconsistent timestamps (report before occurrence, settlement before report).
    pub invalid: usize,
}

/// The sets `B_i`, `i = 1..=t`, of open claims at valuation time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbnsInfoSet<T> {
    pub valuation_time: usize,
    /// `years[i − 1]` holds `B_i`.
    pub years: Vec<Vec<OpenClaim<T>>>,
    #[serde(default)]
    pub diagnostics: InfoSetDiagnostics,
}

impl<T: Real> RbnsInfoSet<T> {
    pub fn empty(t: usize) -> Self {
        Self { valuation_time: t, years: vec![Vec::new(); t], diagnostics: InfoSetDiagnostics::default() }
    }

    /// Builds the sets from open claims, checking reporting-year alignment.
    pub fn from_claims(t: usize, claims: impl IntoIterator<Item = OpenClaim<T>>) -> Result<Self> {
        let mut info = Self::empty(t);
        for c in claims {
            let i = c.accident_year;
            let r = c.report_time();
            if i == 0 || i > t {
                return Err(Error::InvalidParameter(format!("reporting year {i} outside 1..={t}")));
            }
            if !(r > T::lit((i - 1) as f64) && r <= T::lit(i as f64)) {
                return Err(Error::InvalidParameter(format!("report time {r} is not in reporting year {i}")));
            }
            if !(c.xi >= T::zero()) || !(c.t_occ >= T::zero()) {
                return Err(Error::InvalidParameter("occurrence time and reporting delay must be ≥ 0".into()));
            }
            info.years[i - 1].push(c);
        }
        Ok(info)
    }

    pub fn count(&self, i: usize) -> usize {
        self.years.get(i.wrapping_sub(1)).map_or(0, Vec::len)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.years.iter().map(Vec::len).collect()
    }

    pub fn total_claims(&self) -> usize {
        self.years.iter().map(Vec::len).sum()
    }

    pub fn claims(&self) -> impl Iterator<Item = &OpenClaim<T>> {
        self.years.iter().flatten()
    }

    /// Development years populated for reporting year `i`: `t+2−i ..= t`.
    pub fn cell_range(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        let t = self.valuation_time;
        (t + 2).saturating_sub(i)..=t
    }

    pub fn is_lower_cell(&self, i: usize, j: usize) -> bool {
        let t = self.valuation_time;
        i >= 2 && i <= t && j <= t && i + j >= t + 2
    }
}

/// Selects the open claims of each reporting year at integer valuation time `t`.
pub fn build_info_sets<T: Real>(claims: &[ReportedClaim<T>], t: usize) -> RbnsInfoSet<T> {
    let mut info = RbnsInfoSet::empty(t);
    let tt = T::lit(t as f64);
    for c in claims {
        if !(c.report >= c.occurrence) || c.settlement.is_some_and(|s| !(s >= c.report)) {
            info.diagnostics.invalid += 1;
            continue;
        }
        if c.report > tt {
            info.diagnostics.reported_after_valuation += 1;
            continue;
        }
        if c.settlement.is_some_and(|s| s <= tt) {
            info.diagnostics.settled += 1;
            continue;
        }
        if c.report <= T::zero() {
            info.diagnostics.before_origin += 1;
            continue;
        }
        let i = c.report.ceil().to_usize().unwrap_or(0).max(1);
        info.years[i - 1].push(OpenClaim { t_occ: c.occurrence, xi: c.report - c.occurrence, class: c.class, accident_year: i });
    }
    info
}

/// Models for the settlement delay, the two payment streams, and their dependence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReserveModels<T> {
    pub settlement: DelayDistribution<T>,
    pub indemnity: SeverityModel<T>,
    pub expense: SeverityModel<T>,
    pub dependence: Dependence<T>,
}

impl<T: Real> ReserveModels<T> {
    pub fn validate(&self) -> Result<()> {
        self.settlement.validate()?;
        self.indemnity.validate()?;
        self.expense.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellPrediction<T> {
    pub i: usize,
    pub j: usize,
    pub mean: T,
    pub second_moment: T,
    pub sd: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedClaim {
    pub accident_year: usize,
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ClaimCell<T> {
    m1: T,
    s2: T,
}

#[derive(Debug, Clone, PartialEq)]
struct ClaimMoments<T> {
    /// Indexed by development year offset within the year's cell range.
    cells: Vec<ClaimCell<T>>,
    whole: ClaimCell<T>,
}

#[derive(Debug, Clone, PartialEq)]
struct YearMoments<T> {
    i: usize,
    first_j: usize,
    claims: Vec<ClaimMoments<T>>,
}

impl<T: Real> YearMoments<T> {
    fn ncells(&self) -> usize {
        self.i.saturating_sub(1)
    }

    fn cell_mean(&self, k: usize) -> T {
        self.claims.iter().fold(T::zero(), |s, c| s + c.cells[k].m1)
    }

    fn cell_second(&self, k: usize) -> T {
        let mut s2 = T::zero();
        let mut m = T::zero();
        let mut m_sq = T::zero();
        for c in &self.claims {
            let cc = c.cells[k];
            s2 = s2 + cc.s2;
            m = m + cc.m1;
            m_sq = m_sq + cc.m1 * cc.m1;
        }
        s2 + m * m - m_sq
    }

    fn cell_variance(&self, k: usize) -> T {
        self.claims.iter().fold(T::zero(), |s, c| s + (c.cells[k].s2 - c.cells[k].m1 * c.cells[k].m1))
    }

    fn cross(&self, a: usize, b: usize) -> T {
        let mut pa = T::zero();
        let mut pb = T::zero();
        let mut same = T::zero();
        for c in &self.claims {
            pa = pa + c.cells[a].m1;
            pb = pb + c.cells[b].m1;
            same = same + c.cells[a].m1 * c.cells[b].m1;
        }
        pa * pb - same
    }

    fn mean(&self) -> T {
        (0..self.ncells()).fold(T::zero(), |s, k| s + self.cell_mean(k))
    }

    /// `E[W_i²]` assembled from cells and within-year cross terms.
    fn second_moment(&self) -> T {
        let n = self.ncells();
        let mut s = T::zero();
        for a in 0..n {
            s = s + self.cell_second(a);
            for b in 0..n {
                if a != b {
                    s = s + self.cross(a, b);
                }
            }
        }
        s
    }
}

/// Summary of the conditional moments of the RBNS reserve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReserveMoments<T> {
    pub valuation_time: usize,
    pub cells: Vec<CellPrediction<T>>,
    pub year_means: Vec<T>,
    pub total_mean: T,
    /// Sum of the whole-window integrals, an independent route to the mean.
    pub window_mean: T,
    pub total_second_moment: T,
    pub total_sd: T,
    pub cv: T,
    pub excluded: Vec<ExcludedClaim>,
    pub warnings: Vec<String>,
}

/// Evaluator holding the per-claim, per-cell integrals.
#[derive(Debug, Clone)]
pub struct ConditionalMoments<T> {
    t: usize,
    years: Vec<YearMoments<T>>,
    excluded: Vec<ExcludedClaim>,
    warnings: Vec<String>,
}

/// Tolerance on the agreement of the cell-sum and whole-window means.
pub const MEAN_CONSISTENCY_TOL: f64 = 1e-6;

impl<T: Real> ConditionalMoments<T> {
    pub fn new(info: &RbnsInfoSet<T>, models: &ReserveModels<T>, fa: &FinancialAssumptions<T>) -> Result<Self> {
        Self::with_options(info, models, fa, &QuadOptions::with_tol(T::zero(), T::lit(1e-10)))
    }

    pub fn with_options(
        info: &RbnsInfoSet<T>,
        models: &ReserveModels<T>,
        fa: &FinancialAssumptions<T>,
        opts: &QuadOptions<T>,
    ) -> Result<Self> {
        models.validate()?;
        let t = info.valuation_time;
        if (fa.valuation_time - T::lit(t as f64)).abs() > T::lit(1e-9) {
            return Err(Error::InvalidParameter(format!(
                "financial valuation time {} differs from the information-set valuation {t}",
                fa.valuation_time
            )));
        }
        let cross_base = base_cross_moment(&models.indemnity, &models.expense, &models.dependence)?;
        let mut years = Vec::with_capacity(t);
        let mut excluded = Vec::new();
        let mut warnings = Vec::new();
        for i in 1..=t {
            let claims = &info.years[i - 1];
            let first_j = (t + 2).saturating_sub(i);
            let results: Vec<Result<ClaimMoments<T>>> = claims
                .par_iter()
                .map(|c| claim_moments(c, t, first_j, models, fa, cross_base, opts))
                .collect();
            let mut kept = Vec::with_capacity(claims.len());
            for (idx, r) in results.into_iter().enumerate() {
                match r {
                    Ok(m) => kept.push(m),
                    Err(Error::DegenerateWindow { lower, upper }) => {
                        let reason = format!("settlement window ({lower:.6}, {upper:.6}] has zero probability");
                        warnings.push(format!("reporting year {i}, claim {idx}: excluded, {reason}"));
                        excluded.push(ExcludedClaim { accident_year: i, index: idx, reason });
                    }
                    Err(e) => return Err(e),
                }
            }
            years.push(YearMoments { i, first_j, claims: kept });
        }
        Ok(Self { t, years, excluded, warnings })
    }

    fn year(&self, i: usize) -> Result<&YearMoments<T>> {
        if i == 0 || i > self.t {
            return Err(Error::Precondition(format!("reporting year {i} outside 1..={}", self.t)));
        }
        Ok(&self.years[i - 1])
    }

    fn cell_index(&self, i: usize, j: usize) -> Result<(&YearMoments<T>, usize)> {
        let y = self.year(i)?;
        if i < 2 || j < y.first_j || j > self.t {
            return Err(Error::Precondition(format!("cell ({i}, {j}) is not in the lower triangle for t = {}", self.t)));
        }
        Ok((y, j - y.first_j))
    }

    pub fn cell_mean(&self, i: usize, j: usize) -> Result<T> {
        let (y, k) = self.cell_index(i, j)?;
        Ok(y.cell_mean(k))
    }

    pub fn cell_second_moment(&self, i: usize, j: usize) -> Result<T> {
        let (y, k) = self.cell_index(i, j)?;
        Ok(y.cell_second(k))
    }

    pub fn cell_sd(&self, i: usize, j: usize) -> Result<T> {
        let (y, k) = self.cell_index(i, j)?;
        Ok(y.cell_variance(k).max(T::zero()).sqrt())
    }

    /// `E[W_{i,j} W_{i,l}]` for `j ≠ l`.
    pub fn cross_cell_moment(&self, i: usize, j: usize, l: usize) -> Result<T> {
        if j == l {
            return Err(Error::Precondition("cross moment needs two distinct development years".into()));
        }
        let (y, a) = self.cell_index(i, j)?;
        let (_, b) = self.cell_index(i, l)?;
        Ok(y.cross(a, b))
    }

    pub fn year_mean(&self, i: usize) -> Result<T> {
        Ok(self.year(i)?.mean())
    }

    /// `E[W(t)]` as the sum of all cell means.
    pub fn total_mean(&self) -> T {
        self.years.iter().fold(T::zero(), |s, y| s + y.mean())
    }

    /// `E[W(t)]` from the whole settlement window of each claim.
    pub fn window_mean(&self) -> T {
        self.years.iter().flat_map(|y| y.claims.iter()).fold(T::zero(), |s, c| s + c.whole.m1)
    }

    /// Asserts that both routes to the mean agree.
    pub fn check_consistency(&self) -> Result<()> {
        let a = self.total_mean();
        let b = self.window_mean();
        let scale = a.abs().max(b.abs());
        if scale > T::zero() && (a - b).abs() > T::lit(MEAN_CONSISTENCY_TOL) * scale {
            return Err(Error::QuadratureMismatch { cells: a.to_f64_lossy(), window: b.to_f64_lossy() });
        }
        Ok(())
    }

    /// `E[W(t)²]`: within-year terms plus products of means across years.
    pub fn total_second_moment(&self) -> T {
        let means: Vec<T> = self.years.iter().map(|y| y.mean()).collect();
        let mut s = T::zero();
        for (a, y) in self.years.iter().enumerate() {
            s = s + y.second_moment();
            for (b, mb) in means.iter().enumerate() {
                if a != b {
                    s = s + means[a] * *mb;
                }
            }
        }
        s
    }

    /// Variance with the round-off clamp: small negative values become 0.
    pub fn total_variance(&self) -> Result<(T, Option<String>)> {
        let m = self.total_mean();
        let v = self.total_second_moment() - m * m;
        if v >= T::zero() {
            return Ok((v, None));
        }
        if -v <= T::lit(1e-8) * m * m {
            return Ok((T::zero(), Some(format!("negative variance {v} clamped to 0"))));
        }
        Err(Error::NegativeVariance { variance: v.to_f64_lossy() })
    }

    pub fn total_sd(&self) -> Result<T> {
        Ok(self.total_variance()?.0.sqrt())
    }

    pub fn excluded(&self) -> &[ExcludedClaim] {
        &self.excluded
    }

    pub fn summary(&self) -> Result<ReserveMoments<T>> {
        self.check_consistency()?;
        let mut warnings = self.warnings.clone();
        let (var, note) = self.total_variance()?;
        warnings.extend(note);
        let mut cells = Vec::new();
        for y in &self.years {
            for k in 0..y.ncells() {
                cells.push(CellPrediction {
                    i: y.i,
                    j: y.first_j + k,
                    mean: y.cell_mean(k),
                    second_moment: y.cell_second(k),
                    sd: y.cell_variance(k).max(T::zero()).sqrt(),
                });
            }
        }
        let total_mean = self.total_mean();
        let total_sd = var.sqrt();
        Ok(ReserveMoments {
            valuation_time: self.t,
            cells,
            year_means: self.years.iter().map(|y| y.mean()).collect(),
            total_mean,
            window_mean: self.window_mean(),
            total_second_moment: self.total_second_moment(),
            total_sd,
            cv: if total_mean > T::zero() { total_sd / total_mean } else { T::zero() },
            excluded: self.excluded.clone(),
            warnings,
        })
    }
}

fn claim_moments<T: Real>(
    c: &OpenClaim<T>,
    t: usize,
    first_j: usize,
    models: &ReserveModels<T>,
    fa: &FinancialAssumptions<T>,
    cross_base: T,
    opts: &QuadOptions<T>,
) -> Result<ClaimMoments<T>> {
    let (lo, hi) = c.window(t);
    if !(hi > lo) {
        return Err(Error::DegenerateWindow { lower: lo.to_f64_lossy(), upper: hi.to_f64_lossy() });
    }
    let base = &models.settlement;
    let mass = base.interval_mass(lo, hi);
    if !(mass > T::zero()) {
        return Err(Error::DegenerateWindow { lower: lo.to_f64_lossy(), upper: hi.to_f64_lossy() });
    }
    let r = c.report_time();
    let (mx, my) = (&models.indemnity, &models.expense);
    let (ex1, ex2) = (mx.base_moment(T::one()), mx.base_moment(T::lit(2.0)));
    let (ey1, ey2) = (my.base_moment(T::one()), my.base_moment(T::lit(2.0)));
    // integrand pieces at settlement delay ν
    let parts = |nu: T| -> (T, T) {
        let x = r + nu;
        let a1 = fa.factor_unchecked(PaymentType::Indemnity, x);
        let a2 = fa.factor_unchecked(PaymentType::Expense, x);
        let sx = mx.log_shift(nu, c.class).exp();
        let sy = my.log_shift(nu, c.class).exp();
        let first = a1 * ex1 * sx + a2 * ey1 * sy;
        let second = a1 * a1 * ex2 * sx * sx + a2 * a2 * ey2 * sy * sy + T::lit(2.0) * a1 * a2 * cross_base * sx * sy;
        (first, second)
    };
    let integrate_pair = |a: T, b: T| -> ClaimCell<T> {
        let m1 = base.integrate(a, b, |nu| parts(nu).0, opts);
        let s2 = base.integrate(a, b, |nu| parts(nu).1, opts);
        ClaimCell { m1: m1 / mass, s2: s2 / mass }
    };
    let ncells = c.accident_year.saturating_sub(1);
    let mut cells = Vec::with_capacity(ncells);
    for k in 0..ncells {
        let (a, b) = c.cell_interval(t, first_j + k);
        cells.push(if b > a { integrate_pair(a, b) } else { ClaimCell { m1: T::zero(), s2: T::zero() } });
    }
    let whole = integrate_pair(lo, hi);
    Ok(ClaimMoments { cells, whole })
}

/// `E[W_{i,j}(t)]`.
pub fn cell_mean<T: Real>(
    info: &RbnsInfoSet<T>,
    i: usize,
    j: usize,
    models: &ReserveModels<T>,
    fa: &FinancialAssumptions<T>,
) -> Result<T> {
    ConditionalMoments::new(&single_year(info, i), models, fa)?.cell_mean(i, j)
}

/// `E[W_{i,j}(t)²]`.
pub fn cell_second_moment<T: Real>(
    info: &RbnsInfoSet<T>,
    i: usize,
    j: usize,
    models: &ReserveModels<T>,
    fa: &FinancialAssumptions<T>,
) -> Result<T> {
    ConditionalMoments::new(&single_year(info, i), models, fa)?.cell_second_moment(i, j)
}

/// `E[W_{i,j}(t) W_{i,l}(t)]`, `j ≠ l`.
pub fn cross_cell_moment<T: Real>(
    info: &RbnsInfoSet<T>,
    i: usize,
    j: usize,
    l: usize,
    models: &ReserveModels<T>,
    fa: &FinancialAssumptions<T>,
) -> Result<T> {
    if j == l {
        return Err(Error::Precondition("cross moment needs two distinct development years".into()));
    }
    ConditionalMoments::new(&single_year(info, i), models, fa)?.cross_cell_moment(i, j, l)
}

/// `E[W(t)]`, checked against the whole-window form.
pub fn total_mean<T: Real>(info: &RbnsInfoSet<T>, models: &ReserveModels<T>, fa: &FinancialAssumptions<T>) -> Result<T> {
    let m = ConditionalMoments::new(info, models, fa)?;
    m.check_consistency()?;
    Ok(m.total_mean())
}

/// `E[W(t)²]`.
pub fn total_second_moment<T: Real>(
    info: &RbnsInfoSet<T>,
    models: &ReserveModels<T>,
    fa: &FinancialAssumptions<T>,
) -> Result<T> {
    Ok(ConditionalMoments::new(info, models, fa)?.total_second_moment())
}

/// Standard deviation of `W(t)`.
pub fn total_sd<T: Real>(info: &RbnsInfoSet<T>, models: &ReserveModels<T>, fa: &FinancialAssumptions<T>) -> Result<T> {
    ConditionalMoments::new(info, models, fa)?.total_sd()
}

// restrict the evaluation to one reporting year
fn single_year<T: Real>(info: &RbnsInfoSet<T>, i: usize) -> RbnsInfoSet<T> {
    let mut out = RbnsInfoSet::empty(info.valuation_time);
    if i >= 1 && i <= info.valuation_time {
        out.years[i - 1] = info.years[i - 1].clone();
    }
    out
}
