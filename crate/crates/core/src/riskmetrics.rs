//! Empirical risk measures, risk capital, validation metrics and the
//! chain-ladder/Mack baseline.

use crate::error::{Error, Result};
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// Default reporting levels.
pub const DEFAULT_LEVELS: [f64; 3] = [0.60, 0.80, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelMeasure<T> {
    pub level: T,
    pub var: T,
    pub tvar: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary<T> {
    pub n: usize,
    pub mean: T,
    pub sd: T,
    pub cv: T,
    pub levels: Vec<LevelMeasure<T>>,
    /// `TVaR₉₅ − TVaR₆₀` when both levels are present.
    pub risk_capital: Option<T>,
}

impl<T: Real> RiskSummary<T> {
    pub fn at(&self, level: T) -> Option<&LevelMeasure<T>> {
        self.levels.iter().find(|m| (m.level - level).abs() < T::lit(1e-12))
    }
}

// number of order statistics at or below the p-quantile, ceil(p n) with a
// guard against p·n landing a hair above an integer
fn quantile_rank(p: f64, n: usize) -> usize {
    let x = p * n as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 * x.max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// Mean, sd, VaR and TVaR at each level, and risk capital.
///
/// `VaR_p` is the `⌈pn⌉`-th order statistic and `TVaR_p` the mean of the
/// `n − ⌈pn⌉` values above it.
pub fn risk_measures<T: Real>(sample: &[T], levels: &[T]) -> Result<RiskSummary<T>> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("sample contains non-finite values".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let nn = T::lit(n as f64);
    let mean = sorted.iter().fold(T::zero(), |s, &v| s + v) / nn;
    let var = if n > 1 {
        sorted.iter().fold(T::zero(), |s, &v| s + (v - mean) * (v - mean)) / T::lit((n - 1) as f64)
    } else {
        T::zero()
    };
    let sd = var.sqrt();
    // suffix sums for the tail means
    let mut suffix = vec![T::zero(); n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + sorted[k];
    }
    let mut out = Vec::with_capacity(levels.len());
    for &p in levels {
        let pf = p.to_f64_lossy();
        if !(pf > 0.0 && pf < 1.0) {
            return Err(Error::InvalidParameter(format!("risk level must lie in (0,1), got {pf}")));
        }
        let need = (1.0 / (1.0 - pf)).ceil() as usize;
        if n < need {
            return Err(Error::InsufficientData { got: n, need });
        }
        let k = quantile_rank(pf, n);
        let var_p = sorted[k - 1];
        let tvar_p = if k < n { suffix[k] / T::lit((n - k) as f64) } else { var_p };
        out.push(LevelMeasure { level: p, var: var_p, tvar: tvar_p });
    }
    let risk_capital = {
        let find = |l: f64| out.iter().find(|m| (m.level.to_f64_lossy() - l).abs() < 1e-12);
        match (find(0.95), find(0.60)) {
            (Some(hi), Some(lo)) => Some(hi.tvar - lo.tvar),
            _ => None,
        }
    };
    let cv = if mean > T::zero() { sd / mean } else { T::zero() };
    Ok(RiskSummary { n, mean, sd, cv, levels: out, risk_capital })
}

/// `RC = TVaR₉₅ − TVaR₆₀`.
pub fn risk_capital<T: Real>(summary: &RiskSummary<T>) -> Result<T> {
    let hi = summary.at(T::lit(0.95)).ok_or_else(|| Error::Precondition("95% level missing".into()))?;
    let lo = summary.at(T::lit(0.60)).ok_or_else(|| Error::Precondition("60% level missing".into()))?;
    Ok(hi.tvar - lo.tvar)
}

/// `RC` from the two tail values directly.
pub fn risk_capital_from<T: Real>(tvar95: T, tvar60: T) -> T {
    tvar95 - tvar60
}

/// Mean absolute percentage error of one estimate, in percent.
pub fn mape<T: Real>(estimate: T, truth: T) -> Result<T> {
    if truth == T::zero() {
        return Err(Error::Domain("MAPE is undefined for a zero reference value".into()));
    }
    Ok(T::lit(100.0) * (estimate - truth).abs() / truth.abs())
}

/// Coefficient of variation of a sample.
pub fn coefficient_of_variation<T: Real>(sample: &[T]) -> Result<T> {
    let s = risk_measures(sample, &[])?;
    if s.mean == T::zero() {
        return Err(Error::Domain("coefficient of variation undefined for zero mean".into()));
    }
    Ok(s.sd / s.mean)
}

/// Incremental run-off triangle: `rows[i][j]` is development year `j` of
/// accident year `i`; row `i` holds `n − i` known values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunoffTriangle<T> {
    pub rows: Vec<Vec<T>>,
}

impl<T: Real> RunoffTriangle<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InsufficientData { got: n, need: 2 });
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n - i {
                return Err(Error::InvalidParameter(format!(
                    "triangle row {i} has {} entries, expected {}",
                    r.len(),
                    n - i
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn from_cumulative(rows: Vec<Vec<T>>) -> Result<Self> {
        let inc = rows
            .into_iter()
            .map(|r| {
                let mut prev = T::zero();
                r.into_iter()
                    .map(|c| {
                        let d = c - prev;
                        prev = c;
                        d
                    })
                    .collect()
            })
            .collect();
        Self::new(inc)
    }

    pub fn cumulative(&self) -> Vec<Vec<T>> {
        self.rows
            .iter()
            .map(|r| {
                let mut acc = T::zero();
                r.iter()
                    .map(|&v| {
                        acc = acc + v;
                        acc
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLadderResult<T> {
    pub factors: Vec<T>,
    pub ultimates: Vec<T>,
    pub reserves: Vec<T>,
    pub reserve: T,
    /// Per accident year and total Mack standard errors.
    pub row_se: Vec<T>,
    pub se: T,
}

/// Volume-weighted chain ladder with Mack's standard error (no tail factor).
pub fn chain_ladder_mack<T: Real>(tri: &RunoffTriangle<T>) -> Result<ChainLadderResult<T>> {
    let c = tri.cumulative();
    let n = c.len();
    let mut f = vec![T::one(); n - 1];
    let mut sigma2 = vec![T::zero(); n - 1];
    for j in 0..n - 1 {
        let rows = n - 1 - j;
        let num = (0..rows).fold(T::zero(), |s, i| s + c[i][j + 1]);
        let den = (0..rows).fold(T::zero(), |s, i| s + c[i][j]);
        if !(den > T::zero()) {
            return Err(Error::Domain(format!("development column {j} sums to zero")));
        }
        f[j] = num / den;
        if rows > 1 {
            let s = (0..rows).fold(T::zero(), |s, i| {
                let d = c[i][j + 1] / c[i][j] - f[j];
                s + c[i][j] * d * d
            });
            sigma2[j] = s / T::lit((rows - 1) as f64);
        }
    }
    // last variance by the usual minimum rule
    if n >= 3 {
        let k = n - 2;
        let a = sigma2[k - 1];
        let b = if k >= 2 { sigma2[k - 2] } else { a };
        let ext = if b > T::zero() { a * a / b } else { T::zero() };
        sigma2[k] = ext.min(b).min(a);
    }
    let mut ultimates = Vec::with_capacity(n);
    let mut reserves = Vec::with_capacity(n);
    let mut row_se = Vec::with_capacity(n);
    let col_sums: Vec<T> = (0..n - 1).map(|j| (0..n - 1 - j).fold(T::zero(), |s, i| s + c[i][j])).collect();
    let mut proj: Vec<Vec<T>> = Vec::with_capacity(n);
    for i in 0..n {
        let last = n - 1 - i;
        let mut row = c[i].clone();
        for j in last..n - 1 {
            let v = row[j] * f[j];
            row.push(v);
        }
        let ult = row[n - 1];
        ultimates.push(ult);
        reserves.push(ult - c[i][last]);
        let mut mse_rel = T::zero();
        for j in last..n - 1 {
            if f[j] > T::zero() {
                mse_rel = mse_rel + sigma2[j] / (f[j] * f[j]) * (T::one() / row[j] + T::one() / col_sums[j]);
            }
        }
        row_se.push((ult * ult * mse_rel).max(T::zero()).sqrt());
        proj.push(row);
    }
    // total mse adds the covariance of the parameter errors across rows
    let mut total_mse = row_se.iter().fold(T::zero(), |s, &v| s + v * v);
    for i in 1..n {
        let later: T = ((i + 1)..n).fold(T::zero(), |s, k| s + ultimates[k]);
        let mut term = T::zero();
        for j in (n - 1 - i)..n - 1 {
            if f[j] > T::zero() {
                term = term + T::lit(2.0) * sigma2[j] / (f[j] * f[j]) / col_sums[j];
            }
        }
        total_mse = total_mse + ultimates[i] * later * term;
    }
    let reserve = reserves.iter().fold(T::zero(), |s, &v| s + v);
    Ok(ChainLadderResult { factors: f, ultimates, reserves, reserve, row_se, se: total_mse.max(T::zero()).sqrt() })
}

/// Cochran's Q and the I² heterogeneity share.
pub fn heterogeneity_stats<T: Real>(means: &[T], weights: &[T]) -> Result<(T, T)> {
    let k = means.len();
    if k < 2 || weights.len() != k {
        return Err(Error::InsufficientData { got: k.min(weights.len()), need: 2 });
    }
    if weights.iter().any(|&w| !(w > T::zero())) {
        return Err(Error::InvalidParameter("heterogeneity weights must be positive".into()));
    }
    let wsum = weights.iter().fold(T::zero(), |s, &w| s + w);
    let xbar = means.iter().zip(weights).fold(T::zero(), |s, (&x, &w)| s + w * x) / wsum;
    let q = means.iter().zip(weights).fold(T::zero(), |s, (&x, &w)| s + w * (x - xbar) * (x - xbar));
    let i2 = if q > T::zero() { ((q - T::lit((k - 1) as f64)) / q).max(T::zero()) } else { T::zero() };
    Ok((q, i2))
}

/// Inverse-variance weights `n_i / s_i²`.
pub fn inverse_variance_weights<T: Real>(counts: &[usize], variances: &[T]) -> Vec<T> {
    counts.iter().zip(variances).map(|(&n, &v)| T::lit(n as f64) / v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hundred_point_sample() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = risk_measures(&s, &[0.6, 0.95]).unwrap();
        assert_eq!(r.at(0.95).unwrap().var, 95.0);
        assert_eq!(r.at(0.95).unwrap().tvar, 98.0);
        assert_eq!(r.at(0.6).unwrap().tvar, 80.5);
        assert_eq!(r.risk_capital, Some(17.5));
        assert_eq!(risk_capital(&r).unwrap(), 17.5);
    }

    #[test]
    fn constant_sample() {
        let s = vec![4.2; 50];
        let r = risk_measures(&s, &DEFAULT_LEVELS).unwrap();
        for m in &r.levels {
            assert_eq!(m.var, 4.2);
            assert_relative_eq!(m.tvar, 4.2, max_relative = 1e-15);
        }
        assert!(r.risk_capital.unwrap().abs() < 1e-14);
        let r = risk_measures(&s, &[0.8]).unwrap();
        assert_eq!(r.risk_capital, None);
    }

    #[test]
    fn sample_too_small() {
        assert!(risk_measures(&[1.0_f64; 10], &[0.95]).is_err());
        assert!(risk_measures::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn mape_values() {
        assert_eq!(mape(5.0, 5.0).unwrap(), 0.0);
        assert_relative_eq!(mape(67_154_900.0, 71_005_064.0).unwrap(), 5.4223, epsilon = 1e-4);
        assert_relative_eq!(mape(74_677_943.0, 71_005_064.0).unwrap(), 5.1727, epsilon = 1e-4);
        assert!(mape(1.0, 0.0).is_err());
    }

    #[test]
    fn chain_ladder_two_by_two() {
        let tri = RunoffTriangle::from_cumulative(vec![vec![10.0, 15.0], vec![12.0]]).unwrap();
        let r = chain_ladder_mack(&tri).unwrap();
        assert_relative_eq!(r.factors[0], 1.5);
        assert_relative_eq!(r.reserve, 6.0);
    }

    #[test]
    fn heterogeneity_example() {
        let (q, i2) = heterogeneity_stats(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(q, 2.0);
        assert_relative_eq!(i2, 0.5);
        let (q, i2) = heterogeneity_stats(&[3.0, 3.0, 3.0], &[1.0, 2.0, 5.0]).unwrap();
        assert_eq!((q, i2), (0.0, 0.0));
    }
}
