use crate::error::{Error, Result};
use crate::optimize::brent_root;
use crate::special::{norm_cdf, norm_pdf, norm_sf};
use serde::{Deserialize, Serialize};

const MIN_SAMPLE: usize = 1000;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Normal mixture approximation of a reserve distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalMixtureFit {
    pub weights: Vec<f64>,
    /// Ascending.
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NormalMixtureFit {
    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn sd(&self) -> f64 {
        let m = self.mean();
        let second: f64 = (0..self.weights.len()).map(|j| self.weights[j] * (self.sds[j].powi(2) + self.means[j].powi(2))).sum();
        (second - m * m).max(0.0).sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (0..self.weights.len()).map(|j| self.weights[j] * norm_cdf((x - self.means[j]) / self.sds[j])).sum()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (0..self.weights.len()).map(|j| self.weights[j] * norm_pdf((x - self.means[j]) / self.sds[j]) / self.sds[j]).sum()
    }

    /// Quantile of the fitted mixture.
    pub fn var(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("level must lie in (0,1), got {p}")));
        }
        let lo = (0..self.means.len()).map(|j| self.means[j] - 40.0 * self.sds[j]).fold(f64::INFINITY, f64::min);
        let hi = (0..self.means.len()).map(|j| self.means[j] + 40.0 * self.sds[j]).fold(f64::NEG_INFINITY, f64::max);
        let scale = (hi - lo).abs().max(1.0);
        brent_root(|x| self.cdf(x) - p, lo, hi, 1e-14 * scale, 500)
            .ok_or_else(|| Error::NonConvergence { iterations: 500, message: "mixture quantile".into(), best_objective: f64::NAN })
    }

    /// `E[X | X > VaR_p]` in closed form.
    pub fn tvar(&self, p: f64) -> Result<f64> {
        let v = self.var(p)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..self.weights.len() {
            let z = (v - self.means[j]) / self.sds[j];
            let s = norm_sf(z);
            num += self.weights[j] * (self.means[j] * s + self.sds[j] * norm_pdf(z));
            den += self.weights[j] * s;
        }
        Ok(num / den)
    }
}

/// EM fit of a `k`-component normal mixture; components are returned in
/// ascending order of their means.
pub fn fit_normal_mixture(sample: &[f64], components: usize) -> Result<NormalMixtureFit> {
    let mut k = components;
    let n = sample.len();
    if n < MIN_SAMPLE {
        return Err(Error::InsufficientData { got: n, need: MIN_SAMPLE });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one component".into()));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("sample contains non-finite values".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let spread = (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    if !(spread > 0.0) {
        return Ok(NormalMixtureFit {
            weights: vec![1.0],
            means: vec![mean],
            sds: vec![0.0],
            log_likelihood: f64::INFINITY,
            iterations: 0,
            converged: true,
        });
    }
    let floor = 1e-6 * spread;
    let mut w = vec![1.0 / k as f64; k];
    let mut mu = vec![0.0; k];
    let mut sd = vec![0.0; k];
    for j in 0..k {
        let block = &sorted[j * n / k..((j + 1) * n / k).max(j * n / k + 1)];
        let m = block.iter().sum::<f64>() / block.len() as f64;
        mu[j] = m;
        sd[j] = (block.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / block.len() as f64).sqrt().max(0.1 * spread);
    }
    let mut resp = vec![0.0; n * k];
    let mut lp = vec![0.0; k];
    let mut prev = f64::NEG_INFINITY;
    let mut ll = prev;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 10_000 {
        ll = 0.0;
        for (i, &x) in sample.iter().enumerate() {
            let mut top = f64::NEG_INFINITY;
            for j in 0..k {
                let e = (x - mu[j]) / sd[j];
                lp[j] = w[j].ln() - sd[j].ln() - LN_SQRT_2PI - 0.5 * e * e;
                top = top.max(lp[j]);
            }
            let mut tot = 0.0;
            for v in lp.iter_mut() {
                *v = (*v - top).exp();
                tot += *v;
            }
            ll += top + tot.ln();
            for j in 0..k {
                resp[i * k + j] = lp[j] / tot;
            }
        }
        if (ll - prev).abs() <= 1e-12 * ll.abs().max(1.0) {
            converged = true;
            break;
        }
        prev = ll;
        iterations += 1;
        for j in 0..k {
            let (mut sr, mut sx) = (0.0, 0.0);
            for (i, &x) in sample.iter().enumerate() {
                sr += resp[i * k + j];
                sx += resp[i * k + j] * x;
            }
            if !(sr > 0.0) {
                // an emptied component keeps its old location with no weight
                w[j] = 0.0;
                continue;
            }
            let m = sx / sr;
            let ss: f64 = sample.iter().enumerate().map(|(i, &x)| resp[i * k + j] * (x - m) * (x - m)).sum();
            w[j] = sr / n as f64;
            mu[j] = m;
            sd[j] = (ss / sr).sqrt().max(floor);
        }
        // drop components that lost all weight
        if w.iter().any(|&v| v == 0.0) {
            let keep: Vec<usize> = (0..k).filter(|&j| w[j] > 0.0).collect();
            w = keep.iter().map(|&j| w[j]).collect();
            mu = keep.iter().map(|&j| mu[j]).collect();
            sd = keep.iter().map(|&j| sd[j]).collect();
            k = keep.len();
            resp = vec![0.0; n * k];
            lp = vec![0.0; k];
            prev = f64::NEG_INFINITY;
        }
    }
    finish(w, mu, sd, ll, iterations, converged)
}

fn finish(w: Vec<f64>, mu: Vec<f64>, sd: Vec<f64>, ll: f64, iterations: usize, converged: bool) -> Result<NormalMixtureFit> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]));
    let tot: f64 = w.iter().sum();
    Ok(NormalMixtureFit {
        weights: idx.iter().map(|&j| w[j] / tot).collect(),
        means: idx.iter().map(|&j| mu[j]).collect(),
        sds: idx.iter().map(|&j| sd[j]).collect(),
        log_likelihood: ll,
        iterations,
        converged,
    })
}
