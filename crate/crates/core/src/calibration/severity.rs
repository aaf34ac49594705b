use super::records::SeverityObservation;
use super::{covariance_from_hessian, information_criteria, FitDiagnostics};
use crate::distributions::{LognormalComponent, SeverityModel, N_CLASSES};
use crate::error::{Error, Result};
use crate::optimize::{golden_section, numeric_hessian};
use crate::real::DAYS_PER_YEAR;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const MIN_RECORDS: usize = 50;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// How the delay-coupling exponent is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KappaMode {
    Fixed { kappa: f64 },
    /// Profile likelihood on a grid over `[lower, upper]`, refined by golden section.
    Estimate { lower: f64, upper: f64, grid: usize },
}

impl KappaMode {
    pub fn estimate() -> Self {
        Self::Estimate { lower: -1.0, upper: 3.0, grid: 17 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeverityFitOptions {
    pub kappa: KappaMode,
    pub components: usize,
    /// Estimate injury-class shifts when the data carry classes.
    pub classes: bool,
    pub max_iter: usize,
    /// Relative log-likelihood change that stops EM.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
    /// Compute the observed-information covariance.
    pub covariance: bool,
}

impl Default for SeverityFitOptions {
    fn default() -> Self {
        Self {
            kappa: KappaMode::estimate(),
            components: 2,
            classes: true,
            max_iter: 5000,
            tol: 1e-10,
            max_restarts: 10,
            seed: 0,
            covariance: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityFit {
    pub model: SeverityModel<f64>,
    pub diagnostics: FitDiagnostics,
    /// False when every amount is zero and no mixture can be fitted.
    pub mixture_defined: bool,
    /// Log-likelihood after every EM iteration of the final run.
    pub log_likelihood_trace: Vec<f64>,
    /// Every EM iteration of every run was non-decreasing in likelihood.
    pub monotone: bool,
    pub zero_fraction: f64,
    pub n_positive: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Mix {
    w: Vec<f64>,
    mu: Vec<f64>,
    sd: Vec<f64>,
    phi: [f64; N_CLASSES],
}

struct Data {
    y: Vec<f64>,
    s: Vec<f64>,
    class: Vec<usize>,
    // classes with their own shift; class 0 is the reference level
    levels: Vec<usize>,
    spread: f64,
}

struct Run {
    mix: Mix,
    ll: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
    monotone: bool,
}

enum RunError {
    Collapse,
}

impl Data {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn z(&self, k: usize, kappa: f64, phi: &[f64; N_CLASSES]) -> f64 {
        self.y[k] - kappa * self.s[k] - phi[self.class[k]]
    }

    /// Observed log-likelihood; fills responsibilities when `resp` is given.
    fn log_likelihood(&self, kappa: f64, mix: &Mix, mut resp: Option<&mut [f64]>) -> f64 {
        let m = mix.w.len();
        let lw: Vec<f64> = (0..m).map(|j| mix.w[j].ln() - mix.sd[j].ln() - LN_SQRT_2PI).collect();
        let mut lp = vec![0.0; m];
        let mut ll = 0.0;
        for k in 0..self.n() {
            let z = self.z(k, kappa, &mix.phi);
            let mut top = f64::NEG_INFINITY;
            for j in 0..m {
                let e = (z - mix.mu[j]) / mix.sd[j];
                lp[j] = lw[j] - 0.5 * e * e;
                top = top.max(lp[j]);
            }
            let mut tot = 0.0;
            for v in lp.iter_mut() {
                *v = (*v - top).exp();
                tot += *v;
            }
            ll += top + tot.ln();
            if let Some(r) = resp.as_deref_mut() {
                for j in 0..m {
                    r[k * m + j] = lp[j] / tot;
                }
            }
        }
        ll
    }

    fn initial(&self, kappa: f64, m: usize) -> Mix {
        let mut z: Vec<f64> = (0..self.n()).map(|k| self.y[k] - kappa * self.s[k]).collect();
        z.sort_by(f64::total_cmp);
        let n = z.len();
        let mut mix = Mix { w: vec![1.0 / m as f64; m], mu: vec![0.0; m], sd: vec![0.0; m], phi: [0.0; N_CLASSES] };
        for j in 0..m {
            let block = &z[j * n / m..((j + 1) * n / m).max(j * n / m + 1)];
            let mean = block.iter().sum::<f64>() / block.len() as f64;
            let var = block.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / block.len() as f64;
            mix.mu[j] = mean;
            mix.sd[j] = var.sqrt().max(1e-2 * self.spread);
        }
        mix
    }

    fn jitter<R: Rng>(&self, base: &Mix, rng: &mut R) -> Mix {
        let mut mix = base.clone();
        for j in 0..mix.w.len() {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            mix.mu[j] += 0.5 * self.spread * a;
            mix.sd[j] = (mix.sd[j] * (0.3 * b).exp()).max(1e-2 * self.spread);
            mix.w[j] = 0.2 + rng.random::<f64>();
        }
        let tot: f64 = mix.w.iter().sum();
        mix.w.iter_mut().for_each(|w| *w /= tot);
        mix
    }

    /// ECM: E-step, then weights/locations/scales given the shifts, then the
    /// class shifts given the rest. Both conditional steps raise the expected
    /// complete-data likelihood, so the observed likelihood never decreases.
    fn em(&self, kappa: f64, start: Mix, tol: f64, max_iter: usize) -> std::result::Result<Run, RunError> {
        let n = self.n();
        let m = start.w.len();
        let mut mix = start;
        let mut resp = vec![0.0; n * m];
        let mut trace = Vec::new();
        let mut monotone = true;
        let mut prev = f64::NEG_INFINITY;
        let mut converged = false;
        let mut iterations = 0;
        let mut ll;
        loop {
            ll = self.log_likelihood(kappa, &mix, Some(&mut resp));
            if !ll.is_finite() {
                return Err(RunError::Collapse);
            }
            if prev.is_finite() && ll < prev - 1e-10 * prev.abs().max(1.0) {
                monotone = false;
            }
            trace.push(ll);
            if prev.is_finite() && (ll - prev).abs() <= tol * ll.abs().max(1.0) {
                converged = true;
                break;
            }
            if iterations >= max_iter {
                break;
            }
            prev = ll;
            iterations += 1;
            // weights, locations, scales
            for j in 0..m {
                let (mut sr, mut sz) = (0.0, 0.0);
                for k in 0..n {
                    let r = resp[k * m + j];
                    sr += r;
                    sz += r * self.z(k, kappa, &mix.phi);
                }
                if !(sr > 1e-8 * n as f64) {
                    return Err(RunError::Collapse);
                }
                let mu = sz / sr;
                let mut ss = 0.0;
                for k in 0..n {
                    let d = self.z(k, kappa, &mix.phi) - mu;
                    ss += resp[k * m + j] * d * d;
                }
                let sd = (ss / sr).sqrt();
                if !(sd > 1e-6 * self.spread) {
                    return Err(RunError::Collapse);
                }
                mix.w[j] = sr / n as f64;
                mix.mu[j] = mu;
                mix.sd[j] = sd;
            }
            // class shifts
            if !self.levels.is_empty() {
                let mut num = [0.0; N_CLASSES];
                let mut den = [0.0; N_CLASSES];
                let prec: Vec<f64> = mix.sd.iter().map(|s| 1.0 / (s * s)).collect();
                for k in 0..n {
                    let c = self.class[k];
                    if c == 0 {
                        continue;
                    }
                    let base = self.y[k] - kappa * self.s[k];
                    for j in 0..m {
                        let a = resp[k * m + j] * prec[j];
                        num[c] += a * (base - mix.mu[j]);
                        den[c] += a;
                    }
                }
                for &c in &self.levels {
                    if den[c] > 0.0 {
                        mix.phi[c] = num[c] / den[c];
                    }
                }
            }
        }
        Ok(Run { mix, ll, iterations, converged, trace, monotone })
    }
}

struct Fitter<'a> {
    data: &'a Data,
    opts: &'a SeverityFitOptions,
    restarts: usize,
    all_monotone: bool,
}

impl Fitter<'_> {
    /// EM at fixed `kappa`, from `warm` if given, with jittered restarts on collapse.
    fn fit_at(&mut self, kappa: f64, warm: Option<&Mix>, tol: f64) -> Result<Run> {
        let base = self.data.initial(kappa, self.opts.components);
        let first = warm.cloned().unwrap_or_else(|| base.clone());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.opts.seed ^ kappa.to_bits());
        let mut attempt = 0;
        let mut start = first;
        loop {
            match self.data.em(kappa, start, tol, self.opts.max_iter) {
                Ok(r) => {
                    self.all_monotone &= r.monotone;
                    return Ok(r);
                }
                Err(RunError::Collapse) => {
                    attempt += 1;
                    self.restarts += 1;
                    if attempt > self.opts.max_restarts {
                        return Err(Error::NonConvergence {
                            iterations: attempt,
                            message: format!("mixture components collapsed at kappa = {kappa} after {} restarts", self.opts.max_restarts),
                            best_objective: f64::NAN,
                        });
                    }
                    start = if attempt == 1 && warm.is_some() { base.clone() } else { self.data.jitter(&base, &mut rng) };
                }
            }
        }
    }
}

/// Fits the zero-inflated lognormal mixture with delay coupling
/// `ln X = ln X̃ + κ ln(1 + 365 ζ) + φ_class`.
///
/// `p0` is the empirical share of zero amounts. On the positive amounts, EM
/// runs on `ln x − κ ln(1 + 365 ζ) − φ_class`; class 0 (and unclassified
/// records) form the reference level. With [`KappaMode::Estimate`], `κ`
/// maximises the profile likelihood over a grid refined by golden section.
pub fn fit_severity_em(data: &[SeverityObservation], opts: &SeverityFitOptions) -> Result<SeverityFit> {
    fit_impl(data, opts, None)
}

/// As [`fit_severity_em`], with EM started from `start` (its weights,
/// locations, scales and class shifts) instead of the quantile-block
/// initialisation. Used for refits on resampled data.
pub fn fit_severity_em_from(data: &[SeverityObservation], opts: &SeverityFitOptions, start: &SeverityModel<f64>) -> Result<SeverityFit> {
    if start.components.len() != opts.components || start.p0 >= 1.0 {
        return fit_impl(data, opts, None);
    }
    let tot: f64 = start.components.iter().map(|c| c.weight).sum();
    let mut phi = [0.0; N_CLASSES];
    if let Some(p) = &start.phi {
        phi.copy_from_slice(p);
    }
    let mix = Mix {
        w: start.components.iter().map(|c| c.weight / tot).collect(),
        mu: start.components.iter().map(|c| c.mu).collect(),
        sd: start.components.iter().map(|c| c.sigma).collect(),
        phi,
    };
    fit_impl(data, opts, Some(mix))
}

fn fit_impl(data: &[SeverityObservation], opts: &SeverityFitOptions, start: Option<Mix>) -> Result<SeverityFit> {
    if data.len() < MIN_RECORDS {
        return Err(Error::InsufficientData { got: data.len(), need: MIN_RECORDS });
    }
    if opts.components == 0 {
        return Err(Error::InvalidParameter("need at least one mixture component".into()));
    }
    for o in data {
        if !(o.amount >= 0.0 && o.amount.is_finite() && o.zeta >= 0.0 && o.zeta.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid severity observation {o:?}")));
        }
        if o.class.is_some_and(|c| c >= N_CLASSES) {
            return Err(Error::InvalidParameter(format!("injury class must be below {N_CLASSES}")));
        }
    }
    let n_total = data.len();
    let positives: Vec<&SeverityObservation> = data.iter().filter(|o| o.amount > 0.0).collect();
    let p0 = (n_total - positives.len()) as f64 / n_total as f64;
    if positives.is_empty() {
        return Ok(SeverityFit {
            model: SeverityModel::zero(),
            diagnostics: FitDiagnostics {
                parameter_names: vec!["p0".into()],
                estimates: vec![1.0],
                covariance: vec![vec![0.0]],
                converged: true,
                ..FitDiagnostics::default()
            },
            mixture_defined: false,
            log_likelihood_trace: Vec::new(),
            monotone: true,
            zero_fraction: 1.0,
            n_positive: 0,
        });
    }
    let need = 3 * opts.components + 1;
    if positives.len() < need {
        return Err(Error::InsufficientData { got: positives.len(), need });
    }
    let y: Vec<f64> = positives.iter().map(|o| o.amount.ln()).collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let spread = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64).sqrt().max(1e-8);
    let class: Vec<usize> = positives.iter().map(|o| o.class.unwrap_or(0)).collect();
    let mut levels: Vec<usize> = Vec::new();
    if opts.classes {
        for c in 1..N_CLASSES {
            if class.contains(&c) {
                levels.push(c);
            }
        }
    }
    let d = Data { s: positives.iter().map(|o| (DAYS_PER_YEAR * o.zeta).ln_1p()).collect(), y, class, levels, spread };
    // shifts of classes that are not estimated stay at the reference level
    let start = start.map(|mut m| {
        for c in 0..N_CLASSES {
            if !d.levels.contains(&c) {
                m.phi[c] = 0.0;
            }
        }
        m
    });
    let mut fitter = Fitter { data: &d, opts, restarts: 0, all_monotone: true };

    let (kappa, run, profile_iters) = match opts.kappa {
        KappaMode::Fixed { kappa } => {
            let r = fitter.fit_at(kappa, start.as_ref(), opts.tol)?;
            (kappa, r, 0)
        }
        KappaMode::Estimate { lower, upper, grid } => {
            if !(upper > lower) || grid < 3 {
                return Err(Error::InvalidParameter("kappa grid needs lower < upper and at least 3 points".into()));
            }
            let step = (upper - lower) / (grid - 1) as f64;
            let mut best: Option<(usize, Run)> = None;
            let mut warm: Option<Mix> = start;
            let mut evals = 0;
            let mut last_err = None;
            for g in 0..grid {
                let k = lower + step * g as f64;
                // a grid point where the mixture collapses is skipped, not fatal
                let r = match fitter.fit_at(k, warm.as_ref(), opts.tol.max(1e-8)) {
                    Ok(r) => r,
                    Err(e) => {
                        last_err = Some(e);
                        continue;
                    }
                };
                evals += 1;
                warm = Some(r.mix.clone());
                if best.as_ref().is_none_or(|(_, b)| r.ll > b.ll) {
                    best = Some((g, r));
                }
            }
            let Some((g, b)) = best else {
                return Err(last_err.expect("every grid point failed"));
            };
            let lo = lower + step * g.saturating_sub(1) as f64;
            let hi = lower + step * (g + 1).min(grid - 1) as f64;
            let mut warm = b.mix.clone();
            let mut failure = None;
            let (k_hat, _) = golden_section(
                |k| match fitter.fit_at(k, Some(&warm), opts.tol) {
                    Ok(r) => {
                        evals += 1;
                        warm = r.mix.clone();
                        -r.ll
                    }
                    Err(e) => {
                        failure = Some(e);
                        f64::INFINITY
                    }
                },
                lo,
                hi,
                1e-7,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            let r = fitter.fit_at(k_hat, Some(&warm), opts.tol)?;
            (k_hat, r, evals)
        }
    };

    let mut mix = run.mix.clone();
    // order components by location
    let mut idx: Vec<usize> = (0..mix.w.len()).collect();
    idx.sort_by(|&a, &b| mix.mu[a].total_cmp(&mix.mu[b]));
    mix = Mix {
        w: idx.iter().map(|&i| mix.w[i]).collect(),
        mu: idx.iter().map(|&i| mix.mu[i]).collect(),
        sd: idx.iter().map(|&i| mix.sd[i]).collect(),
        phi: mix.phi,
    };
    let m = mix.w.len();
    let estimate_kappa = matches!(opts.kappa, KappaMode::Estimate { .. });

    // parameter vector: w_1..w_{m−1}, μ, σ, [κ], φ levels
    let mut names: Vec<String> = Vec::new();
    let mut theta: Vec<f64> = Vec::new();
    for j in 0..m - 1 {
        names.push(format!("w{}", j + 1));
        theta.push(mix.w[j]);
    }
    for j in 0..m {
        names.push(format!("mu{}", j + 1));
        theta.push(mix.mu[j]);
    }
    for j in 0..m {
        names.push(format!("sigma{}", j + 1));
        theta.push(mix.sd[j]);
    }
    if estimate_kappa {
        names.push("kappa".into());
        theta.push(kappa);
    }
    for &c in &d.levels {
        names.push(format!("phi{c}"));
        theta.push(mix.phi[c]);
    }
    let unpack = |p: &[f64]| -> Option<(f64, Mix)> {
        let mut w: Vec<f64> = p[..m - 1].to_vec();
        let last = 1.0 - w.iter().sum::<f64>();
        w.push(last);
        let mu = p[m - 1..2 * m - 1].to_vec();
        let sd = p[2 * m - 1..3 * m - 1].to_vec();
        if w.iter().any(|&v| !(v > 0.0)) || sd.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let mut pos = 3 * m - 1;
        let k = if estimate_kappa {
            pos += 1;
            p[pos - 1]
        } else {
            kappa
        };
        let mut phi = [0.0; N_CLASSES];
        for &c in &d.levels {
            phi[c] = p[pos];
            pos += 1;
        }
        Some((k, Mix { w, mu, sd, phi }))
    };
    let ll = d.log_likelihood(kappa, &mix, None);
    let mut covariance = vec![vec![0.0; theta.len() + 1]; theta.len() + 1];
    covariance[0][0] = p0 * (1.0 - p0) / n_total as f64;
    if opts.covariance {
        let h = numeric_hessian(
            |p| match unpack(p) {
                Some((k, mx)) => -d.log_likelihood(k, &mx, None),
                None => f64::MAX,
            },
            &theta,
            1e-5,
        );
        let block = covariance_from_hessian(&h);
        for r in 0..theta.len() {
            for c in 0..theta.len() {
                covariance[r + 1][c + 1] = block[r][c];
            }
        }
    } else {
        for (r, row) in covariance.iter_mut().enumerate().skip(1) {
            row[r] = f64::NAN;
        }
    }
    let mut all_names = vec!["p0".to_string()];
    all_names.extend(names);
    let mut estimates = vec![p0];
    estimates.extend(theta.iter().copied());
    // zero/positive split contributes its Bernoulli likelihood
    let n_pos = d.n() as f64;
    let ll_total = ll + if p0 > 0.0 { (n_total as f64 - n_pos) * p0.ln() + n_pos * (1.0 - p0).ln() } else { 0.0 };
    let n_params = estimates.len();
    let (aic, bic) = information_criteria(ll_total, n_params, n_total);
    let phi = if d.levels.is_empty() { None } else { Some(mix.phi.to_vec()) };
    let components = (0..m).map(|j| LognormalComponent { weight: mix.w[j], mu: mix.mu[j], sigma: mix.sd[j] }).collect();
    let model = SeverityModel::new(p0, components, kappa, phi)?;
    Ok(SeverityFit {
        model,
        diagnostics: FitDiagnostics {
            log_likelihood: ll_total,
            iterations: run.iterations + profile_iters,
            converged: run.converged,
            parameter_names: all_names,
            estimates,
            covariance,
            aic,
            bic,
            restarts: fitter.restarts,
        },
        mixture_defined: true,
        log_likelihood_trace: run.trace,
        monotone: fitter.all_monotone,
        zero_fraction: p0,
        n_positive: d.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(n: usize, kappa: f64, seed: u64) -> (SeverityModel<f64>, Vec<SeverityObservation>) {
        let model = SeverityModel::new(
            0.3,
            vec![
                LognormalComponent { weight: 0.6, mu: 1.0, sigma: 0.6 },
                LognormalComponent { weight: 0.4, mu: 3.0, sigma: 0.4 },
            ],
            kappa,
            None,
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let obs = (0..n)
            .map(|_| {
                let zeta: f64 = rng.random::<f64>() * 4.0;
                SeverityObservation { amount: model.sample(zeta, None, &mut rng), zeta, class: None }
            })
            .collect();
        (model, obs)
    }

    #[test]
    fn all_zero_amounts() {
        let obs: Vec<_> = (0..60).map(|i| SeverityObservation { amount: 0.0, zeta: i as f64 * 0.1, class: None }).collect();
        let f = fit_severity_em(&obs, &SeverityFitOptions::default()).unwrap();
        assert!(!f.mixture_defined);
        assert_eq!(f.model.p0, 1.0);
    }

    #[test]
    fn fixed_kappa_zero_ignores_delays() {
        let (_, obs) = planted(3000, 0.0, 2);
        let opts = SeverityFitOptions { kappa: KappaMode::Fixed { kappa: 0.0 }, ..Default::default() };
        let a = fit_severity_em(&obs, &opts).unwrap();
        let moved: Vec<_> = obs.iter().map(|o| SeverityObservation { zeta: 0.0, ..*o }).collect();
        let b = fit_severity_em(&moved, &opts).unwrap();
        for (x, y) in a.model.components.iter().zip(&b.model.components) {
            assert!((x.mu - y.mu).abs() < 1e-8 && (x.sigma - y.sigma).abs() < 1e-8);
        }
        assert!(a.monotone);
    }

    #[test]
    fn recovers_planted_kappa() {
        let (truth, obs) = planted(20_000, 0.3, 7);
        let f = fit_severity_em(&obs, &SeverityFitOptions::default()).unwrap();
        let se = f.diagnostics.standard_error("kappa").unwrap();
        assert!((f.model.kappa - truth.kappa).abs() < 4.0 * se, "{} ± {se}", f.model.kappa);
        assert!(f.monotone);
        assert!(f.log_likelihood_trace.windows(2).all(|w| w[1] >= w[0] - 1e-10 * w[0].abs()));
    }
}
