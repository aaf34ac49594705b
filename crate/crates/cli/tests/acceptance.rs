//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! printed.

use atrp_core::calibration::*;
use atrp_core::distributions::{conditional_cross_moment, Dependence, FrankCopula, PositiveDistribution, SeverityModel};
use atrp_core::financial::PaymentType;
use atrp_core::fixtures as fx;
use atrp_core::montecarlo::*;
use atrp_core::quadrature::{integrate_pieces, QuadOptions};
use atrp_core::reserving::{ConditionalMoments, ReserveModels};
use atrp_core::riskmetrics::{chain_ladder_mack, risk_capital_from, risk_measures, RunoffTriangle, DEFAULT_LEVELS};
use atrp_core::rng::{stream, Role};
use atrp_core::stats::{ks_one_sample, ks_two_sample, mean, variance};
use atrp_core::trend::{sample_trp_seeded, TrendSpec};
use rand::Rng;
use std::path::Path;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn within(est: f64, truth: f64, se: f64, k: f64) -> bool {
    se.is_finite() && se > 0.0 && (est - truth).abs() <= k * se
}

// 1. Exact total mean and sd against a million simulated paths.
fn quadrature_vs_simulation() -> Outcome {
    let start = Instant::now();
    let info = fx::synthetic_portfolio();
    let models = fx::reserve_models();
    let fa = fx::financial(4.0, fx::DISCOUNT_RATE);
    let exact = ConditionalMoments::new(&info, &models, &fa).unwrap().summary().unwrap();
    let mc = simulate_rbns(&info, &models, &fa, &SimConfig::new(1_000_000, 2024)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let z = (mc.mean() - exact.total_mean) / mc.standard_error();
    let sd_rel = rel(mc.sd(), exact.total_sd);
    outcome(
        z.abs() < 3.0 && sd_rel < 0.05 && secs < 120.0 && info.total_claims() <= 10,
        format!(
            "mean {:.2} vs MC {:.2} ({z:+.2} SE); sd {:.2} vs MC {:.2} ({:.2}%); {secs:.1} s",
            exact.total_mean,
            mc.mean(),
            exact.total_sd,
            mc.sd(),
            100.0 * sd_rel
        ),
    )
}

// E[X^r | ζ] = ∫ r x^{r−1} (1 − F(x | ζ)) dx, in log coordinates.
fn moment_from_cdf(m: &SeverityModel<f64>, zeta: f64, r: f64) -> f64 {
    let shift = m.log_shift(zeta, None);
    let lo = m.components.iter().map(|c| c.mu - 14.0 * c.sigma).fold(f64::INFINITY, f64::min) + shift;
    let hi = m.components.iter().map(|c| c.mu + 14.0 * c.sigma).fold(f64::NEG_INFINITY, f64::max) + shift;
    let pts: Vec<f64> = (0..=64).map(|k| lo + (hi - lo) * k as f64 / 64.0).collect();
    integrate_pieces(|u| r * (r * u).exp() * (1.0 - m.cdf(u.exp(), zeta, None)), &pts, &QuadOptions::with_tol(0.0, 1e-12)).value
}

// 2. Closed-form conditional moments against quadrature of the CDFs.
fn closed_form_moments() -> Outcome {
    let (mx, my) = (fx::indemnity_severity(), fx::expense_severity());
    let mut worst: f64 = 0.0;
    for zeta in [0.0, 0.5, 2.0] {
        for m in [&mx, &my] {
            for order in [1u8, 2] {
                let closed = m.conditional_moment(zeta, None, order).unwrap();
                worst = worst.max(rel(closed, moment_from_cdf(m, zeta, order as f64)));
            }
        }
        let cross = conditional_cross_moment(&mx, &my, &Dependence::Coupled, zeta, None).unwrap();
        worst = worst.max(rel(cross, moment_from_cdf(&mx, zeta, 1.0) * moment_from_cdf(&my, zeta, 1.0)));
    }
    outcome(worst < 1e-6, format!("worst relative error {worst:.2e}"))
}

fn exposure(gamma: f64, cfg: &SimConfig, alpha_shift: f64) -> ExposureSample {
    let mut fa = fx::financial(cfg.horizon, fx::DISCOUNT_RATE);
    fa.alpha1 += alpha_shift;
    fa.alpha2 += alpha_shift;
    simulate_exposure(&fx::exposure_models(gamma), &fa, cfg).unwrap()
}

// 3. Count-based IBNR and UPR proportions are bit-identical under shocks.
fn exact_invariances() -> Outcome {
    let base_cfg = SimConfig::new(5_000, 17);
    let ibnr = |cfg: &SimConfig, shift: f64| ibnr_proportions(&exposure(1.0, cfg, shift)).unwrap().count_based;
    let upr = |cfg: &SimConfig, shift: f64| {
        let mut later = *cfg;
        later.horizon = cfg.horizon + cfg.extension;
        upr_proportions(&exposure(1.0, cfg, shift), &exposure(1.0, &later, shift)).unwrap().count_based
    };
    let shocks = [-0.05, -0.01, 0.01, 0.05];
    let (ib, up) = (ibnr(&base_cfg, 0.0), upr(&base_cfg, 0.0));
    let mut checks = 0;
    let mut broken = Vec::new();
    for s in shocks {
        checks += 2;
        if ibnr(&base_cfg, s).to_bits() != ib.to_bits() {
            broken.push(format!("IBNR inflation {s:+}"));
        }
        if upr(&base_cfg, s).to_bits() != up.to_bits() {
            broken.push(format!("UPR inflation {s:+}"));
        }
    }
    for m in [0.5, 2.0] {
        let mut cfg = base_cfg;
        cfg.delay_scale.settlement = m;
        checks += 2;
        if ibnr(&cfg, 0.0).to_bits() != ib.to_bits() {
            broken.push(format!("IBNR settlement x{m}"));
        }
        if upr(&cfg, 0.0).to_bits() != up.to_bits() {
            broken.push(format!("UPR settlement x{m}"));
        }
        let mut cfg = base_cfg;
        cfg.delay_scale.reporting = m;
        checks += 1;
        if upr(&cfg, 0.0).to_bits() != up.to_bits() {
            broken.push(format!("UPR reporting x{m}"));
        }
    }
    outcome(broken.is_empty(), format!("{checks} comparisons, IBNR {ib:.6}, UPR {up:.6}; broken: {broken:?}"))
}

// 4. Directional regressions at 10⁵ paths.
fn monotonicity() -> Outcome {
    let info = fx::synthetic_portfolio();
    let models = fx::reserve_models();
    let cfg = SimConfig::new(100_000, 4);
    let means: Vec<f64> = [0.0, 0.02, 0.04, 0.06]
        .iter()
        .map(|&b| simulate_rbns(&info, &models, &fx::financial(4.0, b), &cfg).unwrap().mean())
        .collect();
    let beta_ok = means.windows(2).all(|w| w[1] < w[0]);

    let ecfg = SimConfig::new(100_000, 9);
    let p: Vec<f64> = [0.5, 1.0, 1.5].iter().map(|&g| ibnr_proportions(&exposure(g, &ecfg, 0.0)).unwrap().count_based).collect();
    let gamma_ok = p[0] < p[1] && p[1] < p[2];

    let fa = fx::financial(4.0, fx::DISCOUNT_RATE);
    let run = |trend: &TrendSpec<f64>| {
        simulate_trp_settlement(&info, trend, &models.settlement, &models, &fa, &cfg, TrpSampler::Inversion).unwrap().mean()
    };
    let (base, fast) = (run(&TrendSpec::Constant { lambda: 1.0 }), run(&fx::accelerated_settlement_trend()));
    outcome(
        beta_ok && gamma_ok && fast < base,
        format!(
            "means by beta {:?}; IBNR count share by gamma {:.3?}; TRP accelerated {fast:.0} < baseline {base:.0}",
            means.iter().map(|m| m.round()).collect::<Vec<_>>(),
            p
        ),
    )
}

// 5. Renewal-process special cases.
fn trp_special_cases() -> Outcome {
    let unit = PositiveDistribution::unit_exponential();
    let horizon = 3.0;
    let mut detail = Vec::new();
    let mut pass = true;
    for gamma in [0.5, 1.5] {
        let spec = TrendSpec::Power { gamma };
        let counts: Vec<f64> =
            (0..100_000).map(|p| sample_trp_seeded(&spec, &unit, horizon, 42, p).unwrap().len() as f64).collect();
        let target = spec.lambda_cum(horizon);
        let z = (mean(&counts) - target) / (variance(&counts) / counts.len() as f64).sqrt();
        pass &= z.abs() < 3.0;
        detail.push(format!("gamma {gamma}: count mean {:.4} vs {target:.4} ({z:+.2} sd)", mean(&counts)));
    }
    let lambda = 2.5;
    let spec = TrendSpec::Constant { lambda };
    let renewal = PositiveDistribution::GeneralizedGamma(fx::settlement_delay());
    let mut gaps = Vec::with_capacity(100_000);
    let mut path = 0;
    while gaps.len() < 100_000 {
        let h = sample_trp_seeded(&spec, &renewal, 200.0, 7, path).unwrap();
        let mut prev = 0.0;
        for &t in &h.times {
            if gaps.len() < 100_000 {
                gaps.push(t - prev);
            }
            prev = t;
        }
        path += 1;
    }
    let ks = ks_one_sample(&gaps, |x| renewal.cdf(lambda * x)).unwrap();
    pass &= ks.p_value > 0.01;
    detail.push(format!("constant rate: KS p = {:.3} on {} gaps", ks.p_value, gaps.len()));
    outcome(pass, detail.join("; "))
}

// 6. Every estimator recovers its truth within 3 asymptotic SEs at n = 10⁵.
fn calibration_recovery() -> Outcome {
    const N: usize = 100_000;
    let gg = fx::settlement_delay();
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    let mut check = |name: &str, est: f64, truth: f64, se: f64| {
        let z = (est - truth) / se;
        worst = worst.max(z.abs());
        if !within(est, truth, se, 3.0) {
            misses.push(format!("{name}: {est} vs {truth} (se {se:.3e})"));
        }
    };

    let mut rng = stream(1, 0, 0, Role::Auxiliary);
    let x: Vec<f64> = (0..N).map(|_| gg.sample(&mut rng)).collect();
    let (fit, d) = fit_generalized_gamma(&x).unwrap();
    for (name, est, truth) in [("a", fit.a, gg.a), ("b", fit.b, gg.b), ("c", fit.c, gg.c)] {
        check(name, est, truth, d.standard_error(name).unwrap_or(f64::NAN));
    }

    let truth = fx::indemnity_severity();
    let mut rng = stream(2, 0, 0, Role::Auxiliary);
    let obs: Vec<SeverityObservation> = (0..N)
        .map(|_| {
            let zeta = gg.sample(&mut rng);
            SeverityObservation { amount: truth.sample(zeta, None, &mut rng), zeta, class: None }
        })
        .collect();
    let sev = fit_severity_em(&obs, &SeverityFitOptions::default()).unwrap();
    let monotone = sev.monotone && sev.log_likelihood_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs());
    let (m, d) = (&sev.model, &sev.diagnostics);
    for (name, est, t) in [
        ("p0", m.p0, truth.p0),
        ("kappa", m.kappa, truth.kappa),
        ("w1", m.components[0].weight, truth.components[0].weight),
        ("mu1", m.components[0].mu, truth.components[0].mu),
        ("mu2", m.components[1].mu, truth.components[1].mu),
        ("sigma1", m.components[0].sigma, truth.components[0].sigma),
        ("sigma2", m.components[1].sigma, truth.components[1].sigma),
    ] {
        check(name, est, t, d.standard_error(name).unwrap_or(f64::NAN));
    }

    let mut rng = stream(3, 0, 0, Role::Auxiliary);
    let (mut times, mut amounts) = (Vec::with_capacity(N), Vec::with_capacity(N));
    for _ in 0..N {
        let s = 10.0 * rng.random::<f64>();
        let zeta = gg.sample(&mut rng);
        times.push(s);
        amounts.push(truth.sample(zeta, None, &mut rng) * (fx::ALPHA_INDEMNITY * s).exp());
    }
    let f = fit_inflation(&times, &amounts).unwrap();
    check("alpha", f.alpha, fx::ALPHA_INDEMNITY, f.alpha_se);

    let c = FrankCopula::new(fx::FRANK_THETA).unwrap();
    let mut rng = stream(4, 0, 0, Role::Auxiliary);
    let (u, v): (Vec<f64>, Vec<f64>) = (0..N).map(|_| c.sample(&mut rng)).unzip();
    let f = fit_frank_itau(&u, &v).unwrap();
    check("theta", f.theta, fx::FRANK_THETA, f.theta_se);

    outcome(
        misses.is_empty() && monotone,
        format!("worst |z| = {worst:.2} over 12 parameters; EM trace monotone: {monotone}; misses: {misses:?}"),
    )
}

// 7. Two-component normal mixture on the simulated reserve.
fn normal_mixture() -> Outcome {
    let s = simulate_rbns(&fx::synthetic_portfolio(), &fx::reserve_models(), &fx::financial(4.0, fx::DISCOUNT_RATE), &SimConfig::new(100_000, 30))
        .unwrap();
    let f = fit_normal_mixture(&s.totals, 2).unwrap();
    let (dm, ds) = (rel(f.mean(), s.mean()), rel(f.sd(), s.sd()));
    outcome(dm < 0.02 && ds < 0.02, format!("mean off by {:.3}%, sd off by {:.3}%", 100.0 * dm, 100.0 * ds))
}

// 8. Empirical risk measures.
fn risk_metrics() -> Outcome {
    let x: Vec<f64> = (1..=100).map(f64::from).collect();
    let r = risk_measures(&x, &DEFAULT_LEVELS).unwrap();
    let l = r.at(0.95).unwrap();
    let oracle = l.var == 95.0 && l.tvar == 98.0 && r.risk_capital == Some(17.5);

    // shifts and scales chosen so every operation is exact in binary
    let mut rng = stream(8, 0, 0, Role::Auxiliary);
    let sample: Vec<f64> = (0..1_000).map(|_| f64::from(rng.random_range(0u32..1 << 20))).collect();
    let base = risk_measures(&sample, &DEFAULT_LEVELS).unwrap();
    let shifted = risk_measures(&sample.iter().map(|v| v + 4096.0).collect::<Vec<_>>(), &DEFAULT_LEVELS).unwrap();
    let scaled = risk_measures(&sample.iter().map(|v| v * 8.0).collect::<Vec<_>>(), &DEFAULT_LEVELS).unwrap();
    let mut props = true;
    for ((b, s), k) in base.levels.iter().zip(&shifted.levels).zip(&scaled.levels) {
        props &= s.var == b.var + 4096.0 && s.tvar == b.tvar + 4096.0;
        props &= k.var == 8.0 * b.var && k.tvar == 8.0 * b.tvar;
    }
    props &= shifted.risk_capital == base.risk_capital && scaled.risk_capital == base.risk_capital.map(|v| 8.0 * v);

    let table = risk_capital_from(138_059_327.0, 110_341_323.0) == 27_718_004.0;
    outcome(
        oracle && props && table,
        format!("VaR95 {} TVaR95 {} RC {:?}; translation/homogeneity exact: {props}; 138059327 - 110341323 = 27718004: {table}", l.var, l.tvar, r.risk_capital),
    )
}

// 9. Chain ladder.
fn chain_ladder() -> Outcome {
    let two = chain_ladder_mack(&RunoffTriangle::from_cumulative(vec![vec![10.0, 15.0], vec![12.0]]).unwrap()).unwrap().reserve;
    let developed = vec![vec![10.0, 10.0, 10.0], vec![7.0, 7.0], vec![3.0]];
    let zero = chain_ladder_mack(&RunoffTriangle::from_cumulative(developed).unwrap()).unwrap().reserve;
    let tri = vec![vec![100.0, 160.0, 180.0], vec![120.0, 200.0], vec![140.0]];
    let r1 = chain_ladder_mack(&RunoffTriangle::from_cumulative(tri.clone()).unwrap()).unwrap().reserve;
    let scaled: Vec<Vec<f64>> = tri.iter().map(|row| row.iter().map(|v| v * 37.5).collect()).collect();
    let r2 = chain_ladder_mack(&RunoffTriangle::from_cumulative(scaled).unwrap()).unwrap().reserve;
    let scale_ok = rel(r2, 37.5 * r1) < 1e-12;
    outcome(two == 6.0 && zero == 0.0 && scale_ok, format!("2x2 reserve {two}; developed {zero}; scaled reserve ratio {:.12}", r2 / r1))
}

fn bootstrap_base(records: &[ClaimRecord]) -> BootstrapBase {
    let delays: Vec<f64> = records.iter().filter_map(|r| r.settlement_delay()).collect();
    let (gg, diag) = fit_generalized_gamma(&delays).unwrap();
    let cov = diag.covariance_matrix();
    let mut settlement_covariance = [[0.0; 3]; 3];
    for (r, row) in settlement_covariance.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = cov[(r, c)];
        }
    }
    let (ti, ai) = payments(records, PaymentType::Indemnity);
    let (te, ae) = payments(records, PaymentType::Expense);
    let (fi, fe) = (fit_inflation(&ti, &ai).unwrap(), fit_inflation(&te, &ae).unwrap());
    let mut fa = fx::financial(4.0, fx::DISCOUNT_RATE);
    fa.alpha1 = fi.alpha;
    fa.alpha2 = fe.alpha;
    // severities refitted to the same records, κ held at the reference values
    let refit = |kind, alpha, start: SeverityModel<f64>| {
        let opts = SeverityFitOptions { kappa: KappaMode::Fixed { kappa: start.kappa }, tol: 1e-6, covariance: false, ..Default::default() };
        fit_severity_em_from(&severity_observations(records, kind, alpha, 0.0), &opts, &start).unwrap().model
    };
    let models = ReserveModels {
        settlement: PositiveDistribution::GeneralizedGamma(gg),
        indemnity: refit(PaymentType::Indemnity, fi.alpha, fx::indemnity_severity()),
        expense: refit(PaymentType::Expense, fe.alpha, fx::expense_severity()),
        ..fx::reserve_models()
    };
    BootstrapBase {
        models,
        fa,
        settlement_covariance,
        alpha_variance: [fi.alpha_se.powi(2), fe.alpha_se.powi(2)],
        severity_options: SeverityFitOptions { tol: 1e-6, covariance: false, ..Default::default() },
        refit_kappa: false,
    }
}

// 10. Parameter-uncertainty bootstrap.
fn bootstrap() -> Outcome {
    let records = fx::synthetic_records(300, 10.0, 11);
    let base = bootstrap_base(&records);
    let info = fx::synthetic_portfolio();
    let cfg = SimConfig::new(10_000, 6);
    let none = bootstrap_parameter_uncertainty(&records, &info, &base, &ParameterUncertainty::none(), &cfg).unwrap();
    let plain = simulate_rbns(&info, &base.models, &base.fa, &cfg).unwrap();
    let other = simulate_rbns(&info, &base.models, &base.fa, &SimConfig::new(10_000, 1006)).unwrap();
    let identical = none.totals == plain.totals;
    let ks = ks_two_sample(&none.totals, &other.totals).unwrap();
    let full = bootstrap_parameter_uncertainty(&records, &info, &base, &ParameterUncertainty::full(), &cfg).unwrap();
    outcome(
        identical && ks.p_value > 0.01 && full.sd() > none.sd(),
        format!(
            "zero covariance identical to plain simulation: {identical}; KS p vs independent run {:.3}; sd {:.0} (full) > {:.0} (none), {} of {} scenarios failed",
            ks.p_value,
            full.sd(),
            none.sd(),
            full.diagnostics.failed,
            full.diagnostics.requested
        ),
    )
}

fn run_cli(args: &[&str]) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_atrp")).args(args).output().expect("binary runs");
    assert!(out.status.success(), "atrp {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

// 11. generate → calibrate → reserve/ibnr/bootstrap, byte for byte across worker counts.
fn cli_determinism() -> Outcome {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut outputs = Vec::new();
    for (dir, threads) in dirs.iter().zip(["1", "2", "4"]) {
        let root = dir.path();
        let gen = root.join("gen");
        let g = gen.to_str().unwrap();
        run_cli(&["generate", "--claims", "300", "--span-years", "4", "--seed", "11", "--threads", threads, "--out", g]);
        let claims = gen.join("claims.csv");
        let c = claims.to_str().unwrap();
        let d = root.to_str().unwrap();
        run_cli(&["calibrate", "--data", c, "--threads", threads, "--out", d]);
        let bundle = root.join("bundle.json");
        let b = bundle.to_str().unwrap();
        for (cmd, sims) in [("reserve", "5000"), ("ibnr", "2000"), ("bootstrap", "300")] {
            let out = root.join(cmd);
            run_cli(&[cmd, "--data", c, "--bundle", b, "--sims", sims, "--seed", "5", "--threads", threads, "--out", out.to_str().unwrap()]);
        }
        let mut all = files(&gen);
        all.extend(files(root));
        for cmd in ["reserve", "ibnr", "bootstrap"] {
            all.extend(files(&root.join(cmd)).into_iter().map(|(n, b)| (format!("{cmd}/{n}"), b)));
        }
        outputs.push(all);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    let bytes: usize = outputs[0].iter().map(|f| f.1.len()).sum();
    outcome(same, format!("{} files ({bytes} bytes) identical with 1, 2 and 4 workers: {same}", outputs[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("quadrature moments vs 10^6-path simulation", quadrature_vs_simulation),
        ("closed-form moments vs CDF quadrature", closed_form_moments),
        ("exact IBNR/UPR count invariances", exact_invariances),
        ("monotonicity in beta, gamma and TRP acceleration", monotonicity),
        ("TRP special cases", trp_special_cases),
        ("calibration recovery at n = 10^5", calibration_recovery),
        ("normal-mixture reserve fit", normal_mixture),
        ("risk-measure analytics", risk_metrics),
        ("chain ladder", chain_ladder),
        ("parameter-uncertainty bootstrap", bootstrap),
        ("CLI byte reproducibility across worker counts", cli_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.1} s]",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
