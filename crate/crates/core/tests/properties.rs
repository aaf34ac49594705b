use atrp_core::distributions::{frank_tau, frank_theta_from_tau, PositiveDistribution, TruncatedDelay};
use atrp_core::fixtures as fx;
use atrp_core::montecarlo::{ibnr_proportions, simulate_exposure, SimConfig};
use atrp_core::riskmetrics::{chain_ladder_mack, risk_measures, RunoffTriangle, DEFAULT_LEVELS};
use atrp_core::rng::{stream, Role};
use atrp_core::special::{norm_cdf, norm_sf};
use atrp_core::trend::TrendSpec;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn risk_measures_translate_and_scale(
        xs in prop::collection::vec(-1_000i32..1_000, 20..200),
        shift in -500i32..500,
        pow in -4i32..6,
    ) {
        let x: Vec<f64> = xs.iter().map(|&v| v as f64).collect();
        let base = risk_measures(&x, &DEFAULT_LEVELS).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| v + shift as f64).collect();
        let m = risk_measures(&moved, &DEFAULT_LEVELS).unwrap();
        let lam = 2f64.powi(pow);
        let scaled: Vec<f64> = x.iter().map(|v| v * lam).collect();
        let s = risk_measures(&scaled, &DEFAULT_LEVELS).unwrap();
        for k in 0..DEFAULT_LEVELS.len() {
            prop_assert_eq!(m.levels[k].var, base.levels[k].var + shift as f64);
            prop_assert!((m.levels[k].tvar - (base.levels[k].tvar + shift as f64)).abs() <= 1e-12 * m.levels[k].tvar.abs().max(1.0));
            // scaling by a power of two is exact in binary floating point
            prop_assert_eq!(s.levels[k].var, lam * base.levels[k].var);
            prop_assert_eq!(s.levels[k].tvar, lam * base.levels[k].tvar);
        }
        prop_assert!(base.levels.windows(2).all(|w| w[0].var <= w[1].var && w[0].tvar <= w[1].tvar));
    }

    #[test]
    fn chain_ladder_is_scale_invariant(
        c in prop::collection::vec(1.0f64..1_000.0, 10),
        lam in 0.01f64..100.0,
    ) {
        // 4×4 cumulative triangle with increasing rows
        let rows: Vec<Vec<f64>> = (0..4).map(|i| {
            let mut acc = 0.0;
            (0..4 - i).map(|j| { acc += c[(i + j) % 10]; acc }).collect()
        }).collect();
        let base = chain_ladder_mack(&RunoffTriangle::from_cumulative(rows.clone()).unwrap()).unwrap();
        let scaled_rows = rows.iter().map(|r| r.iter().map(|v| v * lam).collect()).collect();
        let scaled = chain_ladder_mack(&RunoffTriangle::from_cumulative(scaled_rows).unwrap()).unwrap();
        prop_assert!((scaled.reserve - lam * base.reserve).abs() <= 1e-9 * (lam * base.reserve).abs().max(1e-9));
        for (a, b) in base.factors.iter().zip(&scaled.factors) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn truncated_delays_stay_in_their_window(lo in 0.0f64..6.0, width in 0.01f64..3.0, seed in any::<u64>()) {
        let d = TruncatedDelay::new(PositiveDistribution::GeneralizedGamma(fx::settlement_delay()), lo, lo + width);
        if let Ok(d) = d {
            let mut rng = stream(seed, 0, 0, Role::Settlement);
            for _ in 0..50 {
                let z = d.sample(&mut rng);
                prop_assert!(z > lo && z <= lo + width, "{} not in ({}, {}]", z, lo, lo + width);
            }
        }
    }

    #[test]
    fn frank_tau_inversion_round_trips(theta in prop_oneof![-30.0f64..-0.01, 0.01f64..30.0]) {
        let back = frank_theta_from_tau(frank_tau(theta)).unwrap().unwrap();
        prop_assert!((back - theta).abs() <= 1e-6 * theta.abs().max(1.0));
    }

    #[test]
    fn trend_inverse_undoes_the_cumulative(gamma in 0.2f64..3.0, t in 0.0f64..50.0) {
        let spec = TrendSpec::Power { gamma };
        let back = spec.inverse(spec.lambda_cum(t)).unwrap();
        prop_assert!((back - t).abs() <= 1e-9 * t.max(1.0));
    }

    #[test]
    fn normal_tails_are_complementary(x in -30.0f64..30.0) {
        prop_assert!((norm_cdf(x) + norm_sf(x) - 1.0).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exposure_identities_hold_on_every_path(seed in any::<u64>(), gamma in 0.5f64..1.5) {
        let mut cfg = SimConfig::new(200, seed);
        cfg.horizon = 1.0;
        let s = simulate_exposure(&fx::exposure_models(gamma), &fx::financial(1.0, 0.06), &cfg).unwrap();
        for p in 0..s.len() {
            prop_assert_eq!(s.z_occ[p], s.z_cm[p] + s.z_tc[p]);
            prop_assert_eq!(s.n_occ[p], s.n_cm[p] + s.n_tc[p]);
        }
        let prop = ibnr_proportions(&s).unwrap();
        prop_assert!((0.0..=1.0).contains(&prop.count_based) && (0.0..=1.0).contains(&prop.cost_based));
    }
}

#[test]
fn risk_measures_on_one_to_hundred() {
    let x: Vec<f64> = (1..=100).map(f64::from).collect();
    let s = risk_measures(&x, &DEFAULT_LEVELS).unwrap();
    let l = s.at(0.95).unwrap();
    assert_eq!((l.var, l.tvar), (95.0, 98.0));
    assert_eq!(s.risk_capital, Some(17.5));
}

#[test]
fn chain_ladder_hand_cases() {
    let r = chain_ladder_mack(&RunoffTriangle::from_cumulative(vec![vec![10.0, 15.0], vec![12.0]]).unwrap()).unwrap();
    assert_eq!(r.reserve, 6.0);
    let developed = vec![vec![10.0, 10.0, 10.0], vec![7.0, 7.0], vec![3.0]];
    assert_eq!(chain_ladder_mack(&RunoffTriangle::from_cumulative(developed).unwrap()).unwrap().reserve, 0.0);
}
