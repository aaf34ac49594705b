use super::rbns::{RbnsSample, RbnsSimulator};
use super::SimConfig;
use crate::distributions::{RenewalDistribution, TruncatedDelay};
use crate::error::{Error, Result};
use crate::financial::FinancialAssumptions;
use crate::reserving::{RbnsInfoSet, ReserveModels};
use crate::rng::{stream, Role};
use crate::trend::TrendSpec;
use serde::{Deserialize, Serialize};

/// Per-claim draw limit for the rejection sampler.
pub const REJECTION_BUDGET: usize = 10_000;

/// How each delay is drawn inside its window given the earlier delays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrpSampler {
    /// Inverse CDF of the renewal law truncated to the transformed window.
    /// Same law as rejection, without a budget.
    #[default]
    Inversion,
    /// Redraw the renewal increment until the delay lands in the window.
    Rejection { budget: usize },
}

/// Simulates `W(t)` when the settlement delays `ζ_1, ζ_2, …` form a
/// TRP[F, λ] rather than an iid sequence.
///
/// Claims are taken in occurrence order. With `ψ_{k−1}` the sum of the
/// earlier delays, `ζ_k = Λ⁻¹(Λ(ψ_{k−1}) + τ_k) − ψ_{k−1}` with `τ_k ~ F`,
/// conditioned sequentially on the claim's window `(t − r_k, t + i − 1 − r_k]`.
/// Severities, dependence and discounting follow [`super::simulate_rbns`];
/// `models.settlement` is not used.
pub fn simulate_trp_settlement(
    info: &RbnsInfoSet<f64>,
    trend: &TrendSpec<f64>,
    renewal: &RenewalDistribution<f64>,
    models: &ReserveModels<f64>,
    fa: &FinancialAssumptions<f64>,
    cfg: &SimConfig,
    sampler: TrpSampler,
) -> Result<RbnsSample> {
    trend.validate()?;
    renewal.validate()?;
    let sim = RbnsSimulator::build(info, models, fa, cfg, false)?;
    // scaling every delay by m is the time change Λ(·/m)
    let scale = cfg.delay_scale.settlement;
    let mut order: Vec<usize> = (0..sim.claims.len()).collect();
    order.sort_by(|&a, &b| sim.claims[a].t_occ.total_cmp(&sim.claims[b].t_occ).then(sim.claims[a].id.cmp(&sim.claims[b].id)));
    let seed = sim.seed();
    let lam = |x: f64| trend.lambda_cum(x / scale);
    let lam_inv = |s: f64| trend.inverse(s).map(|u| u * scale);
    let draw = |p: u64, z: &mut [f64]| -> Result<()> {
        let mut psi = 0.0;
        for &k in &order {
            let c = &sim.claims[k];
            let s0 = lam(psi);
            let mut rng = stream(seed, p, c.id, Role::Settlement);
            let zeta = match sampler {
                TrpSampler::Inversion => {
                    let lo = lam(psi + c.lower) - s0;
                    let hi = lam(psi + c.upper) - s0;
                    let td = TruncatedDelay::new(renewal.clone(), lo.max(0.0), hi).map_err(|_| {
                        Error::Precondition(format!(
                            "claim {}: transformed settlement window ({lo}, {hi}] has zero probability",
                            c.id
                        ))
                    })?;
                    let tau = td.sample(&mut rng);
                    (lam_inv(s0 + tau)? - psi).clamp(c.lower, c.upper)
                }
                TrpSampler::Rejection { budget } => {
                    let mut hit = None;
                    for _ in 0..budget {
                        let tau = renewal.sample(&mut rng);
                        let zeta = lam_inv(s0 + tau)? - psi;
                        if zeta > c.lower && zeta <= c.upper {
                            hit = Some(zeta);
                            break;
                        }
                    }
                    hit.ok_or(Error::RejectionBudget { claim: c.id as usize, budget })?
                }
            };
            z[k] = zeta;
            psi += zeta;
        }
        Ok(())
    };
    sim.run_with(cfg.n_sims, cfg.threads, draw)
}
