//! Delay, severity and dependence models.

mod frank;
mod gengamma;
mod positive;
mod severity;
mod truncated;

pub use frank::{frank_tau, frank_theta_from_tau, FrankCopula};
pub use gengamma::GeneralizedGamma;
pub use positive::{DelayDistribution, PositiveDistribution, RenewalDistribution};
pub use severity::{LognormalComponent, SeverityModel, N_CLASSES};
pub use truncated::TruncatedDelay;

use crate::error::Result;
use crate::quadrature::{integrate_pieces, QuadOptions};
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// How indemnity and expense relate beyond their shared delay coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Dependence<T> {
    /// `X̃` and `Ỹ` independent; dependence only through `ζ`.
    Coupled,
    /// `(X̃, Ỹ)` joined by a Frank copula.
    Frank(FrankCopula<T>),
}

/// `E[X̃ Ỹ]` for the unshifted severities under a dependence mode.
///
/// The Frank case uses Hoeffding's identity
/// `E[XY] = E[X]E[Y] + ∬ (C(F_X, F_Y) − F_X F_Y) dx dy`, evaluated in log
/// coordinates by nested adaptive quadrature.
pub fn base_cross_moment<T: Real>(
    mx: &SeverityModel<T>,
    my: &SeverityModel<T>,
    dependence: &Dependence<T>,
) -> Result<T> {
    let product = mx.base_moment(T::one()) * my.base_moment(T::one());
    let copula = match dependence {
        Dependence::Coupled => return Ok(product),
        Dependence::Frank(c) => *c,
    };
    if product == T::zero() {
        return Ok(T::zero());
    }
    let opts = QuadOptions::with_tol(T::zero(), T::lit(1e-11));
    let fx = |s: T| mx.p0 + (T::one() - mx.p0) * mx.positive_cdf(s);
    let fy = |s: T| my.p0 + (T::one() - my.p0) * my.positive_cdf(s);
    let bx = breakpoints(mx);
    let by = breakpoints(my);
    let sx_bar = |s: T| (T::one() - mx.p0) * mx.positive_sf(s);
    let sy_bar = |s: T| (T::one() - my.p0) * my.positive_sf(s);
    let outer = integrate_pieces(
        |sx: T| {
            let (u, ub) = (fx(sx), sx_bar(sx));
            if ub <= T::zero() {
                return T::zero();
            }
            let inner = integrate_pieces(
                |sy: T| {
                    let (v, vb) = (fy(sy), sy_bar(sy));
                    copula.excess(u, ub, v, vb) * sy.exp()
                },
                &by,
                &opts,
            );
            inner.value * sx.exp()
        },
        &bx,
        &opts,
    );
    Ok(product + outer.value)
}

// log-scale breakpoints around each component so the nested rules see the bumps
fn breakpoints<T: Real>(m: &SeverityModel<T>) -> Vec<T> {
    let (lo, hi) = m.log_support();
    let mut pts = vec![lo];
    for c in &m.components {
        let (mu, s) = (c.mu.to_f64_lossy(), c.sigma.to_f64_lossy());
        for k in [-6.0, -3.0, 0.0, 3.0, 6.0] {
            pts.push(mu + k * s);
        }
    }
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    pts.into_iter().filter(|&p| p >= lo && p <= hi).map(T::lit).collect()
}

/// `E[X Y | ζ]` for a claim of the given class.
///
/// The shifts of both payments factor out of the product, so the
/// ζ-dependence is `(1 + 365ζ)^{κ₁+κ₂} e^{φ_X + φ_Y}` times the base value.
pub fn conditional_cross_moment<T: Real>(
    mx: &SeverityModel<T>,
    my: &SeverityModel<T>,
    dependence: &Dependence<T>,
    zeta: T,
    class: Option<usize>,
) -> Result<T> {
    if !(zeta >= T::zero()) {
        return Err(crate::error::Error::Domain(format!("settlement delay must be ≥ 0, got {zeta}")));
    }
    let base = base_cross_moment(mx, my, dependence)?;
    Ok(base * (mx.log_shift(zeta, class) + my.log_shift(zeta, class)).exp())
}
