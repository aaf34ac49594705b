//! Special functions used by the distributions.
//!
//! Evaluation is delegated to `statrs` in double precision; these wrappers
//! add the generic scalar interface, the closed boundary cases that `statrs`
//! rejects (`x = 0`, `x = ∞`), and the inverses `statrs` does not ship.

use crate::real::Real;
use statrs::function::{erf, gamma};

#[inline]
pub fn ln_gamma<T: Real>(x: T) -> T {
    T::lit(gamma::ln_gamma(x.to_f64_lossy()))
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p<T: Real>(a: T, x: T) -> T {
    T::lit(gamma_p_f64(a.to_f64_lossy(), x.to_f64_lossy()))
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`, accurate in the upper tail.
pub fn gamma_q<T: Real>(a: T, x: T) -> T {
    T::lit(gamma_q_f64(a.to_f64_lossy(), x.to_f64_lossy()))
}

pub(crate) fn gamma_p_f64(a: f64, x: f64) -> f64 {
    if x.is_nan() || a.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else if x > a + 1.0 {
        1.0 - gamma::gamma_ur(a, x)
    } else {
        gamma::gamma_lr(a, x)
    }
}

pub(crate) fn gamma_q_f64(a: f64, x: f64) -> f64 {
    if x.is_nan() || a.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        1.0
    } else if x == f64::INFINITY {
        0.0
    } else if x > a + 1.0 {
        gamma::gamma_ur(a, x)
    } else {
        1.0 - gamma::gamma_lr(a, x)
    }
}

/// Inverse of `P(a, ·)`. Both `p` and its complement `q` are passed so the
/// upper tail can be solved against `Q` without cancellation.
pub fn inv_gamma_pq(a: f64, p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if q <= 0.0 {
        return f64::INFINITY;
    }
    let upper = p > 0.5;
    let a1 = a - 1.0;
    let gln = gamma::ln_gamma(a);
    let (lna1, afac) = if a > 1.0 {
        let l = a1.ln();
        (l, (a1 * (l - 1.0) - gln).exp())
    } else {
        (0.0, 0.0)
    };

    // initial guess (Wilson–Hilferty above shape 1, power/log guess below)
    let mut x = if a > 1.0 {
        let pp = if upper { q } else { p };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if !upper {
            z = -z;
        }
        (a * (1.0 - 1.0 / (9.0 * a) - z / (3.0 * a.sqrt())).powi(3)).max(1e-3)
    } else {
        let t = 1.0 - a * (0.253 + a * 0.12);
        if p < t {
            (p / t).powf(1.0 / a)
        } else {
            1.0 - ((q) / (1.0 - t)).ln()
        }
    };

    for _ in 0..100 {
        if x <= 0.0 {
            return 0.0;
        }
        let err = if upper {
            q - gamma_q_f64(a, x)
        } else {
            gamma_p_f64(a, x) - p
        };
        // density of Gamma(a, 1) at x
        let t = if a > 1.0 {
            afac * (-(x - a1) + a1 * (x.ln() - lna1)).exp()
        } else {
            (-x + a1 * x.ln() - gln).exp()
        };
        if t == 0.0 || !t.is_finite() {
            break;
        }
        let u = err / t;
        let step = u / (1.0 - 0.5 * (u * (a1 / x - 1.0)).min(1.0));
        let prev = x;
        x -= step;
        if x <= 0.0 {
            x = 0.5 * prev;
        }
        if (x - prev).abs() <= 1e-15 * x.max(1e-300) {
            break;
        }
    }
    x
}

/// Standard normal CDF.
pub fn norm_cdf<T: Real>(x: T) -> T {
    let z = x.to_f64_lossy() / std::f64::consts::SQRT_2;
    // erfc is most accurate for positive arguments
    T::lit(if z < 0.0 { 0.5 * libm::erfc(-z) } else { 1.0 - 0.5 * libm::erfc(z) })
}

/// Standard normal survival function.
pub fn norm_sf<T: Real>(x: T) -> T {
    T::lit(0.5 * libm::erfc(x.to_f64_lossy() / std::f64::consts::SQRT_2))
}

#[inline]
pub fn norm_pdf<T: Real>(x: T) -> T {
    let c = T::lit(0.398_942_280_401_432_7);
    c * (-(x * x) / T::lit(2.0)).exp()
}

/// Standard normal quantile.
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// First Debye function `D₁(x) = (1/x) ∫₀ˣ t/(eᵗ−1) dt`, any real `x`.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return debye1(-x) - x / 2.0;
    }
    if x < 1e-3 {
        return 1.0 - x / 4.0 + x * x / 36.0;
    }
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    let r = crate::quadrature::integrate(integrand, 0.0, x, &crate::quadrature::QuadOptions::tight());
    r.value / x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_p_boundaries() {
        assert_eq!(gamma_p(2.0_f64, 0.0), 0.0);
        assert_eq!(gamma_q(2.0_f64, 0.0), 1.0);
        assert_eq!(gamma_p(2.0_f64, f64::INFINITY), 1.0);
        // P(1, x) = 1 − e^{−x}
        assert_relative_eq!(gamma_p(1.0_f64, 0.7), 1.0 - (-0.7_f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(gamma_q(1.0_f64, 30.0), (-30.0_f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn gamma_inverse_round_trip() {
        for &a in &[0.3, 1.0, 3.33246873, 12.0] {
            for &p in &[1e-10, 1e-4, 0.1, 0.5, 0.9, 0.9999] {
                let x = inv_gamma_pq(a, p, 1.0 - p);
                assert_relative_eq!(gamma_p_f64(a, x), p, max_relative = 1e-9);
            }
            // deep upper tail, solved against q
            let q = 1e-13;
            let x = inv_gamma_pq(a, 1.0 - q, q);
            assert_relative_eq!(gamma_q_f64(a, x), q, max_relative = 1e-7);
        }
    }

    #[test]
    fn normal_functions() {
        assert_relative_eq!(norm_cdf(0.0_f64), 0.5, epsilon = 1e-15);
        assert_relative_eq!(norm_cdf(1.959963984540054_f64), 0.975, epsilon = 1e-12);
        assert_relative_eq!(norm_ppf(0.975), 1.959963984540054, epsilon = 1e-9);
        assert_relative_eq!(norm_sf(8.0_f64), 6.220960574271785e-16, max_relative = 1e-8);
        assert_relative_eq!(norm_cdf(0.5_f32), 0.691_462_5, epsilon = 1e-6);
    }

    #[test]
    fn debye_limits() {
        assert_relative_eq!(debye1(1e-6), 1.0, epsilon = 1e-6);
        // D1(1) = 0.777504634112248...
        assert_relative_eq!(debye1(1.0), 0.777_504_634_112_248, epsilon = 1e-12);
        assert_relative_eq!(debye1(-1.0), debye1(1.0) + 0.5, epsilon = 1e-14);
    }
}
