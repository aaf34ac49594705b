//! Globally adaptive Gauss–Kronrod (7/15) integration.

use crate::real::Real;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

// QUADPACK 15-point Kronrod abscissae (non-negative half) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self { abs_tol: T::lit(1e-10), rel_tol: T::lit(1e-10), max_intervals: 400 }
    }
}

impl<T: Real> QuadOptions<T> {
    pub fn tight() -> Self {
        Self { abs_tol: T::lit(1e-14), rel_tol: T::lit(1e-12), max_intervals: 1000 }
    }

    pub fn with_tol(abs_tol: T, rel_tol: T) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_error: T,
    pub evaluations: usize,
    pub converged: bool,
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Real> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real> Eq for Segment<T> {}
impl<T: Real> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

fn kronrod<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let h = half * (b - a);
    let fc = f(center);
    let mut res_k = fc * T::lit(WGK[7]);
    let mut res_g = fc * T::lit(WG[3]);
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = h * T::lit(x);
        let s = f(center - dx) + f(center + dx);
        res_k = res_k + T::lit(w) * s;
        if i % 2 == 1 {
            res_g = res_g + T::lit(WG[i / 2]) * s;
        }
    }
    let value = res_k * h;
    let err = ((res_k - res_g) * h).abs();
    (value, err)
}

/// Integrates `f` over `[a, b]` (finite bounds, `a ≤ b` or reversed).
pub fn integrate<T, F>(mut f: F, a: T, b: T, opts: &QuadOptions<T>) -> QuadResult<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    if a == b {
        return QuadResult { value: T::zero(), abs_error: T::zero(), evaluations: 0, converged: true };
    }
    if b < a {
        let r = integrate(f, b, a, opts);
        return QuadResult { value: -r.value, ..r };
    }
    adaptive(&mut f, &[a, b], opts)
}

// Global adaptive Gauss–Kronrod: one heap over all segments, so the
// tolerance applies to the whole integral rather than to each piece.
fn adaptive<T, F>(f: &mut F, points: &[T], opts: &QuadOptions<T>) -> QuadResult<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    let mut heap = BinaryHeap::new();
    let mut total = T::zero();
    let mut total_err = T::zero();
    let mut evals = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (v, e) = kronrod(f, w[0], w[1]);
            evals += 15;
            total = total + v;
            total_err = total_err + e;
            heap.push(Segment { a: w[0], b: w[1], value: v, error: e });
        }
    }
    let mut converged = false;
    let limit = opts.max_intervals.max(heap.len());
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            converged = true;
            break;
        }
        if heap.len() >= limit + points.len() {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = T::lit(0.5) * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in this precision
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod(f, worst.a, mid);
        let (v2, e2) = kronrod(f, mid, worst.b);
        evals += 30;
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.error + e1 + e2;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated round-off from the running updates
    let mut value = T::zero();
    let mut error = T::zero();
    for s in heap.iter() {
        value = value + s.value;
        error = error + s.error;
    }
    QuadResult { value, abs_error: error, evaluations: evals, converged }
}

/// Integrates over `[a, ∞)` via `x = a + s/(1−s)`.
pub fn integrate_to_infinity<T, F>(mut f: F, a: T, opts: &QuadOptions<T>) -> QuadResult<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    let one = T::one();
    let g = |s: T| {
        if s >= one {
            return T::zero();
        }
        let d = one - s;
        let v = f(a + s / d) / (d * d);
        if v.is_finite() {
            v
        } else {
            T::zero()
        }
    };
    integrate(g, T::zero(), one, opts)
}

/// Integrates over consecutive breakpoints, summing the pieces.
pub fn integrate_pieces<T, F>(mut f: F, points: &[T], opts: &QuadOptions<T>) -> QuadResult<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    adaptive(&mut f, points, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, &QuadOptions::default());
        assert_relative_eq!(r.value, 0.0, epsilon = 1e-13);
        let r = integrate(|x: f64| x.powi(4), -1.0, 3.0, &QuadOptions::default());
        assert_relative_eq!(r.value, (243.0 + 1.0) / 5.0, epsilon = 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let f = |x: f64| x.sin();
        let a = integrate(f, 0.0, 1.0, &QuadOptions::default()).value;
        let b = integrate(f, 1.0, 0.0, &QuadOptions::default()).value;
        assert_eq!(a, -b);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫₀¹ x^{-1/2} = 2
        let r = integrate(|x: f64| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, &QuadOptions::tight());
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn semi_infinite() {
        let r = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, &QuadOptions::tight());
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-12);
        let r = integrate_to_infinity(|x: f64| 1.0 / (1.0 + x * x), 0.0, &QuadOptions::tight());
        assert_relative_eq!(r.value, std::f64::consts::FRAC_PI_2, epsilon = 1e-10);
    }

    #[test]
    fn single_precision() {
        let r = integrate(|x: f32| x.exp(), 0.0, 1.0, &QuadOptions::with_tol(1e-6, 1e-6));
        assert!((r.value - (1.0_f32.exp() - 1.0)).abs() < 1e-5);
    }
}
