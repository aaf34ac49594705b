//! Small derivative-free optimizers and root finders used by the fitting code.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex minimization.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], tol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        let size = simplex[1..]
            .iter()
            .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= tol * (values[0].abs() + tol) && size <= tol.sqrt() {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                // shrink towards the best vertex
                let best = simplex[0].clone();
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = best[j] + 0.5 * (simplex[i][j] - best[j]);
                    }
                    values[i] = eval(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum { x: simplex[best].clone(), value: values[best], iterations, converged }
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + c.abs() + d.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Root of a continuous function on a sign-changing bracket (Brent's method).
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Some(b)
}

/// Central-difference Hessian with relative steps.
pub fn numeric_hessian<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], rel_step: f64) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| rel_step * v.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut m = DMatrix::zeros(n, n);
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h[i];
        let fp = f(&p);
        p[i] = x[i] - h[i];
        let fm = f(&p);
        p[i] = x[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut q = x.to_vec();
            let mut corner = |si: f64, sj: f64| {
                q[i] = x[i] + si * h[i];
                q[j] = x[j] + sj * h[j];
                f(&q)
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = m.clone().cholesky()?.inverse();
    Some(0.5 * (&inv + inv.transpose()))
}

/// Lower Cholesky factor of a covariance matrix; zero rows/columns are allowed.
pub fn covariance_factor(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = cov.nrows();
    let active: Vec<usize> = (0..n).filter(|&i| cov[(i, i)] > 0.0).collect();
    let mut out = DMatrix::zeros(n, n);
    if active.is_empty() {
        return Some(out);
    }
    let sub = DMatrix::from_fn(active.len(), active.len(), |r, c| cov[(active[r], active[c])]);
    let l = sub.cholesky()?.l();
    for (r, &ir) in active.iter().enumerate() {
        for (c, &ic) in active.iter().enumerate() {
            out[(ir, ic)] = l[(r, c)];
        }
    }
    Some(out)
}

/// `mean + L z` for a standard normal vector `z`.
pub fn mvn_transform(mean: &[f64], factor: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let v = factor * DVector::from_column_slice(z);
    mean.iter().zip(v.iter()).map(|(m, d)| m + d).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], 1e-14, 5000);
        assert!(m.converged);
        assert_relative_eq!(m.x[0], 1.0, epsilon = 1e-5);
        assert_relative_eq!(m.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn golden_quadratic() {
        let (x, _) = golden_section(|x| (x - 0.3).powi(2), -2.0, 2.0, 1e-10);
        assert_relative_eq!(x, 0.3, epsilon = 1e-7);
    }

    #[test]
    fn brent_cubic() {
        let r = brent_root(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert_relative_eq!(r, 2f64.cbrt(), epsilon = 1e-12);
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_none());
    }

    #[test]
    fn hessian_of_quadratic_form() {
        let f = |p: &[f64]| 2.0 * p[0] * p[0] + 3.0 * p[0] * p[1] + 5.0 * p[1] * p[1];
        let h = numeric_hessian(f, &[0.4, -0.2], 1e-4);
        assert_relative_eq!(h[(0, 0)], 4.0, epsilon = 1e-5);
        assert_relative_eq!(h[(0, 1)], 3.0, epsilon = 1e-5);
        assert_relative_eq!(h[(1, 1)], 10.0, epsilon = 1e-5);
        let inv = spd_inverse(&h).unwrap();
        let id = &h * inv;
        assert_relative_eq!(id[(0, 0)], 1.0, epsilon = 1e-8);
        assert_relative_eq!(id[(1, 0)], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn covariance_factor_skips_zero_rows() {
        let mut c = DMatrix::zeros(3, 3);
        c[(0, 0)] = 4.0;
        c[(2, 2)] = 9.0;
        c[(0, 2)] = 1.0;
        c[(2, 0)] = 1.0;
        let l = covariance_factor(&c).unwrap();
        let back = &l * l.transpose();
        assert_relative_eq!(back, c, epsilon = 1e-12);
        assert_eq!(l[(1, 1)], 0.0);
    }
}
