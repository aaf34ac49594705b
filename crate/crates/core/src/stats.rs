//! Sample statistics shared by estimation and validation code.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the Stephens small-sample correction.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData { got: a.len().min(b.len()), need: 1 });
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p = kolmogorov_sf((en + 0.12 + 0.11 / en) * d);
    Ok(KsTest { statistic: d, p_value: p })
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsTest> {
    if sample.is_empty() {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    let en = n.sqrt();
    Ok(KsTest { statistic: d, p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d) })
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KendallTau {
    pub tau: f64,
    /// Asymptotic standard error of the U-statistic.
    pub se: f64,
}

// Fenwick tree over ranks
struct Fenwick {
    t: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self { t: vec![0; n + 1] }
    }
    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.t.len() {
            self.t[i] += 1;
            i += i & i.wrapping_neg();
        }
    }
    // count of inserted ranks < i
    fn prefix(&self, mut i: usize) -> u64 {
        let mut s = 0;
        while i > 0 {
            s += self.t[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

fn dense_ranks(v: &[f64]) -> (Vec<usize>, usize) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0; v.len()];
    let mut r = 0;
    for k in 0..idx.len() {
        if k > 0 && v[idx[k]] != v[idx[k - 1]] {
            r += 1;
        }
        ranks[idx[k]] = r;
    }
    (ranks, r + 1)
}

/// Kendall's tau-a in `O(n log n)`, with its U-statistic standard error.
///
/// For each point the number of concordant minus discordant partners is
/// counted via dominance queries; their variance gives the Hoeffding
/// projection variance `4 Var(h₁)/n`.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<KendallTau> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::InsufficientData { got: n.min(y.len()), need: 2 });
    }
    let (rx, _) = dense_ranks(x);
    let (ry, ny) = dense_ranks(y);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rx[a].cmp(&rx[b]).then(ry[a].cmp(&ry[b])));

    // s[i] = #{j: sign(x_j−x_i) sign(y_j−y_i) > 0} − #{… < 0}
    let mut s = vec![0i64; n];
    // sweep ascending x: points with strictly smaller x
    let mut fw = Fenwick::new(ny);
    let mut k = 0;
    while k < n {
        let mut e = k;
        while e < n && rx[order[e]] == rx[order[k]] {
            e += 1;
        }
        let seen = fw.prefix(ny) as i64;
        for &p in &order[k..e] {
            let below = fw.prefix(ry[p]) as i64;
            let at_or_below = fw.prefix(ry[p] + 1) as i64;
            let above = seen - at_or_below;
            s[p] += below - above;
        }
        for &p in &order[k..e] {
            fw.add(ry[p]);
        }
        k = e;
    }
    // sweep descending x: points with strictly larger x
    let mut fw = Fenwick::new(ny);
    let mut k = n;
    while k > 0 {
        let mut b = k;
        while b > 0 && rx[order[b - 1]] == rx[order[k - 1]] {
            b -= 1;
        }
        let seen = fw.prefix(ny) as i64;
        for &p in &order[b..k] {
            let below = fw.prefix(ry[p]) as i64;
            let at_or_below = fw.prefix(ry[p] + 1) as i64;
            let above = seen - at_or_below;
            s[p] += above - below;
        }
        for &p in &order[b..k] {
            fw.add(ry[p]);
        }
        k = b;
    }
    let total: i64 = s.iter().sum();
    let pairs = (n * (n - 1)) as f64;
    let tau = total as f64 / pairs;
    // projection h1_i ≈ s_i/(n−1); Var(τ̂) ≈ 4 Var(h1)/n
    let h: Vec<f64> = s.iter().map(|&v| v as f64 / (n - 1) as f64).collect();
    let hm = mean(&h);
    let vh = h.iter().map(|v| (v - hm) * (v - hm)).sum::<f64>() / (n as f64 - 1.0);
    Ok(KendallTau { tau, se: (4.0 * vh / n as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_tau(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += ((x[j] - x[i]) * (y[j] - y[i])).signum() * if x[j] == x[i] || y[j] == y[i] { 0.0 } else { 1.0 };
                }
            }
        }
        s / (n * (n - 1)) as f64
    }

    #[test]
    fn kendall_matches_brute_force_with_ties() {
        let x = [1.0, 2.0, 2.0, 3.0, 5.0, 4.0, 7.0, 1.0];
        let y = [3.0, 1.0, 4.0, 4.0, 2.0, 6.0, 5.0, 3.0];
        let k = kendall_tau(&x, &y).unwrap();
        assert_relative_eq!(k.tau, brute_tau(&x, &y), epsilon = 1e-15);
        let inc: Vec<f64> = (0..20).map(f64::from).collect();
        assert_relative_eq!(kendall_tau(&inc, &inc).unwrap().tau, 1.0);
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let t = ks_two_sample(&a, &a).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        let b: Vec<f64> = a.iter().map(|v| v + 250.0).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-6);
    }

    #[test]
    fn kolmogorov_quantile() {
        // the 1% critical value of the Kolmogorov law is 1.6276
        assert_relative_eq!(kolmogorov_sf(1.62762), 0.01, epsilon = 1e-5);
    }
}
