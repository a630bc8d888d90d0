//! Gauss-Legendre rules.

use std::sync::OnceLock;

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * z * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[k] = -z;
        x[n - 1 - k] = z;
        let wk = 2.0 / ((1.0 - z * z) * dp * dp);
        w[k] = wk;
        w[n - 1 - k] = wk;
    }
    (x, w)
}

const CACHED: usize = 16;

/// Cached rule for `n ≤ 16`.
pub fn rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    assert!((1..=CACHED).contains(&n), "rule order {n} not cached");
    &RULES.get_or_init(|| (0..=CACHED).map(|k| gauss_legendre_rule(k.max(1))).collect())[n]
}

/// `∫_a^b f` with an `n`-point rule.
pub fn gauss_legendre<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> f64 {
    let (x, w) = rule(n);
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    r * x.iter().zip(w).map(|(&xi, &wi)| wi * f(c + r * xi)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..=CACHED {
            let deg = 2 * n - 1;
            let got = gauss_legendre(-0.3, 1.7, n, |x| x.powi(deg as i32));
            let exact = (1.7f64.powi(deg as i32 + 1) - (-0.3f64).powi(deg as i32 + 1)) / (deg + 1) as f64;
            assert!((got - exact).abs() < 1e-13 * exact.abs().max(1.0), "n={n}");
        }
    }
}
