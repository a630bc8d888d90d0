//! Independent reference solutions of `−f'' + (λ/cosh²x + q(x)) f = z² f`
//! by adaptive Dormand-Prince integration in complex arithmetic.
//!
//! `f₀⁺` is seeded from its Frobenius expansion `e^{izx} Σ aₙ e^{−2nx}`
//! (recurrence read off the ODE, valid for `Re x > 0`) at a complex point
//! `F` chosen so that the unwanted solution decays along the path from `F`
//! back to the target. The perturbed solutions then continue `f₀±` from the
//! support endpoint along the real axis, piece by piece.

#![allow(dead_code)]

use ptscat::kernel::PerturbationSpec;
use ptscat::Complex;

pub type C = Complex;

fn sech2(x: C) -> C {
    let c = x.cosh();
    1.0 / (c * c)
}

/// Integrates `y'' = (V(x) − z²) y` along `x(s) = x0 + s·dir`, `s ∈ [0, len]`.
/// Returns `(y, dy/dx)` at the end.
pub fn integrate_path<V: Fn(C) -> C>(
    v: &V,
    z: C,
    x0: C,
    dir: C,
    len: f64,
    y0: (C, C),
    rtol: f64,
) -> (C, C) {
    // State u = (y, dy/ds) with d²y/ds² = dir²(V − z²)y.
    let rhs = |s: f64, u: [C; 2]| -> [C; 2] {
        let x = x0 + dir * s;
        [u[1], dir * dir * (v(x) - z * z) * u[0]]
    };
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const CS: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const B5: [f64; 7] =
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut u = [y0.0, y0.1 * dir];
    let mut s = 0.0;
    let mut h = (len / 100.0).min(0.01);
    while s < len {
        if s + h > len {
            h = len - s;
        }
        let mut k = [[C::new(0.0, 0.0); 2]; 7];
        k[0] = rhs(s, u);
        for st in 1..7 {
            let mut tmp = u;
            for (j, kj) in k.iter().enumerate().take(st) {
                let a = A[st - 1][j];
                tmp[0] += h * a * kj[0];
                tmp[1] += h * a * kj[1];
            }
            k[st] = rhs(s + CS[st] * h, tmp);
        }
        let mut u5 = u;
        let mut err = [C::new(0.0, 0.0); 2];
        for st in 0..7 {
            u5[0] += h * B5[st] * k[st][0];
            u5[1] += h * B5[st] * k[st][1];
            err[0] += h * (B5[st] - B4[st]) * k[st][0];
            err[1] += h * (B5[st] - B4[st]) * k[st][1];
        }
        let scale = u5[0].norm().max(u5[1].norm()).max(u[0].norm()).max(1e-300);
        let e = err[0].norm().max(err[1].norm()) / (rtol * scale);
        if e <= 1.0 {
            s += h;
            u = u5;
        }
        let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
    (u[0], u[1] / dir)
}

/// Frobenius coefficients of `f₀⁺ = e^{izx} Σ aₙ e^{−2nx}`.
fn frobenius(lambda: f64, z: C, n: usize) -> Vec<C> {
    let i = C::i();
    let mut a = vec![C::new(1.0, 0.0)];
    for k in 1..=n {
        let mut s = C::new(0.0, 0.0);
        for m in 1..=k {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * m as f64 * a[k - m];
        }
        a.push(lambda * s / (k as f64 * (k as f64 - i * z)));
    }
    a
}

/// `(f₀⁺, f₀⁺')` from the Frobenius expansion, for `Re x ≥ 1`.
pub fn frobenius_value(lambda: f64, z: C, x: C) -> (C, C) {
    let i = C::i();
    let a = frobenius(lambda, z, 60);
    let q = (-2.0 * x).exp();
    let (mut s, mut ds, mut p) = (C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0));
    for (n, an) in a.iter().enumerate() {
        s += an * p;
        ds += an * (i * z - 2.0 * n as f64) * p;
        p *= q;
    }
    let e = (i * z * x).exp();
    (e * s, e * ds)
}

/// Unnormalized `f₀⁺(x, z)` for real `x`, `z` off the poles `−iℕ*`, and
/// `arg z` not too close to `−π/2`.
pub fn f0_plus(lambda: f64, x: f64, z: C) -> (C, C) {
    if z.im < 0.0 && z.re < 0.0 {
        // f⁺(x, z) = conj f⁺(x, −z̄) for a real potential.
        let (y, dy) = f0_plus(lambda, x, -z.conj());
        return (y.conj(), dy.conj());
    }
    let xc = C::new(x, 0.0);
    if x >= 2.0 {
        return frobenius_value(lambda, z, xc);
    }
    let phi = z.arg();
    let theta = 0.5 * (std::f64::consts::FRAC_PI_2 - phi);
    let dir_out = C::from_polar(1.0, theta);
    let len = (3.0 - x) / theta.cos();
    let start = xc + dir_out * len;
    let v = |t: C| lambda * sech2(t);
    let data = frobenius_value(lambda, z, start);
    if x >= 0.0 {
        return integrate_path(&v, z, start, -dir_out, len, data, 1e-13);
    }
    // Cross the imaginary axis below the first singular point i·π/2 so the
    // continuation stays on the branch of the real axis.
    let p = C::new(0.0, 1.2 * z.re.signum());
    let leg1 = p - start;
    let mid = integrate_path(&v, z, start, leg1 / leg1.norm(), leg1.norm(), data, 1e-13);
    let leg2 = xc - p;
    integrate_path(&v, z, p, leg2 / leg2.norm(), leg2.norm(), mid, 1e-13)
}

/// Unnormalized `f₀⁻(x, z) = f₀⁺(−x, z)`.
pub fn f0_minus(lambda: f64, x: f64, z: C) -> (C, C) {
    let (y, dy) = f0_plus(lambda, -x, z);
    (y, -dy)
}

fn real_leg(lambda: f64, q: &PerturbationSpec, z: C, from: f64, to: f64, y: (C, C)) -> (C, C) {
    let mut cuts: Vec<f64> = q.breakpoints().into_iter().filter(|b| {
        (b - from) * (b - to) < 0.0
    }).collect();
    if from > to {
        cuts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    } else {
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    cuts.insert(0, from);
    cuts.push(to);
    let mut state = y;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let piece = q.pieces.iter().find(|p| mid > p.lo && mid < p.hi).cloned();
        let v = move |t: C| {
            let qv = match &piece {
                Some(p) => p.coeffs.iter().rev().fold(C::new(0.0, 0.0), |acc, &c| acc * t + c),
                None => C::new(0.0, 0.0),
            };
            lambda * sech2(t) + qv
        };
        let dir = if b > a { C::new(1.0, 0.0) } else { C::new(-1.0, 0.0) };
        state = integrate_path(&v, z, C::new(a, 0.0), dir, (b - a).abs(), state, 1e-13);
    }
    state
}

/// Unnormalized perturbed `f⁺(x, z)`.
pub fn f_plus(lambda: f64, q: &PerturbationSpec, x: f64, z: C) -> (C, C) {
    if x >= q.beta {
        return f0_plus(lambda, x, z);
    }
    let start = f0_plus(lambda, q.beta, z);
    real_leg(lambda, q, z, q.beta, x, start)
}

/// Unnormalized perturbed `f⁻(x, z)`.
pub fn f_minus(lambda: f64, q: &PerturbationSpec, x: f64, z: C) -> (C, C) {
    if x <= q.alpha {
        return f0_minus(lambda, x, z);
    }
    let start = f0_minus(lambda, q.alpha, z);
    real_leg(lambda, q, z, q.alpha, x, start)
}

/// `[f, g] = f g' − f' g`.
pub fn wr(f: (C, C), g: (C, C)) -> C {
    f.0 * g.1 - f.1 * g.0
}

pub fn rel(a: C, b: C) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
