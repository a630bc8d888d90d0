//! Complex Γ, the Gauss hypergeometric series and a few classical identities
//! around it (regularized series, ζ-derivative, value at ½, Kummer's
//! connection between ζ and 1−ζ, large-c partial sums).

use crate::{Complex, Error, Result};
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const POLE_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 20_000;
const SERIES_REL: f64 = 1e-16;
/// Largest |ζ| accepted by the direct series.
pub const SERIES_MAX_ZETA: f64 = 0.99;

/// Arguments of `₂F₁(a, b; c; ζ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyp2F1Args {
    pub a: Complex,
    pub b: Complex,
    pub c: Complex,
    pub zeta: Complex,
}

impl Hyp2F1Args {
    pub fn new(a: Complex, b: Complex, c: Complex, zeta: Complex) -> Self {
        Hyp2F1Args { a, b, c, zeta }
    }
}

fn nonpositive_integer_near(z: Complex, tol: f64) -> Option<i64> {
    let n = z.re.round();
    if n <= 0.0 && (z - Complex::new(n, 0.0)).norm() < tol {
        Some(n as i64)
    } else {
        None
    }
}

fn is_exact_nonpositive_integer(z: Complex) -> Option<u64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        Some((-z.re) as u64)
    } else {
        None
    }
}

/// `sin(πz)` with exact reduction of the real part, so that values near the
/// integers keep full relative accuracy.
pub fn sin_pi(z: Complex) -> Complex {
    let n = z.re.round();
    let r = Complex::new(z.re - n, z.im);
    let s = (r * PI).sin();
    if (n as i64).rem_euclid(2) == 0 {
        s
    } else {
        -s
    }
}

/// A logarithm of `sin(πz)`, stable for large `|Im z|`.
fn ln_sin_pi(z: Complex) -> Complex {
    let i = Complex::i();
    if z.im > 20.0 {
        (i * 0.5).ln() - i * PI * z + (-(2.0 * PI * i * z).exp()).ln_1p()
    } else if z.im < -20.0 {
        (-i * 0.5).ln() + i * PI * z + (-(-2.0 * PI * i * z).exp()).ln_1p()
    } else {
        sin_pi(z).ln()
    }
}

trait Ln1p {
    fn ln_1p(self) -> Complex;
}

impl Ln1p for Complex {
    fn ln_1p(self) -> Complex {
        if self.norm() < 1e-8 {
            self - self * self * 0.5
        } else {
            (Complex::new(1.0, 0.0) + self).ln()
        }
    }
}

fn ln_gamma_lanczos(z: Complex) -> Complex {
    let z = z - 1.0;
    let mut x = Complex::new(LANCZOS[0], 0.0);
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// A logarithm of Γ(z) (not necessarily the principal branch; only its
/// exponential is meaningful).
pub fn ln_gamma(z: Complex) -> Result<Complex> {
    if let Some(n) = nonpositive_integer_near(z, POLE_TOL) {
        return Err(Error::Pole(format!("Γ at {z} (near {n})")));
    }
    if z.re >= 0.5 {
        Ok(ln_gamma_lanczos(z))
    } else {
        Ok(PI.ln() - ln_sin_pi(z) - ln_gamma_lanczos(1.0 - z))
    }
}

/// Γ(z) via the Lanczos approximation, reflected for `Re z < ½`.
pub fn gamma(z: Complex) -> Result<Complex> {
    Ok(ln_gamma(z)?.exp())
}

/// 1/Γ(z), entire, exactly zero on the non-positive integers.
pub fn rgamma(z: Complex) -> Complex {
    if z.re >= 0.5 {
        (-ln_gamma_lanczos(z)).exp()
    } else if z.im.abs() < 20.0 {
        sin_pi(z) / PI * ln_gamma_lanczos(1.0 - z).exp()
    } else {
        (ln_sin_pi(z) - PI.ln() + ln_gamma_lanczos(1.0 - z)).exp()
    }
}

/// `π / sin(πz)`, which equals Γ(z)Γ(1−z).
pub fn reflection_gamma(z: Complex) -> Result<Complex> {
    let n = z.re.round();
    if (z - Complex::new(n, 0.0)).norm() < POLE_TOL {
        return Err(Error::Pole(format!("π/sin(πz) at {z}")));
    }
    Ok(PI / sin_pi(z))
}

/// Rising factorial `(x)_n = x(x+1)…(x+n−1)` by running product.
pub fn pochhammer(x: Complex, n: usize) -> Complex {
    let mut p = Complex::new(1.0, 0.0);
    for k in 0..n {
        p *= x + k as f64;
    }
    p
}

/// Sums `Σ t_n` and `Σ n t_n ζ^{-1}` from a first term and the ratio
/// `t_{n+1}/t_n = (a+n)(b+n)ζ/((c+n)(n+1))`.
fn sum_series(
    a: Complex,
    b: Complex,
    c: Complex,
    zeta: Complex,
    n0: usize,
    t0: Complex,
) -> Result<(Complex, Complex)> {
    let mut term = t0;
    let mut sum = Complex::new(0.0, 0.0);
    let mut dsum = Complex::new(0.0, 0.0);
    let mut small = 0usize;
    let guard = n0.max(8) + (-c.re).max(0.0).ceil() as usize + 1;
    let mut n = n0;
    loop {
        sum += term;
        let dterm = term * n as f64;
        dsum += dterm;
        let tn = term.norm();
        let tiny = tn <= SERIES_REL * sum.norm()
            && (dterm.norm() <= SERIES_REL * dsum.norm() || zeta == Complex::new(0.0, 0.0));
        if tiny {
            small += 1;
        } else {
            small = 0;
        }
        if (small >= 3 && n >= guard) || tn == 0.0 && n >= guard {
            break;
        }
        if n >= SERIES_MAX_TERMS {
            return Err(Error::AccuracyLoss(format!(
                "hypergeometric series not converged after {SERIES_MAX_TERMS} terms"
            )));
        }
        let nf = n as f64;
        term *= (a + nf) * (b + nf) * zeta / ((c + nf) * (nf + 1.0));
        n += 1;
    }
    let deriv = if zeta == Complex::new(0.0, 0.0) {
        Complex::new(0.0, 0.0)
    } else {
        dsum / zeta
    };
    Ok((sum, deriv))
}

fn check_zeta(zeta: Complex) -> Result<()> {
    if !(zeta.norm() <= SERIES_MAX_ZETA) {
        return Err(Error::Domain(format!(
            "|ζ| = {} exceeds {SERIES_MAX_ZETA}",
            zeta.norm()
        )));
    }
    Ok(())
}

/// `₂F₁(a, b; c; ζ)` by its power series.
pub fn hyp2f1(args: Hyp2F1Args) -> Result<Complex> {
    Ok(hyp2f1_with_derivative(args)?.0)
}

/// `₂F₁` together with its ζ-derivative from a single pass over the series.
pub fn hyp2f1_with_derivative(args: Hyp2F1Args) -> Result<(Complex, Complex)> {
    let Hyp2F1Args { a, b, c, zeta } = args;
    check_zeta(zeta)?;
    if nonpositive_integer_near(c, 1e-12).is_some() {
        return Err(Error::Pole(format!("₂F₁ with c = {c}")));
    }
    let (v, d) = sum_series(a, b, c, zeta, 0, Complex::new(1.0, 0.0))?;
    if zeta == Complex::new(0.0, 0.0) {
        return Ok((v, a * b / c));
    }
    Ok((v, d))
}

/// Regularized `𝔽(a,b,c;ζ) = Σ (a)_n (b)_n ζ^n / (Γ(c+n) n!)`, entire in c.
pub fn hyp2f1_regularized(args: Hyp2F1Args) -> Result<Complex> {
    Ok(hyp2f1_regularized_with_derivative(args)?.0)
}

/// `𝔽` and `d𝔽/dζ = ab·𝔽(a+1,b+1,c+1;ζ)` from one pass over the series.
pub fn hyp2f1_regularized_with_derivative(args: Hyp2F1Args) -> Result<(Complex, Complex)> {
    let Hyp2F1Args { a, b, c, zeta } = args;
    check_zeta(zeta)?;
    if zeta == Complex::new(0.0, 0.0) {
        return Ok((rgamma(c), a * b * rgamma(c + 1.0)));
    }
    let (n0, t0) = match is_exact_nonpositive_integer(c) {
        Some(m) => {
            // Terms with n ≤ m vanish; Γ(c + m + 1) = 1.
            let n0 = m as usize + 1;
            let mut t = Complex::new(1.0, 0.0);
            for k in 0..n0 {
                t *= (a + k as f64) * (b + k as f64) * zeta / (k as f64 + 1.0);
            }
            (n0, t)
        }
        None => (0, rgamma(c)),
    };
    sum_series(a, b, c, zeta, n0, t0)
}

/// `dF/dζ = (ab/c)·F(a+1, b+1, c+1; ζ)`.
pub fn hyp2f1_derivative(args: Hyp2F1Args) -> Result<Complex> {
    let Hyp2F1Args { a, b, c, zeta } = args;
    if c.norm() < 1e-12 {
        return Err(Error::Pole("derivative of ₂F₁ with c = 0".into()));
    }
    let shifted = Hyp2F1Args::new(a + 1.0, b + 1.0, c + 1.0, zeta);
    Ok(a * b / c * hyp2f1(shifted)?)
}

/// Closed form of `F(a, b, (a+b+1)/2; ½)`.
pub fn gauss_half(a: Complex, b: Complex) -> Result<Complex> {
    let num = gamma((a + b + 1.0) * 0.5)?;
    let den = gamma(a * 0.5 + 0.5)? * gamma(b * 0.5 + 0.5)?;
    Ok(PI.sqrt() * num / den)
}

/// Connection coefficients `(A, B)` with
/// `F(a,b,c;ζ) = A·F(a,b,a+b−c+1;1−ζ) + B·(1−ζ)^{c−a−b} F(c−a,c−b,c−a−b+1;1−ζ)`.
pub fn kummer_connect(args: Hyp2F1Args) -> Result<(Complex, Complex)> {
    let Hyp2F1Args { a, b, c, zeta } = args;
    let s = c - a - b;
    let sn = s.re.round();
    if (s - Complex::new(sn, 0.0)).norm() < 1e-12 {
        return Err(Error::Degenerate(format!("c − a − b = {s} is an integer")));
    }
    let cn = c.re.round();
    if (c - Complex::new(cn, 0.0)).norm() < 1e-12 {
        return Err(Error::Degenerate(format!("c = {c} is an integer")));
    }
    if zeta.norm() >= 1.0 || (1.0 - zeta).norm() >= 1.0 {
        return Err(Error::Domain(format!("ζ = {zeta} outside the common disk")));
    }
    let gc = gamma(c)?;
    let coef1 = gc * gamma(s)? * rgamma(c - a) * rgamma(c - b);
    let coef2 = gc * gamma(-s)? * rgamma(a) * rgamma(b);
    Ok((coef1, coef2))
}

/// The two sides of Kummer's connection formula evaluated by series; the
/// difference measures how well the coefficients reproduce `F`.
pub fn kummer_residual(args: Hyp2F1Args) -> Result<f64> {
    let Hyp2F1Args { a, b, c, zeta } = args;
    let (c1, c2) = kummer_connect(args)?;
    let w = 1.0 - zeta;
    let s = c - a - b;
    let f1 = hyp2f1(args)?;
    let f3 = hyp2f1(Hyp2F1Args::new(a, b, 1.0 - s, w))?;
    let f4 = w.powc(s) * hyp2f1(Hyp2F1Args::new(c - a, c - b, s + 1.0, w))?;
    Ok((f1 - c1 * f3 - c2 * f4).norm() / f1.norm().max(1.0))
}

const REGIME_DELTA: f64 = 1e-6;

/// Which of the four large-c admissibility conditions hold (1-based), if any.
pub fn large_c_regime(args: Hyp2F1Args) -> Option<u8> {
    let Hyp2F1Args { a, b, c, zeta } = args;
    if is_exact_nonpositive_integer(a).is_some() || is_exact_nonpositive_integer(b).is_some() {
        return Some(1);
    }
    if zeta.re < 0.5 - 1e-12 {
        return if nonpositive_integer_near(c, REGIME_DELTA).is_none() {
            Some(2)
        } else {
            None
        };
    }
    if (zeta.re - 0.5).abs() <= 1e-12 {
        return if c.arg().abs() <= PI - REGIME_DELTA {
            Some(3)
        } else {
            None
        };
    }
    let one = Complex::new(1.0, 0.0);
    let denom = (one - one / zeta).norm().ln();
    let base = zeta.arg() - (one - zeta).arg();
    let alpha_minus = ((base + PI) / denom).atan();
    let alpha_plus = ((base - PI) / denom).atan();
    let lo = alpha_minus - 0.5 * PI + REGIME_DELTA;
    let hi = alpha_plus + 0.5 * PI - REGIME_DELTA;
    let arg = c.arg();
    if lo <= arg && arg <= hi {
        Some(4)
    } else {
        None
    }
}

/// First `m` terms of the hypergeometric series, the large-|c| expansion.
pub fn hyp2f1_large_c(args: Hyp2F1Args, m: usize) -> Result<Complex> {
    if large_c_regime(args).is_none() {
        return Err(Error::Regime(format!("c = {} with ζ = {}", args.c, args.zeta)));
    }
    let Hyp2F1Args { a, b, c, zeta } = args;
    let mut term = Complex::new(1.0, 0.0);
    let mut sum = Complex::new(0.0, 0.0);
    for n in 0..m {
        sum += term;
        let nf = n as f64;
        term *= (a + nf) * (b + nf) * zeta / ((c + nf) * (nf + 1.0));
        if term == Complex::new(0.0, 0.0) {
            break;
        }
    }
    Ok(sum)
}
