//! Reconstruction of `W` and `S±` from their zeros by truncated genus-1
//! Hadamard products, with the exponential factor fixed by asymptotic or
//! point normalizations.

use crate::kernel::Side;
use crate::pt_exact::{gamma_product, s0_normalized, PTParams};
use crate::specfun::ln_gamma;
use crate::{Complex, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default probe heights `t` for the `W` fit, on the positive imaginary axis.
pub const DEFAULT_PROBE_TS: [f64; 4] = [5.0, 10.0, 20.0, 40.0];
/// Smallest accepted ratio between the highest and lowest probe; the
/// default set just meets it.
pub const MIN_PROBE_SPREAD: f64 = 8.0;
/// Minimum number of zeros (with multiplicity) for a fit.
pub const MIN_ZEROS: usize = 20;
const ZERO_AT_ORIGIN: f64 = 1e-12;
const L_CIRCLE_RADIUS: f64 = 0.1;
const L_CIRCLE_POINTS: usize = 64;
/// Indices `n` of the normalization points `i(4n+1)/2` for half-line supports.
const HALF_LINE_NS: std::ops::RangeInclusive<u32> = 2..=8;
const CONSISTENCY_KS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    W,
    SPlus,
    SMinus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportHint {
    RPlus,
    RMinus,
    OriginInside,
}

/// How the exponential factor of `S±` was fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Support on the half-line opposite to the side; asymptote along
    /// `i(4n+1)/2`.
    HalfLine,
    /// `S±(0) = −W(0) ≠ 0`.
    NoHalfBound,
    /// Half-bound state; magnitude from the product identity, sign from `p`.
    SignDatum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HadamardModel {
    pub target: Target,
    /// Zeros other than the origin, with multiplicity.
    pub zeros: Vec<(Complex, usize)>,
    /// Order of the zero at the origin (`m` for W, `l` for S±).
    pub m_or_l: usize,
    pub a0_or_b0: Complex,
    pub a1_or_b1: Complex,
    pub truncation_n: usize,
    pub regime: Option<Regime>,
    /// Largest relative mismatch at the normalization points.
    pub fit_residual: f64,
    /// For S±: largest relative violation of `|W|² − |S|² = 4k²/(Γ(1−ik)Γ(1+ik))²`
    /// on a few real `k`.
    pub consistency_residual: Option<f64>,
}

/// `log Π (1 − z/w) e^{z/w}` over the given zeros. Chunks are summed in a
/// fixed order so results do not depend on thread scheduling.
pub fn log_genus1_product(zeros: &[(Complex, usize)], z: Complex) -> Complex {
    let term = |&(w, m): &(Complex, usize)| m as f64 * ((1.0 - z / w).ln() + z / w);
    if zeros.len() < 1024 {
        return zeros.iter().map(term).sum();
    }
    let parts: Vec<Complex> = zeros.par_chunks(256).map(|c| c.iter().map(term).sum()).collect();
    parts.into_iter().sum()
}

impl HadamardModel {
    /// `log` of the reconstructed function, up to multiples of `2πi`.
    pub fn log_eval(&self, z: Complex) -> Complex {
        let l = self.m_or_l as f64;
        let lead = if self.m_or_l == 0 { Complex::new(0.0, 0.0) } else { l * z.ln() };
        let exp = match self.target {
            Target::W | Target::SMinus => self.a0_or_b0 + self.a1_or_b1 * z,
            Target::SPlus => self.a0_or_b0 - self.a1_or_b1 * z + Complex::new(0.0, PI * l),
        };
        lead + exp + log_genus1_product(&self.zeros, z)
    }

    pub fn eval(&self, z: Complex) -> Complex {
        if self.m_or_l > 0 && z.norm() == 0.0 {
            return Complex::new(0.0, 0.0);
        }
        self.log_eval(z).exp()
    }

    /// Total number of zeros, origin included.
    pub fn zero_count(&self) -> usize {
        self.m_or_l + self.zeros.iter().map(|z| z.1).sum::<usize>()
    }
}

/// The first `n` zeros by modulus, extended so that a `±Re` pair is never
/// split.
pub fn truncate_zeros(zeros: &[(Complex, usize)], n: usize) -> Vec<(Complex, usize)> {
    let mut v = zeros.to_vec();
    v.sort_by(|a, b| a.0.norm().total_cmp(&b.0.norm()).then(a.0.re.total_cmp(&b.0.re)));
    let mut k = n.min(v.len());
    while k > 0 && k < v.len() && (v[k].0.norm() - v[k - 1].0.norm()).abs() < 1e-9 * (1.0 + v[k].0.norm())
    {
        k += 1;
    }
    v.truncate(k);
    v
}

/// Splits off the zero at the origin and checks symmetry under `z ↦ −z̄`.
fn prepare(zeros: &[(Complex, usize)]) -> Result<(usize, Vec<(Complex, usize)>)> {
    let total: usize = zeros.iter().map(|z| z.1).sum();
    if total < MIN_ZEROS {
        return Err(Error::IllConditioned(format!(
            "{total} zeros given, at least {MIN_ZEROS} are needed for the exponential factor"
        )));
    }
    let mut m = 0;
    let mut rest = Vec::with_capacity(zeros.len());
    for &(w, k) in zeros {
        if w.norm() < ZERO_AT_ORIGIN {
            m += k;
        } else {
            rest.push((w, k));
        }
    }
    for &(w, k) in &rest {
        let mirror = -w.conj();
        let tol = 1e-6 * (1.0 + w.norm());
        let partner: usize = rest.iter().filter(|(u, _)| (*u - mirror).norm() < tol).map(|u| u.1).sum();
        if partner != k {
            return Err(Error::Invalid(format!(
                "zero list is not symmetric under z ↦ −z̄: {w} has no partner of multiplicity {k}"
            )));
        }
    }
    Ok((m, rest))
}

/// Least squares for `y ≈ c₀ + c₁x`. Returns `(c₀, c₁)`.
fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let c1 = sxy / sxx;
    (my - c1 * mx, c1)
}

/// Rounds `im` to the lattice `l·π/2 + πℤ`, which makes the model satisfy
/// `conj F(z) = F(−z̄)` exactly.
fn project_phase(im: f64, l: usize) -> f64 {
    let base = l as f64 * PI / 2.0;
    base + ((im - base) / PI).round() * PI
}

/// Fits `W(z) = zᵐ e^{a₀+a₁z} Π(1 − z/Wₙ)e^{z/Wₙ}` to the asymptote
/// `W(it) ≈ 2i(it)/Γ(1+t)²` at the probe heights.
///
/// The zero list must be symmetric under `z ↦ −z̄`; the fit then takes
/// `a₁ ∈ iℝ` and `e^{a₀} ∈ iᵐℝ`, so the same symmetry holds exactly for
/// the model.
pub fn fit_w(zeros: &[(Complex, usize)], probe_ts: &[f64]) -> Result<HadamardModel> {
    let (tmin, tmax) = probe_ts
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    if probe_ts.len() < 2 || !(tmin > 0.0) || tmax < MIN_PROBE_SPREAD * tmin {
        return Err(Error::IllConditioned(format!(
            "probe heights {probe_ts:?} must be positive and span a factor of at least {MIN_PROBE_SPREAD}"
        )));
    }
    let (m, rest) = prepare(zeros)?;
    if m > 1 {
        return Err(Error::Invalid(format!("W has at most a simple zero at 0, got order {m}")));
    }
    let i = Complex::i();
    let mut re = Vec::new();
    let mut im = Vec::new();
    for &t in probe_ts {
        let z = i * t;
        if rest.iter().any(|(w, _)| (z - w).norm() < 1e-6) {
            return Err(Error::Invalid(format!("probe it = {z} sits on a zero")));
        }
        let lg = ln_gamma(Complex::new(1.0 + t, 0.0))?;
        let mut l = (2.0 * i * z).ln() - 2.0 * lg - log_genus1_product(&rest, z);
        if m == 1 {
            l -= z.ln();
        }
        re.push(l.re);
        im.push(l.im);
    }
    // Re log = ρ − βt with a₁ = iβ.
    let (rho, slope) = line_fit(probe_ts, &re);
    let mean_im = unwrap_mean(&im);
    let mut model = HadamardModel {
        target: Target::W,
        zeros: rest,
        m_or_l: m,
        a0_or_b0: Complex::new(rho, project_phase(mean_im, m)),
        a1_or_b1: Complex::new(0.0, -slope),
        truncation_n: 0,
        regime: None,
        fit_residual: 0.0,
        consistency_residual: None,
    };
    model.truncation_n = model.zero_count();
    model.fit_residual = probe_ts
        .iter()
        .map(|&t| {
            let z = i * t;
            let target = (2.0 * i * z).ln() - 2.0 * ln_gamma(Complex::new(1.0 + t, 0.0)).unwrap();
            ((model.log_eval(z) - target).exp() - 1.0).norm()
        })
        .fold(0.0, f64::max);
    Ok(model)
}

fn unwrap_mean(ims: &[f64]) -> f64 {
    let first = ims[0];
    ims.iter()
        .map(|&v| v + ((first - v) / (2.0 * PI)).round() * 2.0 * PI)
        .sum::<f64>()
        / ims.len() as f64
}

/// Inputs for the `S±` fit beyond the zero list.
pub struct SData<'a> {
    pub lambda: f64,
    /// Normalized `W`, used for the order at the origin, `W(0)`, and the
    /// consistency check.
    pub w: &'a (dyn Fn(Complex) -> Result<Complex> + Sync),
    /// `p = sign(iˡ e^{b₀})`, needed only when `W(0) = 0`.
    pub p_sign: Option<f64>,
}

/// `W(z)W(−z) − 4z²/(Γ(1−iz)Γ(1+iz))²`, which equals `S⁺(z)S⁻(z)`.
fn identity_combination(w: &dyn Fn(Complex) -> Result<Complex>, z: Complex) -> Result<Complex> {
    let g = gamma_product(z);
    Ok(w(z)? * w(-z)? - 4.0 * z * z / (g * g))
}

/// Half the winding number of the identity combination around a small
/// circle at the origin.
pub fn detect_l(w: &dyn Fn(Complex) -> Result<Complex>) -> Result<usize> {
    let mut total = 0.0;
    let mut prev = identity_combination(w, Complex::new(L_CIRCLE_RADIUS, 0.0))?;
    for k in 1..=L_CIRCLE_POINTS {
        let th = 2.0 * PI * k as f64 / L_CIRCLE_POINTS as f64;
        let cur = identity_combination(w, Complex::from_polar(L_CIRCLE_RADIUS, th))?;
        if cur.norm() == 0.0 {
            return Err(Error::ContourThroughZero("identity combination on the l-circle".into()));
        }
        total += (cur / prev).arg();
        prev = cur;
    }
    let winding = (total / (2.0 * PI)).round();
    if winding < 0.0 || winding as i64 % 2 != 0 {
        return Err(Error::Inconsistent(format!(
            "identity combination winds {winding} times around 0; expected an even order"
        )));
    }
    Ok(winding as usize / 2)
}

/// Fits `S⁺(z) = (−1)ˡ zˡ e^{b₀−b₁z} Π` (or `S⁻(z) = zˡ e^{b₀+b₁z} Π`).
///
/// The regime is chosen from the support hint and the data: a support on
/// `ℝ₋` for `S⁺` (`ℝ₊` for `S⁻`) uses the asymptote `S±(zₙ) → S₀` along
/// `zₙ = i(4n+1)/2`; otherwise `S±(0) = −W(0)` when that is nonzero, and
/// the sign datum `p` when it is not. Outside the half-line regime `b₁` is
/// pinned to 0; it is invisible to every quantity available here.
pub fn fit_s(
    zeros: &[(Complex, usize)],
    side: Side,
    hint: SupportHint,
    data: &SData<'_>,
) -> Result<HadamardModel> {
    let (m0, rest) = prepare(zeros)?;
    let l = detect_l(data.w)?;
    if m0 != l {
        return Err(Error::Inconsistent(format!(
            "zero list has order {m0} at the origin, the identity gives {l}"
        )));
    }
    let target = match side {
        Side::Plus => Target::SPlus,
        Side::Minus => Target::SMinus,
    };
    let mut model = HadamardModel {
        target,
        zeros: rest,
        m_or_l: l,
        a0_or_b0: Complex::new(0.0, 0.0),
        a1_or_b1: Complex::new(0.0, 0.0),
        truncation_n: 0,
        regime: None,
        fit_residual: 0.0,
        consistency_residual: None,
    };
    model.truncation_n = model.zero_count();
    let half_line = matches!(
        (side, hint),
        (Side::Plus, SupportHint::RMinus) | (Side::Minus, SupportHint::RPlus)
    );
    if half_line {
        fit_half_line(&mut model, data.lambda)?;
    } else if l == 0 {
        let w0 = (data.w)(Complex::new(0.0, 0.0))?;
        model.a0_or_b0 = (-w0).ln();
        model.regime = Some(Regime::NoHalfBound);
        model.fit_residual = (model.eval(Complex::new(0.0, 0.0)) + w0).norm() / w0.norm();
    } else {
        let Some(p) = data.p_sign else {
            return Err(Error::Regime(
                "W(0) = 0 and the support straddles the origin: the sign datum p is required".into(),
            ));
        };
        fit_sign_datum(&mut model, data.w, p)?;
    }
    model.consistency_residual = Some(consistency(&model, data.w)?);
    Ok(model)
}

fn fit_half_line(model: &mut HadamardModel, lambda: f64) -> Result<()> {
    let s0 = s0_normalized(&PTParams::new(lambda));
    if s0.norm() < 1e-12 {
        return Err(Error::Regime(format!("S₀ vanishes at λ = {lambda}; the asymptote is void")));
    }
    let l = model.m_or_l;
    let sign = if model.target == Target::SPlus { 1.0 } else { -1.0 };
    let (mut ys, mut re, mut im) = (Vec::new(), Vec::new(), Vec::new());
    for n in HALF_LINE_NS {
        let y = (4 * n + 1) as f64 / 2.0;
        let z = Complex::new(0.0, y);
        let mut v = s0.ln() - log_genus1_product(&model.zeros, z);
        if l > 0 {
            v -= l as f64 * z.ln();
        }
        if model.target == Target::SPlus {
            v -= Complex::new(0.0, PI * l as f64);
        }
        ys.push(y);
        re.push(v.re);
        im.push(v.im);
    }
    // S⁺: −b₁z = βy with b₁ = iβ; S⁻: +b₁z = −βy.
    let (rho, slope) = line_fit(&ys, &re);
    model.a0_or_b0 = Complex::new(rho, project_phase(unwrap_mean(&im), l));
    model.a1_or_b1 = Complex::new(0.0, sign * slope);
    model.regime = Some(Regime::HalfLine);
    model.fit_residual = HALF_LINE_NS
        .map(|n| (model.eval(Complex::new(0.0, (4 * n + 1) as f64 / 2.0)) / s0 - 1.0).norm())
        .fold(0.0, f64::max);
    Ok(())
}

fn fit_sign_datum(
    model: &mut HadamardModel,
    w: &dyn Fn(Complex) -> Result<Complex>,
    p: f64,
) -> Result<()> {
    if p != 1.0 && p != -1.0 {
        return Err(Error::Invalid(format!("sign datum p must be ±1, got {p}")));
    }
    let l = model.m_or_l;
    // S⁺(z)S⁺(−z) = (−1)ˡ z^{2l} e^{2b₀} Π(z)Π(−z); the quotient is analytic,
    // so its circle mean is its value at 0.
    let mut acc = Complex::new(0.0, 0.0);
    for k in 0..L_CIRCLE_POINTS {
        let z = Complex::from_polar(L_CIRCLE_RADIUS, 2.0 * PI * k as f64 / L_CIRCLE_POINTS as f64);
        let pp = (log_genus1_product(&model.zeros, z) + log_genus1_product(&model.zeros, -z)).exp();
        acc += identity_combination(w, z)? / (z.powi(2 * l as i32) * pp);
    }
    let e2 = acc / L_CIRCLE_POINTS as f64 * if l % 2 == 1 { -1.0 } else { 1.0 };
    // (iˡe^{b₀})² = (−1)ˡ e^{2b₀} must be positive.
    let sq = e2 * if l % 2 == 1 { -1.0 } else { 1.0 };
    if sq.re <= 0.0 || sq.im.abs() > 1e-6 * sq.norm() {
        return Err(Error::Inconsistent(format!("(iˡe^{{b₀}})² = {sq} is not positive")));
    }
    let il_eb0 = p * sq.re.sqrt();
    model.a0_or_b0 = Complex::new(il_eb0, 0.0).ln() - Complex::new(0.0, PI / 2.0 * l as f64);
    model.regime = Some(Regime::SignDatum);
    model.fit_residual = sq.im.abs() / sq.norm();
    Ok(())
}

fn consistency(model: &HadamardModel, w: &dyn Fn(Complex) -> Result<Complex>) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in CONSISTENCY_KS {
        let z = Complex::new(k, 0.0);
        let wk = w(z)?;
        let g = gamma_product(z);
        let rhs = wk.norm_sqr() - (4.0 * z * z / (g * g)).re;
        worst = worst.max((model.eval(z).norm_sqr() - rhs).abs() / wk.norm_sqr());
    }
    Ok(worst)
}
