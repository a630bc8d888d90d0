//! The exactly solvable Pöschl-Teller layer: Jost solutions `f₀±`, Jost
//! functions `w₀`, `s₀±` with their normalized forms, scattering
//! coefficients and the closed-form zero set.
//!
//! Normalized quantities divide out the Γ factors responsible for the poles
//! on `iℤ`: `𝐟₀±(x,z) = f₀±(x,z)/Γ(1−iz)`, `W₀ = w₀/Γ(1−iz)²` and
//! `S₀± = s₀±/(Γ(1−iz)Γ(1+iz))`. All of them are entire in `z`.

use crate::resonances::{ZeroKind, ZeroRecord};
use crate::specfun::{gamma, hyp2f1_regularized_with_derivative, rgamma, Hyp2F1Args};
use crate::{Complex, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Coupling λ of `λ/cosh²x` with `μ = √(¼−λ)` (positive imaginary when λ > ¼).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PTParams {
    pub lambda: f64,
    pub mu: Complex,
}

impl PTParams {
    pub fn new(lambda: f64) -> Self {
        let d = 0.25 - lambda;
        let mu = if d >= 0.0 {
            Complex::new(d.sqrt(), 0.0)
        } else {
            Complex::new(0.0, (-d).sqrt())
        };
        PTParams { lambda, mu }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ABCTriple {
    pub a: Complex,
    pub b: Complex,
    pub c: Complex,
}

/// A solution value and its x-derivative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JostValue {
    pub value: Complex,
    pub dx: Complex,
}

impl JostValue {
    pub fn scale(self, s: Complex) -> JostValue {
        JostValue { value: self.value * s, dx: self.dx * s }
    }
}

/// `[f, g] = f g' − f' g`.
pub fn wronskian(f: JostValue, g: JostValue) -> Complex {
    f.value * g.dx - f.dx * g.value
}

/// Scattering data at one spectral point. Unnormalized fields are NaN when
/// `z` sits on the pole set `iℤ*`; the normalized fields are always filled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringData {
    pub z: Complex,
    pub w: Complex,
    pub s_plus: Complex,
    pub s_minus: Complex,
    #[serde(rename = "W")]
    pub norm_w: Complex,
    #[serde(rename = "S_plus")]
    pub norm_s_plus: Complex,
    #[serde(rename = "S_minus")]
    pub norm_s_minus: Complex,
    #[serde(rename = "T")]
    pub t: Complex,
    #[serde(rename = "R_plus")]
    pub r_plus: Complex,
    #[serde(rename = "R_minus")]
    pub r_minus: Complex,
    pub on_pole_set: bool,
}

impl ScatteringData {
    /// Assembles every field from the normalized Jost functions.
    pub fn from_normalized(z: Complex, w: Complex, s_plus: Complex, s_minus: Complex) -> Self {
        let i = Complex::i();
        let nan = Complex::new(f64::NAN, f64::NAN);
        let g_minus = gamma(1.0 - i * z);
        let g_plus = gamma(1.0 + i * z);
        let (on_pole_set, uw, usp, usm, t) = match (g_minus, g_plus) {
            (Ok(gm), Ok(gp)) => {
                let gg = gm * gp;
                (false, w * gm * gm, s_plus * gg, s_minus * gg, 2.0 * i * z / (w * gg))
            }
            _ => (true, nan, nan, nan, nan),
        };
        ScatteringData {
            z,
            w: uw,
            s_plus: usp,
            s_minus: usm,
            norm_w: w,
            norm_s_plus: s_plus,
            norm_s_minus: s_minus,
            t,
            r_plus: s_plus / w,
            r_minus: s_minus / w,
            on_pole_set,
        }
    }

    /// `A = D = w/2iz`, `B = s⁻/2iz`, `C = s⁺/2iz` expressed through the
    /// normalized fields.
    pub fn abcd(&self) -> (Complex, Complex, Complex, Complex) {
        let i = Complex::i();
        let g = gamma_product(self.z);
        let f = g / (2.0 * i * self.z);
        let a = self.norm_w * f;
        (a, self.norm_s_minus * f, self.norm_s_plus * f, a)
    }

    /// Unnormalized `(𝒯, 𝓡⁺, 𝓡⁻) = (2iz/w, s⁺/w, s⁻/w)`; NaN on the pole set.
    /// They relate to the stored fields by `𝒯 = T·Γ(1+iz)/Γ(1−iz)` and
    /// likewise for the reflection coefficients.
    pub fn physical(&self) -> (Complex, Complex, Complex) {
        let w = self.w;
        (2.0 * Complex::i() * self.z / w, self.s_plus / w, self.s_minus / w)
    }

    /// `|T|² + |R⁻|² − 1`, meaningful for real z.
    pub fn unitarity_residual(&self) -> f64 {
        self.t.norm_sqr() + self.r_minus.norm_sqr() - 1.0
    }
}

/// `Γ(1−iz)Γ(1+iz) = πz/sinh(πz)`, equal to 1 at `z = 0`.
pub fn gamma_product(z: Complex) -> Complex {
    if z.norm() < 1e-8 {
        return Complex::new(1.0, 0.0) - (PI * z).powi(2) / 6.0;
    }
    PI * z / (PI * z).sinh()
}

pub fn abc(params: &PTParams, z: Complex) -> ABCTriple {
    let i = Complex::i();
    let base = 0.5 - i * z;
    ABCTriple { a: base + params.mu, b: base - params.mu, c: 1.0 - i * z }
}

/// Distance from z to the set iℤ.
pub fn dist_to_imag_integers(z: Complex) -> f64 {
    Complex::new(z.re, z.im - z.im.round()).norm()
}

/// Normalized `W₀(z) = −2/(Γ(a)Γ(b))`.
pub fn w0_normalized(params: &PTParams, z: Complex) -> Complex {
    let t = abc(params, z);
    -2.0 * rgamma(t.a) * rgamma(t.b)
}

/// Normalized `S₀± = 2/(Γ(½−μ)Γ(½+μ))`, independent of z.
pub fn s0_normalized(params: &PTParams) -> Complex {
    2.0 * rgamma(0.5 - params.mu) * rgamma(0.5 + params.mu)
}

/// `w₀(z) = 2iz Γ(c−1)Γ(c)/(Γ(a)Γ(b))`.
pub fn w0(params: &PTParams, z: Complex) -> Result<Complex> {
    let t = abc(params, z);
    let gc = gamma(t.c).map_err(|_| Error::Pole(format!("w₀ at z = {z}")))?;
    Ok(w0_normalized(params, z) * gc * gc)
}

/// `s₀±(z) = 2iz Γ(c)Γ(c−a−b)/(Γ(c−a)Γ(c−b))`; the two sides coincide
/// because the unperturbed potential is even.
pub fn s0(params: &PTParams, z: Complex) -> Result<Complex> {
    let i = Complex::i();
    let pole = || Error::Pole(format!("s₀ at z = {z}"));
    if dist_to_imag_integers(z) < 1e-14 && z.norm() > 0.5 {
        return Err(pole());
    }
    let gm = gamma(1.0 - i * z).map_err(|_| pole())?;
    let gp = gamma(1.0 + i * z).map_err(|_| pole())?;
    Ok(s0_normalized(params) * gm * gp)
}

/// Unperturbed scattering data.
pub fn scattering0(params: &PTParams, z: Complex) -> Result<ScatteringData> {
    let w = w0_normalized(params, z);
    if w.norm() == 0.0 {
        return Err(Error::Division(format!("w₀ vanishes at z = {z}")));
    }
    let s = s0_normalized(params);
    Ok(ScatteringData::from_normalized(z, w, s, s))
}

/// Effective coupling for spherical-harmonic mode k in dimension d.
pub fn cylinder_lambda(k: u32, d: u32) -> f64 {
    let (k, d) = (k as f64, d as f64);
    k * (k + d - 2.0) + (d - 1.0) * (3.0 - d) / 4.0
}

/// Closed-form zeros of `W₀` in the closed lower half-plane,
/// `−i(n + ½ ± μ)` for `n ≤ n_max`; coincident points are merged with
/// summed multiplicity.
pub fn resonances_closed_form(params: &PTParams, n_max: usize) -> Vec<ZeroRecord> {
    let i = Complex::i();
    let mut pts: Vec<(Complex, usize)> = Vec::new();
    for n in 0..=n_max {
        for s in [1.0, -1.0] {
            let z = -i * (n as f64 + 0.5 + s * params.mu);
            if z.im > 1e-12 {
                continue;
            }
            match pts.iter_mut().find(|(p, _)| (*p - z).norm() < 1e-12) {
                Some(entry) => entry.1 += 1,
                None => pts.push((z, 1)),
            }
        }
    }
    let mut out: Vec<ZeroRecord> = pts
        .into_iter()
        .map(|(z, m)| ZeroRecord {
            location: z,
            multiplicity: m,
            kind: ZeroKind::of(z, 1e-12),
            residual: w0_normalized(params, z).norm(),
        })
        .collect();
    out.sort_by(|a, b| {
        b.location
            .im
            .partial_cmp(&a.location.im)
            .unwrap()
            .then(a.location.re.partial_cmp(&b.location.re).unwrap())
    });
    out
}

/// Evaluator for the normalized unperturbed Jost solutions at a fixed z.
///
/// Points with `ζ = 1/(1+e^{2x}) ≤ ½` use the series directly. Beyond that
/// the series is still used when its terms decay monotonically; otherwise
/// `𝐟₀⁺` is expanded in the basis `𝐟₀⁻(·,±z)`:
/// `𝐟₀⁺(z) = π/(2i sinh πz)·(W₀(z)𝐟₀⁻(−z) + S₀ 𝐟₀⁻(z))`.
#[derive(Clone, Debug)]
pub struct Jost0 {
    pub params: PTParams,
    pub z: Complex,
    zc: Complex,
    conn: Option<(Complex, Complex, Complex)>,
}

impl Jost0 {
    pub fn new(params: &PTParams, z: Complex) -> Self {
        let mut zc = z;
        if dist_to_imag_integers(z) < 1e-9 {
            zc = z + Complex::new(1e-9, 0.0);
        }
        let pref = PI / (2.0 * Complex::i() * (PI * zc).sinh());
        let conn = if pref.is_finite() {
            Some((pref, w0_normalized(params, zc), s0_normalized(params)))
        } else {
            None
        };
        Jost0 { params: *params, z, zc, conn }
    }

    fn series(&self, x: f64, z: Complex) -> Result<JostValue> {
        let i = Complex::i();
        let e = (2.0 * x).exp();
        let zeta = if x > 0.0 { (-2.0 * x).exp() / (1.0 + (-2.0 * x).exp()) } else { 1.0 / (1.0 + e) };
        let one_minus = if x > 0.0 { 1.0 / (1.0 + (-2.0 * x).exp()) } else { e / (1.0 + e) };
        let args = Hyp2F1Args::new(
            0.5 - self.params.mu,
            0.5 + self.params.mu,
            1.0 - i * z,
            Complex::new(zeta, 0.0),
        );
        let (f, df) = hyp2f1_regularized_with_derivative(args)?;
        let ph = (i * z * x).exp();
        let dzeta = -2.0 * zeta * one_minus;
        Ok(JostValue { value: ph * f, dx: ph * (i * z * f + df * dzeta) })
    }

    fn use_series(&self, x: f64) -> bool {
        if x >= 0.0 {
            return true;
        }
        let zeta = 1.0 / (1.0 + (2.0 * x).exp());
        (self.z.im >= 0.0 && zeta <= 0.99) || (self.z.im >= -1.0 && zeta <= 0.9)
    }

    /// `𝐟₀⁺(x, z)`.
    pub fn plus(&self, x: f64) -> Result<JostValue> {
        if self.use_series(x) || self.conn.is_none() {
            return self.series(x, self.z);
        }
        let (pref, w, s) = self.conn.unwrap();
        let zc = self.zc;
        let m_neg = self.series(-x, -zc)?;
        let m_pos = self.series(-x, zc)?;
        let v = pref * (w * m_neg.value + s * m_pos.value);
        let d = -pref * (w * m_neg.dx + s * m_pos.dx);
        Ok(JostValue { value: v, dx: d })
    }

    /// `𝐟₀⁻(x, z) = 𝐟₀⁺(−x, z)`.
    pub fn minus(&self, x: f64) -> Result<JostValue> {
        let p = self.plus(-x)?;
        Ok(JostValue { value: p.value, dx: -p.dx })
    }
}

fn unnormalize(v: JostValue, z: Complex) -> Result<JostValue> {
    let g = gamma(1.0 - Complex::i() * z).map_err(|_| Error::Pole(format!("f₀ at z = {z}")))?;
    Ok(v.scale(g))
}

/// Normalized `𝐟₀⁺(x,z) = e^{izx} 𝔽(c−a, c−b, c; 1/(1+e^{2x}))`.
pub fn jost0_plus_normalized(params: &PTParams, x: f64, z: Complex) -> Result<JostValue> {
    Jost0::new(params, z).plus(x)
}

/// Normalized `𝐟₀⁻(x,z) = 𝐟₀⁺(−x,z)`.
pub fn jost0_minus_normalized(params: &PTParams, x: f64, z: Complex) -> Result<JostValue> {
    Jost0::new(params, z).minus(x)
}

/// `f₀⁺(x,z) = e^{izx} F(c−a, c−b, c; 1/(1+e^{2x}))` and its x-derivative.
pub fn jost0_plus(params: &PTParams, x: f64, z: Complex) -> Result<JostValue> {
    unnormalize(jost0_plus_normalized(params, x, z)?, z)
}

/// `f₀⁻(x,z) = f₀⁺(−x,z)` and its x-derivative.
pub fn jost0_minus(params: &PTParams, x: f64, z: Complex) -> Result<JostValue> {
    unnormalize(jost0_minus_normalized(params, x, z)?, z)
}
