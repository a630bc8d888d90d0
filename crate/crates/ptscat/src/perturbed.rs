//! Jost solutions of the perturbed problem and the scattering data built
//! from them.
//!
//! Everything is computed in normalized form first:
//! `𝐟⁺(x,z) = 𝐟₀⁺(x,z) + ∫_x^{2β−x} K⁺(x,t) 𝐟₀⁺(t,z) dt` is entire in `z`.
//! The minus solution is the plus solution of the reflected perturbation,
//! `𝐟⁻(x,z; q) = 𝐟⁺(−x,z; q̃)`, which is how the minus kernel is stored.

use crate::kernel::{solve_kernel, KernelGrid, PerturbationSpec, Side};
use crate::pt_exact::{
    abc, gamma_product, w0_normalized, wronskian, Jost0, JostValue, PTParams, ScatteringData,
};
use crate::quad::rule;
use crate::specfun::gamma;
use crate::{Complex, Error, Result};
use rayon::prelude::*;

/// Quadrature self-estimate above which a result is flagged.
pub const QUAD_WARN: f64 = 1e-7;
const GL_POINTS: usize = 8;
const GL_CHECK_POINTS: usize = 5;
const ZSET_TOL: f64 = 1e-12;

/// A Jost value with the quadrature self-estimate of its kernel integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JostEval {
    pub jost: JostValue,
    /// Relative difference between two quadrature rules on the same panels.
    pub quad_estimate: f64,
    pub under_resolved: bool,
}

/// Panel boundaries in `t` along the line `x̂ = xh` of a frame grid.
fn line_panels(k: &KernelGrid, xh: f64, z: Complex) -> Vec<f64> {
    let beta = k.frame_q.beta;
    let t_end = 2.0 * beta - xh;
    let mut cuts = vec![xh, t_end];
    for b in k.frame_q.breakpoints() {
        if b > xh && b < beta {
            cuts.push(2.0 * b - xh);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let max_len = (3.0 / (1.0 + z.norm())).min(0.5);
    let mut out = vec![cuts[0]];
    for w in cuts.windows(2) {
        let m = ((w[1] - w[0]) / max_len).ceil().max(1.0) as usize;
        for s in 1..=m {
            out.push(w[0] + (w[1] - w[0]) * s as f64 / m as f64);
        }
    }
    out
}

/// `∫ K f₀` and `∫ ∂ₓK f₀` along the line with an `npts` rule per panel.
fn line_integrals(
    k: &KernelGrid,
    f0: &Jost0,
    xh: f64,
    panels: &[f64],
    npts: usize,
) -> Result<(Complex, Complex, f64)> {
    let (nodes, weights) = rule(npts);
    let mut int_k = Complex::new(0.0, 0.0);
    let mut int_dx = Complex::new(0.0, 0.0);
    let mut scale = 0.0;
    for w in panels.windows(2) {
        let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (&s, &wt) in nodes.iter().zip(weights) {
            let t = c + r * s;
            let f = f0.plus(t)?.value;
            let kv = frame_value(k, xh, t);
            let kd = frame_dx(k, xh, t);
            int_k += r * wt * kv * f;
            int_dx += r * wt * kd * f;
            scale += r * wt * kv.abs() * f.norm();
        }
    }
    Ok((int_k, int_dx, scale))
}

/// Kernel value in frame coordinates.
fn frame_value(k: &KernelGrid, xh: f64, th: f64) -> f64 {
    match k.side {
        Side::Plus => k.value(xh, th),
        Side::Minus => k.value(-xh, -th),
    }
}

/// Frame `∂ₓ̂K̃`.
fn frame_dx(k: &KernelGrid, xh: f64, th: f64) -> f64 {
    match k.side {
        Side::Plus => k.dx(xh, th),
        Side::Minus => -k.dx(-xh, -th),
    }
}

/// `𝐟̃⁺(x̂)` for the frame perturbation of `k`, optionally with a
/// quadrature self-estimate.
fn frame_jost(k: &KernelGrid, f0: &Jost0, xh: f64, check: bool) -> Result<JostEval> {
    let alpha = k.frame_q.alpha;
    let beta = k.frame_q.beta;
    if xh >= beta {
        return Ok(JostEval { jost: f0.plus(xh)?, quad_estimate: 0.0, under_resolved: false });
    }
    if xh < alpha {
        let at = frame_jost(k, f0, alpha, check)?;
        let ext = extend_left(f0, at.jost, alpha, xh)?;
        return Ok(JostEval { jost: ext, ..at });
    }
    let base = f0.plus(xh)?;
    let panels = line_panels(k, xh, f0.z);
    let (ik, idx, scale) = line_integrals(k, f0, xh, &panels, GL_POINTS)?;
    let kd = frame_value(k, xh, xh);
    let jost = JostValue { value: base.value + ik, dx: base.dx - kd * base.value + idx };
    let mut quad_estimate = 0.0;
    if check {
        let (ik2, _, _) = line_integrals(k, f0, xh, &panels, GL_CHECK_POINTS)?;
        quad_estimate = (ik - ik2).norm() / (base.value.norm() + scale).max(f64::MIN_POSITIVE);
    }
    Ok(JostEval { jost, quad_estimate, under_resolved: quad_estimate > QUAD_WARN })
}

/// Continues a solution known at `x_a` to `x < x_a`, where the potential is
/// `λ/cosh²` alone, by matching to the unperturbed basis whose Wronskian is
/// larger in modulus.
fn extend_left(f0: &Jost0, at: JostValue, x_a: f64, x: f64) -> Result<JostValue> {
    let z = f0.z;
    let fz = Jost0::new(&f0.params, -z);
    let w_pm = w0_normalized(&f0.params, z);
    let w_mm = 2.0 * Complex::i() * z / gamma_product(z);
    // Pair (φ₁, φ₂) with [φ₁, φ₂] ≠ 0, evaluated at x_a and at x.
    let (p1a, p2a, p1x, p2x) = if w_pm.norm() >= w_mm.norm() {
        (f0.plus(x_a)?, f0.minus(x_a)?, f0.plus(x)?, f0.minus(x)?)
    } else {
        (f0.minus(x_a)?, fz.minus(x_a)?, f0.minus(x)?, fz.minus(x)?)
    };
    let w12 = wronskian(p1a, p2a);
    if w12.norm() == 0.0 {
        return Err(Error::Degenerate(format!("no independent unperturbed pair at z = {z}")));
    }
    let c1 = wronskian(at, p2a) / w12;
    let c2 = wronskian(p1a, at) / w12;
    Ok(JostValue {
        value: c1 * p1x.value + c2 * p2x.value,
        dx: c1 * p1x.dx + c2 * p2x.dx,
    })
}

fn check_side(k: &KernelGrid, side: Side, q: &PerturbationSpec, lambda: f64) -> Result<()> {
    if k.side != side {
        return Err(Error::Invalid(format!("expected a {side:?} kernel, got {:?}", k.side)));
    }
    let expected = match side {
        Side::Plus => q.clone(),
        Side::Minus => q.reflect(),
    };
    if k.frame_q != expected || k.lambda != lambda {
        return Err(Error::Invalid("kernel was solved for a different potential".into()));
    }
    Ok(())
}

fn unnormalize(j: JostEval, z: Complex) -> Result<JostEval> {
    let g = gamma(1.0 - Complex::i() * z)
        .map_err(|_| Error::Pole(format!("Γ(1−iz) has a pole at z = {z}")))?;
    Ok(JostEval { jost: j.jost.scale(g), ..j })
}

/// `f⁺(x, z)` with its x-derivative.
pub fn jost_plus(
    q: &PerturbationSpec,
    lambda: f64,
    kplus: &KernelGrid,
    x: f64,
    z: Complex,
) -> Result<JostEval> {
    unnormalize(jost_plus_normalized(q, lambda, kplus, x, z)?, z)
}

/// `𝐟⁺(x, z) = f⁺(x, z)/Γ(1−iz)`.
pub fn jost_plus_normalized(
    q: &PerturbationSpec,
    lambda: f64,
    kplus: &KernelGrid,
    x: f64,
    z: Complex,
) -> Result<JostEval> {
    check_side(kplus, Side::Plus, q, lambda)?;
    let f0 = Jost0::new(&PTParams::new(lambda), z);
    frame_jost(kplus, &f0, x, true)
}

/// `f⁻(x, z)` with its x-derivative.
pub fn jost_minus(
    q: &PerturbationSpec,
    lambda: f64,
    kminus: &KernelGrid,
    x: f64,
    z: Complex,
) -> Result<JostEval> {
    unnormalize(jost_minus_normalized(q, lambda, kminus, x, z)?, z)
}

/// `𝐟⁻(x, z) = f⁻(x, z)/Γ(1−iz)`.
pub fn jost_minus_normalized(
    q: &PerturbationSpec,
    lambda: f64,
    kminus: &KernelGrid,
    x: f64,
    z: Complex,
) -> Result<JostEval> {
    check_side(kminus, Side::Minus, q, lambda)?;
    let f0 = Jost0::new(&PTParams::new(lambda), z);
    let e = frame_jost(kminus, &f0, -x, true)?;
    Ok(JostEval { jost: JostValue { value: e.jost.value, dx: -e.jost.dx }, ..e })
}

/// `λ/cosh²x + q(x)` together with both solved kernels.
#[derive(Clone, Debug)]
pub struct PerturbedSystem {
    pub q: PerturbationSpec,
    pub params: PTParams,
    pub kplus: KernelGrid,
    pub kminus: KernelGrid,
}

impl PerturbedSystem {
    /// Solves both kernels.
    pub fn new(q: &PerturbationSpec, lambda: f64, grid_n: usize, tol: f64) -> Result<Self> {
        let (kp, km) = rayon::join(
            || solve_kernel(q, lambda, Side::Plus, grid_n, tol),
            || solve_kernel(q, lambda, Side::Minus, grid_n, tol),
        );
        Self::from_kernels(q, lambda, kp?, km?)
    }

    pub fn from_kernels(
        q: &PerturbationSpec,
        lambda: f64,
        kplus: KernelGrid,
        kminus: KernelGrid,
    ) -> Result<Self> {
        check_side(&kplus, Side::Plus, q, lambda)?;
        check_side(&kminus, Side::Minus, q, lambda)?;
        Ok(PerturbedSystem { q: q.clone(), params: PTParams::new(lambda), kplus, kminus })
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    /// `𝐟⁺(x, z)`.
    pub fn plus(&self, x: f64, z: Complex) -> Result<JostValue> {
        let f0 = Jost0::new(&self.params, z);
        Ok(frame_jost(&self.kplus, &f0, x, false)?.jost)
    }

    /// `𝐟⁻(x, z)`.
    pub fn minus(&self, x: f64, z: Complex) -> Result<JostValue> {
        let f0 = Jost0::new(&self.params, z);
        let j = frame_jost(&self.kminus, &f0, -x, false)?.jost;
        Ok(JostValue { value: j.value, dx: -j.dx })
    }

    /// Wronskian evaluation point. At the midpoint of the support both
    /// transformation integrals are shortest, which limits cancellation
    /// when `Im z < 0` and `f₀±` grow across the support.
    pub fn x0(&self) -> f64 {
        0.5 * (self.q.alpha + self.q.beta)
    }

    /// Normalized `W(z) = [𝐟⁻, 𝐟⁺]`.
    pub fn w_normalized(&self, z: Complex) -> Result<Complex> {
        let x0 = self.x0();
        Ok(wronskian(self.minus(x0, z)?, self.plus(x0, z)?))
    }

    /// Scattering data with the Wronskians taken at [`Self::x0`].
    pub fn scattering(&self, z: Complex) -> Result<ScatteringData> {
        self.scattering_at(z, self.x0())
    }

    /// Scattering data with every Jost solution evaluated at `x0`.
    pub fn scattering_at(&self, z: Complex, x0: f64) -> Result<ScatteringData> {
        let (fp, fpm) = (self.plus(x0, z)?, self.plus(x0, -z)?);
        let (fm, fmm) = (self.minus(x0, z)?, self.minus(x0, -z)?);
        Ok(ScatteringData::from_normalized(
            z,
            wronskian(fm, fp),
            wronskian(fpm, fm),
            wronskian(fp, fmm),
        ))
    }

    /// Batch evaluation, parallel over `z`.
    pub fn scattering_batch(&self, zs: &[Complex]) -> Vec<Result<ScatteringData>> {
        zs.par_iter().map(|&z| self.scattering(z)).collect()
    }

    /// `s⁺(z)·Γ(c−a)Γ(c−b) / (2Γ(1−iz)Γ(1+iz))`, which tends to 1 along
    /// `zₙ = i(4n+1)/2` when `q` is supported in `ℝ₋`.
    pub fn s_plus_asymptote_ratio(&self, z: Complex) -> Result<Complex> {
        let t = abc(&self.params, z);
        let g = gamma(t.c - t.a)? * gamma(t.c - t.b)?;
        Ok(self.scattering(z)?.norm_s_plus * g / 2.0)
    }

    /// `m⁻(z)/m⁺(z)` with `m± = (f±)'(0,z)/f±(0,z)`.
    pub fn weyl_titchmarsh_ratio(&self, z: Complex) -> Result<Complex> {
        let fp = self.plus(0.0, z)?;
        let fm = self.minus(0.0, z)?;
        let scale = fp.value.norm().max(fp.dx.norm()).max(fm.value.norm()).max(1.0);
        if fp.value.norm() < ZSET_TOL * scale
            || fm.value.norm() < ZSET_TOL * scale
            || fp.dx.norm() < ZSET_TOL * scale
        {
            return Err(Error::ZSet(format!("z = {z} lies on the set Z")));
        }
        Ok((fm.dx / fm.value) / (fp.dx / fp.value))
    }

    /// `Ẇ(z)` by a central difference along the imaginary direction.
    pub fn w_derivative(&self, z: Complex) -> Result<Complex> {
        let h = 1e-6 * (1.0 + z.norm());
        let ih = Complex::new(0.0, h);
        Ok((self.w_normalized(z + ih)? - self.w_normalized(z - ih)?) / (2.0 * ih))
    }

    /// Proportionality `𝐟⁻ = γ 𝐟⁺` at an eigenvalue `ik₀`.
    fn eigen_ratio(&self, k0: f64) -> Result<f64> {
        let z = Complex::new(0.0, k0);
        let beta = self.q.beta;
        let fp = Jost0::new(&self.params, z).plus(beta)?;
        let fm = self.minus(beta, z)?;
        let g = if fp.value.norm() >= fp.dx.norm() { fm.value / fp.value } else { fm.dx / fp.dx };
        Ok(g.re)
    }

    /// `(∫|𝐟⁺(x,ik₀)|² dx, Ẇ(ik₀)/(2ik₀γ))` where `𝐟⁻ = γ𝐟⁺` at the
    /// eigenvalue. The right side equals `i S⁻(ik₀) Ẇ(ik₀) Γ(1+k₀)Γ(1−k₀)/(4k₀²)`
    /// whenever `k₀ ∉ ℤ`, and stays finite when it is.
    pub fn norming_constant_check(&self, k0: f64) -> Result<(f64, f64)> {
        if !(k0 > 0.0) {
            return Err(Error::NotEigenvalue(format!("k₀ = {k0} must be positive")));
        }
        let z = Complex::new(0.0, k0);
        let w = self.w_normalized(z)?;
        if w.norm() > 1e-6 {
            return Err(Error::NotEigenvalue(format!("|W(i{k0})| = {:.3e} > 1e-6", w.norm())));
        }
        let gamma_ratio = self.eigen_ratio(k0)?;
        let (alpha, beta) = (self.q.alpha, self.q.beta);
        let f0 = Jost0::new(&self.params, z);
        // Outside [α, β] the solutions are unperturbed; 𝐟⁺ = 𝐟₀⁻/γ for x ≤ α.
        let tail = |a: f64, b: f64, f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
            let panels = ((b - a) * 4.0).ceil().max(1.0) as usize;
            let hp = (b - a) / panels as f64;
            let (nodes, weights) = rule(GL_POINTS);
            let mut s = 0.0;
            for p in 0..panels {
                let c = a + (p as f64 + 0.5) * hp;
                for (&x, &wt) in nodes.iter().zip(weights) {
                    s += 0.5 * hp * wt * f(c + 0.5 * hp * x)?;
                }
            }
            Ok(s)
        };
        let span = 40.0 / k0.max(0.05);
        let right = tail(beta, beta + span, &|x| Ok(f0.plus(x)?.value.norm_sqr()))?;
        let left = tail(alpha - span, alpha, &|x| Ok(f0.minus(x)?.value.norm_sqr()))?
            / (gamma_ratio * gamma_ratio);
        let mid = tail(alpha, beta, &|x| Ok(self.plus(x, z)?.value.norm_sqr()))?;
        // |𝐟|² ≈ c·e^{−2k₀|x|} beyond the cuts.
        let rt = f0.plus(beta + span)?.value.norm_sqr() / (2.0 * k0);
        let lt = f0.minus(alpha - span)?.value.norm_sqr() / (2.0 * k0 * gamma_ratio * gamma_ratio);
        let lhs = left + mid + right + rt + lt;
        let wdot = self.w_derivative(z)?;
        let rhs = wdot / (2.0 * Complex::i() * k0 * gamma_ratio);
        Ok((lhs, rhs.re))
    }

    /// `i S±(ik₀) Ẇ(ik₀) Γ(1+k₀)²Γ(1−k₀)²/(4k₀²)` taken literally, for
    /// comparison with the check above.
    pub fn norming_constant_literal(&self, k0: f64, side: Side) -> Result<Complex> {
        let z = Complex::new(0.0, k0);
        let sd = self.scattering(z)?;
        let s = match side {
            Side::Plus => sd.norm_s_plus,
            Side::Minus => sd.norm_s_minus,
        };
        let g = gamma_product(z);
        Ok(Complex::i() * s * self.w_derivative(z)? * g * g / (4.0 * k0 * k0))
    }
}
