//! Transformation kernels `K±` on their triangular supports.
//!
//! `K⁺` is the fixed point of
//! `K(x,t) = ½∫_u^β q + ∫_u^β ∫_0^v (V(τ−s) − λ/cosh²(τ+s)) K(τ−s, τ+s) ds dτ`
//! with `u = (t+x)/2`, `v = (t−x)/2`. In these characteristic coordinates
//! the support `x ≤ t ≤ 2β−x` restricted to `x ≥ α` is the square
//! `[α,β] × [0, β−α]`, and every node depends only on nodes with larger `u`
//! and smaller `v`.
//!
//! `K⁻` is never solved directly: with `q̃(y) = q(−y)` one has
//! `K⁻(x,t) = K̃⁺(−x,−t)`, so the minus grid stores the plus kernel of the
//! reflected perturbation and the accessors undo the reflection.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// One polynomial piece of `q` on `[lo, hi]`, monomial coefficients in `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl Piece {
    fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn derivative(&self, k: usize) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        for _ in 0..k {
            if c.len() <= 1 {
                return vec![0.0];
            }
            c = c.iter().enumerate().skip(1).map(|(n, &a)| n as f64 * a).collect();
        }
        c
    }

    fn eval_derivative(&self, x: f64, k: usize) -> f64 {
        let c = self.derivative(k);
        c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    fn antiderivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (n, &c)| acc * x + c / (n as f64 + 1.0))
            * x
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

/// A compactly supported, piecewise-polynomial perturbation `q` on `[α, β]`.
///
/// `p` is the order with `q^{(p−1)}(β⁻) ≠ 0` and `r` the order with
/// `q^{(r−1)}(α⁺) ≠ 0`; both are 0 when `q` vanishes identically near the
/// respective endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub alpha: f64,
    pub beta: f64,
    pub pieces: Vec<Piece>,
    pub p: usize,
    pub r: usize,
}

const MAX_ORDER: usize = 32;

impl PerturbationSpec {
    /// Builds `q` from breakpoints `α = b₀ < … < b_m = β` and one coefficient
    /// list per piece.
    pub fn new(breakpoints: &[f64], coefficients: &[Vec<f64>]) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::Invalid("at least two breakpoints are required".into()));
        }
        if coefficients.len() != breakpoints.len() - 1 {
            return Err(Error::Invalid(format!(
                "{} pieces need {} coefficient lists, got {}",
                breakpoints.len() - 1,
                breakpoints.len() - 1,
                coefficients.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || coefficients.iter().flatten().any(|c| !c.is_finite())
        {
            return Err(Error::Invalid("non-finite breakpoint or coefficient".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("breakpoints must be strictly increasing".into()));
        }
        let pieces: Vec<Piece> = breakpoints
            .windows(2)
            .zip(coefficients)
            .map(|(w, c)| Piece {
                lo: w[0],
                hi: w[1],
                coeffs: if c.is_empty() { vec![0.0] } else { c.clone() },
            })
            .collect();
        let mut spec = PerturbationSpec {
            alpha: breakpoints[0],
            beta: *breakpoints.last().unwrap(),
            pieces,
            p: 0,
            r: 0,
        };
        spec.p = spec.jump_order(true);
        spec.r = spec.jump_order(false);
        Ok(spec)
    }

    /// `q ≡ 0` on `[α, β]`.
    pub fn zero(alpha: f64, beta: f64) -> Self {
        PerturbationSpec::new(&[alpha, beta], &[vec![0.0]]).expect("valid interval")
    }

    /// Constant `height` on `[α, β]`.
    pub fn box_potential(alpha: f64, beta: f64, height: f64) -> Result<Self> {
        PerturbationSpec::new(&[alpha, beta], &[vec![height]])
    }

    fn jump_order(&self, at_beta: bool) -> usize {
        let (piece, x) = if at_beta {
            (self.pieces.last().unwrap(), self.beta)
        } else {
            (&self.pieces[0], self.alpha)
        };
        (0..MAX_ORDER)
            .find(|&k| piece.eval_derivative(x, k) != 0.0)
            .map_or(0, |k| k + 1)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.pieces.iter().map(|p| p.lo).collect();
        b.push(self.beta);
        b
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(Piece::is_zero)
    }

    fn piece_index(&self, x: f64, from_left: bool) -> Option<usize> {
        if from_left {
            if x <= self.alpha || x > self.beta {
                return None;
            }
            self.pieces.iter().position(|p| x > p.lo && x <= p.hi)
        } else {
            if x < self.alpha || x >= self.beta {
                return None;
            }
            self.pieces.iter().position(|p| x >= p.lo && x < p.hi)
        }
    }

    /// `q(x⁻)`.
    pub fn eval_left(&self, x: f64) -> f64 {
        self.piece_index(x, true).map_or(0.0, |i| self.pieces[i].eval(x))
    }

    /// `q(x⁺)`.
    pub fn eval_right(&self, x: f64) -> f64 {
        self.piece_index(x, false).map_or(0.0, |i| self.pieces[i].eval(x))
    }

    /// `q(x)`, right-continuous at breakpoints.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_right(x)
    }

    /// `q^{(k)}(x⁻)`.
    pub fn derivative_left(&self, x: f64, k: usize) -> f64 {
        self.piece_index(x, true).map_or(0.0, |i| self.pieces[i].eval_derivative(x, k))
    }

    /// `q^{(k)}(x⁺)`.
    pub fn derivative_right(&self, x: f64, k: usize) -> f64 {
        self.piece_index(x, false).map_or(0.0, |i| self.pieces[i].eval_derivative(x, k))
    }

    /// Exact `∫_a^b q`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        self.pieces
            .iter()
            .map(|p| {
                let lo = a.max(p.lo);
                let hi = b.min(p.hi);
                if hi > lo {
                    p.integral(lo, hi)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `‖q‖₁`, integrating exactly between the sign changes of each piece.
    pub fn l1_norm(&self) -> f64 {
        let mut total = 0.0;
        for p in &self.pieces {
            let m = 256;
            let step = (p.hi - p.lo) / m as f64;
            for k in 0..m {
                let a = p.lo + k as f64 * step;
                let b = if k + 1 == m { p.hi } else { a + step };
                let (mut lo, mut hi) = (a, b);
                if p.eval(lo) * p.eval(hi) < 0.0 {
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if p.eval(lo) * p.eval(mid) <= 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let root = 0.5 * (lo + hi);
                    total += p.integral(a, root).abs() + p.integral(root, b).abs();
                } else {
                    total += p.integral(a, b).abs();
                }
            }
        }
        total
    }

    /// `‖λ/cosh² + q‖₁,₁ = ∫|t|·|V(t)| dt`, by composite Gauss-Legendre.
    pub fn weighted_l1_total(&self, lambda: f64) -> f64 {
        let v = |t: f64| (lambda / t.cosh().powi(2) + self.eval(t)).abs() * t.abs();
        let span = 40.0;
        let mut cuts = vec![-span, 0.0, span];
        cuts.extend(self.breakpoints());
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let panels = (((w[1] - w[0]) * 20.0).ceil() as usize).max(1);
            let hp = (w[1] - w[0]) / panels as f64;
            for k in 0..panels {
                let a = w[0] + k as f64 * hp;
                total += crate::quad::gauss_legendre(a, a + hp, 8, v);
            }
        }
        total
    }

    /// `q(−x)` on `[−β, −α]`.
    pub fn reflect(&self) -> Self {
        let pieces: Vec<Piece> = self
            .pieces
            .iter()
            .rev()
            .map(|p| Piece {
                lo: -p.hi,
                hi: -p.lo,
                coeffs: p
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(n, &c)| if n % 2 == 0 { c } else { -c })
                    .collect(),
            })
            .collect();
        PerturbationSpec { alpha: -self.beta, beta: -self.alpha, pieces, p: self.r, r: self.p }
    }

    /// `q(x − τ)`, the perturbation translated by τ.
    pub fn shift(&self, tau: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                // Expand Σ c_n (x−τ)^n in powers of x.
                let deg = p.coeffs.len();
                let mut out = vec![0.0; deg];
                for (n, &c) in p.coeffs.iter().enumerate() {
                    let mut binom = 1.0;
                    for k in 0..=n {
                        out[k] += c * binom * (-tau).powi((n - k) as i32);
                        binom = binom * (n - k) as f64 / (k + 1) as f64;
                    }
                }
                Piece { lo: p.lo + tau, hi: p.hi + tau, coeffs: out }
            })
            .collect();
        PerturbationSpec {
            alpha: self.alpha + tau,
            beta: self.beta + tau,
            pieces,
            p: self.p,
            r: self.r,
        }
    }

    /// Stable textual key of the pieces, used for caching.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        for p in &self.pieces {
            s.push_str(&format!("[{:e},{:e}]:", p.lo, p.hi));
            for c in &p.coeffs {
                s.push_str(&format!("{:e},", c));
            }
            s.push(';');
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

pub const DEFAULT_GRID_N: usize = 256;
pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_PICARD: usize = 200;
const STALL_WINDOW: usize = 20;

/// A solved kernel on the uniform characteristic grid.
///
/// Arrays are row-major over `(i, j)` with `u = a + i h` and `v = j h`,
/// stored in the frame where the kernel is a plus kernel: for the minus side
/// the frame perturbation is `q(−x)` and `a = −β`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelGrid {
    pub side: Side,
    pub lambda: f64,
    /// The perturbation in the solving frame.
    pub frame_q: PerturbationSpec,
    pub n: usize,
    pub h: f64,
    pub values: Vec<f64>,
    /// `∂ᵤK` with the left limit of `q` on breakpoint rows.
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    /// `∂ᵤK + ½q(u)`, continuous across breakpoint rows.
    pub du_smooth: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Whether every breakpoint falls on a grid node.
    pub aligned: bool,
    pub richardson: bool,
    /// Rows `i` at which the frame `q` has a breakpoint.
    pub break_rows: Vec<usize>,
}

struct FrameSolution {
    k: Vec<f64>,
    d: Vec<f64>,
    dv: Vec<f64>,
    iterations: usize,
    residual: f64,
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

fn solve_frame(q: &PerturbationSpec, lambda: f64, n: usize, tol: f64) -> Result<FrameSolution> {
    let alpha = q.alpha;
    let h = (q.beta - q.alpha) / n as f64;
    let m = n + 1;
    let idx = |i: usize, j: usize| i * m + j;
    // Diagonal index d = i − j ∈ [−n, n] stored at d + n.
    let diag_x = |d: isize| alpha + d as f64 * h;
    let ql: Vec<f64> = (-(n as isize)..=n as isize).map(|d| q.eval_left(diag_x(d))).collect();
    let qr: Vec<f64> = (-(n as isize)..=n as isize).map(|d| q.eval_right(diag_x(d))).collect();
    let sx: Vec<f64> = (-(n as isize)..=n as isize).map(|d| sech2(diag_x(d))).collect();
    let st: Vec<f64> = (0..=2 * n).map(|e| sech2(alpha + e as f64 * h)).collect();

    let mut ca = vec![0.0; m * m];
    let mut cb = vec![0.0; m * m];
    let mut cc = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let d = i + n - j;
            let gl = lambda * (sx[d] - st[i + j]);
            ca[idx(i, j)] = ql[d] + qr[d] + 2.0 * gl;
            cb[idx(i, j)] = ql[d] + gl;
            cc[idx(i, j)] = qr[d] + gl;
        }
    }
    let k1: Vec<f64> = (0..m).map(|i| 0.5 * q.integral(alpha + i as f64 * h, q.beta)).collect();

    let w = h * h / 6.0;
    let mut k = vec![0.0; m * m];
    let mut knew = vec![0.0; m * m];
    let mut cell_row = vec![0.0; m];
    let mut acc = vec![0.0; m];
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < MAX_PICARD {
        iterations += 1;
        acc.iter_mut().for_each(|a| *a = 0.0);
        for jj in 0..m {
            knew[idx(n, jj)] = k1[n];
        }
        for i in (0..n).rev() {
            // Cell integrals of row i, accumulated along v.
            let mut run = 0.0;
            cell_row[0] = 0.0;
            for j in 0..n {
                let c = ca[idx(i, j)] * k[idx(i, j)]
                    + cb[idx(i + 1, j)] * k[idx(i + 1, j)]
                    + cc[idx(i, j + 1)] * k[idx(i, j + 1)]
                    + ca[idx(i + 1, j + 1)] * k[idx(i + 1, j + 1)];
                run += w * c;
                cell_row[j + 1] = run;
            }
            for j in 0..m {
                acc[j] += cell_row[j];
                knew[idx(i, j)] = k1[i] + acc[j];
            }
        }
        residual = k
            .iter()
            .zip(&knew)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut k, &mut knew);
        if !residual.is_finite() {
            return Err(Error::NonConvergence("non-finite kernel iterate".into()));
        }
        if residual < tol {
            break;
        }
        history.push(residual);
        let len = history.len();
        if len > STALL_WINDOW && history[len - 1] > 0.5 * history[len - 1 - STALL_WINDOW] {
            return Err(Error::NonConvergence(format!(
                "residual {residual:e} did not halve over {STALL_WINDOW} iterations"
            )));
        }
    }
    if residual >= tol {
        return Err(Error::NonConvergence(format!(
            "residual {residual:e} after {MAX_PICARD} iterations"
        )));
    }

    // D = −∫_0^v G K ds and ∂ᵥK = ∫_u^β G K dτ by one-sided trapezoids.
    let mut d = vec![0.0; m * m];
    let mut dv = vec![0.0; m * m];
    for i in 0..m {
        let mut run = 0.0;
        for j in 0..n {
            run += 0.5 * h * (cb[idx(i, j)] * k[idx(i, j)] + cc[idx(i, j + 1)] * k[idx(i, j + 1)]);
            d[idx(i, j + 1)] = -run;
        }
    }
    for j in 0..m {
        let mut run = 0.0;
        for i in (0..n).rev() {
            run += 0.5 * h * (cc[idx(i, j)] * k[idx(i, j)] + cb[idx(i + 1, j)] * k[idx(i + 1, j)]);
            dv[idx(i, j)] = run;
        }
    }
    Ok(FrameSolution { k, d, dv, iterations, residual })
}

/// Solves the kernel equation on a `grid_n × grid_n` characteristic grid.
///
/// The trapezoid scheme is second order; the returned grid holds the
/// Richardson combination `(4K_{2n} − K_n)/3` of two solves.
pub fn solve_kernel(
    q: &PerturbationSpec,
    lambda: f64,
    side: Side,
    grid_n: usize,
    tol: f64,
) -> Result<KernelGrid> {
    solve_kernel_with(q, lambda, side, grid_n, tol, true)
}

/// As [`solve_kernel`], with Richardson extrapolation optional.
pub fn solve_kernel_with(
    q: &PerturbationSpec,
    lambda: f64,
    side: Side,
    grid_n: usize,
    tol: f64,
    richardson: bool,
) -> Result<KernelGrid> {
    if grid_n < 16 {
        return Err(Error::Invalid(format!("grid_n = {grid_n} < 16")));
    }
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tol = {tol} must be positive")));
    }
    let frame_q = match side {
        Side::Plus => q.clone(),
        Side::Minus => q.reflect(),
    };
    let n = grid_n;
    let h = (frame_q.beta - frame_q.alpha) / n as f64;
    let mut sol = solve_frame(&frame_q, lambda, n, tol)?;
    if richardson {
        let fine = solve_frame(&frame_q, lambda, 2 * n, tol)?;
        let m = n + 1;
        let mf = 2 * n + 1;
        for i in 0..m {
            for j in 0..m {
                let c = i * m + j;
                let f = 2 * i * mf + 2 * j;
                sol.k[c] = (4.0 * fine.k[f] - sol.k[c]) / 3.0;
                sol.d[c] = (4.0 * fine.d[f] - sol.d[c]) / 3.0;
                sol.dv[c] = (4.0 * fine.dv[f] - sol.dv[c]) / 3.0;
            }
        }
        sol.iterations = fine.iterations;
        sol.residual = fine.residual;
    }
    let mut aligned = true;
    let mut break_rows = Vec::new();
    for b in frame_q.breakpoints() {
        let r = (b - frame_q.alpha) / h;
        if (r - r.round()).abs() > 1e-9 {
            aligned = false;
        } else {
            break_rows.push(r.round() as usize);
        }
    }
    break_rows.sort_unstable();
    break_rows.dedup();
    let m = n + 1;
    let mut du = vec![0.0; m * m];
    for i in 0..m {
        let qu = frame_q.eval_left(frame_q.alpha + i as f64 * h);
        for j in 0..m {
            du[i * m + j] = sol.d[i * m + j] - 0.5 * qu;
        }
    }
    Ok(KernelGrid {
        side,
        lambda,
        frame_q,
        n,
        h,
        values: sol.k,
        du,
        dv: sol.dv,
        du_smooth: sol.d,
        iterations: sol.iterations,
        residual: sol.residual,
        aligned,
        richardson,
        break_rows,
    })
}

/// Cubic (or lower order on short segments) Lagrange weights for the
/// fractional index `xi`, with the stencil kept inside `[lo, hi]`.
pub(crate) fn stencil(xi: f64, lo: isize, hi: isize) -> (isize, [f64; 4], usize) {
    let len = ((hi - lo + 1) as usize).min(4);
    let base = xi.floor() as isize - (len as isize - 1) / 2;
    let start = base.clamp(lo, hi + 1 - len as isize);
    let mut w = [0.0; 4];
    for a in 0..len {
        let xa = (start + a as isize) as f64;
        let mut l = 1.0;
        for b in 0..len {
            if a != b {
                let xb = (start + b as isize) as f64;
                l *= (xi - xb) / (xa - xb);
            }
        }
        w[a] = l;
    }
    (start, w, len)
}

/// The stretch `[lo, hi]` between consecutive kinks that contains `x`; a
/// point exactly on a kink belongs to the stretch above it.
fn segment(x: f64, lo: isize, hi: isize, kinks: &[isize]) -> (isize, isize) {
    let (mut a, mut b) = (lo, hi);
    for &k in kinks {
        if k > a && k < hi && (k as f64) <= x {
            a = k;
        }
        if k < b && k > lo && (k as f64) > x {
            b = k;
        }
    }
    if a >= b {
        a = (b - 1).max(lo);
    }
    (a, b)
}

impl KernelGrid {
    pub fn alpha(&self) -> f64 {
        match self.side {
            Side::Plus => self.frame_q.alpha,
            Side::Minus => -self.frame_q.beta,
        }
    }

    pub fn beta(&self) -> f64 {
        match self.side {
            Side::Plus => self.frame_q.beta,
            Side::Minus => -self.frame_q.alpha,
        }
    }

    fn m(&self) -> usize {
        self.n + 1
    }

    pub fn node(&self, arr: &[f64], i: usize, j: usize) -> f64 {
        arr[i * self.m() + j]
    }

    /// Frame coordinates `(x̂, t̂)` and the sign relating frame and original
    /// first derivatives.
    fn to_frame(&self, x: f64, t: f64) -> (f64, f64, f64) {
        match self.side {
            Side::Plus => (x, t, 1.0),
            Side::Minus => (-x, -t, -1.0),
        }
    }

    /// Interpolation of a nodal array at frame `(u, v)` in the sheared
    /// index coordinates `(d, i) = (i − j, i)`. Breakpoint diagonals `x = b`
    /// are lines of constant `d` and breakpoint rows `u = b` lines of
    /// constant `i`, so every stencil stays on one side of each kink.
    fn interp_frame(&self, arr: &[f64], u: f64, v: f64) -> f64 {
        let n = self.n as isize;
        let m = self.m();
        let dstar = (u - v - self.frame_q.alpha) / self.h;
        let istar = (u - self.frame_q.alpha) / self.h;
        let kinks: Vec<isize> = self.break_rows.iter().map(|&b| b as isize).collect();
        let (dlo, dhi) = segment(dstar, -n, n, &kinks);
        let (rlo, rhi) = segment(istar, 0, n, &kinks);
        // Admissible rows of column d: inside the square and the row stretch.
        let rows = |d: isize| -> (isize, isize) {
            let (clo, chi) = (d.max(0), (n + d).min(n));
            let (lo, hi) = (clo.max(rlo), chi.min(rhi));
            if lo > hi {
                (clo, chi)
            } else {
                (lo, hi)
            }
        };
        let full = |d: isize| {
            let (lo, hi) = rows(d);
            hi - lo >= 3
        };
        let (mut ds, mut wd, mut ld) = stencil(dstar, dlo, dhi);
        if ld == 4 && !(0..4).all(|a| full(ds + a)) {
            // Near the corners of the triangle some columns are too short;
            // shift to the nearest block of full columns and extrapolate in d.
            let best = (dlo..=dhi - 3)
                .filter(|&s0| (0..4).all(|a| full(s0 + a)))
                .min_by(|&a, &b| {
                    let da = (a as f64 + 1.5 - dstar).abs();
                    let db = (b as f64 + 1.5 - dstar).abs();
                    da.partial_cmp(&db).unwrap()
                });
            if let Some(s0) = best {
                ds = s0;
                ld = 4;
                for a in 0..4 {
                    let xa = (s0 + a as isize) as f64;
                    let mut l = 1.0;
                    for b in 0..4 {
                        if a != b {
                            let xb = (s0 + b as isize) as f64;
                            l *= (dstar - xb) / (xa - xb);
                        }
                    }
                    wd[a] = l;
                }
            }
        }
        let mut acc = 0.0;
        for a in 0..ld {
            if wd[a] == 0.0 {
                continue;
            }
            let d = ds + a as isize;
            let (lo, hi) = rows(d);
            let (is, wi, li) = stencil(istar, lo, hi);
            let mut col = 0.0;
            for c in 0..li {
                let i = is + c as isize;
                col += wi[c] * arr[i as usize * m + (i - d) as usize];
            }
            acc += wd[a] * col;
        }
        acc
    }

    /// Whether the frame point lies in the support; `None` when it lies in
    /// the support but outside the computed grid (`x̂ < α̂`).
    fn frame_status(&self, xh: f64, th: f64) -> Option<bool> {
        let u = 0.5 * (xh + th);
        let v = 0.5 * (th - xh);
        let eps = 1e-12 * (1.0 + self.h);
        if v < -eps || u > self.frame_q.beta + eps {
            return Some(false);
        }
        if u < self.frame_q.alpha - eps || v > self.frame_q.beta - self.frame_q.alpha + eps {
            return None;
        }
        Some(true)
    }

    fn eval_with<F: Fn(&Self, f64, f64) -> f64>(&self, x: f64, t: f64, f: F) -> f64 {
        let (xh, th, _) = self.to_frame(x, t);
        match self.frame_status(xh, th) {
            Some(false) => 0.0,
            None => f64::NAN,
            Some(true) => {
                let u = (0.5 * (xh + th)).clamp(self.frame_q.alpha, self.frame_q.beta);
                let v = (0.5 * (th - xh)).clamp(0.0, self.frame_q.beta - self.frame_q.alpha);
                f(self, u, v)
            }
        }
    }

    /// `K(x,t)`; exactly 0 outside the support, NaN where the support
    /// extends beyond the grid (`x < α` for `K⁺`, `x > β` for `K⁻`).
    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.eval_with(x, t, |g, u, v| {
            if v == 0.0 {
                0.5 * g.frame_q.integral(u, g.frame_q.beta)
            } else {
                g.interp_frame(&g.values, u, v)
            }
        })
    }

    /// `∂ᵤK` in the original characteristic coordinates.
    pub fn du_at(&self, x: f64, t: f64) -> f64 {
        let (_, _, s) = self.to_frame(x, t);
        s * self.eval_with(x, t, |g, u, v| {
            g.interp_frame(&g.du_smooth, u, v) - 0.5 * g.frame_q.eval(u)
        })
    }

    /// `∂ᵥK` in the original characteristic coordinates.
    pub fn dv_at(&self, x: f64, t: f64) -> f64 {
        let (_, _, s) = self.to_frame(x, t);
        s * self.eval_with(x, t, |g, u, v| g.interp_frame(&g.dv, u, v))
    }

    /// `∂ₓK = ½(∂ᵤK − ∂ᵥK)`.
    pub fn dx(&self, x: f64, t: f64) -> f64 {
        0.5 * (self.du_at(x, t) - self.dv_at(x, t))
    }

    /// `∂ₜK = ½(∂ᵤK + ∂ᵥK)`.
    pub fn dt(&self, x: f64, t: f64) -> f64 {
        0.5 * (self.du_at(x, t) + self.dv_at(x, t))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    /// Grid estimate of `∂ₓᵖK` at the outer characteristic from one-sided
    /// differences along a line of constant `t` (frame coordinates).
    pub fn outer_jump_estimate(&self, order: usize) -> Result<f64> {
        let n = self.n;
        let j0 = n / 2;
        // Along fixed t, x̂ decreases by 2h per step: (i, j) → (i−1, j+1).
        let pts: Vec<f64> = (0..4).map(|k| self.node(&self.values, n - k, j0 + k)).collect();
        let dlt = 2.0 * self.h;
        let frame = match order {
            1 => (3.0 * pts[0] - 4.0 * pts[1] + pts[2]) / (2.0 * dlt),
            2 => (2.0 * pts[0] - 5.0 * pts[1] + 4.0 * pts[2] - pts[3]) / (dlt * dlt),
            _ => {
                return Err(Error::Invalid(format!(
                    "grid jump estimate implemented for orders 1 and 2, got {order}"
                )))
            }
        };
        let sign = match self.side {
            Side::Plus => 1.0,
            Side::Minus => (-1f64).powi(order as i32),
        };
        Ok(sign * frame)
    }
}

/// `∂ₓK = ½(∂ᵤK − ∂ᵥK)` at `(x, t)`; 0 outside the support.
pub fn kernel_x_derivative(k: &KernelGrid, x: f64, t: f64) -> f64 {
    k.dx(x, t)
}

/// Outer-characteristic derivative of order `p` (plus side) or `r` (minus
/// side), read from the polynomial pieces and cross-checked against the grid
/// when the order is at most 2.
///
/// At leading order `K⁺ ≈ ½∫_u^β q` and `K⁻ ≈ ½∫_α^u q` near the outer
/// characteristic, and the remaining terms vanish there to higher order, so
/// `∂ₓᵖK⁺ = −q^{(p−1)}(β⁻)/2^{p+1}` and `∂ₓʳK⁻ = q^{(r−1)}(α⁺)/2^{r+1}`.
pub fn boundary_jump(k: &KernelGrid, q: &PerturbationSpec) -> Result<f64> {
    let (order, closed) = closed_jump(q, k.side)?;
    if order <= 2 {
        let est = k.outer_jump_estimate(order)?;
        if (est - closed).abs() > 0.1 * closed.abs() {
            return Err(Error::Inconsistent(format!(
                "grid estimate {est:.6e} vs closed form {closed:.6e} (order {order})"
            )));
        }
    }
    Ok(closed)
}

/// Order and closed-form outer-characteristic derivative at the relevant
/// endpoint, without touching a grid.
pub fn closed_jump(q: &PerturbationSpec, side: Side) -> Result<(usize, f64)> {
    match side {
        Side::Plus => {
            if q.p == 0 {
                return Err(Error::ZeroJump("q vanishes identically near β".into()));
            }
            let scale = 2f64.powi(q.p as i32 + 1);
            Ok((q.p, -q.derivative_left(q.beta, q.p - 1) / scale))
        }
        Side::Minus => {
            if q.r == 0 {
                return Err(Error::ZeroJump("q vanishes identically near α".into()));
            }
            let scale = 2f64.powi(q.r as i32 + 1);
            Ok((q.r, q.derivative_right(q.alpha, q.r - 1) / scale))
        }
    }
}

/// The a-priori bound `½‖q‖₁ exp(‖V‖₁,₁ + ‖λ/cosh²‖₁,₁)`.
pub fn a_priori_bound(q: &PerturbationSpec, lambda: f64) -> f64 {
    let pt = lambda.abs() * 2.0 * std::f64::consts::LN_2;
    0.5 * q.l1_norm() * (q.weighted_l1_total(lambda) + pt).exp()
}
