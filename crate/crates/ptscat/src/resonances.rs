//! Zeros of entire functions in a rectangle: argument-principle counting,
//! quadrisection, Newton polishing and classification.
//!
//! The target is always the normalized `W`, which is entire; the
//! unnormalized `w` carries Γ-poles on `iℤ*` that would corrupt winding
//! numbers.

use crate::{Complex, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::atomic::{AtomicUsize, Ordering};

/// Default evaluation budget of one search.
pub const DEFAULT_BUDGET: usize = 1_000_000;
/// Cells below this diagonal are not subdivided.
pub const CLUSTER_FLOOR: f64 = 1e-7;
/// Contour points closer than this to a zero trigger a nudge.
const CONTOUR_CLEARANCE: f64 = 1e-9;
const NUDGE_ATTEMPTS: usize = 3;
const NEWTON_MAX_ITER: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroKind {
    Eigenvalue,
    Resonance,
    HalfBound,
}

impl ZeroKind {
    pub fn of(z: Complex, tol: f64) -> ZeroKind {
        if z.norm() < tol {
            ZeroKind::HalfBound
        } else if z.im > 0.0 {
            ZeroKind::Eigenvalue
        } else {
            ZeroKind::Resonance
        }
    }
}

/// A located zero. Serialized flat as `{re, im, multiplicity, kind, residual}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ZeroRow", from = "ZeroRow")]
pub struct ZeroRecord {
    pub location: Complex,
    pub multiplicity: usize,
    pub kind: ZeroKind,
    /// `|W|` at the polished point.
    pub residual: f64,
}

#[derive(Serialize, Deserialize)]
struct ZeroRow {
    re: f64,
    im: f64,
    multiplicity: usize,
    kind: ZeroKind,
    residual: f64,
}

impl From<ZeroRecord> for ZeroRow {
    fn from(r: ZeroRecord) -> Self {
        ZeroRow {
            re: r.location.re,
            im: r.location.im,
            multiplicity: r.multiplicity,
            kind: r.kind,
            residual: r.residual,
        }
    }
}

impl From<ZeroRow> for ZeroRecord {
    fn from(r: ZeroRow) -> Self {
        ZeroRecord {
            location: Complex::new(r.re, r.im),
            multiplicity: r.multiplicity,
            kind: r.kind,
            residual: r.residual,
        }
    }
}

/// Closed axis-parallel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let r = Rect { re_min, re_max, im_min, im_max };
        r.validate()?;
        Ok(r)
    }

    /// Square of half-width `r` centred at `c`.
    pub fn around(c: Complex, r: f64) -> Self {
        Rect { re_min: c.re - r, re_max: c.re + r, im_min: c.im - r, im_max: c.im + r }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite());
        if !finite || self.re_min >= self.re_max || self.im_min >= self.im_max {
            return Err(Error::Invalid(format!("degenerate rectangle {self:?}")));
        }
        Ok(())
    }

    pub fn center(&self) -> Complex {
        Complex::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn diag(&self) -> f64 {
        (self.re_max - self.re_min).hypot(self.im_max - self.im_min)
    }

    pub fn contains(&self, z: Complex) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn dist_to_boundary(&self, z: Complex) -> f64 {
        (z.re - self.re_min).min(self.re_max - z.re).min(z.im - self.im_min).min(self.im_max - z.im)
    }

    fn corners(&self) -> [Complex; 4] {
        [
            Complex::new(self.re_min, self.im_min),
            Complex::new(self.re_max, self.im_min),
            Complex::new(self.re_max, self.im_max),
            Complex::new(self.re_min, self.im_max),
        ]
    }

    /// The four sub-rectangles meeting at `p`, which must be interior.
    fn split_at(&self, p: Complex) -> [Rect; 4] {
        [
            Rect { re_max: p.re, im_max: p.im, ..*self },
            Rect { re_min: p.re, im_max: p.im, ..*self },
            Rect { re_min: p.re, im_min: p.im, ..*self },
            Rect { re_max: p.re, im_min: p.im, ..*self },
        ]
    }
}

/// Search rectangle with the sector parameters δ (aperture of `S₁`) and η
/// (radius of the balls in `𝓑`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRegion {
    pub rect: Rect,
    pub delta: f64,
    pub eta: f64,
    /// Initial samples on the whole contour of the top-level rectangle.
    pub contour_points: usize,
    pub newton_tol: f64,
}

impl SearchRegion {
    pub fn new(rect: Rect) -> Self {
        SearchRegion { rect, delta: 1.0, eta: 0.3, contour_points: 64, newton_tol: 1e-12 }
    }

    pub fn validate(&self) -> Result<()> {
        self.rect.validate()?;
        if !(self.delta > 0.0 && self.eta > 0.0 && self.newton_tol > 0.0) || self.contour_points < 8 {
            return Err(Error::Invalid(format!("bad search parameters {self:?}")));
        }
        Ok(())
    }
}

/// Evaluation counter shared across threads.
struct Budget {
    used: AtomicUsize,
    limit: usize,
}

impl Budget {
    fn new(limit: usize) -> Self {
        Budget { used: AtomicUsize::new(0), limit }
    }

    fn call<F: Fn(Complex) -> Result<Complex>>(&self, f: &F, z: Complex) -> Result<Complex> {
        if self.used.fetch_add(1, Ordering::Relaxed) >= self.limit {
            return Err(Error::Budget(self.limit));
        }
        f(z)
    }
}

/// Phase change of `f` along the segment `a → b`. A step is accepted when
/// both halves turn by at most π/4 and the midpoint value is within a
/// quarter of the smaller end modulus from the chord average. The chord
/// test catches a passing multiple zero, whose phase can wrap a full turn
/// between samples that look close in argument.
fn segment_phase<F: Fn(Complex) -> Result<Complex>>(
    f: &F,
    budget: &Budget,
    (a, fa): (Complex, Complex),
    (b, fb): (Complex, Complex),
) -> Result<f64> {
    let mut stack = vec![(a, fa, b, fb)];
    let mut total = 0.0;
    while let Some((a, fa, b, fb)) = stack.pop() {
        if (b - a).norm() < CONTOUR_CLEARANCE {
            return Err(Error::ContourThroughZero(format!("zero within {CONTOUR_CLEARANCE} of {a}")));
        }
        let m = 0.5 * (a + b);
        let fm = sample(f, budget, m)?;
        let d1 = (fm / fa).arg();
        let d2 = (fb / fm).arg();
        let chord = (fm - 0.5 * (fa + fb)).norm() <= 0.25 * fa.norm().min(fb.norm());
        if chord && d1.abs() <= FRAC_PI_4 && d2.abs() <= FRAC_PI_4 {
            total += d1 + d2;
        } else {
            // Second half pushed first so the first half is processed next.
            stack.push((m, fm, b, fb));
            stack.push((a, fa, m, fm));
        }
    }
    Ok(total)
}

fn sample<F: Fn(Complex) -> Result<Complex>>(f: &F, budget: &Budget, z: Complex) -> Result<Complex> {
    let v = budget.call(f, z)?;
    if v == Complex::new(0.0, 0.0) {
        return Err(Error::ContourThroughZero(format!("f vanishes at contour point {z}")));
    }
    if !v.is_finite() {
        return Err(Error::NonConvergence(format!("non-finite value at contour point {z}")));
    }
    Ok(v)
}

fn winding<F: Fn(Complex) -> Result<Complex> + Sync>(
    f: &F,
    rect: &Rect,
    points: usize,
    budget: &Budget,
) -> Result<usize> {
    rect.validate()?;
    let corners = rect.corners();
    let perimeter = 2.0 * ((rect.re_max - rect.re_min) + (rect.im_max - rect.im_min));
    let mut nodes = Vec::new();
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let share = (b - a).norm() / perimeter * points as f64;
        let n = share.ceil().max((8.0 * (b - a).norm()).ceil()).max(2.0) as usize;
        nodes.extend((0..n).map(|j| a + (b - a) * (j as f64 / n as f64)));
    }
    let values: Vec<Complex> = nodes.par_iter().map(|&z| sample(f, budget, z)).collect::<Result<_>>()?;
    let phases: Vec<f64> = (0..nodes.len())
        .into_par_iter()
        .map(|k| {
            let j = (k + 1) % nodes.len();
            segment_phase(f, budget, (nodes[k], values[k]), (nodes[j], values[j]))
        })
        .collect::<Result<_>>()?;
    let turns = phases.iter().sum::<f64>() / (2.0 * PI);
    let n = turns.round();
    if (turns - n).abs() > 0.1 || n < 0.0 {
        return Err(Error::NonConvergence(format!("winding number {turns} is not a non-negative integer")));
    }
    Ok(n as usize)
}

/// Number of zeros of `f` inside `rect`, counted with multiplicity.
pub fn count_zeros<F: Fn(Complex) -> Result<Complex> + Sync>(f: &F, rect: &Rect) -> Result<usize> {
    winding(f, rect, 64, &Budget::new(DEFAULT_BUDGET))
}

/// `m`-fold Newton iteration with a central-difference derivative.
fn newton<F: Fn(Complex) -> Result<Complex>>(
    f: &F,
    budget: &Budget,
    cell: &Rect,
    m: usize,
    tol: f64,
) -> Result<Option<Complex>> {
    // Iterates that wander off the cell are abandoned before `f` is asked
    // for values far outside the search region.
    let slack = 0.5 * cell.diag();
    let mut z = cell.center();
    let mut last = f64::INFINITY;
    let mut stalls = 0;
    for _ in 0..NEWTON_MAX_ITER {
        let w = budget.call(f, z)?;
        if w == Complex::new(0.0, 0.0) {
            return Ok(Some(z));
        }
        let h = 1e-6 * (1.0 + z.norm());
        let d = (budget.call(f, z + h)? - budget.call(f, z - h)?) / (2.0 * h);
        let step = m as f64 * w / d;
        if !step.is_finite() {
            return Ok(None);
        }
        z -= step;
        if (z - cell.center()).norm() > cell.diag() + slack {
            return Ok(None);
        }
        let s = step.norm();
        if s < tol {
            return Ok(Some(z));
        }
        // Rounding noise in `f` stops quadratic convergence short of `tol`.
        if s >= 0.5 * last {
            stalls += 1;
            if stalls >= 4 {
                return Ok(if s < 1e4 * tol * (1.0 + z.norm()) { Some(z) } else { None });
            }
        }
        last = s;
    }
    Ok(None)
}

/// Mean of the `m` zeros inside the circle `|z − c| = r`, from the
/// first moment `(1/2πi)∮ z f'/f dz` written with the unwrapped `log f`.
fn centroid<F: Fn(Complex) -> Result<Complex>>(
    f: &F,
    budget: &Budget,
    c: Complex,
    r: f64,
    m: usize,
) -> Result<Complex> {
    const N: usize = 64;
    let mut logs = Vec::with_capacity(N);
    let mut prev: Option<Complex> = None;
    for k in 0..N {
        let th = 2.0 * PI * k as f64 / N as f64;
        let v = sample(f, budget, c + Complex::from_polar(r, th))?;
        let mut l = v.ln();
        if let Some(p) = prev {
            l.im += ((p.im - l.im) / (2.0 * PI)).round() * 2.0 * PI;
        }
        logs.push(l);
        prev = Some(l);
    }
    let i = Complex::i();
    let mut acc = Complex::new(0.0, 0.0);
    for (k, l) in logs.iter().enumerate() {
        let th = 2.0 * PI * k as f64 / N as f64;
        let g = l - i * (m as f64 * th);
        acc += g * Complex::from_polar(1.0, th);
    }
    Ok(c - r * acc / (N as f64 * m as f64))
}

struct Search<'a, F> {
    f: &'a F,
    budget: Budget,
    tol: f64,
    points: usize,
}

impl<'a, F: Fn(Complex) -> Result<Complex> + Sync> Search<'a, F> {
    fn count(&self, rect: &Rect) -> Result<usize> {
        winding(self.f, rect, self.points, &self.budget)
    }

    fn record(&self, z: Complex, multiplicity: usize) -> Result<ZeroRecord> {
        let residual = self.budget.call(self.f, z)?.norm();
        Ok(ZeroRecord { location: z, multiplicity, kind: ZeroKind::of(z, self.tol), residual })
    }

    /// Tries to isolate all `n` zeros of `cell` at one point.
    fn polish(&self, cell: &Rect, n: usize) -> Result<Option<ZeroRecord>> {
        let Some(z) = newton(self.f, &self.budget, cell, n, self.tol)? else {
            return Ok(None);
        };
        if !cell.contains(z) {
            return Ok(None);
        }
        let r = if n == 1 {
            (0.9 * cell.dist_to_boundary(z)).min(0.05 * cell.diag()).max(1e2 * self.tol)
        } else {
            CLUSTER_FLOOR
        };
        match self.count(&Rect::around(z, r)) {
            Ok(k) if k == n => {}
            Ok(_) | Err(Error::ContourThroughZero(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
        let z = if n == 1 { z } else { centroid(self.f, &self.budget, z, 0.5 * r, n)? };
        Ok(Some(self.record(z, n)?))
    }

    /// Quadrisection at the centre, moved off zeros when needed.
    fn split(&self, cell: &Rect, n: usize) -> Result<Vec<(Rect, usize)>> {
        let dir = Complex::new(1.0, 1.0) / 2f64.sqrt();
        let mut last_err = None;
        for attempt in 0..=NUDGE_ATTEMPTS {
            let shift = 0.37 * cell.diag() * dir * (attempt as f64 / 8.0);
            let kids = cell.split_at(cell.center() + shift);
            let counts: Result<Vec<usize>> = kids.iter().map(|k| self.count(k)).collect();
            match counts {
                Ok(c) if c.iter().sum::<usize>() == n => {
                    return Ok(kids.into_iter().zip(c).filter(|(_, k)| *k > 0).collect());
                }
                Ok(c) => {
                    last_err = Some(Error::Inconsistent(format!(
                        "children of {cell:?} count {c:?}, parent {n}"
                    )))
                }
                Err(e @ Error::ContourThroughZero(_)) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap())
    }

    fn process(&self, cell: Rect, n: usize) -> Result<Vec<ZeroRecord>> {
        if n == 0 {
            return Ok(vec![]);
        }
        if let Some(r) = self.polish(&cell, n)? {
            return Ok(vec![r]);
        }
        if cell.diag() < CLUSTER_FLOOR {
            let c = cell.center();
            let z = centroid(self.f, &self.budget, c, cell.diag(), n).unwrap_or(c);
            return Ok(vec![self.record(z, n)?]);
        }
        let kids = self.split(&cell, n)?;
        let found: Vec<Vec<ZeroRecord>> =
            kids.into_par_iter().map(|(k, m)| self.process(k, m)).collect::<Result<_>>()?;
        Ok(found.into_iter().flatten().collect())
    }
}

/// Counts the top-level rectangle, nudging it outward if its boundary
/// passes through a zero.
fn top_count<F: Fn(Complex) -> Result<Complex> + Sync>(s: &Search<F>, rect: Rect) -> Result<(Rect, usize)> {
    let mut last = None;
    for attempt in 0..=NUDGE_ATTEMPTS {
        let e = 0.37 * rect.diag() * 1e-3 * attempt as f64;
        let r = Rect {
            re_min: rect.re_min - e,
            re_max: rect.re_max + e * 0.61,
            im_min: rect.im_min - e * 0.83,
            im_max: rect.im_max + e * 0.29,
        };
        match s.count(&r) {
            Ok(n) => return Ok((r, n)),
            Err(e @ Error::ContourThroughZero(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap())
}

/// All zeros of `f` in `region.rect`, sorted by decreasing imaginary part,
/// then increasing real part.
pub fn find_zeros<F: Fn(Complex) -> Result<Complex> + Sync>(
    f: &F,
    region: &SearchRegion,
) -> Result<Vec<ZeroRecord>> {
    find_zeros_with_budget(f, region, DEFAULT_BUDGET)
}

pub fn find_zeros_with_budget<F: Fn(Complex) -> Result<Complex> + Sync>(
    f: &F,
    region: &SearchRegion,
    budget: usize,
) -> Result<Vec<ZeroRecord>> {
    region.validate()?;
    let s = Search { f, budget: Budget::new(budget), tol: region.newton_tol, points: region.contour_points };
    let (rect, n) = top_count(&s, region.rect)?;
    let mut out = classify(s.process(rect, n)?, region.newton_tol);
    sort_zeros(&mut out);
    Ok(out)
}

pub fn sort_zeros(v: &mut [ZeroRecord]) {
    v.sort_by(|a, b| {
        b.location
            .im
            .partial_cmp(&a.location.im)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.location.re.partial_cmp(&b.location.re).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Tags each record by the sign of its imaginary part; `|z| < tol` is a
/// half-bound state.
pub fn classify(mut records: Vec<ZeroRecord>, tol: f64) -> Vec<ZeroRecord> {
    for r in &mut records {
        r.kind = ZeroKind::of(r.location, tol);
    }
    records
}

/// `z ∈ S₁` for aperture δ: `Im z < 0` and `−|Re z| ≥ δ Im z`.
pub fn in_s1(z: Complex, delta: f64) -> bool {
    z.im < 0.0 && -z.re.abs() >= delta * z.im
}

/// `z ∈ 𝓑 = ⋃ₙ B(−i(n+1), η)`.
pub fn in_b(z: Complex, eta: f64) -> bool {
    (0..)
        .map(|n| Complex::new(0.0, -(n as f64 + 1.0)))
        .take_while(|c| c.im >= z.im - eta)
        .any(|c| (z - c).norm() < eta)
}

/// Result of a sector scan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorScan {
    pub cells: Vec<(Rect, usize)>,
    pub total: usize,
}

/// Rectangular cells covering `rect ∩ S₁` minus the squares circumscribing
/// the balls of `𝓑`; cells meeting the sector boundary are dropped.
pub fn s1_cells(rect: &Rect, delta: f64, eta: f64) -> Vec<Rect> {
    let mut res = vec![rect.re_min, rect.re_max, -eta, eta];
    let mut k = rect.re_min.ceil();
    while k < rect.re_max {
        res.push(k);
        k += 1.0;
    }
    let mut ims = vec![rect.im_min, rect.im_max];
    let mut k = rect.im_min.floor();
    while k <= rect.im_max.ceil() {
        ims.extend([k, k - eta, k + eta]);
        k += 1.0;
    }
    let clip = |v: &mut Vec<f64>, lo: f64, hi: f64| {
        v.retain(|x| *x >= lo && *x <= hi);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    };
    clip(&mut res, rect.re_min, rect.re_max);
    clip(&mut ims, rect.im_min, rect.im_max);
    let mut cells = Vec::new();
    for r in res.windows(2) {
        for i in ims.windows(2) {
            let c = Rect { re_min: r[0], re_max: r[1], im_min: i[0], im_max: i[1] };
            let mid = c.center();
            let centre_ball = mid.re.abs() < eta && {
                let n = (-mid.im).round();
                n >= 1.0 && (mid.im + n).abs() < eta
            };
            if !centre_ball && c.corners().iter().all(|&z| in_s1(z, delta)) {
                cells.push(c);
            }
        }
    }
    cells
}

/// Zero count of `f` over the cells of [`s1_cells`] for `region`.
pub fn scan_s1<F: Fn(Complex) -> Result<Complex> + Sync>(f: &F, region: &SearchRegion) -> Result<SectorScan> {
    region.validate()?;
    let s = Search {
        f,
        budget: Budget::new(DEFAULT_BUDGET),
        tol: region.newton_tol,
        points: region.contour_points,
    };
    let cells: Vec<(Rect, usize)> = s1_cells(&region.rect, region.delta, region.eta)
        .into_par_iter()
        .map(|c| top_count(&s, c).map(|(_, n)| (c, n)))
        .collect::<Result<_>>()?;
    let total = cells.iter().map(|(_, n)| n).sum();
    Ok(SectorScan { cells, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(roots: Vec<Complex>) -> impl Fn(Complex) -> Result<Complex> + Sync {
        move |z| Ok(roots.iter().fold(Complex::new(1.0, 0.0), |acc, r| acc * (z - r)))
    }

    fn c(a: f64, b: f64) -> Complex {
        Complex::new(a, b)
    }

    #[test]
    fn counts_polynomial_roots() {
        let f = poly(vec![c(0.3, 0.2), c(-0.5, -0.5), c(0.31, 0.2), c(2.0, 2.0)]);
        assert_eq!(count_zeros(&f, &Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap()).unwrap(), 3);
        assert_eq!(count_zeros(&f, &Rect::new(1.5, 3.0, 1.0, 3.0).unwrap()).unwrap(), 1);
        assert_eq!(count_zeros(&f, &Rect::new(-3.0, -2.0, 1.0, 3.0).unwrap()).unwrap(), 0);
    }

    #[test]
    fn contour_through_zero_is_reported() {
        let f = poly(vec![c(1.0, 0.0)]);
        let r = count_zeros(&f, &Rect::new(1.0, 2.0, -1.0, 1.0).unwrap());
        assert!(matches!(r, Err(Error::ContourThroughZero(_))), "{r:?}");
    }

    #[test]
    fn finds_simple_and_double_roots() {
        let roots = vec![c(0.3, -0.2), c(-0.7, 0.4), c(0.05, 0.9), c(0.05, 0.9), c(0.0, 0.0)];
        let f = poly(roots);
        let mut region = SearchRegion::new(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap());
        region.newton_tol = 1e-12;
        let z = find_zeros(&f, &region).unwrap();
        assert_eq!(z.len(), 4, "{z:?}");
        let dbl = z.iter().find(|r| r.multiplicity == 2).unwrap();
        assert!((dbl.location - c(0.05, 0.9)).norm() < 1e-10, "{dbl:?}");
        assert_eq!(dbl.kind, ZeroKind::Eigenvalue);
        let zero = z.iter().find(|r| r.location.norm() < 1e-12).unwrap();
        assert_eq!(zero.kind, ZeroKind::HalfBound);
        let res = z.iter().find(|r| (r.location - c(0.3, -0.2)).norm() < 1e-12).unwrap();
        assert_eq!(res.kind, ZeroKind::Resonance);
        assert!(z.windows(2).all(|w| w[0].location.im >= w[1].location.im));
    }

    #[test]
    fn zero_on_a_split_line_is_nudged() {
        // The first quadrisection of [−1,1]² splits exactly through 0.
        let f = poly(vec![c(0.0, 0.0), c(0.5, 0.5)]);
        let z = find_zeros(&f, &SearchRegion::new(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap())).unwrap();
        assert_eq!(z.len(), 2);
    }

    #[test]
    fn zero_on_outer_boundary_is_nudged() {
        let f = poly(vec![c(1.0, 0.0)]);
        let z = find_zeros(&f, &SearchRegion::new(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap())).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0].location - 1.0).norm() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let f = poly(vec![c(0.1, 0.1), c(-0.2, 0.3)]);
        let r = find_zeros_with_budget(&f, &SearchRegion::new(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap()), 50);
        assert!(matches!(r, Err(Error::Budget(50))));
    }

    #[test]
    fn entire_transcendental() {
        // sin(πz) has zeros at the integers.
        let f = |z: Complex| Ok((PI * z).sin());
        let mut z = find_zeros(&f, &SearchRegion::new(Rect::new(-3.5, 3.5, -0.5, 0.7).unwrap())).unwrap();
        z.sort_by(|a, b| a.location.re.partial_cmp(&b.location.re).unwrap());
        let re: Vec<f64> = z.iter().map(|r| r.location.re).collect();
        assert_eq!(z.len(), 7, "{re:?}");
        for (k, r) in z.iter().enumerate() {
            assert!((r.location - c(k as f64 - 3.0, 0.0)).norm() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn sector_and_balls() {
        assert!(in_s1(c(0.5, -1.0), 1.0));
        assert!(!in_s1(c(1.5, -1.0), 1.0));
        assert!(!in_s1(c(0.0, 1.0), 1.0));
        assert!(in_b(c(0.1, -3.1), 0.3));
        assert!(!in_b(c(0.0, -3.5), 0.3));
        assert!(!in_b(c(0.0, -0.1), 0.3));
        let cells = s1_cells(&Rect::new(-2.0, 2.0, -15.0, -8.0).unwrap(), 1.0, 0.3);
        let area: f64 = cells.iter().map(|c| (c.re_max - c.re_min) * (c.im_max - c.im_min)).sum();
        // Six full 0.6 × 0.6 squares, and halves at Im = −8 and −15.
        assert!((area - (28.0 - 6.0 * 0.36 - 2.0 * 0.18)).abs() < 1e-9, "{area}");
        for cell in &cells {
            for z in cell.corners() {
                assert!(in_s1(z, 1.0));
            }
            // The cell interior avoids 𝓑.
            assert!(!in_b(cell.center(), 0.3));
        }
    }

    #[test]
    fn records_serialize_flat() {
        let r = ZeroRecord { location: c(1.5, -0.5), multiplicity: 2, kind: ZeroKind::Resonance, residual: 1e-13 };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"re":1.5,"im":-0.5,"multiplicity":2,"kind":"resonance","residual":1e-13}"#);
        assert_eq!(serde_json::from_str::<ZeroRecord>(&s).unwrap(), r);
    }
}
