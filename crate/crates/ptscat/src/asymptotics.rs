//! Closed-form predictions of where resonances accumulate, and a matcher
//! that pairs found zeros with predicted points.
//!
//! Logarithmic branches come from jump discontinuities of `q` at both
//! endpoints of its support; vertical branches persist along the negative
//! imaginary axis when `q` lives on one half-line.

use crate::kernel::{boundary_jump, closed_jump, KernelGrid, PerturbationSpec, Side};
use crate::resonances::ZeroRecord;
use crate::{Complex, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    LogBranch,
    VerticalBranch,
}

/// Index convention for the vertical branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalHypothesis {
    /// `−i(2|j| − 1 ± √(¼−λ) − ½)`, consecutive gaps 2.
    DoubleSpacing,
    /// `−i(|j| − ½ ± √(¼−λ))`, the unperturbed spacing 1.
    UnitSpacing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    /// Signed index; the sign selects the branch.
    pub j: i64,
    pub z: Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPrediction {
    pub kind: BranchKind,
    /// Branch constant `C/(p+r−2)!`; zero for vertical branches.
    pub a: f64,
    pub c: f64,
    pub p: usize,
    pub r: usize,
    /// Support endpoints; zero for vertical branches.
    pub alpha: f64,
    pub beta: f64,
    /// Inclusive range of `|j|`.
    pub j_range: (u32, u32),
    pub points: Vec<BranchPoint>,
    /// Set when the formula is used outside the range it was stated for.
    pub extrapolated: bool,
    pub hypothesis: Option<VerticalHypothesis>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn check_range(j_range: (u32, u32)) -> Result<()> {
    if j_range.0 == 0 || j_range.0 > j_range.1 {
        return Err(Error::Invalid(format!("j range {j_range:?} must satisfy 1 ≤ lo ≤ hi")));
    }
    Ok(())
}

/// `(C, A)` from the exact endpoint jumps of `q`.
///
/// `C = (−1)ᵖ ∂ₜ^{r−1}∂ₓK⁻(0,2α⁺) · ∂ₓᵖK⁺(0,2β⁻)`. Both kernels depend on
/// `u = (x+t)/2` alone to leading order at the outer characteristic, so the
/// mixed derivative equals `∂ₓʳK⁻` there.
pub fn branch_constants(q: &PerturbationSpec) -> Result<(f64, f64)> {
    let (p, jp) = closed_jump(q, Side::Plus)?;
    let (r, jm) = closed_jump(q, Side::Minus)?;
    let c = if p % 2 == 1 { -jm * jp } else { jm * jp };
    if c == 0.0 {
        return Err(Error::ZeroJump("endpoint jump product vanishes".into()));
    }
    Ok((c, c / factorial(p + r - 2)))
}

/// Branch constant `A`.
pub fn branch_constant(q: &PerturbationSpec) -> Result<f64> {
    Ok(branch_constants(q)?.1)
}

/// Branch constant with both jumps cross-checked against solved kernel
/// grids (10% agreement required for orders up to 2).
pub fn branch_constant_checked(
    q: &PerturbationSpec,
    kplus: &KernelGrid,
    kminus: &KernelGrid,
) -> Result<f64> {
    boundary_jump(kplus, q)?;
    boundary_jump(kminus, q)?;
    branch_constant(q)
}

/// Predicted log-branch points `βⱼ` for `|j|` in `j_range`, both signs.
///
/// `Re βⱼ = ∓π/(2L)·(2|j| + (N−2)/2 + sign(A) + 1)` and
/// `Im βⱼ = −N/(2L)·log(|j|π/L) + log(|A|(N−2)!)/(2L)`, where `L = β − α`
/// and `N = p + r`. The offset is applied to both signs so that
/// `β₋ⱼ = −conj(βⱼ)` holds exactly.
pub fn predict_log_branch(q: &PerturbationSpec, j_range: (u32, u32)) -> Result<BranchPrediction> {
    check_range(j_range)?;
    if !(q.alpha < 0.0 && 0.0 < q.beta) {
        return Err(Error::Support(format!(
            "log branches need 0 ∈ (α, β), got [{}, {}]",
            q.alpha, q.beta
        )));
    }
    let (c, a) = branch_constants(q)?;
    let (p, r) = (q.p, q.r);
    let n = (p + r) as f64;
    let len = q.beta - q.alpha;
    let sign_a = a.signum();
    let im_const = (a.abs() * factorial(p + r - 2)).ln() / (2.0 * len);
    let mut points = Vec::new();
    for aj in j_range.0..=j_range.1 {
        let jf = aj as f64;
        let re = PI / (2.0 * len) * (2.0 * jf + (n - 2.0) / 2.0 + sign_a + 1.0);
        let im = -n / (2.0 * len) * (jf * PI / len).ln() + im_const;
        points.push(BranchPoint { j: aj as i64, z: Complex::new(-re, im) });
        points.push(BranchPoint { j: -(aj as i64), z: Complex::new(re, im) });
    }
    Ok(BranchPrediction {
        kind: BranchKind::LogBranch,
        a,
        c,
        p,
        r,
        alpha: q.alpha,
        beta: q.beta,
        j_range,
        points,
        extrapolated: false,
        hypothesis: None,
    })
}

/// Slope `−(p+r)/(2(β−α))` of `Im βⱼ` against `log |j|`.
pub fn predicted_log_slope(q: &PerturbationSpec) -> f64 {
    -((q.p + q.r) as f64) / (2.0 * (q.beta - q.alpha))
}

/// Least-squares slope of `Im z` against `log |Re z|` over the records with
/// `|Re z| ≥ re_min`. `None` with fewer than two such records.
pub fn fitted_log_slope(found: &[ZeroRecord], re_min: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = found
        .iter()
        .filter(|r| r.location.re.abs() >= re_min)
        .map(|r| (r.location.re.abs().ln(), r.location.im))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Vertical-branch points for `|j|` in `j_range`; `j > 0` carries `+√(¼−λ)`.
/// For `λ > ¼` the root is imaginary and the points move off the axis to
/// `±√(λ−¼)`; the prediction is then flagged as extrapolated.
pub fn predict_vertical_branch(
    lambda: f64,
    j_range: (u32, u32),
    hypothesis: VerticalHypothesis,
) -> Result<BranchPrediction> {
    check_range(j_range)?;
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Domain(format!("λ must be a nonzero real, got {lambda}")));
    }
    let mu = Complex::new(0.25 - lambda, 0.0).sqrt();
    let mut points = Vec::new();
    for aj in j_range.0..=j_range.1 {
        let base = match hypothesis {
            VerticalHypothesis::DoubleSpacing => 2.0 * aj as f64 - 1.5,
            VerticalHypothesis::UnitSpacing => aj as f64 - 0.5,
        };
        for (sign, j) in [(1.0, aj as i64), (-1.0, -(aj as i64))] {
            points.push(BranchPoint { j, z: -Complex::i() * (base + sign * mu) });
        }
    }
    Ok(BranchPrediction {
        kind: BranchKind::VerticalBranch,
        a: 0.0,
        c: 0.0,
        p: 0,
        r: 0,
        alpha: 0.0,
        beta: 0.0,
        j_range,
        points,
        extrapolated: lambda > 0.25,
        hypothesis: Some(hypothesis),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPoint {
    pub j: i64,
    pub predicted: Complex,
    pub found: Complex,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPoint>,
    /// Predictions left without a partner.
    pub unmatched: Vec<i64>,
    /// Worst error over both signs, per `|j|`, ascending in `|j|`.
    pub error_by_abs_j: Vec<(u32, f64)>,
    /// Whether `error_by_abs_j` is strictly decreasing (needs two entries).
    pub decreasing: bool,
    pub mean_error: f64,
}

/// Greedy nearest-neighbour pairing: repeatedly take the closest remaining
/// (prediction, zero) pair. Zeros count once per multiplicity.
pub fn match_branches(found: &[ZeroRecord], pred: &BranchPrediction) -> Result<MatchReport> {
    if found.is_empty() || pred.points.is_empty() {
        return Err(Error::Invalid("matching needs non-empty inputs".into()));
    }
    let zs: Vec<Complex> = found
        .iter()
        .flat_map(|r| std::iter::repeat(r.location).take(r.multiplicity.max(1)))
        .collect();
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(zs.len() * pred.points.len());
    for (i, bp) in pred.points.iter().enumerate() {
        for (k, z) in zs.iter().enumerate() {
            cand.push(((bp.z - z).norm(), i, k));
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; pred.points.len()];
    let mut used_z = vec![false; zs.len()];
    let mut pairs = Vec::new();
    for (d, i, k) in cand {
        if used_p[i] || used_z[k] {
            continue;
        }
        used_p[i] = true;
        used_z[k] = true;
        let bp = pred.points[i];
        pairs.push(MatchedPoint { j: bp.j, predicted: bp.z, found: zs[k], error: d });
    }
    pairs.sort_by_key(|m| (m.j.unsigned_abs(), m.j));
    let unmatched = pred.points.iter().zip(&used_p).filter(|(_, &u)| !u).map(|(b, _)| b.j).collect();

    let mut error_by_abs_j: Vec<(u32, f64)> = Vec::new();
    for m in &pairs {
        let aj = m.j.unsigned_abs() as u32;
        match error_by_abs_j.last_mut() {
            Some(last) if last.0 == aj => last.1 = last.1.max(m.error),
            _ => error_by_abs_j.push((aj, m.error)),
        }
    }
    let decreasing =
        error_by_abs_j.len() >= 2 && error_by_abs_j.windows(2).all(|w| w[1].1 < w[0].1);
    let mean_error = pairs.iter().map(|m| m.error).sum::<f64>() / pairs.len().max(1) as f64;
    Ok(MatchReport { pairs, unmatched, error_by_abs_j, decreasing, mean_error })
}

/// Fit quality of both vertical index conventions against the same zeros.
pub fn vertical_hypotheses(
    found: &[ZeroRecord],
    lambda: f64,
    j_range: (u32, u32),
) -> Result<Vec<(VerticalHypothesis, MatchReport)>> {
    [VerticalHypothesis::DoubleSpacing, VerticalHypothesis::UnitSpacing]
        .into_iter()
        .map(|h| Ok((h, match_branches(found, &predict_vertical_branch(lambda, j_range, h)?)?)))
        .collect()
}

/// Mean gap between consecutive real parts of the records with
/// `Re z ≥ re_min`, sorted by real part.
pub fn real_part_spacing(found: &[ZeroRecord], re_min: f64) -> Option<f64> {
    let mut re: Vec<f64> =
        found.iter().map(|r| r.location.re).filter(|&x| x >= re_min).collect();
    if re.len() < 2 {
        return None;
    }
    re.sort_by(f64::total_cmp);
    Some((re[re.len() - 1] - re[0]) / (re.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pt_exact::{resonances_closed_form, PTParams};
    use crate::resonances::ZeroKind;

    fn unit_box() -> PerturbationSpec {
        PerturbationSpec::box_potential(-1.0, 1.0, 1.0).unwrap()
    }

    fn rec(z: Complex, m: usize) -> ZeroRecord {
        ZeroRecord { location: z, multiplicity: m, kind: ZeroKind::of(z, 1e-9), residual: 0.0 }
    }

    #[test]
    fn unit_box_constant() {
        // Jumps −¼ at β and +¼ at α.
        let (c, a) = branch_constants(&unit_box()).unwrap();
        assert!((c - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(a, c);
    }

    #[test]
    fn constant_scales_quadratically() {
        let h = 3.5;
        let q = PerturbationSpec::box_potential(-1.0, 1.0, h).unwrap();
        let a = branch_constant(&q).unwrap();
        assert!((a - h * h * branch_constant(&unit_box()).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn ramp_at_alpha() {
        // q = x + 1 on [−1, 1]: continuous at α (r = 2), jump 2 at β (p = 1).
        let q = PerturbationSpec::new(&[-1.0, 1.0], &[vec![1.0, 1.0]]).unwrap();
        assert_eq!((q.p, q.r), (1, 2));
        let (c, a) = branch_constants(&q).unwrap();
        assert!((c - 2.0 / 4.0 * 1.0 / 8.0).abs() < 1e-15);
        assert_eq!(a, c);
    }

    #[test]
    fn zero_jump_rejected() {
        let q = PerturbationSpec::new(&[-1.0, 0.0, 1.0], &[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(branch_constant(&q), Err(Error::ZeroJump(_))));
    }

    #[test]
    fn grid_checked_constant() {
        use crate::kernel::solve_kernel;
        let q = unit_box();
        let kp = solve_kernel(&q, 1.0, Side::Plus, 64, 1e-10).unwrap();
        let km = solve_kernel(&q, 1.0, Side::Minus, 64, 1e-10).unwrap();
        assert_eq!(branch_constant_checked(&q, &kp, &km).unwrap(), 1.0 / 16.0);
    }

    #[test]
    fn log_branch_substitution() {
        // q = 1 on [−1,0], −1 on [0,1]: both jumps +¼, so A = −1/16 and the
        // real offset vanishes: β₁₀ = −(π/4)·20 − (i/2)log 5π + (i/4)log(1/16).
        let q = PerturbationSpec::new(&[-1.0, 0.0, 1.0], &[vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(branch_constant(&q).unwrap(), -1.0 / 16.0);
        let pred = predict_log_branch(&q, (10, 10)).unwrap();
        let expect =
            Complex::new(-PI / 4.0 * 20.0, -0.5 * (5.0 * PI).ln() + 0.25 * (1.0f64 / 16.0).ln());
        let b10 = pred.points.iter().find(|b| b.j == 10).unwrap().z;
        assert!((b10 - expect).norm() < 1e-14, "{b10} vs {expect}");
        // The unit box has A = +1/16: same Im part, real part shifted by π/(β−α).
        let ub = predict_log_branch(&unit_box(), (10, 10)).unwrap();
        let d = ub.points.iter().find(|b| b.j == 10).unwrap().z - b10;
        assert!((d - Complex::new(-PI / 2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn log_branch_mirror_and_monotone() {
        let pred = predict_log_branch(&unit_box(), (1, 20)).unwrap();
        for aj in 1..=20i64 {
            let p = pred.points.iter().find(|b| b.j == aj).unwrap().z;
            let m = pred.points.iter().find(|b| b.j == -aj).unwrap().z;
            assert_eq!(m, -p.conj());
        }
        let ims: Vec<f64> = pred.points.iter().filter(|b| b.j > 0).map(|b| b.z.im).collect();
        assert!(ims.windows(2).all(|w| w[1] < w[0]));
        let res: Vec<f64> = pred.points.iter().filter(|b| b.j > 0).map(|b| b.z.re).collect();
        for w in res.windows(2) {
            assert!((w[0] - w[1] - PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_branch_support_error() {
        let q = PerturbationSpec::box_potential(1.0, 2.0, 1.0).unwrap();
        assert!(matches!(predict_log_branch(&q, (1, 3)), Err(Error::Support(_))));
    }

    #[test]
    fn vertical_examples() {
        let pred = predict_vertical_branch(0.2, (1, 1), VerticalHypothesis::DoubleSpacing).unwrap();
        let s = 0.05f64.sqrt();
        assert!((pred.points[0].z - Complex::new(0.0, -(0.5 + s))).norm() < 1e-15);
        assert!((pred.points[1].z - Complex::new(0.0, -(0.5 - s))).norm() < 1e-15);
        assert!(!pred.extrapolated);
        let quarter = predict_vertical_branch(0.25, (1, 3), VerticalHypothesis::DoubleSpacing).unwrap();
        for w in quarter.points.chunks(2) {
            assert_eq!(w[0].z, w[1].z);
        }
        let gaps: Vec<f64> = quarter.points.chunks(2).map(|c| c[0].z.im).collect();
        assert!(gaps.windows(2).all(|w| (w[0] - w[1] - 2.0).abs() < 1e-14));
        assert!(predict_vertical_branch(1.0, (1, 2), VerticalHypothesis::DoubleSpacing)
            .unwrap()
            .extrapolated);
    }

    #[test]
    fn vertical_against_closed_form() {
        for lambda in [0.2, 0.25] {
            let params = PTParams::new(lambda);
            let zs: Vec<ZeroRecord> = resonances_closed_form(&params, 5)
                .into_iter()
                .filter(|r| r.location.norm() > 0.0)
                .collect();
            let rep = vertical_hypotheses(&zs, lambda, (1, 5)).unwrap();
            let unit = &rep.iter().find(|(h, _)| *h == VerticalHypothesis::UnitSpacing).unwrap().1;
            assert!(unit.pairs.iter().all(|m| m.error < 1e-12), "{unit:?}");
            let double = match_branches(
                &zs,
                &predict_vertical_branch(lambda, (1, 1), VerticalHypothesis::DoubleSpacing).unwrap(),
            )
            .unwrap();
            assert!(double.pairs.iter().all(|m| m.error < 1e-12));
        }
    }

    #[test]
    fn matcher_trend_and_negative_control() {
        let q = unit_box();
        let pred = predict_log_branch(&q, (6, 12)).unwrap();
        // Synthetic zeros approaching the prediction from below.
        let found: Vec<ZeroRecord> = pred
            .points
            .iter()
            .map(|b| rec(b.z - Complex::new(0.0, 0.5 / b.j.unsigned_abs() as f64), 1))
            .collect();
        let good = match_branches(&found, &pred).unwrap();
        assert!(good.decreasing && good.unmatched.is_empty());
        assert_eq!(good.error_by_abs_j.len(), 7);
        // Shrinking |A| lowers every predicted Im part by one unit.
        let mut wrong = pred.clone();
        for b in &mut wrong.points {
            b.z.im -= 1.0;
        }
        wrong.a *= (-4.0f64).exp();
        assert!(!match_branches(&found, &wrong).unwrap().decreasing);
    }

    #[test]
    fn matcher_counts_multiplicity_and_reports_unmatched() {
        let pred = predict_vertical_branch(0.25, (1, 2), VerticalHypothesis::UnitSpacing).unwrap();
        let found = vec![rec(Complex::new(0.0, -0.5), 2)];
        let rep = match_branches(&found, &pred).unwrap();
        assert_eq!(rep.pairs.len(), 2);
        assert_eq!(rep.unmatched.len(), 2);
        assert!(match_branches(&[], &pred).is_err());
    }

    #[test]
    fn slope_fit() {
        let zs: Vec<ZeroRecord> = (2..10)
            .map(|k| {
                let x = k as f64;
                rec(Complex::new(x, -0.7 * x.ln() + 0.2), 1)
            })
            .collect();
        assert!((fitted_log_slope(&zs, 1.0).unwrap() + 0.7).abs() < 1e-12);
        assert!((real_part_spacing(&zs, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(predicted_log_slope(&unit_box()), -0.5);
    }
}
