use ptscat::hadamard::*;
use ptscat::kernel::{PerturbationSpec, Side};
use ptscat::perturbed::PerturbedSystem;
use ptscat::pt_exact::{resonances_closed_form, w0_normalized, PTParams};
use ptscat::Complex;

fn closed_zeros(lambda: f64, n: usize) -> Vec<(Complex, usize)> {
    let all: Vec<(Complex, usize)> = resonances_closed_form(&PTParams::new(lambda), n)
        .iter()
        .map(|r| (r.location, r.multiplicity))
        .collect();
    truncate_zeros(&all, n)
}

fn probes() -> Vec<Complex> {
    (0..10).map(|k| Complex::from_polar(0.5 + 0.25 * (k % 3) as f64, 0.3 + 0.6 * k as f64)).collect()
}

fn max_rel(m: &HadamardModel, f: impl Fn(Complex) -> Complex) -> f64 {
    probes().into_iter().map(|z| (m.eval(z) / f(z) - 1.0).norm()).fold(0.0, f64::max)
}

#[test]
fn w_fit_error_shrinks_with_n() {
    let p = PTParams::new(1.0);
    let errs: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| max_rel(&fit_w(&closed_zeros(1.0, n), &DEFAULT_PROBE_TS).unwrap(), |z| w0_normalized(&p, z)))
        .collect();
    assert!(errs[1] <= 0.5 * errs[0] && errs[2] <= 0.5 * errs[1], "{errs:?}");
}

#[test]
fn w_fit_coefficients_move_toward_exact() {
    // Exact genus-1 data for q ≡ 0, λ = 1: a₁ = i(ψ(½+μ) + ψ(½−μ)) ≈ −0.42985i.
    let exact_a1 = -0.429853117459392948;
    let a1 = |n| fit_w(&closed_zeros(1.0, n), &DEFAULT_PROBE_TS).unwrap().a1_or_b1.im;
    let (d1, d2) = ((a1(200) - exact_a1).abs(), (a1(400) - exact_a1).abs());
    assert!(d2 < d1, "{d1} {d2}");
}

#[test]
fn w_fit_zero_at_origin() {
    // λ = −2 has W₀(0) = 0; the fit picks up m = 1.
    let mut zs: Vec<(Complex, usize)> = resonances_closed_form(&PTParams::new(-2.0), 60)
        .iter()
        .map(|r| (r.location, r.multiplicity))
        .collect();
    zs = truncate_zeros(&zs, 60);
    let m = fit_w(&zs, &DEFAULT_PROBE_TS).unwrap();
    assert_eq!(m.m_or_l, 1);
    assert_eq!(m.eval(Complex::new(0.0, 0.0)), Complex::new(0.0, 0.0));
    let too_many = [zs.clone(), vec![(Complex::new(0.0, 0.0), 1)]].concat();
    assert!(fit_w(&too_many, &DEFAULT_PROBE_TS).is_err());
}

#[test]
fn model_round_trips_through_json() {
    let m = fit_w(&closed_zeros(1.0, 40), &DEFAULT_PROBE_TS).unwrap();
    let s = serde_json::to_string(&m).unwrap();
    assert!(s.contains("\"target\":\"w\""));
    let back: HadamardModel = serde_json::from_str(&s).unwrap();
    assert_eq!(back, m);
}

#[test]
fn shift_covariance_without_background() {
    // With λ → 0 the background is translation invariant and
    // S±_τ(z) = e^{∓2iτz} S±(z).
    let q = PerturbationSpec::box_potential(-1.0, 1.0, 1.0).unwrap();
    let tau = 0.7;
    let a = PerturbedSystem::new(&q, 1e-6, 128, 1e-10).unwrap();
    let b = PerturbedSystem::new(&q.shift(tau), 1e-6, 128, 1e-10).unwrap();
    for z in [Complex::new(0.7, -0.3), Complex::new(-1.2, 0.5), Complex::new(2.0, 0.1)] {
        let (sa, sb) = (a.scattering(z).unwrap(), b.scattering(z).unwrap());
        let e = (Complex::new(0.0, -2.0 * tau) * z).exp();
        assert!((sb.norm_s_plus / (e * sa.norm_s_plus) - 1.0).norm() < 1e-2);
        assert!((sb.norm_s_minus * e / sa.norm_s_minus - 1.0).norm() < 1e-2);
    }
}

#[test]
fn s_fit_box_regime_and_imaginarity() {
    // Half-line support: box on [−2, −1], S⁺ zeros from the forward solver.
    use ptscat::pt_exact::wronskian;
    use ptscat::resonances::{find_zeros, Rect, SearchRegion};
    let q = PerturbationSpec::box_potential(-2.0, -1.0, 1.0).unwrap();
    let sys = PerturbedSystem::new(&q, 1.0, 128, 1e-10).unwrap();
    let s = |z: Complex| Ok(wronskian(sys.plus(-1.5, -z)?, sys.minus(-1.5, z)?));
    let mut reg = SearchRegion::new(Rect::new(-12.1, 12.3, -12.2, 12.4).unwrap());
    reg.newton_tol = 1e-10;
    let mut zs: Vec<(Complex, usize)> =
        find_zeros(&s, &reg).unwrap().iter().map(|r| (r.location, r.multiplicity)).collect();
    for z in zs.iter_mut() {
        if z.0.re.abs() < 1e-7 {
            z.0.re = 0.0;
        }
    }
    let w = |z: Complex| sys.w_normalized(z);
    let data = SData { lambda: 1.0, w: &w, p_sign: None };
    let m = fit_s(&zs, Side::Plus, SupportHint::RMinus, &data).unwrap();
    assert_eq!(m.regime, Some(Regime::HalfLine));
    assert!(m.a1_or_b1.re.abs() < 1e-6);
    assert!(m.fit_residual.is_finite() && m.consistency_residual.unwrap().is_finite());
    let inside = fit_s(&zs, Side::Plus, SupportHint::OriginInside, &data).unwrap();
    assert_eq!(inside.regime, Some(Regime::NoHalfBound));
}
