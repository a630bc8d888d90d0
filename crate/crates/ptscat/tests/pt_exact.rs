mod common;

use common::{f0_minus, f0_plus, rel, C};
use proptest::prelude::*;
use ptscat::pt_exact::*;
use ptscat::resonances::ZeroKind;
use ptscat::specfun::gamma;
use ptscat::Error;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

#[test]
fn params_branch() {
    for l in [-2.0, 0.2, 0.25, 1.0, 3.7] {
        let p = PTParams::new(l);
        assert!((p.mu * p.mu + l - 0.25).norm() < 1e-15);
        if l <= 0.25 {
            assert!(p.mu.im == 0.0 && p.mu.re >= 0.0);
        } else {
            assert!(p.mu.re == 0.0 && p.mu.im > 0.0);
        }
    }
}

#[test]
fn abc_values() {
    let t = abc(&PTParams::new(0.0), c(0.0, 0.0));
    assert_eq!((t.a, t.b, t.c), (c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)));
    let t = abc(&PTParams::new(1.0), c(0.0, 0.0));
    let h = 3f64.sqrt() / 2.0;
    assert!((t.a - c(0.5, h)).norm() < 1e-15 && (t.b - c(0.5, -h)).norm() < 1e-15);
    let t = abc(&PTParams::new(0.2), c(0.0, 1.0));
    let r = 0.05f64.sqrt();
    assert!((t.a - c(1.5 + r, 0.0)).norm() < 1e-15);
    assert!((t.b - c(1.5 - r, 0.0)).norm() < 1e-15);
    assert_eq!(t.c, c(2.0, 0.0));
    assert!((t.a + t.b + 1.0 - 2.0 * t.c).norm() < 1e-15);
}

#[test]
fn jost_reference_values() {
    let v = jost0_plus(&PTParams::new(1.0), 0.0, c(2.0, -1.0)).unwrap();
    assert!(rel(v.value, c(0.88397215789591379, 0.25127389569528592)) < 1e-12);
    assert!(rel(v.dx, c(0.65360446417517211, 1.8504457277507955)) < 1e-12);
    let v = jost0_minus(&PTParams::new(0.2), 0.7, c(1.0, 0.5)).unwrap();
    assert!(rel(v.value, c(1.2799140470391953, -0.88578065789253305)) < 1e-12);
    assert!(rel(v.dx, c(-0.12247480769058404, -1.654682638310434)) < 1e-12);
}

#[test]
fn jost_matches_ode_integration() {
    for (l, x, z) in [(1.0, 0.0, c(2.0, -1.0)), (0.2, -0.7, c(1.0, 0.5)), (-2.0, 1.3, c(-0.4, -1.6))] {
        let (v, d) = f0_plus(l, x, z);
        let j = jost0_plus(&PTParams::new(l), x, z).unwrap();
        assert!(rel(j.value, v) < 1e-9 && rel(j.dx, d) < 1e-9, "λ={l} x={x} z={z}");
        let (v, d) = f0_minus(l, -x, z);
        let j = jost0_minus(&PTParams::new(l), -x, z).unwrap();
        assert!(rel(j.value, v) < 1e-9 && rel(j.dx, d) < 1e-9, "λ={l} x={x} z={z}");
    }
}

#[test]
fn jost_far_field() {
    let p = PTParams::new(1.0);
    let z = c(1.5, -0.5);
    let errs: Vec<f64> = [4.0, 8.0, 12.0]
        .iter()
        .map(|&x| {
            let a = (jost0_plus(&p, x, z).unwrap().value * (-C::i() * z * x).exp() - 1.0).norm();
            let b = (jost0_minus(&p, -x, z).unwrap().value * (-C::i() * z * x).exp() - 1.0).norm();
            a.max(b)
        })
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] < 1e-8, "{errs:?}");
}

#[test]
fn free_limit() {
    let p = PTParams::new(0.0);
    let z = c(0.8, -0.3);
    for x in [-3.0, 0.0, 2.0] {
        let v = jost0_plus(&p, x, z).unwrap();
        assert!(rel(v.value, (C::i() * z * x).exp()) < 1e-13);
    }
    assert!(rel(w0(&p, z).unwrap(), 2.0 * C::i() * z) < 1e-13);
    let s = scattering0(&p, c(1.1, 0.0)).unwrap();
    assert!(s.r_plus.norm() < 1e-14 && s.r_minus.norm() < 1e-14);
    let (t, rp, rm) = s.physical();
    assert!((t - 1.0).norm() < 1e-13 && rp.norm() < 1e-14 && rm.norm() < 1e-14);
    // The normalized transmission keeps the Γ ratio.
    let z = c(1.1, 0.0);
    let ratio = gamma(1.0 - C::i() * z).unwrap() / gamma(1.0 + C::i() * z).unwrap();
    assert!(rel(s.t, ratio) < 1e-13);
}

#[test]
fn minus_is_mirror_of_plus() {
    let p = PTParams::new(0.7);
    for (x, z) in [(0.3, c(1.0, 1.0)), (-2.0, c(-0.5, -0.7)), (5.0, c(3.0, 0.2))] {
        let a = jost0_minus(&p, x, z).unwrap();
        let b = jost0_plus(&p, -x, z).unwrap();
        assert!(rel(a.value, b.value) < 1e-12 && rel(a.dx, -b.dx) < 1e-12);
    }
}

#[test]
fn unnormalized_jost_at_poles() {
    let p = PTParams::new(1.0);
    assert!(matches!(jost0_plus(&p, 0.0, c(0.0, -2.0)), Err(Error::Pole(_))));
    assert!(jost0_plus_normalized(&p, 0.0, c(0.0, -2.0)).unwrap().value.is_finite());
}

#[test]
fn w0_zeros() {
    let h = 3f64.sqrt() / 2.0;
    assert!(w0(&PTParams::new(1.0), c(h, -0.5)).unwrap().norm() < 1e-14);
    assert!(w0(&PTParams::new(-2.0), c(0.0, 1.0)).unwrap().norm() < 1e-14);
    for l in [0.2, 0.25, 1.0, -2.0] {
        let p = PTParams::new(l);
        for r in resonances_closed_form(&p, 6) {
            let z = r.location;
            match w0(&p, z) {
                Ok(w) => assert!(w.norm() <= 1e-8 * (2.0 * z).norm(), "λ={l} z={z}"),
                // On iℤ* only the normalized function is defined.
                Err(_) => assert!(w0_normalized(&p, z).norm() < 1e-14, "λ={l} z={z}"),
            }
        }
    }
}

#[test]
fn w0_pole_set_rejected() {
    let p = PTParams::new(1.0);
    assert!(matches!(w0(&p, c(0.0, -3.0)), Err(Error::Pole(_))));
    assert!(matches!(s0(&p, c(0.0, 2.0)), Err(Error::Pole(_))));
    assert!(s0(&p, c(0.0, 0.0)).is_ok());
}

#[test]
fn w0_is_the_wronskian() {
    let p = PTParams::new(1.0);
    for z in [c(0.5, 0.5), c(2.0, -1.3), c(-1.0, 0.2)] {
        let m = jost0_minus(&p, 0.0, z).unwrap();
        let pl = jost0_plus(&p, 0.0, z).unwrap();
        assert!(rel(wronskian(m, pl), w0(&p, z).unwrap()) < 1e-8);
        let mz = jost0_minus(&p, 0.0, -z).unwrap();
        assert!(rel(wronskian(pl, mz), s0(&p, z).unwrap()) < 1e-8);
    }
}

#[test]
fn closed_form_resonance_lists() {
    let r = resonances_closed_form(&PTParams::new(0.2), 0);
    let ims: Vec<f64> = r.iter().map(|z| z.location.im).collect();
    assert_eq!(r.len(), 2);
    assert!((ims[0] + 0.5 - 0.05f64.sqrt()).abs() < 1e-15 && (ims[1] + 0.5 + 0.05f64.sqrt()).abs() < 1e-15);
    assert!((ims[0] + 0.2764).abs() < 1e-4 && (ims[1] + 0.7236).abs() < 1e-4);
    assert!(r.iter().all(|z| z.kind == ZeroKind::Resonance));

    let r = resonances_closed_form(&PTParams::new(0.25), 0);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].multiplicity, 2);
    assert!((r[0].location - c(0.0, -0.5)).norm() < 1e-15);

    let r = resonances_closed_form(&PTParams::new(1.0), 0);
    let h = 3f64.sqrt() / 2.0;
    assert_eq!(r.len(), 2);
    assert!((r[0].location - c(-h, -0.5)).norm() < 1e-15);
    assert!((r[1].location - c(h, -0.5)).norm() < 1e-15);

    let r = resonances_closed_form(&PTParams::new(1.0), 4);
    assert_eq!(r.len(), 10);
}

#[test]
fn closed_form_stays_in_lower_half_plane() {
    // λ = −2: μ = 3/2. The eigenvalue z = i is excluded; z = 0 is half-bound.
    let r = resonances_closed_form(&PTParams::new(-2.0), 1);
    assert!(r.iter().all(|z| z.location.im <= 0.0));
    assert!(r.iter().any(|z| z.location.norm() < 1e-15 && z.kind == ZeroKind::HalfBound));
    assert!(r.iter().any(|z| (z.location - c(0.0, -2.0)).norm() < 1e-15));
    assert!(r.iter().any(|z| (z.location - c(0.0, -3.0)).norm() < 1e-15));
    assert_eq!(r.len(), 3);
}

#[test]
fn scattering_reference_values() {
    let s = scattering0(&PTParams::new(1.0), c(1.0, 0.0)).unwrap();
    let (t, rp, rm) = s.physical();
    assert!(rel(t, c(0.27237731674590216, -0.78869436272487062)) < 1e-12);
    assert!(rel(rp, c(-0.5209627345626919, -0.17991561556817385)) < 1e-12);
    assert!(rel(rm, rp) < 1e-14);
    let ratio = gamma(c(1.0, 1.0)).unwrap() / gamma(c(1.0, -1.0)).unwrap();
    assert!(rel(s.t * ratio, t) < 1e-12 && rel(s.r_plus * ratio, rp) < 1e-12);
    let h = 3f64.sqrt() / 2.0;
    assert!(matches!(scattering0(&PTParams::new(1.0), c(h, -0.5)), Err(Error::Division(_))));
}

#[test]
fn normalized_w0_asymptotic() {
    let p = PTParams::new(1.0);
    let errs: Vec<f64> = [20.0, 40.0, 80.0]
        .iter()
        .map(|&t| {
            let g = gamma(c(1.0 + t, 0.0)).unwrap();
            (w0_normalized(&p, c(0.0, t)) * g * g / (-2.0 * t) - 1.0).norm()
        })
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn cylinder_modes() {
    assert_eq!(cylinder_lambda(0, 3), 0.0);
    assert_eq!(cylinder_lambda(1, 3), 2.0);
    assert_eq!(cylinder_lambda(2, 2), 4.25);
}

#[test]
fn gamma_product_matches_gammas() {
    for z in [c(0.3, 0.4), c(-2.0, 1.5), c(1e-10, 0.0)] {
        let g = gamma(1.0 - C::i() * z).unwrap() * gamma(1.0 + C::i() * z).unwrap();
        assert!(rel(gamma_product(z), g) < 1e-13);
    }
}

#[test]
fn abcd_consistency() {
    let s = scattering0(&PTParams::new(0.6), c(1.7, 0.0)).unwrap();
    let (a, b, cc, d) = s.abcd();
    assert_eq!(a, d);
    // |A|² = 1 + |B|² on the real axis.
    assert!((a.norm_sqr() - 1.0 - b.norm_sqr()).abs() < 1e-10);
    assert!(rel(b, cc) < 1e-14);
}

fn off_axis() -> impl Strategy<Value = C> {
    (-4.0..4.0f64, -3.0..3.0f64).prop_filter("off iℤ", |(a, _)| a.abs() > 0.05).prop_map(|(a, b)| c(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wronskian_is_constant(z in off_axis(), l in -3.0..3.0f64) {
        let p = PTParams::new(l);
        let ws: Vec<C> = [-2.0, 0.0, 2.0]
            .iter()
            .map(|&x| wronskian(jost0_minus_normalized(&p, x, z).unwrap(), jost0_plus_normalized(&p, x, z).unwrap()))
            .collect();
        let scale = ws.iter().map(|w| w.norm()).fold(0.0, f64::max);
        prop_assert!((ws[0] - ws[1]).norm() < 1e-8 * scale);
        prop_assert!((ws[1] - ws[2]).norm() < 1e-8 * scale);
    }

    #[test]
    fn basis_identity(z in off_axis(), l in -3.0..3.0f64) {
        let p = PTParams::new(l);
        let expect = 2.0 * C::i() * z / gamma_product(z);
        let w = wronskian(jost0_plus_normalized(&p, 0.0, z).unwrap(), jost0_plus_normalized(&p, 0.0, -z).unwrap());
        prop_assert!(rel(w, -expect) < 1e-8);
        let w = wronskian(jost0_minus_normalized(&p, 0.0, z).unwrap(), jost0_minus_normalized(&p, 0.0, -z).unwrap());
        prop_assert!(rel(w, expect) < 1e-8);
    }

    #[test]
    fn ode_residual(z in off_axis(), l in -3.0..3.0f64, x in -3.0..3.0f64) {
        let p = PTParams::new(l);
        let h = 1e-3;
        let f = |x: f64| jost0_plus_normalized(&p, x, z).unwrap().value;
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let v = l / x.cosh().powi(2);
        let r = -d2 + (v - z * z) * f(x);
        let scale = f(x).norm() * (1.0 + (z * z).norm() + v.abs());
        prop_assert!(r.norm() < 1e-5 * scale, "{}", r.norm() / scale);
    }

    #[test]
    fn real_axis_unitarity(k in 0.05..8.0f64, l in -3.0..3.0f64) {
        let s = scattering0(&PTParams::new(l), c(k, 0.0)).unwrap();
        prop_assert!(s.unitarity_residual().abs() < 1e-10);
    }
}
