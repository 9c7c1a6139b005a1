use std::f64::consts::PI;

use h2conformal::h2norm::{self, Method};
use h2conformal::quadrature::{self, QuadratureSettings};
use h2conformal::{models, ConformalMap, Error, PoleResidueForm, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn single(pole: C64, residue: C64) -> PoleResidueForm {
    PoleResidueForm::new(vec![(pole, residue)]).unwrap()
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

fn half_plane_maps() -> [ConformalMap; 3] {
    [ConformalMap::Identity, ConformalMap::MobiusDisk, ConformalMap::RotationUpperHalf]
}

#[test]
fn classical_values() {
    let id = ConformalMap::Identity;
    let (f, g) = (single(c(-1.0, 0.0), c(1.0, 0.0)), single(c(-2.0, 0.0), c(1.0, 0.0)));
    let ip = h2norm::inner_product_residue(&f, &g, &id).unwrap();
    assert_eq!(ip.method, Method::Residue);
    assert!(rel(ip.value, c(1.0 / 3.0, 0.0)) < 1e-14);
    assert!((h2norm::norm_residue(&f, &id).unwrap().value.re - 0.5f64.sqrt()).abs() < 1e-14);
    let q = h2norm::norm_quadrature(&f, &id, &QuadratureSettings::default()).unwrap();
    assert_eq!(q.method, Method::Quadrature);
    assert!((q.value.re - 0.5f64.sqrt()).abs() < 1e-8);
    let rot = ConformalMap::RotationUpperHalf;
    let up = single(c(0.0, 1.0), c(1.0, 0.0));
    assert!((h2norm::norm_residue(&up, &rot).unwrap().value.re.powi(2) - 0.5).abs() < 1e-14);
}

#[test]
fn h_transform_examples() {
    let f = single(c(-1.0, 0.0), c(1.0, 0.0));
    let h = h2norm::h_transform(&f, &ConformalMap::Identity, c(0.0, 1.0)).unwrap();
    assert!(rel(h, c(1.0, 0.0) / c(1.0, 1.0)) < 1e-15);
    let up = single(c(0.0, 1.0), c(1.0, 0.0));
    let h = h2norm::h_transform(&up, &ConformalMap::RotationUpperHalf, c(0.0, 0.0)).unwrap();
    assert!((h.norm() - 1.0).abs() < 1e-15);
    let half = single(c(0.5, 0.0), c(1.0, 0.0));
    assert!(matches!(h2norm::h_transform(&half, &ConformalMap::MobiusDisk, c(-3.0, 0.0)), Err(Error::PoleHit { .. })));
}

#[test]
fn mobius_pole_residue() {
    // ψ⁻¹(0.5) = -3 and ψ'(-3) = -1/8.
    let (u, res) = h2norm::h_transform_pole(&ConformalMap::MobiusDisk, c(0.5, 0.0), c(1.0, 0.0)).unwrap();
    assert!(rel(u, c(-3.0, 0.0)) < 1e-15);
    let expected = c(-0.125, 0.0).sqrt().inv();
    assert!(rel(res * res, expected * expected) < 1e-14);
    let (_, doubled) = h2norm::h_transform_pole(&ConformalMap::MobiusDisk, c(0.5, 0.0), c(2.0, 0.0)).unwrap();
    assert!(rel(doubled, res * 2.0) < 1e-15);
    // Same residue as a small contour integral of 𝔥_F around -3.
    let f = single(c(0.5, 0.0), c(1.0, 0.0));
    let n = 2000;
    let r = 1e-3;
    let mut sum = c(0.0, 0.0);
    for k in 0..n {
        let t = 2.0 * PI * (k as f64 + 0.5) / n as f64;
        let e = C64::from_polar(r, t);
        sum += h2norm::h_transform(&f, &ConformalMap::MobiusDisk, u + e).unwrap() * e * c(0.0, 1.0);
    }
    let contour = sum * (2.0 * PI / n as f64) / c(0.0, 2.0 * PI);
    assert!(rel(contour, res) < 1e-6);
}

#[test]
fn poles_outside_the_domain_are_rejected() {
    let f = single(c(1.0, 0.0), c(1.0, 0.0));
    assert!(matches!(h2norm::norm_residue(&f, &ConformalMap::Identity), Err(Error::OutsideDomain { .. })));
    let g = single(c(-1.0, 0.0), c(1.0, 0.0));
    assert!(h2norm::frak_f_eval(&g, &ConformalMap::Identity, c(0.5, 0.0)).is_err());
}

#[test]
fn frak_reduces_to_reflected_evaluation_for_identity() {
    let f = single(c(-1.0, 0.0), c(1.0, 0.0));
    let v = h2norm::frak_f_eval(&f, &ConformalMap::Identity, c(-0.5, 0.0)).unwrap();
    assert!(rel(v, c(2.0 / 3.0, 0.0)) < 1e-15);
}

#[test]
fn mobius_frak_equals_inner_product() {
    let map = ConformalMap::MobiusDisk;
    let f = single(c(0.5, 0.0), c(1.0, 0.0));
    let kernel = single(c(0.25, 0.0), c(1.0, 0.0));
    let ip = h2norm::inner_product_residue(&f, &kernel, &map).unwrap().value;
    assert!(rel(h2norm::frak_f_eval(&f, &map, c(0.25, 0.0)).unwrap(), ip) < 1e-12);
}

#[test]
fn joukowski_cross_method_example() {
    // Ellipse c = 0, M = 1, R = 2 has imaginary semi-axis 0.75, so 0.9i lies
    // outside it; the pole sits at 0.5i instead.
    let map = ConformalMap::joukowski(c(0.0, 0.0), c(1.0, 0.0), 2.0).unwrap();
    assert!(!map.contains(c(0.0, 0.9)));
    let f = single(c(0.0, 0.5), c(1.0, 0.0));
    assert!(map.contains(c(0.0, 0.5)));
    let a = h2norm::norm_residue(&f, &map).unwrap().value.re;
    let b = h2norm::norm_quadrature(&f, &map, &QuadratureSettings::default()).unwrap().value.re;
    assert!((a - b).abs() <= 1e-6 * b, "residue {a} vs quadrature {b}");
}

#[test]
fn quadrature_budget_is_enforced() {
    let settings = QuadratureSettings { rel_tol: 1e-15, abs_tol: 0.0, max_evaluations: 200 };
    let r = quadrature::integrate(|x: f64| Ok(c(x.abs().sqrt().sin() * 50.0 * x, 0.0)), &[-1.0, 1.0], &settings);
    assert!(matches!(r, Err(Error::QuadratureNoConvergence { .. })));
}

#[test]
fn quadrature_integrates_known_functions() {
    let s = QuadratureSettings::default();
    let r = quadrature::integrate(|x: f64| Ok(c(x.cos(), x.sin())), &[0.0, PI / 2.0], &s).unwrap();
    assert!(rel(r.value, c(1.0, 1.0)) < 1e-12);
    // Peaked integrand resolved by a breakpoint at the peak.
    let eps = 1e-6;
    let r = quadrature::integrate(|x: f64| Ok(c(eps / (x * x + eps * eps), 0.0)), &[-1.0, 0.0, 1.0], &s).unwrap();
    assert!((r.value.re - 2.0 * (1.0 / eps).atan()).abs() < 1e-7 * PI);
}

fn map_strategy() -> impl Strategy<Value = ConformalMap> {
    (0usize..3).prop_map(|k| half_plane_maps()[k])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residue_and_quadrature_norms_agree(map in map_strategy(), seed in 0u64..10_000, n in 1usize..6) {
        let f = models::synthetic(&map, n, seed).unwrap();
        let a = h2norm::norm_residue(&f, &map).unwrap().value.re;
        let b = h2norm::norm_quadrature(&f, &map, &QuadratureSettings::default()).unwrap().value.re;
        prop_assert!((a - b).abs() <= 1e-6 * b, "{} vs {}", a, b);
    }

    #[test]
    fn inner_product_is_hermitian_and_positive(map in map_strategy(), seed in 0u64..10_000) {
        let f = models::synthetic(&map, 3, seed).unwrap();
        let g = models::synthetic(&map, 4, seed + 1).unwrap();
        let fg = h2norm::inner_product_residue(&f, &g, &map).unwrap().value;
        let gf = h2norm::inner_product_residue(&g, &f, &map).unwrap().value;
        prop_assert!(rel(fg, gf.conj()) <= 1e-10);
        let ff = h2norm::inner_product_residue(&f, &f, &map).unwrap().value;
        prop_assert!(ff.re > 0.0 && ff.im.abs() <= 1e-10 * ff.norm());
        // Scaling the first slot conjugates the factor.
        let a = c(0.3, -1.7);
        let af = PoleResidueForm::new(f.terms().map(|(p, r)| (p, r * a)).collect()).unwrap();
        let afg = h2norm::inner_product_residue(&af, &g, &map).unwrap().value;
        prop_assert!(rel(afg, fg * a.conj()) <= 1e-10);
    }

    #[test]
    fn frak_derivative_matches_finite_differences(map in map_strategy(), seed in 0u64..10_000) {
        let f = models::synthetic(&map, 3, seed).unwrap();
        let mu = models::synthetic(&map, 1, seed + 7).unwrap().poles()[0];
        let h = 1e-6 * (1.0 + mu.norm());
        let fd = (h2norm::frak_f_eval(&f, &map, mu + h).unwrap() - h2norm::frak_f_eval(&f, &map, mu - h).unwrap()) / (2.0 * h);
        prop_assert!(rel(h2norm::frak_f_deriv(&f, &map, mu).unwrap(), fd) <= 1e-5);
        let doubled = PoleResidueForm::new(f.terms().map(|(p, r)| (p, r * 2.0)).collect()).unwrap();
        let ratio = h2norm::frak_f_eval(&doubled, &map, mu).unwrap().norm() / h2norm::frak_f_eval(&f, &map, mu).unwrap().norm();
        prop_assert!((ratio - 2.0).abs() <= 1e-12);
    }
}
