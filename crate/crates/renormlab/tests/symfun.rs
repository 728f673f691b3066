use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use renormlab::symfun::{
    fit_linear_relations, newton_bracketed, newton_scalar, Basis, BivariatePoly, DomainBox, Functional,
    NewtonOptions, Relation,
};
use renormlab::Error;

fn poly(deg: usize, sym: bool, terms: &[((usize, usize), f64)]) -> BivariatePoly {
    BivariatePoly::from_terms(deg, sym, terms).unwrap()
}

#[test]
fn derivatives_of_product() {
    let p = poly(2, true, &[((1, 1), 1.0)]);
    let d = p.eval_with_derivatives(2.0, 3.0, 2);
    assert_eq!(d.get(0, 0), 6.0);
    assert_eq!(d.get(1, 0), 3.0);
    assert_eq!(d.get(0, 1), 2.0);
    assert_eq!(d.get(1, 1), 1.0);
    assert_eq!(d.get(2, 0), 0.0);
}

#[test]
fn derivatives_of_shear_function() {
    // (y - x)^2 / 2 at (1, 3)
    let p = poly(2, true, &[((2, 0), 0.5), ((1, 1), -1.0)]);
    let d = p.eval_with_derivatives(1.0, 3.0, 2);
    assert_abs_diff_eq!(d.get(0, 0), 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(d.get(1, 0), -2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(d.get(0, 1), 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(d.get(1, 1), -1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(d.get(2, 0), 1.0, epsilon = 1e-15);
}

#[test]
fn cubic_terms_and_third_order() {
    // x^2 y + x y^2
    let p = poly(3, true, &[((2, 1), 1.0)]);
    let d = p.eval_with_derivatives(1.0, 2.0, 3);
    assert_abs_diff_eq!(d.get(0, 0), 6.0, epsilon = 1e-14);
    assert_abs_diff_eq!(d.get(1, 0), 2.0 * 2.0 + 4.0, epsilon = 1e-14);
    assert_abs_diff_eq!(d.get(2, 1), 2.0, epsilon = 1e-14);
    assert_abs_diff_eq!(d.get(1, 2), 2.0, epsilon = 1e-14);
    assert_abs_diff_eq!(d.get(3, 0), 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!(p.partial(1.0, 2.0, 1, 1), 2.0 + 4.0, epsilon = 1e-14);
}

#[test]
fn precompose_examples() {
    let q = poly(2, true, &[((1, 1), 1.0)]).affine_precompose(2.0, 1.0).unwrap();
    assert_abs_diff_eq!(q.eval(1.0, 1.0), 9.0, epsilon = 1e-14);
    assert_abs_diff_eq!(q.eval(0.0, 0.0), 1.0, epsilon = 1e-14);

    let lam = -0.25;
    let q = poly(2, true, &[((2, 0), 0.5), ((1, 1), -1.0)]).affine_precompose(lam, -0.6).unwrap();
    assert_abs_diff_eq!(q.eval(0.0, 1.0), lam * lam / 2.0, epsilon = 1e-15);
    assert!(q.is_symmetric());

    assert_eq!(poly(2, true, &[((1, 1), 1.0)]).affine_precompose(0.0, 1.0), Err(Error::ZeroScale));
}

#[test]
fn rejects_asymmetric_table_in_symmetric_form() {
    let t = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
    assert!(BivariatePoly::from_table(1, true, t).is_err());
}

fn relations_from_map(f: impl Fn(f64, f64) -> (f64, f64)) -> Vec<Relation> {
    let mut rel = Vec::new();
    for i in 0..6 {
        for j in 0..6 {
            let (x, u) = (-0.5 + 0.2 * i as f64, -0.4 + 0.15 * j as f64);
            let (x2, u2) = f(x, u);
            rel.push(Relation { functional: Functional::D1, x, y: x2, target: -u });
            rel.push(Relation { functional: Functional::D2, x, y: x2, target: u2 });
        }
    }
    rel
}

#[test]
fn fit_recovers_shear_and_rotation() {
    let basis = Basis::genfun(4);
    let shear = fit_linear_relations(&basis, &relations_from_map(|x, u| (x + u, u))).unwrap();
    assert!(shear.residual <= 1e-12);
    let want = poly(4, true, &[((2, 0), 0.5), ((1, 1), -1.0)]);
    assert!(shear.poly.max_coeff_diff(&want) <= 1e-12);

    let rot = fit_linear_relations(&basis, &relations_from_map(|x, u| (-u, x))).unwrap();
    assert!(rot.residual <= 1e-12);
    assert!(rot.poly.max_coeff_diff(&poly(4, true, &[((1, 1), 1.0)])) <= 1e-12);
}

#[test]
fn fit_roundtrip_degree_six() {
    let s = poly(
        6,
        true,
        &[((2, 0), 0.3), ((1, 1), -1.0), ((3, 0), 0.2), ((2, 1), -0.1), ((4, 0), 0.05), ((3, 3), 0.01), ((5, 1), -0.02)],
    );
    let basis = Basis::genfun(6);
    let mut rel = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            let (x, y) = (-0.8 + 0.17 * i as f64, -0.7 + 0.15 * j as f64);
            rel.push(Relation { functional: Functional::D1, x, y, target: s.partial(x, y, 1, 0) });
            rel.push(Relation { functional: Functional::D2, x, y, target: s.partial(x, y, 0, 1) });
        }
    }
    let fit = fit_linear_relations(&basis, &rel).unwrap();
    assert!(fit.residual <= 1e-12, "residual {}", fit.residual);
    assert!(fit.poly.max_coeff_diff(&s) <= 1e-10);
}

#[test]
fn newton_examples() {
    let o = NewtonOptions::default();
    let r = newton_scalar(|t| (t * t - 4.0, 2.0 * t), 1.0, &o).unwrap();
    assert_abs_diff_eq!(r, 2.0, epsilon = 1e-12);

    let g = |t: f64| (t * t * t - t - 1.0, 3.0 * t * t - 1.0);
    let plastic = 1.324_717_957_244_746;
    assert_abs_diff_eq!(newton_scalar(g, 1.5, &o).unwrap(), plastic, epsilon = 1e-12);
    assert_abs_diff_eq!(newton_bracketed(g, 1.0, 2.0, &o).unwrap(), plastic, epsilon = 1e-12);

    let e = newton_scalar(|t| (t * t + 1.0, 2.0 * t), 1.0, &o).unwrap_err();
    assert!(matches!(e, Error::NoConvergence { .. } | Error::DerivativeVanishes { .. }), "{e:?}");
}

#[test]
fn bracketed_without_sign_change_fails() {
    let o = NewtonOptions::default();
    assert!(newton_bracketed(|t| (t * t + 1.0, 2.0 * t), -1.0, 1.0, &o).is_err());
}

#[test]
fn domain_box_validation() {
    assert!(DomainBox::new(1.0, 0.0, 0.0, 1.0).is_err());
    assert!(DomainBox::new(0.0, 1.0, 0.0, f64::NAN).is_err());
    let b = DomainBox::new(-1.0, 1.0, 0.0, 2.0).unwrap();
    assert!(b.contains(0.0, 1.0) && !b.contains(0.0, 2.5));
    assert_eq!(b.grid(3, 4).len(), 12);
}

proptest! {
    #[test]
    fn precompose_matches_substitution(
        c in prop::collection::vec(-1.0f64..1.0, 6),
        lam in prop_oneof![-2.0f64..-0.1, 0.1f64..2.0],
        p in -1.0f64..1.0,
        x in -1.0f64..1.0,
        y in -1.0f64..1.0,
    ) {
        let s = poly(4, true, &[((2, 0), c[0]), ((1, 1), c[1]), ((3, 0), c[2]), ((2, 1), c[3]), ((4, 0), c[4]), ((2, 2), c[5])]);
        let q = s.affine_precompose(lam, p).unwrap();
        prop_assert!(q.is_symmetric());
        prop_assert!((q.eval(x, y) - q.eval(y, x)).abs() <= 1e-12);
        prop_assert!((q.eval(x, y) - s.eval(lam * x + p, lam * y + p)).abs() <= 1e-12);
    }

    #[test]
    fn partials_match_finite_differences(c in prop::collection::vec(-1.0f64..1.0, 4), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let s = poly(3, false, &[((2, 0), c[0]), ((1, 1), c[1]), ((0, 3), c[2]), ((2, 1), c[3])]);
        let h = 1e-6;
        let fd = (s.eval(x + h, y) - s.eval(x - h, y)) / (2.0 * h);
        prop_assert!((s.partial(x, y, 1, 0) - fd).abs() <= 1e-8);
    }
}
