mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use rand::Rng;
use renormlab::map::{
    check_area, check_reversibility, conjugate_by_ht, fit_genfun, pt, ChainMap, CoordinateChange, GenFunFit,
    GenFunMap, Invertible, Mat2, PlaneMap, Point, Stage,
};
use renormlab::renorm::Scalings;
use renormlab::symfun::{BivariatePoly, DomainBox};
use renormlab::Error;

use common::{domain, kicked, rng, rotation, shear};

fn close(a: Point, b: Point, tol: f64) {
    assert!((a - b).amax() <= tol, "{a:?} vs {b:?}");
}

fn fd_jacobian<M: PlaneMap>(f: &M, z: Point, h: f64) -> Mat2 {
    let dx = (f.apply(z + pt(h, 0.0)).unwrap() - f.apply(z - pt(h, 0.0)).unwrap()) / (2.0 * h);
    let du = (f.apply(z + pt(0.0, h)).unwrap() - f.apply(z - pt(0.0, h)).unwrap()) / (2.0 * h);
    Mat2::new(dx.x, du.x, dx.y, du.y)
}

#[test]
fn shear_and_rotation_closed_forms() {
    let s = shear();
    close(s.apply(pt(0.2, 0.5)).unwrap(), pt(0.7, 0.5), 1e-14);
    assert!((s.jacobian(pt(0.2, 0.5)).unwrap() - Mat2::new(1.0, 1.0, 0.0, 1.0)).amax() <= 1e-14);
    close(s.inverse_apply(pt(0.7, 0.5)).unwrap(), pt(0.2, 0.5), 1e-14);

    let r = rotation();
    close(r.apply(pt(0.3, 0.1)).unwrap(), pt(-0.1, 0.3), 1e-14);
    assert!((r.jacobian(pt(0.3, 0.1)).unwrap() - Mat2::new(0.0, -1.0, 1.0, 0.0)).amax() <= 1e-14);
    close(r.inverse_apply(pt(-0.1, 0.3)).unwrap(), pt(0.3, 0.1), 1e-14);
}

#[test]
fn kicked_member_matches_explicit_step() {
    // For this family -d1 S = u solves explicitly: x' = u + (1 + a) x - x^2.
    let a = -2.0;
    let f = kicked(a);
    let mut g = rng(1);
    for _ in 0..50 {
        let z = pt(g.gen_range(-0.6..0.4), g.gen_range(-0.5..0.5));
        let x1 = z.y + (1.0 + a) * z.x - z.x * z.x;
        let u1 = (1.0 + a) * x1 - z.x - x1 * x1;
        close(f.apply(z).unwrap(), pt(x1, u1), 1e-12);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let f = kicked(-2.1);
    let mut g = rng(2);
    for _ in 0..30 {
        let z = pt(g.gen_range(-0.6..0.4), g.gen_range(-0.4..0.4));
        let j = f.jacobian(z).unwrap();
        assert!((j - fd_jacobian(&f, z, 1e-6)).amax() <= 1e-6 * (1.0 + j.amax()));
        assert_abs_diff_eq!(j.determinant(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn inverse_roundtrip() {
    let f = kicked(-2.2);
    let mut g = rng(3);
    for _ in 0..100 {
        let z = pt(g.gen_range(-0.6..0.4), g.gen_range(-0.4..0.4));
        close(f.inverse_apply(f.apply(z).unwrap()).unwrap(), z, 1e-10);
    }
}

#[test]
fn class_validation() {
    let asym = BivariatePoly::from_terms(3, false, &[((2, 1), 1.0), ((1, 1), -1.0)]).unwrap();
    assert!(matches!(GenFunMap::new(asym, domain(), 1e-13), Err(Error::NotInClass(_))));
    let moved = BivariatePoly::from_terms(2, true, &[((1, 0), 0.1), ((1, 1), -1.0)]).unwrap();
    assert!(matches!(GenFunMap::new(moved, domain(), 1e-13), Err(Error::NotInClass(_))));
    // s12 = -1 + 2 x changes sign inside [-1, 0.75]
    let flat = BivariatePoly::from_terms(3, true, &[((1, 1), -1.0), ((2, 1), 1.0)]).unwrap();
    assert!(matches!(GenFunMap::new(flat, domain(), 1e-13), Err(Error::NotInClass(_))));
}

#[test]
fn serde_roundtrip_and_tamper_check() {
    let f = kicked(-2.0);
    let json = serde_json::to_string(&f).unwrap();
    let back: GenFunMap = serde_json::from_str(&json).unwrap();
    assert_eq!(back, f);
    let tampered = json.replace("\"twist_sign\":-1.0", "\"twist_sign\":1.0");
    assert_ne!(tampered, json);
    assert!(serde_json::from_str::<GenFunMap>(&tampered).is_err());
}

#[test]
fn coordinate_change_closed_forms() {
    let t = 0.05;
    let h = CoordinateChange::new(t);
    for x in [-0.8, -0.1, 0.0, 0.3, 0.7] {
        close(h.apply(pt(x, 0.0)).unwrap(), pt(x + t * x * x, 0.0), 1e-15);
        close(h.apply(pt(0.0, x)).unwrap(), pt(0.0, x), 1e-15);
        let z = pt(x, 0.4);
        assert_abs_diff_eq!(h.jacobian(z).unwrap().determinant(), 1.0, epsilon = 1e-14);
        close(h.inverse_apply(h.apply(z).unwrap()).unwrap(), z, 1e-14);
    }
    assert!(matches!(CoordinateChange::new(1.0).apply(pt(-0.6, 0.0)), Err(Error::SingularChange { .. })));
}

#[test]
fn ht_chain_is_identity_and_conjugate_preserves_area() {
    let id = ChainMap::new(vec![Stage::Ht { t: 0.05 }, Stage::HtInv { t: 0.05 }]);
    let mut g = rng(4);
    for _ in 0..20 {
        let z = pt(g.gen_range(-0.9..0.7), g.gen_range(-1.0..1.0));
        close(id.apply(z).unwrap(), z, 1e-14);
    }
    let c = conjugate_by_ht(Arc::new(kicked(-2.1)), 0.05).unwrap();
    let pts: Vec<Point> = (0..100).map(|_| pt(g.gen_range(-0.5..0.4), g.gen_range(-0.3..0.3))).collect();
    assert!(check_area(&c, &pts).unwrap() <= 1e-12);
    // h_t commutes with the reversor, so the conjugate stays reversible.
    assert!(check_reversibility(&c, &pts).unwrap() <= 1e-10);
}

#[test]
fn chain_inverse_undoes_chain() {
    let f = Arc::new(kicked(-2.0));
    let s = Scalings { p: -0.3, lambda: -0.25, mu: 0.06 };
    let c = ChainMap::new(vec![
        Stage::Lambda { scalings: s },
        Stage::Genfun { map: f.clone() },
        Stage::Genfun { map: f },
        Stage::LambdaInv { scalings: s },
    ]);
    let z = pt(0.2, 0.3);
    close(c.inverse().apply(c.apply(z).unwrap()).unwrap(), z, 1e-10);
    close(c.inverse_apply(c.apply(z).unwrap()).unwrap(), z, 1e-10);
    assert_eq!(c.trace(z).unwrap().len(), 5);
}

#[test]
fn fit_recovers_shear() {
    let cfg = GenFunFit { degree: 6, nodes: 12, fit_tol: 1e-10, solve_tol: 1e-13 };
    let (m, res) = fit_genfun(&shear(), domain(), &cfg).unwrap();
    assert!(res <= 1e-12, "residual {res}");
    let want = BivariatePoly::from_terms(6, true, &[((2, 0), 0.5), ((1, 1), -1.0)]).unwrap();
    assert!(m.genfun().max_coeff_diff(&want) <= 1e-10);
}

#[test]
fn fit_of_rescaled_shear_square() {
    // Lambda^-1 o F o F o Lambda with lambda = 1/2, mu = 1 is (x + 4u, u).
    let s = Scalings { p: 0.0, lambda: 0.5, mu: 1.0 };
    let sh = Arc::new(shear());
    let c = ChainMap::new(vec![
        Stage::Lambda { scalings: s },
        Stage::Genfun { map: sh.clone() },
        Stage::Genfun { map: sh },
        Stage::LambdaInv { scalings: s },
    ]);
    let cfg = GenFunFit { degree: 4, nodes: 10, fit_tol: 1e-10, solve_tol: 1e-13 };
    let (m, res) = fit_genfun(&c, domain(), &cfg).unwrap();
    assert!(res <= 1e-12);
    let mut g = rng(5);
    for _ in 0..50 {
        let z = pt(g.gen_range(-0.5..0.5), g.gen_range(-0.1..0.1));
        close(m.apply(z).unwrap(), c.apply(z).unwrap(), 1e-10);
    }
}

#[test]
fn fit_of_ht_conjugate() {
    let c = conjugate_by_ht(Arc::new(kicked(-2.0)), 0.05).unwrap();
    let d = DomainBox::new(-0.6, 0.5, -1.0, 1.0).unwrap();
    let cfg = GenFunFit { degree: 12, nodes: 24, fit_tol: 1e-6, solve_tol: 1e-13 };
    let (m, _) = fit_genfun(&c, d, &cfg).unwrap();
    let mut g = rng(6);
    for _ in 0..50 {
        let z = pt(g.gen_range(-0.3..0.3), g.gen_range(-0.2..0.2));
        close(m.apply(z).unwrap(), c.apply(z).unwrap(), 1e-8);
    }
}

/// `S = (x' - x)^2 / 2 + x^2 x'`, not symmetric, solved directly.
struct Asymmetric;

impl PlaneMap for Asymmetric {
    fn apply_jac(&self, z: Point) -> renormlab::Result<(Point, Mat2)> {
        let x = z.x;
        let x1 = (z.y + x) / (1.0 - 2.0 * x);
        let u1 = x1 - x + x * x;
        let dx1 = Mat2::new((1.0 + 2.0 * z.y) / (1.0 - 2.0 * x).powi(2), 1.0 / (1.0 - 2.0 * x), 0.0, 0.0);
        let j = Mat2::new(dx1[(0, 0)], dx1[(0, 1)], dx1[(0, 0)] - 1.0 + 2.0 * x, dx1[(0, 1)]);
        Ok((pt(x1, u1), j))
    }
}

#[test]
fn reversibility_checks() {
    let grid: Vec<Point> = domain().grid(6, 6).iter().map(|z| pt(0.3 * z[0], 0.15 * z[1])).collect();
    assert!(check_reversibility(&shear(), &grid).unwrap() <= 1e-12);
    assert!(check_reversibility(&rotation(), &grid).unwrap() <= 1e-12);
    assert!(check_reversibility(&kicked(-2.0), &grid).unwrap() <= 1e-12);
    assert!(check_reversibility(&Asymmetric, &grid).unwrap() > 1e-3);
    assert!(check_area(&kicked(-2.0), &grid).unwrap() <= 1e-12);
}

#[test]
fn domain_grid_points_are_evaluable() {
    let f = kicked(-2.2);
    for z in f.domain_grid(8) {
        f.apply(z).unwrap();
    }
}
