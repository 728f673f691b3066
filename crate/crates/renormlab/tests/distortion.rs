mod common;

use approx::assert_abs_diff_eq;
use renormlab::cantor::{choose_radius, PieceConfig};
use renormlab::distortion::{
    cancellation_suite, check_cancellation_e, check_cancellation_ed, e_integral_1d, e_shift_integral_1d, e_term,
    ed_term, lemma_suite, quadrature, ChainFamily, Patch,
};
use renormlab::map::{pt, ChainMap, Invertible, Mat2, PlaneMap, Point, Stage};
use renormlab::renorm::{RenormTower, Scalings};
use renormlab::symfun::DomainBox;

use common::fixed_point;

/// `(x, u) -> (x^2, u)`.
struct Square;

impl PlaneMap for Square {
    fn apply_jac(&self, z: Point) -> renormlab::Result<(Point, Mat2)> {
        Ok((pt(z.x * z.x, z.y), Mat2::new(2.0 * z.x, 0.0, 0.0, 1.0)))
    }
}

/// `(x, u) -> (x^3, u)` on `x > 0`.
struct Cube;

impl PlaneMap for Cube {
    fn apply_jac(&self, z: Point) -> renormlab::Result<(Point, Mat2)> {
        Ok((pt(z.x.powi(3), z.y), Mat2::new(3.0 * z.x * z.x, 0.0, 0.0, 1.0)))
    }
}

impl Invertible for Cube {
    fn inverse_apply_jac(&self, z: Point) -> renormlab::Result<(Point, Mat2)> {
        let x = z.x.cbrt();
        Ok((pt(x, z.y), Mat2::new(1.0 / (3.0 * x * x), 0.0, 0.0, 1.0)))
    }
}

fn affine() -> ChainMap {
    ChainMap::new(vec![Stage::Lambda { scalings: Scalings { p: -0.3, lambda: -0.25, mu: 0.06 } }])
}

#[test]
fn affine_maps_have_no_error_terms() {
    let a = affine();
    let (x, y) = (pt(0.1, 0.2), pt(-0.4, 0.7));
    assert!(e_term(&a, x, y).unwrap().amax() <= 1e-16);
    assert_eq!(ed_term(&a, x, y).unwrap(), Mat2::zeros());
    assert!(check_cancellation_e(&a, x, y).unwrap().residual <= 1e-16);
    assert!(check_cancellation_ed(&a, x, y).unwrap().residual <= 1e-16);
}

#[test]
fn square_error_terms() {
    for (x, y) in [(0.3, 0.9), (-1.0, 2.0), (0.5, 0.5)] {
        let e = e_term(&Square, pt(x, 0.1), pt(y, -0.4)).unwrap();
        assert_abs_diff_eq!(e.x, (y - x) * (y - x), epsilon = 1e-15);
        assert_eq!(e.y, 0.0);
        let d = ed_term(&Square, pt(x, 0.1), pt(y, -0.4)).unwrap();
        assert_abs_diff_eq!(d[(0, 0)], 2.0 * (y - x), epsilon = 1e-15);
    }
    assert_eq!(e_term(&Square, pt(0.7, 0.2), pt(0.7, 0.2)).unwrap(), pt(0.0, 0.0));
}

#[test]
fn cube_cancellations() {
    let (x, y) = (pt(1.2, 0.0), pt(1.5, 0.3));
    let e = check_cancellation_e(&Cube, x, y).unwrap();
    let d = check_cancellation_ed(&Cube, x, y).unwrap();
    assert!(e.residual <= 1e-12, "{e:?}");
    assert!(d.residual <= 1e-12, "{d:?}");
}

#[test]
fn integral_forms() {
    // psi(t) = t^3: psi'' = 6t
    let (x, y, dl) = (1.2, 1.5, 0.07);
    let psi = |t: f64| t.powi(3);
    let direct = psi(y) - psi(x) - 3.0 * x * x * (y - x);
    assert_abs_diff_eq!(e_integral_1d(|t| 6.0 * t, x, y, 4), direct, epsilon = 1e-10);
    let e = |y: f64| psi(y) - psi(x) - 3.0 * x * x * (y - x);
    assert_abs_diff_eq!(e_shift_integral_1d(|t| 6.0 * t, x, y, dl, 4), e(y + dl) - e(y), epsilon = 1e-10);
    assert_abs_diff_eq!(quadrature(f64::exp, 0.0, 1.0, 8), std::f64::consts::E - 1.0, epsilon = 1e-14);
}

#[test]
fn affine_family_passes_every_bound_trivially() {
    let domain = DomainBox::new(-0.5, 0.5, -0.2, 0.2).unwrap();
    let fam = ChainFamily { patches: vec![Patch { psi: affine(), tilde: Some(affine()), domain }] };
    let k = fam.constants(8).unwrap();
    assert_eq!(k.k_est, 1.0);
    assert_eq!(k.c2_distance, 0.0);
    for r in lemma_suite(&fam, &k, 500, 4.0, 1).unwrap() {
        assert_eq!(r.violations, 0);
        assert!(r.max_ratio <= 1e-10, "{r:?}");
    }
}

#[test]
fn fixed_point_family() {
    let tw = RenormTower::stationary(fixed_point());
    let cfg = PieceConfig::default();
    let r = choose_radius(&tw, 5, &cfg).unwrap();
    let fam = ChainFamily::from_towers(&tw, None, r, &cfg).unwrap();
    assert_eq!(fam.patches.len(), 32);
    let k = fam.constants(12).unwrap();
    assert!(k.k_est >= 1.0);
    let reports = lemma_suite(&fam, &k, 2000, 4.0, 7).unwrap();
    // perturbation bounds need a second tower
    assert_eq!(reports.len(), 6);
    for rep in &reports {
        assert_eq!(rep.violations, 0, "{rep:?}");
    }
    let again = lemma_suite(&fam, &k, 2000, 4.0, 7).unwrap();
    assert_eq!(reports, again);
    let c = cancellation_suite(&fam, 500, 7).unwrap();
    assert!(c.max_relative_e <= 1e-9 && c.max_relative_ed <= 1e-9, "{c:?}");
}
