mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use renormlab::cantor::{base_samples, build_chain, choose_radius, PieceConfig};
use renormlab::map::{conjugate_by_ht, pt, ChainMap, CoordinateChange, Invertible, Mat2, PlaneMap, Point};
use renormlab::renorm::{RenormTower, Tail, ZoomSearch};
use renormlab::rigidity::{
    alpha0, cantor_samples, chain_jacobians, holder_fit, noise_floor, optimize_kappa, theta_from_jacobians,
    weighted_singular_values, Conjugator,
};
use renormlab::Error;

use common::fixed_point;

const T: f64 = 0.02;

fn radius(tw: &RenormTower) -> f64 {
    choose_radius(tw, 1, &PieceConfig::default()).unwrap()
}

#[test]
fn alpha0_examples() {
    assert_abs_diff_eq!(alpha0(0.061, 0.249, 0.126).unwrap(), 0.2377, epsilon = 1e-4);
    assert_abs_diff_eq!(alpha0(0.2, 0.2, 0.2).unwrap(), 1.0, epsilon = 1e-14);
    assert!(matches!(alpha0(0.1, 0.3, 0.5), Err(Error::ConditionViolated { .. })));
}

#[test]
fn holder_fit_recovers_synthetic_exponent() {
    let pairs: Vec<(f64, f64)> = (2..14)
        .flat_map(|k| {
            let s = 2f64.powi(-k);
            [(s, 0.7 * s.powf(0.3)), (1.3 * s, 0.5 * (1.3 * s).powf(0.3))]
        })
        .collect();
    let fit = holder_fit(&pairs, 1e-12, 4).unwrap();
    assert_abs_diff_eq!(fit.alpha, 0.3, epsilon = 0.01);
    assert!(matches!(holder_fit(&pairs[..4], 1e-12, 4), Err(Error::InsufficientScales { .. })));
}

#[test]
fn theta_of_pure_rescaling() {
    let s = fixed_point().scalings;
    let j = Mat2::new(s.lambda.powi(4), 0.0, 0.0, s.mu.powi(4));
    let (lo, hi) = weighted_singular_values(&j, 1.0);
    assert_abs_diff_eq!(lo, s.mu.powi(4), epsilon = 1e-16);
    assert_abs_diff_eq!(hi, s.lambda.powi(4), epsilon = 1e-16);
    let th = theta_from_jacobians(&[j], 3.0, 1);
    assert_abs_diff_eq!(th.theta1, s.mu, epsilon = 1e-12);
    assert_abs_diff_eq!(th.theta2, -s.lambda, epsilon = 1e-12);
}

#[test]
fn theta_bounds_at_fixed_point() {
    let tw = RenormTower::stationary(fixed_point());
    let pts = base_samples(&tw, 4, radius(&tw), &PieceConfig::default(), 25, 20).unwrap();
    let th = optimize_kappa(&chain_jacobians(&tw, 0, &pts).unwrap(), 0.05, 20.0, 121, pts.len());
    assert!(th.theta1 >= 0.059, "theta1 {}", th.theta1);
    assert!(th.theta2 <= 0.251, "theta2 {}", th.theta2);
    assert!(th.theta1 < th.theta2);
}

#[test]
fn self_conjugacy_is_identity() {
    let tw = RenormTower::stationary(fixed_point());
    let r = radius(&tw);
    let c = Conjugator::new(&tw, &tw, 2, r, &PieceConfig::default()).unwrap();
    for (w, x) in cantor_samples(&tw, 13, 30, 3).unwrap() {
        for n in 0..=2 {
            let (h, dh) = c.eval(n, &w, x).unwrap();
            assert!((h - x).norm() <= 1e-10);
            assert!((dh - Mat2::identity()).norm() <= 1e-8);
        }
    }
    let floor = noise_floor(&tw, &cantor_samples(&tw, 13, 30, 3).unwrap(), 2, r, &PieceConfig::default()).unwrap();
    assert!(floor.0 <= 1e-9 && floor.1 <= 1e-7, "{floor:?}");
}

#[test]
fn coordinate_change_oracle() {
    let fp = fixed_point();
    let tw = RenormTower::stationary(fp);
    let r = radius(&tw);
    let zoom = ZoomSearch::default().with_hint(fp.scalings.p);
    let conj = RenormTower::pointwise(conjugate_by_ht(Arc::new(fp.map.clone()), T).unwrap(), 8, &zoom)
        .unwrap()
        .with_tail(Tail::from_fixed(fp));
    let c = Conjugator::new(&tw, &conj, 2, r, &PieceConfig::default()).unwrap();
    let h = CoordinateChange::new(T);
    let mut sup = (0.0f64, 0.0f64);
    for (w, x) in cantor_samples(&tw, 13, 20, 5).unwrap() {
        let (v, dv) = c.eval(2, &w, x).unwrap();
        assert!((v - h.inverse_apply(x).unwrap()).norm() <= 1e-8);

        // Dh_1 against central differences taken in level-4 coordinates
        let (_, d1) = c.eval(1, &w, x).unwrap();
        let psi = build_chain(&tw, &w.prefix(4)).unwrap();
        let y = psi.inverse_apply(x).unwrap();
        let e = 1e-6;
        let col = |d: Point| {
            let a = c.eval(1, &w, psi.apply(y + d).unwrap()).unwrap().0;
            let b = c.eval(1, &w, psi.apply(y - d).unwrap()).unwrap().0;
            (a - b) / (2.0 * e)
        };
        let (cx, cu) = (col(pt(e, 0.0)), col(pt(0.0, e)));
        let want = d1 * psi.jacobian(y).unwrap();
        let fd = Mat2::new(cx.x, cu.x, cx.y, cu.y);
        assert!((want - fd).amax() <= 1e-5 * want.amax(), "{want} vs {fd}");
        let ed = h.inverse_apply_jac(x).unwrap().1;
        sup.0 = sup.0.max((d1 - ed).amax());
        sup.1 = sup.1.max((dv - ed).amax());
    }
    // Derivatives converge more slowly than values, but they do converge.
    assert!(sup.1 < 0.5 * sup.0, "{sup:?}");
}

#[test]
fn seeded_conjugacy_reproduces_ht_at_first_level() {
    let fp = fixed_point();
    let zoom = ZoomSearch::default().with_hint(fp.scalings.p);
    let base = Arc::new(fp.map.clone());
    let ptw = RenormTower::pointwise(ChainMap::single(base.clone()), 6, &zoom).unwrap().with_tail(Tail::from_fixed(fp));
    let conj = RenormTower::pointwise(conjugate_by_ht(base, T).unwrap(), 6, &zoom).unwrap().with_tail(Tail::from_fixed(fp));
    let r = radius(&ptw);
    let c = Conjugator::new(&ptw, &conj, 1, r, &PieceConfig::default()).unwrap().with_coordinate_seed(T);
    let h = CoordinateChange::new(T);
    for (w, x) in cantor_samples(&ptw, 13, 20, 9).unwrap() {
        let (v, dv) = c.eval(1, &w, x).unwrap();
        let (ev, edv) = h.inverse_apply_jac(x).unwrap();
        assert!((v - ev).norm() <= 1e-9);
        assert!((dv - edv).norm() <= 1e-8);
    }
}

#[test]
fn short_words_are_rejected() {
    let tw = RenormTower::stationary(fixed_point());
    let c = Conjugator::new(&tw, &tw, 2, radius(&tw), &PieceConfig::default()).unwrap();
    let w = "0101".parse().unwrap();
    assert!(matches!(c.eval(2, &w, pt(0.0, 0.0)), Err(Error::TowerTooShallow { .. })));
}
