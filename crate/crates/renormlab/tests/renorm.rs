mod common;

use std::sync::Arc;

use approx::assert_relative_eq;
use renormlab::map::{check_area, check_reversibility, pt, ChainMap, PlaneMap};
use renormlab::renorm::{
    as_chain, dr_spectrum, find_period2, map_distance, orbit_geometry, pointwise_renormalize, scalings,
    square_midpoint, RenormTower, ZoomSearch,
};
use renormlab::Error;

use common::{a_inf, cascade, fixed_point, kicked, renormalizer, rotation, shear};

const LAMBDA_STAR: f64 = -0.248_875_288_719;
const MU_STAR: f64 = 0.061_110_138_212_3;

#[test]
fn period2_degenerate_cases() {
    let z = ZoomSearch::default();
    assert!(matches!(find_period2(&shear(), z.p_lo, z.p_hi, z.samples, None), Err(Error::DegenerateOrbit { .. })));
    assert!(matches!(find_period2(&rotation(), z.p_lo, z.p_hi, z.samples, None), Err(Error::NoPeriod2)));
}

#[test]
fn period2_of_doubled_member() {
    let f = kicked(-2.1);
    let z = ZoomSearch::default();
    let p2 = find_period2(&f, z.p_lo, z.p_hi, z.samples, None).unwrap();
    assert!(p2.p < 0.0 && p2.q > 0.0);
    let w = f.apply(pt(p2.p, 0.0)).unwrap();
    assert!(w.y.abs() <= 1e-12);
    let back = f.apply(w).unwrap();
    assert!((back - pt(p2.p, 0.0)).amax() <= 1e-10);
    // Before the first doubling there is none.
    assert!(find_period2(&kicked(-1.8), z.p_lo, z.p_hi, z.samples, None).is_err());
}

#[test]
fn midpoint_twist_loss_for_rotation() {
    // S2 for the rotation is degenerate: the midpoint equation has no x-dependence.
    let s = rotation().genfun().clone();
    assert!(matches!(square_midpoint(&s, 0.1, 0.2, 0.0, (-1.0, 1.0)), Err(Error::TwistLoss { .. })));
    let sh = shear().genfun().clone();
    let m = square_midpoint(&sh, 0.1, 0.5, 0.0, (-1.0, 1.0)).unwrap();
    assert!((m.x_mid - 0.3).abs() <= 1e-14);
}

#[test]
fn renormalized_map_is_normalized() {
    let r = renormalizer();
    let rf = r.renormalize(&kicked(a_inf()), &ZoomSearch::default()).unwrap();
    let g = &rf.map;
    assert!(g.apply(pt(0.0, 0.0)).unwrap().amax() <= 1e-10);
    let z = ZoomSearch::default();
    let p2 = find_period2(g, z.p_lo, z.p_hi, z.samples, Some(rf.orbit.next_p(&rf.scalings))).unwrap();
    let (s, _) = scalings(g, &z.with_hint(p2.p)).unwrap();
    assert!(s.lambda < 0.0 && s.mu > 0.0);
    let grid = g.domain_grid(8);
    assert!(check_area(g, &grid).unwrap() <= 1e-9);
    assert!(check_reversibility(g, &grid).unwrap() <= 1e-9);
}

#[test]
fn genfun_and_pointwise_agree() {
    let r = renormalizer();
    for f in [kicked(a_inf()), fixed_point().map.clone()] {
        let rf = r.renormalize(&f, &ZoomSearch::default()).unwrap();
        let pw = pointwise_renormalize(&as_chain(&f), &rf.scalings);
        let d = map_distance(&rf.map, &pw, &rf.map.domain_grid(10), 0).unwrap();
        assert!(d <= 1e-8, "distance {d}");
    }
}

#[test]
fn map_distance_properties() {
    let a = kicked(-2.1);
    let b = kicked(-2.2);
    let grid: Vec<_> = (0..6).flat_map(|i| (0..6).map(move |j| pt(-0.4 + 0.1 * i as f64, -0.2 + 0.08 * j as f64))).collect();
    assert_eq!(map_distance(&a, &a, &grid, 2).unwrap(), 0.0);
    let ab = map_distance(&a, &b, &grid, 1).unwrap();
    assert_eq!(ab, map_distance(&b, &a, &grid, 1).unwrap());
    assert!(ab > 0.0);
    // shear against rotation, value part only, by hand
    let mut want: f64 = 0.0;
    for &z in &grid {
        want = want.max((pt(z.x + z.y, z.y) - pt(-z.y, z.x)).amax());
    }
    assert_relative_eq!(map_distance(&shear(), &rotation(), &grid, 0).unwrap(), want, max_relative = 1e-12);
    let chain = ChainMap::single(Arc::new(a.clone()));
    assert!(map_distance(&a, &chain, &grid, 2).unwrap() <= 1e-12);
}

#[test]
fn cascade_is_monotone_and_converges() {
    let c = cascade();
    let a: Vec<f64> = c.levels.iter().map(|l| l.a_n).collect();
    assert!(a.windows(2).all(|w| w[1] < w[0]), "{a:?}");
    assert!(c.levels.iter().filter_map(|l| l.width).all(|w| w > 0.0));
    let ratios: Vec<f64> = c.levels.iter().filter_map(|l| l.ratio).collect();
    let last = *ratios.last().unwrap();
    assert!((last - 8.721).abs() / 8.721 <= 0.01, "ratio {last}");
    assert!((a_inf() + 2.266_311_276_92).abs() <= 1e-6);
}

#[test]
fn fixed_point_and_scalings() {
    let fp = fixed_point();
    assert!(fp.distance <= 1e-8, "distance {}", fp.distance);
    assert!(fp.residual <= 1e-9);
    assert!((fp.scalings.lambda - LAMBDA_STAR).abs() <= 1e-6);
    assert!((fp.scalings.mu - MU_STAR).abs() <= 1e-6);
    assert!(fp.scalings.lambda < 0.0 && fp.scalings.mu > 0.0);
}

#[test]
fn renormalizations_approach_fixed_point() {
    let r = renormalizer();
    let fp = &fixed_point().map;
    let base = ZoomSearch::default();
    let (mut f, mut z) = (kicked(a_inf()), base);
    let mut dist = Vec::new();
    for _ in 0..4 {
        let rf = r.renormalize(&f, &z).unwrap();
        z = rf.next_zoom(&base);
        f = rf.map;
        dist.push(f.genfun().max_coeff_diff(fp.genfun()));
    }
    assert!(dist.windows(2).all(|w| w[1] < w[0]), "{dist:?}");
}

#[test]
fn orbit_geometry_matches_scalings() {
    let f = kicked(a_inf());
    let geo = orbit_geometry(&f, 6, &ZoomSearch::default()).unwrap();
    let last = geo.iter().rev().find(|g| g.lambda.is_some()).unwrap();
    assert!((last.lambda.unwrap() - LAMBDA_STAR).abs() / LAMBDA_STAR.abs() <= 0.01);
    assert!((last.mu.unwrap() - MU_STAR).abs() / MU_STAR <= 0.01);
}

#[test]
fn spectrum_has_one_unstable_direction() {
    let r = renormalizer();
    let fp = fixed_point();
    let (sp, _) = dr_spectrum(&r, fp, &ZoomSearch::default().with_hint(fp.scalings.p), 1e-6).unwrap();
    let unstable = sp.eigenvalues.iter().filter(|e| e.0.hypot(e.1) > 1.0 + 1e-6).count();
    assert_eq!(unstable, 1, "{:?}", &sp.eigenvalues[..4]);
    assert!((sp.delta - 8.721).abs() / 8.721 <= 0.01);
    assert!(sp.nu <= 0.136, "nu {}", sp.nu);
    assert!((sp.rho_t - LAMBDA_STAR).abs() <= 1e-3);
}

#[test]
fn tower_levels_stay_in_class() {
    let r = renormalizer();
    let fp = fixed_point();
    let z = ZoomSearch::default().with_hint(fp.scalings.p);
    let tw = RenormTower::genfun(&r, &fp.map, 4, &z).unwrap();
    for k in 0..=4 {
        let lv = tw.level(k).unwrap();
        let grid = fp.map.domain_grid(8);
        assert!(check_area(lv, &grid).unwrap() <= 1e-9);
        assert!(check_reversibility(lv, &grid).unwrap() <= 1e-9);
        let s = tw.scalings(k).unwrap();
        assert!((s.lambda - LAMBDA_STAR).abs() <= 1e-6);
    }
    assert!(tw.level(40).is_err());
}
