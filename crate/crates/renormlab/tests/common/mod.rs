//! Shared fixtures. Each test binary computes the fixed point at most once.
#![allow(dead_code)]

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use renormlab::map::GenFunMap;
use renormlab::renorm::{
    cascade_bisection, newton_fixed_point, CascadeConfig, CascadeTable, FixedPoint, KickedFamily, NewtonConfig,
    RenormConfig, Renormalizer, ZoomSearch,
};
use renormlab::symfun::{BivariatePoly, DomainBox};

pub fn domain() -> DomainBox {
    DomainBox::new(-1.0, 0.75, -1.6, 2.4).unwrap()
}

/// `F(x, u) = (x + u, u)` from `S = (x' - x)^2 / 2`.
pub fn shear() -> GenFunMap {
    let s = BivariatePoly::from_terms(2, true, &[((2, 0), 0.5), ((1, 1), -1.0)]).unwrap();
    GenFunMap::new(s, domain(), 1e-14).unwrap()
}

/// `F(x, u) = (-u, x)` from `S = x x'`.
pub fn rotation() -> GenFunMap {
    let s = BivariatePoly::from_terms(2, true, &[((1, 1), 1.0)]).unwrap();
    GenFunMap::new(s, domain(), 1e-14).unwrap()
}

pub fn kicked(a: f64) -> GenFunMap {
    GenFunMap::new(KickedFamily::genfun(a), domain(), 1e-13).unwrap()
}

pub fn renormalizer() -> Renormalizer {
    Renormalizer::new(RenormConfig::default()).unwrap()
}

pub fn cascade() -> &'static CascadeTable {
    static C: OnceLock<CascadeTable> = OnceLock::new();
    C.get_or_init(|| {
        cascade_bisection(&KickedFamily::default(), &CascadeConfig::default(), &ZoomSearch::default()).unwrap()
    })
}

pub fn a_inf() -> f64 {
    cascade().a_inf.unwrap()
}

/// Newton from the fourth renormalization of the family at `a_inf`.
pub fn fixed_point() -> &'static FixedPoint {
    static F: OnceLock<FixedPoint> = OnceLock::new();
    F.get_or_init(|| {
        let r = renormalizer();
        let base = ZoomSearch::default();
        let (mut f, mut z) = (kicked(a_inf()), base);
        for _ in 0..4 {
            let rf = r.renormalize(&f, &z).unwrap();
            z = rf.next_zoom(&base);
            f = rf.map;
        }
        newton_fixed_point(&r, &f, &base, &NewtonConfig::default()).unwrap()
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
