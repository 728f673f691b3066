use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{pointwise_renormalize, scalings, FixedPoint, Renormalizer, Scalings, ZoomOrbit, ZoomSearch};
use crate::error::{Error, Result};
use crate::map::{ChainMap, GenFunMap};

/// Map used for every level past the computed depth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tail {
    pub map: ChainMap,
    pub scalings: Scalings,
    pub orbit: ZoomOrbit,
}

impl Tail {
    pub fn from_fixed(fp: &FixedPoint) -> Self {
        Self { map: ChainMap::single(Arc::new(fp.map.clone())), scalings: fp.scalings, orbit: fp.orbit }
    }
}

/// `R^k F` for `k = 0..=depth`, with the scalings of each computed level.
///
/// `maps[k]` is `R^k F`; `scalings[k]` and `orbits[k]` belong to `maps[k]`
/// and map level `k + 1` coordinates into level `k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RenormTower {
    maps: Vec<ChainMap>,
    scalings: Vec<Scalings>,
    orbits: Vec<ZoomOrbit>,
    tail: Option<Tail>,
}

impl RenormTower {
    /// Pointwise tower: each level is `Lambda^{-1} F F Lambda` of the previous
    /// one, composed exactly.
    pub fn pointwise(f: ChainMap, depth: usize, zoom: &ZoomSearch) -> Result<Self> {
        let mut maps = vec![f];
        let mut sc = Vec::with_capacity(depth + 1);
        let mut orbits = Vec::with_capacity(depth + 1);
        let mut z = *zoom;
        for k in 0..=depth {
            let (s, o) = scalings(&maps[k], &z)?;
            sc.push(s);
            orbits.push(o);
            z = zoom.with_hint(o.next_p(&s));
            if k < depth {
                let next = pointwise_renormalize(&maps[k], &s);
                maps.push(next);
            }
        }
        Ok(Self { maps, scalings: sc, orbits, tail: None })
    }

    /// Refitted tower: every level is a generating-function map.
    pub fn genfun(r: &Renormalizer, f: &GenFunMap, depth: usize, zoom: &ZoomSearch) -> Result<Self> {
        let mut maps = vec![ChainMap::single(Arc::new(f.clone()))];
        let mut sc = Vec::with_capacity(depth + 1);
        let mut orbits = Vec::with_capacity(depth + 1);
        let mut cur = f.clone();
        let mut z = *zoom;
        for k in 0..=depth {
            if k < depth {
                let rf = r.renormalize(&cur, &z)?;
                sc.push(rf.scalings);
                orbits.push(rf.orbit);
                z = rf.next_zoom(zoom);
                cur = rf.map;
                maps.push(ChainMap::single(Arc::new(cur.clone())));
            } else {
                let (s, o) = scalings(&cur, &z)?;
                sc.push(s);
                orbits.push(o);
            }
        }
        Ok(Self { maps, scalings: sc, orbits, tail: None })
    }

    /// Tower over given levels; scalings are read off each map.
    pub fn from_maps(levels: Vec<GenFunMap>, zoom: &ZoomSearch) -> Result<Self> {
        let mut sc = Vec::with_capacity(levels.len());
        let mut orbits = Vec::with_capacity(levels.len());
        let mut z = *zoom;
        for f in &levels {
            let (s, o) = scalings(f, &z)?;
            z = zoom.with_hint(o.next_p(&s));
            sc.push(s);
            orbits.push(o);
        }
        let maps = levels.into_iter().map(|f| ChainMap::single(Arc::new(f))).collect();
        Ok(Self { maps, scalings: sc, orbits, tail: None })
    }

    /// Every level equal to the fixed point.
    pub fn stationary(fp: &FixedPoint) -> Self {
        let t = Tail::from_fixed(fp);
        Self { maps: vec![t.map.clone()], scalings: vec![t.scalings], orbits: vec![t.orbit], tail: Some(t) }
    }

    pub fn with_tail(mut self, tail: Tail) -> Self {
        self.tail = Some(tail);
        self
    }

    /// Number of computed levels past the base.
    pub fn depth(&self) -> usize {
        self.maps.len() - 1
    }

    pub fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    fn check(&self, k: usize) -> Result<()> {
        if k < self.maps.len() || self.tail.is_some() {
            Ok(())
        } else {
            Err(Error::TowerTooShallow { have: self.depth(), need: k })
        }
    }

    pub fn level(&self, k: usize) -> Result<&ChainMap> {
        self.check(k)?;
        Ok(self.maps.get(k).unwrap_or_else(|| &self.tail.as_ref().expect("checked").map))
    }

    pub fn scalings(&self, k: usize) -> Result<Scalings> {
        self.check(k)?;
        Ok(self.scalings.get(k).copied().unwrap_or_else(|| self.tail.as_ref().expect("checked").scalings))
    }

    pub fn orbit(&self, k: usize) -> Result<ZoomOrbit> {
        self.check(k)?;
        Ok(self.orbits.get(k).copied().unwrap_or_else(|| self.tail.as_ref().expect("checked").orbit))
    }

    /// Scalings of all computed levels.
    pub fn all_scalings(&self) -> &[Scalings] {
        &self.scalings
    }
}
