//! Finite pieces of the hypercubic lattice Z^d.
//!
//! Volumes are explicit, lexicographically sorted site lists. Every table in
//! the crate (spin enumeration indices, disorder enumeration, Monte Carlo
//! sweeps) indexes sites in this order, so two equal volumes always produce
//! identical layouts.
//!
//! Distances use the max-metric by default, which makes nearest-neighbour
//! potentials range 1 and gives a single site the full 3^d - 1 boundary.
//! [`Metric::Manhattan`] is available through the `*_with` variants.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// `self + step * e_axis`.
    pub fn shifted(&self, axis: usize, step: i64) -> Site {
        let mut c = self.0.clone();
        c[axis] += step;
        Site(c)
    }

    /// The 2d nearest neighbours, in lattice order.
    pub fn neighbors(&self) -> Vec<Site> {
        let mut out: Vec<Site> = (0..self.dim())
            .flat_map(|a| [self.shifted(a, -1), self.shifted(a, 1)])
            .collect();
        out.sort();
        out
    }

    pub fn distance(&self, other: &Site, metric: Metric) -> i64 {
        let diffs = self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs());
        match metric {
            Metric::Max => diffs.max().unwrap_or(0),
            Metric::Manhattan => diffs.sum(),
        }
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Max,
    Manhattan,
}

/// The nearest-neighbour pair `<base, base + e_axis>`; `axis` is 0-based.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub base: Site,
    pub axis: usize,
}

impl Bond {
    pub fn new(base: Site, axis: usize) -> Result<Self> {
        if axis >= base.dim() {
            return Err(Error::Geometry(format!(
                "bond direction {axis} out of range for dimension {}",
                base.dim()
            )));
        }
        Ok(Bond { base, axis })
    }

    pub fn head(&self) -> Site {
        self.base.shifted(self.axis, 1)
    }

    pub fn endpoints(&self) -> (Site, Site) {
        (self.base.clone(), self.head())
    }

    pub fn contains(&self, x: &Site) -> bool {
        *x == self.base || *x == self.head()
    }
}

impl fmt::Display for Bond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", self.base, self.head())
    }
}

/// The 2d bonds incident to `x`: `(x, e)` for every axis, then `(x - e, e)`.
pub fn bonds_touching(x: &Site) -> Vec<Bond> {
    let d = x.dim();
    let forward = (0..d).map(|a| Bond { base: x.clone(), axis: a });
    let backward = (0..d).map(|a| Bond { base: x.shifted(a, -1), axis: a });
    forward.chain(backward).collect()
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Volume {
    dim: usize,
    sites: Vec<Site>,
}

impl fmt::Debug for Volume {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Volume(d={}, {:?})", self.dim, self.sites)
    }
}

impl Volume {
    /// Sorts and deduplicates `sites`; every site must have dimension `dim`.
    pub fn new(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let mut sites: Vec<Site> = sites.into_iter().collect();
        if let Some(bad) = sites.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
        }
        sites.sort();
        sites.dedup();
        Ok(Volume { dim, sites })
    }

    pub fn empty(dim: usize) -> Self {
        Volume { dim, sites: Vec::new() }
    }

    pub fn singleton(x: Site) -> Self {
        Volume { dim: x.dim(), sites: vec![x] }
    }

    /// The cube `[lo..hi]^dim` (inclusive).
    pub fn cube(dim: usize, lo: i64, hi: i64) -> Self {
        Self::cuboid(&vec![lo; dim], &vec![hi; dim])
    }

    /// The cube of side `side` whose lower corner is `-(side - 1) / 2`, so
    /// odd sides are centred at the origin.
    pub fn centered_cube(dim: usize, side: usize) -> Self {
        let side = side as i64;
        let lo = -(side - 1) / 2;
        Self::cube(dim, lo, lo + side - 1)
    }

    /// The box `prod_i [lo_i..hi_i]`; empty if any `hi_i < lo_i`.
    pub fn cuboid(lo: &[i64], hi: &[i64]) -> Self {
        let dim = lo.len();
        assert_eq!(dim, hi.len(), "corner dimensions differ");
        if lo.iter().zip(hi).any(|(l, h)| h < l) {
            return Volume::empty(dim);
        }
        let mut sites = Vec::new();
        let mut cur = lo.to_vec();
        loop {
            sites.push(Site(cur.clone()));
            // lexicographic odometer, last coordinate fastest
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return Volume { dim, sites };
                }
                axis -= 1;
                if cur[axis] < hi[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = lo[axis];
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Site> {
        self.sites.iter()
    }

    pub fn index_of(&self, x: &Site) -> Option<usize> {
        self.sites.binary_search(x).ok()
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.index_of(x).is_some()
    }

    pub fn is_subset(&self, other: &Volume) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    pub fn union(&self, other: &Volume) -> Volume {
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().cloned());
        sites.sort();
        sites.dedup();
        Volume { dim: self.dim, sites }
    }

    pub fn difference(&self, other: &Volume) -> Volume {
        Volume {
            dim: self.dim,
            sites: self.sites.iter().filter(|s| !other.contains(s)).cloned().collect(),
        }
    }

    pub fn intersection(&self, other: &Volume) -> Volume {
        Volume {
            dim: self.dim,
            sites: self.sites.iter().filter(|s| other.contains(s)).cloned().collect(),
        }
    }

    pub fn without(&self, x: &Site) -> Volume {
        Volume {
            dim: self.dim,
            sites: self.sites.iter().filter(|s| *s != x).cloned().collect(),
        }
    }

    /// Max-metric distance from `x` to the volume.
    pub fn distance_to(&self, x: &Site, metric: Metric) -> Option<i64> {
        self.sites.iter().map(|s| s.distance(x, metric)).min()
    }

    /// Bounding box corners, `None` when empty.
    pub fn bounds(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let first = self.sites.first()?;
        let mut lo = first.0.clone();
        let mut hi = first.0.clone();
        for s in &self.sites {
            for a in 0..self.dim {
                lo[a] = lo[a].min(s.0[a]);
                hi[a] = hi[a].max(s.0[a]);
            }
        }
        Some((lo, hi))
    }

    /// True when the volume is exactly its bounding box.
    pub fn is_box(&self) -> bool {
        match self.bounds() {
            None => false,
            Some((lo, hi)) => {
                let n: i64 = lo.iter().zip(&hi).map(|(l, h)| h - l + 1).product();
                n as usize == self.len()
            }
        }
    }

    /// Nearest-neighbour bonds with both endpoints inside the volume.
    pub fn internal_bonds(&self) -> Vec<Bond> {
        let mut out = Vec::new();
        for s in &self.sites {
            for axis in 0..self.dim {
                if self.contains(&s.shifted(axis, 1)) {
                    out.push(Bond { base: s.clone(), axis });
                }
            }
        }
        out
    }

    /// Parses `"box: [lo..hi]^d"` or a JSON array of coordinate vectors.
    pub fn parse_literal(text: &str) -> Result<Volume> {
        let t = text.trim();
        if let Some(rest) = t.strip_prefix("box:") {
            let bad = || Error::InvalidParameter(format!("malformed box literal `{t}`"));
            let rest = rest.trim();
            let (range, dim) = rest.split_once('^').ok_or_else(bad)?;
            let dim: usize = dim.trim().parse().map_err(|_| bad())?;
            let inner = range.trim().strip_prefix('[').and_then(|r| r.strip_suffix(']')).ok_or_else(bad)?;
            let (lo, hi) = inner.split_once("..").ok_or_else(bad)?;
            let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
            if dim == 0 {
                return Err(bad());
            }
            return Ok(Volume::cube(dim, lo, hi));
        }
        let coords: Vec<Vec<i64>> = serde_json::from_str(t)
            .map_err(|e| Error::InvalidParameter(format!("volume literal `{t}`: {e}")))?;
        let dim = coords
            .first()
            .map(|c| c.len())
            .ok_or_else(|| Error::InvalidParameter("explicit volume literal is empty".into()))?;
        Volume::new(dim, coords.into_iter().map(Site))
    }
}

impl<'a> IntoIterator for &'a Volume {
    type Item = &'a Site;
    type IntoIter = std::slice::Iter<'a, Site>;
    fn into_iter(self) -> Self::IntoIter {
        self.sites.iter()
    }
}

/// All sites `y` with `0 < distance(x, y) <= r` together with `x` itself.
fn ball(x: &Site, r: i64, metric: Metric) -> Vec<Site> {
    let lo: Vec<i64> = x.0.iter().map(|c| c - r).collect();
    let hi: Vec<i64> = x.0.iter().map(|c| c + r).collect();
    Volume::cuboid(&lo, &hi)
        .sites
        .into_iter()
        .filter(|y| y.distance(x, metric) <= r)
        .collect()
}

fn require_nonempty(b: &Volume) -> Result<()> {
    if b.is_empty() {
        Err(Error::EmptyVolume)
    } else {
        Ok(())
    }
}

/// `{x not in B : d(x, B) <= r}`.
pub fn r_boundary(b: &Volume, r: u32) -> Result<Volume> {
    r_boundary_with(b, r, Metric::Max)
}

pub fn r_boundary_with(b: &Volume, r: u32, metric: Metric) -> Result<Volume> {
    require_nonempty(b)?;
    let mut out = BTreeSet::new();
    for x in b {
        for y in ball(x, r as i64, metric) {
            if !b.contains(&y) {
                out.insert(y);
            }
        }
    }
    Ok(Volume { dim: b.dim, sites: out.into_iter().collect() })
}

/// `B ∪ ∂B`.
pub fn closure(b: &Volume, r: u32) -> Result<Volume> {
    Ok(b.union(&r_boundary(b, r)?))
}

pub fn closure_with(b: &Volume, r: u32, metric: Metric) -> Result<Volume> {
    Ok(b.union(&r_boundary_with(b, r, metric)?))
}

/// `{x in B : d(x, B^c) <= r}`.
pub fn inner_boundary(b: &Volume, r: u32) -> Result<Volume> {
    inner_boundary_with(b, r, Metric::Max)
}

pub fn inner_boundary_with(b: &Volume, r: u32, metric: Metric) -> Result<Volume> {
    require_nonempty(b)?;
    let sites = b
        .sites
        .iter()
        .filter(|x| ball(x, r as i64, metric).iter().any(|y| !b.contains(y)))
        .cloned()
        .collect();
    Ok(Volume { dim: b.dim, sites })
}

/// `B \ ∂_-B`.
pub fn interior(b: &Volume, r: u32) -> Result<Volume> {
    interior_with(b, r, Metric::Max)
}

pub fn interior_with(b: &Volume, r: u32, metric: Metric) -> Result<Volume> {
    Ok(b.difference(&inner_boundary_with(b, r, metric)?))
}

/// `outer \ inner`, requiring `inner ⊆ outer`.
pub fn annulus(outer: &Volume, inner: &Volume) -> Result<Volume> {
    if let Some(stray) = inner.iter().find(|s| !outer.contains(s)) {
        return Err(Error::NotContained(stray.clone()));
    }
    Ok(outer.difference(inner))
}

/// `B` enlarged by all sites within distance `w` (the r-closure with r = w).
pub fn grow(b: &Volume, w: u32) -> Result<Volume> {
    if w == 0 {
        return Ok(b.clone());
    }
    closure(b, w)
}
