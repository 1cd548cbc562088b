//! Clusters of the interaction graph and checks that finite clusters screen
//! off the disorder outside them.

use serde::Serialize;

use crate::disorder::{ProductLaw, SingleSiteLaw};
use crate::error::{Error, Result};
use crate::gibbs::{BoundaryCondition, ExactGibbs};
use crate::lattice::{bonds_touching, closure, inner_boundary, Bond, Site, Volume};
use crate::model::{DisorderConfig, DisorderedPotential, Symbol, Term};

use super::{delta_expectation, par_map};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterStatus {
    /// The cluster and every site whose disorder enters a term touching it.
    Finite { sites: Volume, disorder_domain: Volume },
    /// The cluster reaches the edge of the window and may percolate.
    ReachesEdge,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecouplingReport {
    pub window: Volume,
    pub clusters: Vec<(Site, ClusterStatus)>,
}

impl DecouplingReport {
    pub fn status(&self, x: &Site) -> Option<&ClusterStatus> {
        self.clusters.iter().find(|(s, _)| s == x).map(|(_, c)| c)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn active(pot: &DisorderedPotential, bond: &Bond, eta: &DisorderConfig) -> Result<bool> {
    Ok(pot.bond_coupling(bond, &|s: &Site| eta.require(s).cloned())? != 0.0)
}

/// Connected components of the graph of bonds with nonzero coupling inside
/// `window`. The cluster of `x` also follows the bonds at `x` that some
/// symbol of `alphabet` at `x` would switch on.
pub fn decoupling_detect(
    pot: &DisorderedPotential,
    eta: &DisorderConfig,
    window: &Volume,
    alphabet: &[Symbol],
) -> Result<DecouplingReport> {
    let n = window.len();
    let mut uf = UnionFind::new(n);
    let bonds = window.internal_bonds();
    for b in &bonds {
        if active(pot, b, eta)? {
            let (p, q) = b.endpoints();
            uf.union(window.index_of(&p).expect("inside"), window.index_of(&q).expect("inside"));
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
    let edge = inner_boundary(window, 1)?;
    let mut clusters = Vec::with_capacity(n);
    for (i, x) in window.iter().enumerate() {
        let mut members = vec![roots[i]];
        for b in bonds_touching(x) {
            let (p, q) = b.endpoints();
            let y = if &p == x { q } else { p };
            let Some(j) = window.index_of(&y) else { continue };
            let varies = pot.term_disorder_sites(&Term::Bond(b.clone())).contains(x);
            let mut on = active(pot, &b, eta)?;
            if varies {
                for s in alphabet {
                    on |= active(pot, &b, &eta.with_site(x, s.clone()))?;
                }
            }
            if on {
                members.push(roots[j]);
            }
        }
        let sites: Vec<Site> = (0..n).filter(|k| members.contains(&roots[*k])).map(|k| window.sites()[k].clone()).collect();
        let sites = Volume::new(window.dim(), sites)?;
        let status = if sites.iter().any(|s| edge.contains(s)) {
            ClusterStatus::ReachesEdge
        } else {
            let mut domain: Vec<Site> = sites.sites().to_vec();
            for s in sites.iter() {
                for t in pot.terms_containing(s) {
                    domain.extend(pot.term_disorder_sites(&t));
                }
            }
            ClusterStatus::Finite { disorder_domain: Volume::new(window.dim(), domain)?, sites }
        };
        clusters.push((x.clone(), status));
    }
    Ok(DecouplingReport { window: window.clone(), clusters })
}

/// Largest deviation between `mu^{open}_{cluster}[eta](exp(ΔH_x(eta1, eta2)))`
/// and the same expectation in the whole window after redrawing the disorder
/// outside the cluster's disorder domain (`trials` times, plus `eta` itself).
#[allow(clippy::too_many_arguments)]
pub fn verify_decoupling(
    pot: &DisorderedPotential,
    law: &SingleSiteLaw,
    eta: &DisorderConfig,
    window: &Volume,
    bc: &BoundaryCondition,
    x: &Site,
    status: &ClusterStatus,
    eta1: &Symbol,
    eta2: &Symbol,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let ClusterStatus::Finite { sites, disorder_domain } = status else {
        return Err(Error::Geometry(format!("cluster of {x} reaches the window edge")));
    };
    let at_x = |e: &DisorderConfig| e.with_site(x, eta1.clone());
    let reference = ExactGibbs::new(pot, sites, &BoundaryCondition::Open, &at_x(eta))?.exp_delta_h(x, eta1, eta2, 1.0)?;
    let outside = closure(window, 1)?.difference(disorder_domain);
    let kept = eta.restrict(&disorder_domain.intersection(eta.region()))?;
    let mut variants = vec![eta.clone()];
    variants.extend(ProductLaw::new(outside, law.clone()).sample(seed, trials).into_iter().map(|t| t.overlay(&kept)));
    let values = par_map(&variants, |e| delta_expectation(pot, window, bc, &at_x(e), x, eta1, eta2, 1.0))?;
    Ok(values.iter().map(|v| (v - reference).abs()).fold(0.0, f64::max))
}
