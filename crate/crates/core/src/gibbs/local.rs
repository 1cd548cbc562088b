//! A volume Hamiltonian compiled to index form: unary and pair energy tables
//! over the sites of the volume, with boundary spins already substituted.

use crate::error::{Error, Result};
use crate::lattice::{r_boundary, Site, Volume};
use crate::model::{DisorderConfig, DisorderedPotential, Spin, SpinConfig};

use super::BoundaryCondition;

/// Energy tables use spin index `0` for `-1` and `1` for `+1`; a pair table
/// is indexed `s_i + 2 s_j` with `i < j`.
#[derive(Clone, Debug)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub energy: [f64; 4],
}

#[derive(Clone, Debug)]
pub struct LocalHamiltonian {
    volume: Volume,
    open: bool,
    boundary: Option<SpinConfig>,
    unary: Vec<[f64; 2]>,
    pairs: Vec<Pair>,
    constant: f64,
    neighbors: Vec<Vec<(usize, usize)>>,
}

pub fn spin_value(bit: usize) -> Spin {
    if bit == 1 {
        1
    } else {
        -1
    }
}

pub fn spin_bit(s: Spin) -> usize {
    usize::from(s > 0)
}

impl LocalHamiltonian {
    pub fn compile(
        pot: &DisorderedPotential,
        lambda: &Volume,
        bc: &BoundaryCondition,
        eta: &DisorderConfig,
    ) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::EmptyVolume);
        }
        if lambda.dim() != pot.dim() {
            return Err(Error::DimensionMismatch { expected: pot.dim(), got: lambda.dim() });
        }
        let boundary = bc.boundary_spins(lambda)?;
        let open = boundary.is_none();
        let n = lambda.len();
        let mut unary = vec![[0.0; 2]; n];
        let mut pairs: Vec<Pair> = Vec::new();
        let mut constant = 0.0;
        let dis = |s: &Site| eta.require(s).cloned();
        for term in pot.terms_for_volume(lambda, open) {
            let sites = term.sites();
            let inner: Vec<usize> = sites.iter().filter_map(|s| lambda.index_of(s)).collect();
            let energy_at = |assign: &[Spin]| -> Result<f64> {
                let spin = |s: &Site| -> Result<Spin> {
                    if let Some(i) = lambda.index_of(s) {
                        let k = inner.iter().position(|&j| j == i).expect("inner site");
                        return Ok(assign[k]);
                    }
                    boundary.as_ref().and_then(|b| b.get(s)).copied().ok_or_else(|| Error::MissingSite(s.clone()))
                };
                pot.term_energy(&term, &spin, &dis)
            };
            match inner.as_slice() {
                [] => constant += energy_at(&[])?,
                [i] => {
                    for (b, u) in unary[*i].iter_mut().enumerate() {
                        *u += energy_at(&[spin_value(b)])?;
                    }
                }
                [a, b] => {
                    let (i, j, swap) = if a < b { (*a, *b, false) } else { (*b, *a, true) };
                    let mut energy = [0.0; 4];
                    for (k, e) in energy.iter_mut().enumerate() {
                        let (si, sj) = (spin_value(k & 1), spin_value(k >> 1));
                        *e = if swap { energy_at(&[sj, si])? } else { energy_at(&[si, sj])? };
                    }
                    pairs.push(Pair { i, j, energy });
                }
                _ => return Err(Error::Model(format!("term {term:?} has more than two sites"))),
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for (p, pair) in pairs.iter().enumerate() {
            neighbors[pair.i].push((pair.j, p));
            neighbors[pair.j].push((pair.i, p));
        }
        Ok(LocalHamiltonian { volume: lambda.clone(), open, boundary, unary, pairs, constant, neighbors })
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn len(&self) -> usize {
        self.unary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty()
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    /// Boundary spins substituted at compile time (`None` for free boundary).
    pub fn boundary(&self) -> Option<&SpinConfig> {
        self.boundary.as_ref()
    }

    pub fn unary(&self) -> &[[f64; 2]] {
        &self.unary
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `(other site, pair index)` for every pair containing `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.neighbors[i]
    }

    /// Energy of the bit-packed configuration `index`.
    pub fn energy(&self, index: u64) -> f64 {
        let bit = |i: usize| (index >> i & 1) as usize;
        let mut e = self.constant;
        for (i, u) in self.unary.iter().enumerate() {
            e += u[bit(i)];
        }
        for p in &self.pairs {
            e += p.energy[bit(p.i) + 2 * bit(p.j)];
        }
        e
    }

    /// `E(s_i = +1) - E(s_i = -1)` with all other spins as in `spins`.
    pub fn flip_gap(&self, i: usize, spins: &[Spin]) -> f64 {
        let mut d = self.unary[i][1] - self.unary[i][0];
        for &(j, p) in &self.neighbors[i] {
            let pair = &self.pairs[p];
            let sj = spin_bit(spins[j]);
            if pair.i == i {
                d += pair.energy[1 + 2 * sj] - pair.energy[2 * sj];
            } else {
                d += pair.energy[sj + 2] - pair.energy[sj];
            }
        }
        d
    }
}

/// The spins a fixed boundary condition puts on the boundary of `lambda`.
pub(crate) fn fixed_boundary(lambda: &Volume, bc: &BoundaryCondition) -> Result<Option<SpinConfig>> {
    let boundary = r_boundary(lambda, 1)?;
    match bc {
        BoundaryCondition::Open => Ok(None),
        BoundaryCondition::Plus => Ok(Some(SpinConfig::constant(&boundary, 1))),
        BoundaryCondition::Minus => Ok(Some(SpinConfig::constant(&boundary, -1))),
        BoundaryCondition::Fixed(cfg) => {
            cfg.validate()?;
            Ok(Some(cfg.restrict(&boundary)?))
        }
    }
}
