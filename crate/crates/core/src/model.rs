//! Disordered finite-range potentials and the configurations they act on.
//!
//! Inverse temperature is absorbed into the coupling constants: Boltzmann
//! weights are `exp(-H)` throughout the crate, so "J = 2" means `beta * J = 2`.
//!
//! All built-in models have Ising spins `{-1, +1}` and nearest-neighbour pair
//! terms plus (for the random-field model) single-site terms, so the range is
//! always 1. Disorder is site-indexed: random-coupling models store at site
//! `x` the tuple `(J_{x,e})_e` of couplings on the bonds pointing in the
//! positive lattice directions.

use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{bonds_touching, closure, Bond, Site, Volume};

pub type Spin = i8;

/// A single-site disorder value. Scalars for fields and occupations, tuples
/// for the couplings carried by a site.
#[derive(Clone, PartialEq)]
pub struct Symbol(Vec<f64>);

impl Symbol {
    pub fn scalar(v: f64) -> Self {
        Symbol(vec![v])
    }

    pub fn tuple(values: impl Into<Vec<f64>>) -> Self {
        Symbol(values.into())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self.0.as_slice() {
            [v] => Some(*v),
            _ => None,
        }
    }

    /// Same symbol with slot `slot` replaced.
    pub fn with_slot(&self, slot: usize, value: f64) -> Symbol {
        let mut v = self.0.clone();
        v[slot] = value;
        Symbol(v)
    }

    /// Componentwise order, used for monotonicity checks.
    pub fn le(&self, other: &Symbol) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_scalar() {
            Some(v) => write!(f, "{v}"),
            None => {
                write!(f, "(")?;
                for (i, v) in self.0.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.as_scalar() {
            Some(v) => s.serialize_f64(v),
            None => self.0.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Scalar(f64),
            Tuple(Vec<f64>),
        }
        match Raw::deserialize(d)? {
            Raw::Scalar(v) => Ok(Symbol::scalar(v)),
            Raw::Tuple(v) if !v.is_empty() => Ok(Symbol(v)),
            Raw::Tuple(_) => Err(de::Error::custom("empty disorder tuple")),
        }
    }
}

/// Values attached to every site of a region, stored in lattice order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteValues<T> {
    region: Volume,
    values: Vec<T>,
}

pub type SpinConfig = SiteValues<Spin>;
pub type DisorderConfig = SiteValues<Symbol>;

impl<T: Clone> SiteValues<T> {
    /// `values[i]` belongs to `region.sites()[i]`.
    pub fn new(region: Volume, values: Vec<T>) -> Result<Self> {
        if region.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a region of {} sites",
                values.len(),
                region.len()
            )));
        }
        Ok(SiteValues { region, values })
    }

    pub fn constant(region: &Volume, value: T) -> Self {
        SiteValues { values: vec![value; region.len()], region: region.clone() }
    }

    pub fn from_fn(region: &Volume, mut f: impl FnMut(&Site) -> T) -> Self {
        SiteValues { values: region.iter().map(&mut f).collect(), region: region.clone() }
    }

    pub fn region(&self) -> &Volume {
        &self.region
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, x: &Site) -> Option<&T> {
        self.region.index_of(x).map(|i| &self.values[i])
    }

    pub fn require(&self, x: &Site) -> Result<&T> {
        self.get(x).ok_or_else(|| Error::MissingSite(x.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, &T)> {
        self.region.iter().zip(&self.values)
    }

    /// Union of both regions; `other` wins where they overlap.
    pub fn overlay(&self, other: &SiteValues<T>) -> SiteValues<T> {
        let region = self.region.union(&other.region);
        let values = region
            .iter()
            .map(|s| other.get(s).or_else(|| self.get(s)).cloned().expect("site from union"))
            .collect();
        SiteValues { region, values }
    }

    pub fn with_site(&self, x: &Site, value: T) -> SiteValues<T> {
        self.overlay(&SiteValues { region: Volume::singleton(x.clone()), values: vec![value] })
    }

    /// Restriction to `sub`; every site of `sub` must be covered.
    pub fn restrict(&self, sub: &Volume) -> Result<SiteValues<T>> {
        let values = sub.iter().map(|s| self.require(s).cloned()).collect::<Result<_>>()?;
        Ok(SiteValues { region: sub.clone(), values })
    }

    pub fn without(&self, x: &Site) -> SiteValues<T> {
        let region = self.region.without(x);
        let values = region.iter().map(|s| self.get(s).cloned().expect("subset")).collect();
        SiteValues { region, values }
    }
}

impl SpinConfig {
    /// Decodes a bit-packed index: bit `i` set means site `i` (lattice order) is `+1`.
    pub fn from_index(region: &Volume, index: u64) -> SpinConfig {
        let values = (0..region.len()).map(|i| if index >> i & 1 == 1 { 1 } else { -1 }).collect();
        SiteValues { region: region.clone(), values }
    }

    pub fn index(&self) -> u64 {
        self.values
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &s)| if s > 0 { acc | 1 << i } else { acc })
    }

    pub fn validate(&self) -> Result<()> {
        match self.values.iter().find(|&&s| s != 1 && s != -1) {
            Some(s) => Err(Error::InvalidSymbol(format!("spin {s}"))),
            None => Ok(()),
        }
    }

    /// Sitewise `self <= other` on the common region.
    pub fn le(&self, other: &SpinConfig) -> bool {
        self.iter().all(|(s, a)| other.get(s).is_none_or(|b| a <= b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub spin: SpinConfig,
    pub disorder: DisorderConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelKind {
    Rfim { coupling: f64, field: f64 },
    RandomCoupling { alphabet: Vec<f64> },
    Grising { coupling: f64 },
}

impl ModelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Rfim { .. } => "rfim",
            ModelKind::RandomCoupling { .. } => "random_coupling",
            ModelKind::Grising { .. } => "grising",
        }
    }
}

/// A potential term: a single site or a nearest-neighbour bond.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Site(Site),
    Bond(Bond),
}

impl Term {
    pub fn sites(&self) -> Vec<Site> {
        match self {
            Term::Site(x) => vec![x.clone()],
            Term::Bond(b) => vec![b.base.clone(), b.head()],
        }
    }

    pub fn contains(&self, x: &Site) -> bool {
        match self {
            Term::Site(y) => y == x,
            Term::Bond(b) => b.contains(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderedPotential {
    dim: usize,
    kind: ModelKind,
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidParameter("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

impl DisorderedPotential {
    /// Random-field Ising model: `-J s_x s_y` on bonds, `-h eta_x s_x` on sites.
    /// `J = 0` or `h = 0` are accepted as degenerate limits.
    pub fn rfim(dim: usize, coupling: f64, field: f64) -> Result<Self> {
        check_dim(dim)?;
        check_nonnegative("J", coupling)?;
        check_nonnegative("h", field)?;
        Ok(DisorderedPotential { dim, kind: ModelKind::Rfim { coupling, field } })
    }

    /// Random nearest-neighbour couplings drawn from `alphabet`; a site symbol
    /// is the tuple of its `dim` forward couplings.
    pub fn random_coupling(dim: usize, alphabet: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if alphabet.is_empty() {
            return Err(Error::InvalidParameter("empty coupling alphabet".into()));
        }
        if let Some(v) = alphabet.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coupling {v}")));
        }
        let mut alphabet = alphabet.to_vec();
        alphabet.sort_by(f64::total_cmp);
        alphabet.dedup();
        Ok(DisorderedPotential { dim, kind: ModelKind::RandomCoupling { alphabet } })
    }

    /// Site-diluted ferromagnet: `-J eta_x s_x eta_y s_y` with occupations in `{0, 1}`.
    pub fn grising(dim: usize, coupling: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(coupling.is_finite() && coupling > 0.0) {
            return Err(Error::InvalidParameter(format!("J must be positive, got {coupling}")));
        }
        Ok(DisorderedPotential { dim, kind: ModelKind::Grising { coupling } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn range(&self) -> u32 {
        1
    }

    /// The single-site disorder alphabet, when it is determined by the model
    /// alone (tuples over the coupling alphabet, or `{0, 1}`).
    pub fn model_alphabet(&self) -> Option<Vec<Symbol>> {
        match &self.kind {
            ModelKind::Rfim { .. } => None,
            ModelKind::Grising { .. } => Some(vec![Symbol::scalar(0.0), Symbol::scalar(1.0)]),
            ModelKind::RandomCoupling { alphabet } => {
                let mut out = vec![Vec::new()];
                for _ in 0..self.dim {
                    out = out
                        .into_iter()
                        .flat_map(|prefix: Vec<f64>| {
                            alphabet.iter().map(move |&j| {
                                let mut p = prefix.clone();
                                p.push(j);
                                p
                            })
                        })
                        .collect();
                }
                Some(out.into_iter().map(Symbol).collect())
            }
        }
    }

    /// Whether the evaluator accepts `s` as a disorder value. Reference
    /// symbols outside the law's support are fine as long as this holds.
    pub fn accepts(&self, s: &Symbol) -> Result<()> {
        let ok = s.values().iter().all(|v| v.is_finite())
            && match &self.kind {
                ModelKind::Rfim { .. } => s.len() == 1,
                ModelKind::RandomCoupling { .. } => s.len() == self.dim,
                ModelKind::Grising { .. } => matches!(s.as_scalar(), Some(v) if v == 0.0 || v == 1.0),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSymbol(format!("{s} for model {}", self.kind.tag())))
        }
    }

    /// Terms `A` with `x in A`, site term first, then the bonds in
    /// [`bonds_touching`] order.
    pub fn terms_containing(&self, x: &Site) -> Vec<Term> {
        let mut out = Vec::with_capacity(2 * self.dim + 1);
        if matches!(self.kind, ModelKind::Rfim { .. }) {
            out.push(Term::Site(x.clone()));
        }
        out.extend(bonds_touching(x).into_iter().map(Term::Bond));
        out
    }

    /// Sites whose disorder value enters the energy of `term`.
    pub fn term_disorder_sites(&self, term: &Term) -> Vec<Site> {
        match (&self.kind, term) {
            (ModelKind::Rfim { .. }, Term::Site(x)) => vec![x.clone()],
            (ModelKind::Rfim { .. }, Term::Bond(_)) => vec![],
            (ModelKind::RandomCoupling { .. }, Term::Bond(b)) => vec![b.base.clone()],
            (ModelKind::Grising { .. }, Term::Bond(b)) => vec![b.base.clone(), b.head()],
            (_, Term::Site(_)) => vec![],
        }
    }

    /// Effective coupling of a bond, `-K s_x s_y`.
    pub fn bond_coupling(&self, bond: &Bond, dis: &dyn Fn(&Site) -> Result<Symbol>) -> Result<f64> {
        Ok(match &self.kind {
            ModelKind::Rfim { coupling, .. } => *coupling,
            ModelKind::RandomCoupling { .. } => {
                let s = dis(&bond.base)?;
                self.accepts(&s)?;
                s.values()[bond.axis]
            }
            ModelKind::Grising { coupling } => {
                let a = dis(&bond.base)?;
                let b = dis(&bond.head())?;
                self.accepts(&a)?;
                self.accepts(&b)?;
                coupling * a.values()[0] * b.values()[0]
            }
        })
    }

    /// Energy of a single term given spin and disorder lookups.
    pub fn term_energy(
        &self,
        term: &Term,
        spin: &dyn Fn(&Site) -> Result<Spin>,
        dis: &dyn Fn(&Site) -> Result<Symbol>,
    ) -> Result<f64> {
        match term {
            Term::Site(x) => match &self.kind {
                ModelKind::Rfim { field, .. } => {
                    let eta = dis(x)?;
                    self.accepts(&eta)?;
                    Ok(-field * eta.values()[0] * f64::from(spin(x)?))
                }
                _ => Ok(0.0),
            },
            Term::Bond(b) => {
                let k = self.bond_coupling(b, dis)?;
                Ok(-k * f64::from(spin(&b.base)?) * f64::from(spin(&b.head())?))
            }
        }
    }

    /// General evaluator `Phi_A(sigma_A, eta_A)`: the energy of the term with
    /// site set `a`, or zero when `a` is not a term of this potential.
    pub fn phi(&self, a: &[Site], spins: &[Spin], disorder: &[Symbol]) -> Result<f64> {
        if a.len() != spins.len() || a.len() != disorder.len() {
            return Err(Error::InvalidParameter("phi: site, spin and disorder lists differ in length".into()));
        }
        let mut sorted: Vec<Site> = a.to_vec();
        sorted.sort();
        sorted.dedup();
        let term = match sorted.as_slice() {
            [x] if matches!(self.kind, ModelKind::Rfim { .. }) => Term::Site(x.clone()),
            [x, y] => {
                let diff: Vec<i64> = y.coords().iter().zip(x.coords()).map(|(p, q)| p - q).collect();
                let axis = diff.iter().position(|&d| d == 1);
                match axis {
                    Some(ax) if diff.iter().filter(|&&d| d != 0).count() == 1 => {
                        Term::Bond(Bond { base: x.clone(), axis: ax })
                    }
                    _ => return Ok(0.0),
                }
            }
            _ => return Ok(0.0),
        };
        let lookup_spin = |s: &Site| -> Result<Spin> {
            a.iter().position(|t| t == s).map(|i| spins[i]).ok_or_else(|| Error::MissingSite(s.clone()))
        };
        let lookup_dis = |s: &Site| -> Result<Symbol> {
            a.iter()
                .position(|t| t == s)
                .map(|i| disorder[i].clone())
                .ok_or_else(|| Error::MissingSite(s.clone()))
        };
        self.term_energy(&term, &lookup_spin, &lookup_dis)
    }

    /// Terms meeting `lambda` in deterministic order. With `open` only terms
    /// inside `lambda` are kept (free boundary).
    pub fn terms_for_volume(&self, lambda: &Volume, open: bool) -> Vec<Term> {
        let mut out = Vec::new();
        for x in lambda {
            if matches!(self.kind, ModelKind::Rfim { .. }) {
                out.push(Term::Site(x.clone()));
            }
            for axis in 0..self.dim {
                let head = x.shifted(axis, 1);
                if !open || lambda.contains(&head) {
                    out.push(Term::Bond(Bond { base: x.clone(), axis }));
                }
            }
            if !open {
                for axis in 0..self.dim {
                    let tail = x.shifted(axis, -1);
                    if !lambda.contains(&tail) {
                        out.push(Term::Bond(Bond { base: tail, axis }));
                    }
                }
            }
        }
        out
    }

    /// Sites whose disorder enters the volume Hamiltonian of `lambda`.
    pub fn disorder_support(&self, lambda: &Volume, open: bool) -> Volume {
        let sites = self
            .terms_for_volume(lambda, open)
            .iter()
            .flat_map(|t| self.term_disorder_sites(t))
            .collect::<Vec<_>>();
        Volume::new(lambda.dim(), sites).expect("sites share the volume dimension")
    }

    /// Spin sites the single-site disorder variation at `x` depends on.
    pub fn delta_h_support(&self, x: &Site) -> Vec<Site> {
        let mut out: Vec<Site> = self
            .terms_containing(x)
            .into_iter()
            .filter(|t| self.term_disorder_sites(t).contains(x))
            .flat_map(|t| t.sites())
            .collect();
        out.push(x.clone());
        out.sort();
        out.dedup();
        out
    }

    /// `sum_{A ∩ lambda ≠ ∅} Phi_A(sigma_lambda sigma_bc, eta)`. `boundary = None`
    /// means free boundary (terms leaving `lambda` dropped).
    pub fn hamiltonian_in_volume(
        &self,
        lambda: &Volume,
        sigma: &SpinConfig,
        boundary: Option<&SpinConfig>,
        eta: &DisorderConfig,
    ) -> Result<f64> {
        let spin = |s: &Site| -> Result<Spin> {
            if let Some(v) = sigma.get(s).filter(|_| lambda.contains(s)) {
                return Ok(*v);
            }
            boundary.and_then(|b| b.get(s)).copied().ok_or_else(|| Error::MissingSite(s.clone()))
        };
        let dis = |s: &Site| eta.require(s).cloned();
        self.terms_for_volume(lambda, boundary.is_none())
            .iter()
            .try_fold(0.0, |acc, t| Ok(acc + self.term_energy(t, &spin, &dis)?))
    }

    /// Single-site disorder variation
    /// `sum_{A ∋ x} [Phi_A(sigma, eta_x eta_∂x) - Phi_A(sigma, eta_ref eta_∂x)]`.
    /// `sigma` must cover the closure of `x`, `eta` the boundary of `x`
    /// (its value at `x`, if any, is ignored).
    pub fn delta_h_x(
        &self,
        x: &Site,
        sigma: &SpinConfig,
        eta_x: &Symbol,
        eta_ref: &Symbol,
        eta: &DisorderConfig,
    ) -> Result<f64> {
        self.delta_h_terms(&self.terms_containing(x), x, &|s| sigma.require(s).copied(), eta_x, eta_ref, eta)
    }

    /// Same variation restricted to the terms of the volume Hamiltonian of
    /// `lambda` (relevant when `x` sits next to a free boundary).
    #[allow(clippy::too_many_arguments)]
    pub fn delta_h_in_volume(
        &self,
        lambda: &Volume,
        open: bool,
        x: &Site,
        spin: &dyn Fn(&Site) -> Result<Spin>,
        eta_x: &Symbol,
        eta_ref: &Symbol,
        eta: &DisorderConfig,
    ) -> Result<f64> {
        let terms: Vec<Term> = self
            .terms_containing(x)
            .into_iter()
            .filter(|t| !open || t.sites().iter().all(|s| lambda.contains(s)))
            .collect();
        self.delta_h_terms(&terms, x, spin, eta_x, eta_ref, eta)
    }

    fn delta_h_terms(
        &self,
        terms: &[Term],
        x: &Site,
        spin: &dyn Fn(&Site) -> Result<Spin>,
        eta_x: &Symbol,
        eta_ref: &Symbol,
        eta: &DisorderConfig,
    ) -> Result<f64> {
        self.accepts(eta_x)?;
        self.accepts(eta_ref)?;
        let with = |v: &Symbol| {
            let v = v.clone();
            move |s: &Site| -> Result<Symbol> {
                if s == x {
                    Ok(v.clone())
                } else {
                    eta.require(s).cloned()
                }
            }
        };
        let dis_x = with(eta_x);
        let dis_ref = with(eta_ref);
        let mut total = 0.0;
        for t in terms {
            if !self.term_disorder_sites(t).contains(x) {
                continue;
            }
            total += self.term_energy(t, spin, &dis_x)? - self.term_energy(t, spin, &dis_ref)?;
        }
        Ok(total)
    }

    /// The region a spin configuration must cover for `delta_h_x` at `x`.
    pub fn delta_h_domain(&self, x: &Site) -> Volume {
        closure(&Volume::singleton(x.clone()), self.range()).expect("nonempty singleton")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(c: &[i64]) -> Site {
        Site::new(c.to_vec())
    }

    #[test]
    fn rfim_term_values() {
        let p = DisorderedPotential::rfim(1, 1.0, 0.5).unwrap();
        let e = p.phi(&[s(&[0]), s(&[1])], &[1, 1], &[Symbol::scalar(1.0), Symbol::scalar(1.0)]).unwrap();
        assert_eq!(e, -1.0);
        let e = p.phi(&[s(&[0])], &[1], &[Symbol::scalar(-1.0)]).unwrap();
        assert_eq!(e, 0.5);
        let zero_field = DisorderedPotential::rfim(1, 1.0, 0.0).unwrap();
        assert_eq!(zero_field.phi(&[s(&[0])], &[1], &[Symbol::scalar(-1.0)]).unwrap(), 0.0);
        // non-adjacent pairs are not terms
        let e = p.phi(&[s(&[0]), s(&[2])], &[1, 1], &[Symbol::scalar(1.0), Symbol::scalar(1.0)]).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DisorderedPotential::rfim(2, -1.0, 1.0).is_err());
        assert!(DisorderedPotential::rfim(2, 1.0, f64::NAN).is_err());
        assert!(DisorderedPotential::random_coupling(2, &[]).is_err());
        assert!(DisorderedPotential::grising(2, 0.0).is_err());
        assert!(DisorderedPotential::grising(2, -1.5).is_err());
    }

    #[test]
    fn coupling_alphabet_sizes() {
        let p = DisorderedPotential::random_coupling(3, &[0.5, 2.0]).unwrap();
        let h0 = p.model_alphabet().unwrap();
        assert_eq!(h0.len(), 8);
        // joint alphabet: two spin values times the disorder alphabet
        assert_eq!(2 * h0.len(), 16);
    }

    #[test]
    fn coupling_pair_term() {
        let p = DisorderedPotential::random_coupling(1, &[2.0]).unwrap();
        let e = p.phi(&[s(&[0]), s(&[1])], &[1, -1], &[Symbol::tuple([2.0]), Symbol::tuple([2.0])]).unwrap();
        assert_eq!(e, 2.0);
        let zero = DisorderedPotential::random_coupling(2, &[0.0]).unwrap();
        let lam = Volume::cube(2, 0, 1);
        let sigma = SpinConfig::constant(&lam, 1);
        let eta = DisorderConfig::constant(&closure(&lam, 1).unwrap(), Symbol::tuple([0.0, 0.0]));
        let bc = SpinConfig::constant(&crate::lattice::r_boundary(&lam, 1).unwrap(), -1);
        assert_eq!(zero.hamiltonian_in_volume(&lam, &sigma, Some(&bc), &eta).unwrap(), 0.0);
    }

    #[test]
    fn grising_terms() {
        let p = DisorderedPotential::grising(2, 1.5).unwrap();
        let pair = [s(&[0, 0]), s(&[0, 1])];
        let occ = |a: f64, b: f64| [Symbol::scalar(a), Symbol::scalar(b)];
        assert_eq!(p.phi(&pair, &[1, 1], &occ(0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(p.phi(&pair, &[1, 1], &occ(1.0, 1.0)).unwrap(), -1.5);
        assert!(p.phi(&pair, &[1, 1], &occ(0.5, 1.0)).is_err());
    }

    #[test]
    fn two_site_chain_energy() {
        let p = DisorderedPotential::rfim(1, 1.0, 1.0).unwrap();
        let lam = Volume::cube(1, 0, 1);
        let sigma = SpinConfig::constant(&lam, 1);
        let bc = SpinConfig::constant(&crate::lattice::r_boundary(&lam, 1).unwrap(), 1);
        let eta = DisorderConfig::constant(&closure(&lam, 1).unwrap(), Symbol::scalar(1.0));
        let h = p.hamiltonian_in_volume(&lam, &sigma, Some(&bc), &eta).unwrap();
        assert_eq!(h, -5.0);
        let open = p.hamiltonian_in_volume(&lam, &sigma, None, &eta).unwrap();
        assert_eq!(open, -3.0);
    }

    #[test]
    fn missing_site_is_named() {
        let p = DisorderedPotential::rfim(1, 1.0, 1.0).unwrap();
        let lam = Volume::cube(1, 0, 1);
        let sigma = SpinConfig::constant(&lam, 1);
        let bc = SpinConfig::constant(&Volume::singleton(s(&[-1])), 1);
        let eta = DisorderConfig::constant(&lam, Symbol::scalar(1.0));
        match p.hamiltonian_in_volume(&lam, &sigma, Some(&bc), &eta) {
            Err(Error::MissingSite(x)) => assert_eq!(x, s(&[2])),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rfim_delta_h_examples() {
        let p = DisorderedPotential::rfim(2, 1.0, 0.5).unwrap();
        let x = s(&[0, 0]);
        let sigma = SpinConfig::constant(&p.delta_h_domain(&x), 1);
        let eta = DisorderConfig::constant(&p.delta_h_domain(&x), Symbol::scalar(1.0));
        let d = p.delta_h_x(&x, &sigma, &Symbol::scalar(-1.0), &Symbol::scalar(1.0), &eta).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let z = p.delta_h_x(&x, &sigma, &Symbol::scalar(1.0), &Symbol::scalar(1.0), &eta).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn coupling_delta_h_single_slot() {
        let p = DisorderedPotential::random_coupling(2, &[1.0, 2.0]).unwrap();
        let x = s(&[0, 0]);
        let dom = p.delta_h_domain(&x);
        let sigma = SpinConfig::constant(&dom, 1);
        let eta = DisorderConfig::constant(&dom, Symbol::tuple([1.0, 1.0]));
        let d = p
            .delta_h_x(&x, &sigma, &Symbol::tuple([1.0, 1.0]), &Symbol::tuple([1.0, 2.0]), &eta)
            .unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn delta_h_supports() {
        let x = s(&[0, 0]);
        assert_eq!(DisorderedPotential::rfim(2, 1.0, 1.0).unwrap().delta_h_support(&x), vec![x.clone()]);
        assert_eq!(DisorderedPotential::random_coupling(2, &[1.0]).unwrap().delta_h_support(&x).len(), 3);
        assert_eq!(DisorderedPotential::grising(2, 1.0).unwrap().delta_h_support(&x).len(), 5);
    }

    #[test]
    fn symbol_serialization() {
        assert_eq!(serde_json::to_string(&Symbol::scalar(-1.0)).unwrap(), "-1.0");
        assert_eq!(serde_json::to_string(&Symbol::tuple([1.0, 0.0])).unwrap(), "[1.0,0.0]");
        let back: Symbol = serde_json::from_str("[1.0,0.0]").unwrap();
        assert_eq!(back, Symbol::tuple([1.0, 0.0]));
    }
}
