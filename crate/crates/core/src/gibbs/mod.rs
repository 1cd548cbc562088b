//! Finite-volume Gibbs measures `mu_Λ^{bc}[eta]`.
//!
//! Three exact engines share one compiled Hamiltonian ([`LocalHamiltonian`]):
//! the full weight table ([`exact_gibbs`], log domain, up to 2^26 spin
//! configurations), the site-by-site elimination ([`ExactGibbs`], any volume
//! with a moderate frontier) and the one-dimensional transfer matrix
//! ([`transfer_matrix_1d`]).

pub mod local;
pub mod sweep;
pub mod transfer;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Site, Volume};
use crate::model::{DisorderConfig, DisorderedPotential, Spin, SpinConfig, Symbol};

pub use local::LocalHamiltonian;
pub use sweep::{sweep, SweepResult};
pub use transfer::{transfer_matrix_1d, ChainMarginals};

use local::{spin_bit, spin_value};

pub const DEFAULT_TABLE_CAP: f64 = (1u64 << 26) as f64;

/// Boundary condition on the range-1 boundary of the volume. `Open` drops
/// every term that leaves the volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Fixed(SpinConfig),
    Plus,
    Minus,
    Open,
}

impl BoundaryCondition {
    pub fn boundary_spins(&self, lambda: &Volume) -> Result<Option<SpinConfig>> {
        local::fixed_boundary(lambda, self)
    }

    pub fn is_open(&self) -> bool {
        matches!(self, BoundaryCondition::Open)
    }

    pub fn label(&self) -> &'static str {
        match self {
            BoundaryCondition::Fixed(_) => "fixed",
            BoundaryCondition::Plus => "plus",
            BoundaryCondition::Minus => "minus",
            BoundaryCondition::Open => "open",
        }
    }
}

/// The full normalized weight table of a finite-volume Gibbs measure.
/// Index bit `i` set means site `i` of the volume (lattice order) is `+1`.
#[derive(Clone, Debug)]
pub struct GibbsTable {
    volume: Volume,
    bc: BoundaryCondition,
    eta: DisorderConfig,
    log_weights: Vec<f64>,
    log_z: f64,
}

pub fn exact_gibbs(
    pot: &DisorderedPotential,
    lambda: &Volume,
    bc: &BoundaryCondition,
    eta: &DisorderConfig,
) -> Result<GibbsTable> {
    exact_gibbs_capped(pot, lambda, bc, eta, DEFAULT_TABLE_CAP)
}

pub fn exact_gibbs_capped(
    pot: &DisorderedPotential,
    lambda: &Volume,
    bc: &BoundaryCondition,
    eta: &DisorderConfig,
    cap: f64,
) -> Result<GibbsTable> {
    let count = 2f64.powi(lambda.len() as i32);
    if count > cap {
        return Err(Error::Infeasible {
            what: "Gibbs table",
            count,
            cap,
            advice: "use the sweep engine, the transfer matrix (d = 1) or Monte Carlo",
        });
    }
    let h = LocalHamiltonian::compile(pot, lambda, bc, eta)?;
    let log_weights: Vec<f64> = (0..1u64 << lambda.len()).into_par_iter().map(|idx| -h.energy(idx)).collect();
    let log_z = log_sum_exp(&log_weights);
    Ok(GibbsTable { volume: lambda.clone(), bc: bc.clone(), eta: eta.clone(), log_weights, log_z })
}

pub fn log_partition(
    pot: &DisorderedPotential,
    lambda: &Volume,
    bc: &BoundaryCondition,
    eta: &DisorderConfig,
) -> Result<f64> {
    Ok(exact_gibbs(pot, lambda, bc, eta)?.log_z)
}

/// `log sum exp`, reduced in slice order.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl GibbsTable {
    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn bc(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn eta(&self) -> &DisorderConfig {
        &self.eta
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn prob(&self, index: u64) -> f64 {
        (self.log_weights[index as usize] - self.log_z).exp()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| (w - self.log_z).exp()).collect()
    }

    pub fn config(&self, index: u64) -> SpinConfig {
        SpinConfig::from_index(&self.volume, index)
    }

    pub fn expectation(&self, f: impl Fn(&SpinConfig) -> f64) -> f64 {
        (0..self.len() as u64).map(|i| self.prob(i) * f(&self.config(i))).sum()
    }

    pub fn expectation_by_index(&self, f: impl Fn(u64) -> f64) -> f64 {
        (0..self.len() as u64).map(|i| self.prob(i) * f(i)).sum()
    }

    /// Joint law of `sites`; entry `a` has bit `j` set when `sites[j]` is `+1`.
    pub fn marginal(&self, sites: &[Site]) -> Result<Vec<f64>> {
        let idx: Vec<usize> =
            sites.iter().map(|s| self.volume.index_of(s).ok_or_else(|| Error::MissingSite(s.clone()))).collect::<Result<_>>()?;
        let mut out = vec![0.0; 1 << sites.len()];
        for i in 0..self.len() as u64 {
            let a = idx.iter().enumerate().fold(0, |acc, (j, &k)| acc | ((i >> k & 1) as usize) << j);
            out[a] += self.prob(i);
        }
        Ok(out)
    }

    pub fn prob_plus(&self, x: &Site) -> Result<f64> {
        Ok(self.marginal(std::slice::from_ref(x))?[1])
    }

    /// `index,log_weight` rows for debugging.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,log_weight\n");
        for (i, w) in self.log_weights.iter().enumerate() {
            out.push_str(&format!("{i},{w:.16e}\n"));
        }
        out
    }
}

/// Exact local marginals of `mu_Λ^{bc}[eta]` through the elimination sweep.
#[derive(Clone, Debug)]
pub struct ExactGibbs {
    pot: DisorderedPotential,
    h: LocalHamiltonian,
    eta: DisorderConfig,
}

impl ExactGibbs {
    pub fn new(pot: &DisorderedPotential, lambda: &Volume, bc: &BoundaryCondition, eta: &DisorderConfig) -> Result<Self> {
        Ok(ExactGibbs { pot: pot.clone(), h: LocalHamiltonian::compile(pot, lambda, bc, eta)?, eta: eta.clone() })
    }

    pub fn hamiltonian(&self) -> &LocalHamiltonian {
        &self.h
    }

    pub fn volume(&self) -> &Volume {
        self.h.volume()
    }

    pub fn log_z(&self) -> Result<f64> {
        Ok(sweep(&self.h, &[], &[])?.log_z)
    }

    fn indices(&self, sites: &[Site]) -> Result<Vec<usize>> {
        sites
            .iter()
            .map(|s| self.volume().index_of(s).ok_or_else(|| Error::MissingSite(s.clone())))
            .collect()
    }

    /// Joint law of `sites` (all inside the volume); entry `a` has bit `j`
    /// set when `sites[j]` is `+1`.
    pub fn marginal(&self, sites: &[Site]) -> Result<Vec<f64>> {
        Ok(sweep(&self.h, &self.indices(sites)?, &[])?.probs)
    }

    pub fn prob_plus(&self, x: &Site) -> Result<f64> {
        Ok(self.marginal(std::slice::from_ref(x))?[1])
    }

    /// Probability that the spins equal `partial` on its region.
    pub fn prob_config(&self, partial: &SpinConfig) -> Result<f64> {
        Ok(self.log_prob_config(partial)?.exp())
    }

    pub fn log_prob_config(&self, partial: &SpinConfig) -> Result<f64> {
        let clamp: Vec<(usize, Spin)> = partial
            .iter()
            .map(|(s, v)| Ok((self.volume().index_of(s).ok_or_else(|| Error::MissingSite(s.clone()))?, *v)))
            .collect::<Result<_>>()?;
        let clamped = sweep(&self.h, &[], &clamp)?.log_z;
        Ok(clamped - self.log_z()?)
    }

    /// `E f(s_{sites})`; sites outside the volume take their boundary value.
    pub fn expectation_local(&self, sites: &[Site], mut f: impl FnMut(&[Spin]) -> f64) -> Result<f64> {
        let mut inner = Vec::new();
        let mut slots = Vec::with_capacity(sites.len());
        for s in sites {
            match self.volume().index_of(s) {
                Some(i) => {
                    slots.push(Slot::Inner(inner.len()));
                    inner.push(i);
                }
                None => {
                    let v = self
                        .h
                        .boundary()
                        .and_then(|b| b.get(s))
                        .copied()
                        .ok_or_else(|| Error::MissingSite(s.clone()))?;
                    slots.push(Slot::Fixed(v));
                }
            }
        }
        let probs = sweep(&self.h, &inner, &[])?.probs;
        let mut values = vec![0; sites.len()];
        let mut total = 0.0;
        for (a, p) in probs.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for (v, slot) in values.iter_mut().zip(&slots) {
                *v = match slot {
                    Slot::Inner(j) => spin_value(a >> j & 1),
                    Slot::Fixed(s) => *s,
                };
            }
            total += p * f(&values);
        }
        Ok(total)
    }

    /// `E exp(sign * ΔH_x(eta_a, eta_b))` with the variation taken over the
    /// terms of this volume's Hamiltonian.
    pub fn exp_delta_h(&self, x: &Site, eta_a: &Symbol, eta_b: &Symbol, sign: f64) -> Result<f64> {
        let lambda = self.volume().clone();
        let open = self.h.is_open();
        let sites: Vec<Site> = self
            .pot
            .delta_h_support(x)
            .into_iter()
            .filter(|s| !open || lambda.contains(s))
            .collect();
        let mut err = None;
        let value = self.expectation_local(&sites, |spins| {
            let spin = |s: &Site| -> Result<Spin> {
                sites.iter().position(|t| t == s).map(|i| spins[i]).ok_or_else(|| Error::MissingSite(s.clone()))
            };
            match self.pot.delta_h_in_volume(&lambda, open, x, &spin, eta_a, eta_b, &self.eta) {
                Ok(d) => (sign * d).exp(),
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}

enum Slot {
    Inner(usize),
    Fixed(Spin),
}

/// The one-site specification `mu_x^{sigma_∂x}[eta](s_x)` as `[P(-1), P(+1)]`.
pub fn one_site_spec(
    pot: &DisorderedPotential,
    x: &Site,
    boundary: &SpinConfig,
    eta: &DisorderConfig,
) -> Result<[f64; 2]> {
    let v = Volume::singleton(x.clone());
    let h = LocalHamiltonian::compile(pot, &v, &BoundaryCondition::Fixed(boundary.clone()), eta)?;
    let gap = h.unary()[0][1] - h.unary()[0][0];
    let plus = logistic(-gap);
    Ok([1.0 - plus, plus])
}

/// `1 / (1 + exp(-t))` without overflow.
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `(mu^+_Λ[eta](s_x = 1), mu^-_Λ[eta](s_x = 1))`.
pub fn magnetization_pm(pot: &DisorderedPotential, eta: &DisorderConfig, lambda: &Volume, x: &Site) -> Result<(f64, f64)> {
    if !lambda.contains(x) {
        return Err(Error::MissingSite(x.clone()));
    }
    let plus = ExactGibbs::new(pot, lambda, &BoundaryCondition::Plus, eta)?.prob_plus(x)?;
    let minus = ExactGibbs::new(pot, lambda, &BoundaryCondition::Minus, eta)?.prob_plus(x)?;
    Ok((plus, minus))
}

/// Spin bit helper re-exported for callers decoding table indices.
pub fn bit_of(s: Spin) -> usize {
    spin_bit(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::closure;

    fn s(c: &[i64]) -> Site {
        Site::new(c.to_vec())
    }

    fn eta_const(lam: &Volume, v: f64) -> DisorderConfig {
        DisorderConfig::constant(&closure(lam, 1).unwrap(), Symbol::scalar(v))
    }

    #[test]
    fn single_site_two_state_ratio() {
        let p = DisorderedPotential::rfim(2, 0.0, 1.0).unwrap();
        let lam = Volume::singleton(s(&[0, 0]));
        let t = exact_gibbs(&p, &lam, &BoundaryCondition::Open, &eta_const(&lam, 1.0)).unwrap();
        let want = 1f64.exp() / (1f64.exp() + (-1f64).exp());
        assert!((t.prob(1) - want).abs() < 1e-15);
        assert!((t.prob_plus(&s(&[0, 0])).unwrap() - 0.8807970779778823).abs() < 1e-12);
        assert!((t.log_z() - (2.0 * 1f64.cosh()).ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_field_symmetry_and_normalization() {
        let p = DisorderedPotential::rfim(2, 0.7, 0.0).unwrap();
        let lam = Volume::cube(2, 0, 1);
        let eta = eta_const(&lam, 1.0);
        let t = exact_gibbs(&p, &lam, &BoundaryCondition::Open, &eta).unwrap();
        assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for x in lam.iter() {
            assert!((t.prob_plus(x).unwrap() - 0.5).abs() < 1e-12);
        }
        let m = t.expectation(|c| f64::from(*c.get(&s(&[0, 0])).unwrap()));
        assert!(m.abs() < 1e-12);
        assert!((t.expectation(|_| 3.5) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn free_spin_log_partition() {
        let p = DisorderedPotential::rfim(1, 0.0, 0.0).unwrap();
        let lam = Volume::singleton(s(&[0]));
        assert!((log_partition(&p, &lam, &BoundaryCondition::Plus, &eta_const(&lam, 1.0)).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn decoupled_sites_add() {
        let p = DisorderedPotential::rfim(1, 0.0, 0.8).unwrap();
        let lam = Volume::new(1, vec![s(&[0]), s(&[1])]).unwrap();
        let eta = DisorderConfig::new(closure(&lam, 1).unwrap(), [1.0, -1.0, 1.0, 1.0].map(Symbol::scalar).to_vec()).unwrap();
        let both = log_partition(&p, &lam, &BoundaryCondition::Open, &eta).unwrap();
        let a = log_partition(&p, &Volume::singleton(s(&[0])), &BoundaryCondition::Open, &eta).unwrap();
        let b = log_partition(&p, &Volume::singleton(s(&[1])), &BoundaryCondition::Open, &eta).unwrap();
        assert!((both - a - b).abs() < 1e-12);
    }

    #[test]
    fn table_cap_is_enforced() {
        let p = DisorderedPotential::rfim(1, 1.0, 1.0).unwrap();
        let lam = Volume::cube(1, 0, 9);
        let r = exact_gibbs_capped(&p, &lam, &BoundaryCondition::Plus, &eta_const(&lam, 1.0), 512.0);
        assert!(matches!(r, Err(Error::Infeasible { .. })));
    }

    #[test]
    fn sweep_matches_table() {
        let p = DisorderedPotential::rfim(2, 0.6, 0.9).unwrap();
        let lam = Volume::cuboid(&[0, 0], &[2, 3]);
        let clo = closure(&lam, 1).unwrap();
        let eta = DisorderConfig::from_fn(&clo, |x| Symbol::scalar(if (x.coords()[0] + 2 * x.coords()[1]) % 3 == 0 { 1.0 } else { -1.0 }));
        let bc_sites = crate::lattice::r_boundary(&lam, 1).unwrap();
        let bc = BoundaryCondition::Fixed(SpinConfig::from_fn(&bc_sites, |x| if x.coords()[1] > 1 { 1 } else { -1 }));
        for bc in [bc, BoundaryCondition::Open, BoundaryCondition::Minus] {
            let t = exact_gibbs(&p, &lam, &bc, &eta).unwrap();
            let e = ExactGibbs::new(&p, &lam, &bc, &eta).unwrap();
            assert!((t.log_z() - e.log_z().unwrap()).abs() < 1e-12);
            let sites = [s(&[1, 1]), s(&[0, 3]), s(&[2, 0])];
            let a = t.marginal(&sites).unwrap();
            let b = e.marginal(&sites).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
            let cfg = SpinConfig::new(Volume::new(2, sites.to_vec()).unwrap(), vec![1, -1, 1]).unwrap();
            let direct = t.expectation(|c| {
                f64::from(u8::from(cfg.iter().all(|(x, v)| c.get(x) == Some(v))))
            });
            assert!((e.prob_config(&cfg).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn transfer_matches_table() {
        let p = DisorderedPotential::rfim(1, 0.9, 0.7).unwrap();
        let lam = Volume::cube(1, 0, 7);
        let clo = closure(&lam, 1).unwrap();
        let eta = DisorderConfig::from_fn(&clo, |x| Symbol::scalar(if x.coords()[0] % 3 == 0 { -1.0 } else { 1.0 }));
        for bc in [BoundaryCondition::Plus, BoundaryCondition::Open] {
            let t = exact_gibbs(&p, &lam, &bc, &eta).unwrap();
            let tm = transfer_matrix_1d(&p, &lam, &bc, &eta).unwrap();
            assert!((t.log_z() - tm.log_z).abs() < 1e-12);
            for (i, x) in lam.iter().enumerate() {
                assert!((t.prob_plus(x).unwrap() - tm.prob_plus(i)).abs() < 1e-10);
            }
            for i in 0..lam.len() - 1 {
                let pair = t.marginal(&[lam.sites()[i].clone(), lam.sites()[i + 1].clone()]).unwrap();
                for (got, want) in pair.iter().zip(&tm.pair[i]) {
                    assert!((got - want).abs() < 1e-10);
                }
            }
        }
        let zero = DisorderedPotential::rfim(1, 1.3, 0.0).unwrap();
        let tm = transfer_matrix_1d(&zero, &lam, &BoundaryCondition::Open, &eta).unwrap();
        assert!(tm.site.iter().all(|p| (p[1] - 0.5).abs() < 1e-12));
        assert!(transfer_matrix_1d(&p, &Volume::new(1, vec![s(&[0]), s(&[2])]).unwrap(), &BoundaryCondition::Open, &eta).is_err());
    }

    #[test]
    fn magnetization_examples() {
        let big_field = DisorderedPotential::rfim(2, 1.0, 10.0).unwrap();
        let lam = Volume::singleton(s(&[0, 0]));
        let (mp, mm) = magnetization_pm(&big_field, &eta_const(&lam, 1.0), &lam, &s(&[0, 0])).unwrap();
        assert!((mp - logistic(2.0 * (4.0 + 10.0))).abs() < 1e-12);
        assert!((mm - logistic(2.0 * (10.0 - 4.0))).abs() < 1e-12);
        assert!(mm > 0.999);
        let free = DisorderedPotential::rfim(2, 0.0, 1.0).unwrap();
        let lam = Volume::cube(2, -1, 1);
        let (a, b) = magnetization_pm(&free, &eta_const(&lam, -1.0), &lam, &s(&[0, 0])).unwrap();
        assert_eq!(a, b);
        let ordered = DisorderedPotential::rfim(2, 2.0, 1.0).unwrap();
        let (a, b) = magnetization_pm(&ordered, &eta_const(&lam, 0.0), &lam, &s(&[0, 0])).unwrap();
        assert!(a - b > 0.9);
    }

    #[test]
    fn one_site_spec_is_the_conditional() {
        let p = DisorderedPotential::rfim(2, 0.8, 0.6).unwrap();
        let lam = Volume::cube(2, -1, 1);
        let x = s(&[0, 0]);
        let clo = closure(&lam, 1).unwrap();
        let eta = DisorderConfig::from_fn(&clo, |y| Symbol::scalar(if y.coords()[0] > 0 { 1.0 } else { -1.0 }));
        let t = exact_gibbs(&p, &lam, &BoundaryCondition::Plus, &eta).unwrap();
        let xi = lam.index_of(&x).unwrap();
        for rest in 0..(1u64 << 9) {
            if rest >> xi & 1 == 1 {
                continue;
            }
            let with = rest | 1 << xi;
            let cond = t.prob(with) / (t.prob(with) + t.prob(rest));
            let cfg = t.config(rest);
            let bnd = crate::lattice::r_boundary(&Volume::singleton(x.clone()), 1).unwrap();
            let spec = one_site_spec(&p, &x, &cfg.restrict(&bnd).unwrap(), &eta).unwrap();
            assert!((cond - spec[1]).abs() < 1e-10);
        }
    }
}
