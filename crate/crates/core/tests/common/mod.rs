#![allow(dead_code)]

use gibbslab::disorder::SingleSiteLaw;
use gibbslab::gibbs::{exact_gibbs, BoundaryCondition};
use gibbslab::lattice::closure;
use gibbslab::{DisorderConfig, DisorderedPotential, Site, SpinConfig, Symbol, Volume};
use rayon::prelude::*;

/// Conditional law of `(s_x, eta_x)` given `(s_{Λ\x}, eta_{inner})` in the
/// joint spin-disorder measure, from a full enumeration of spins on the outer
/// volume and disorder on its support.
pub struct BruteConditionals {
    pub window: Volume,
    pub inner: Volume,
    pub outer: Volume,
    pub alphabet: Vec<Symbol>,
    /// `mass[key * 2k + 2 * a + s]`, key = window spins + 2^|window| * inner disorder.
    pub mass: Vec<f64>,
    pub support: Volume,
}

pub fn digits(mut k: usize, radix: usize, len: usize) -> Vec<usize> {
    (0..len)
        .map(|_| {
            let d = k % radix;
            k /= radix;
            d
        })
        .collect()
}

pub fn config_from_digits(region: &Volume, alphabet: &[Symbol], ds: &[usize]) -> DisorderConfig {
    DisorderConfig::new(region.clone(), ds.iter().map(|d| alphabet[*d].clone()).collect()).unwrap()
}

/// Disorder on the closure of `lambda_n`: `eta` where given, the first symbol
/// elsewhere (those sites never enter the Hamiltonian).
pub fn pad(lambda_n: &Volume, alphabet: &[Symbol], eta: &DisorderConfig) -> DisorderConfig {
    DisorderConfig::constant(&closure(lambda_n, 1).unwrap(), alphabet[0].clone()).overlay(eta)
}

impl BruteConditionals {
    pub fn build(
        pot: &DisorderedPotential,
        lambda_n: &Volume,
        bc: &BoundaryCondition,
        law: &SingleSiteLaw,
        x: &Site,
        lambda: &Volume,
    ) -> Self {
        let support = pot.disorder_support(lambda_n, bc.is_open());
        let alphabet = law.alphabet().to_vec();
        let k = alphabet.len();
        let window = lambda.without(x);
        let inner = support.intersection(lambda).without(x);
        let outer = support.difference(lambda);
        let x_in_support = support.contains(x);
        let n_eta = k.pow(support.len() as u32);
        let w_bits = window.len();
        let keys = (1usize << w_bits) * k.pow(inner.len() as u32);
        let spin_pos: Vec<usize> = window.iter().map(|s| lambda_n.index_of(s).unwrap()).collect();
        let x_pos = lambda_n.index_of(x).unwrap();
        let inner_pos: Vec<usize> = inner.iter().map(|s| support.index_of(s).unwrap()).collect();
        let x_dis = support.index_of(x);
        let mass = (0..n_eta)
            .into_par_iter()
            .fold(
                || vec![0.0; keys * 2 * k],
                |mut acc, e| {
                    let ds = digits(e, k, support.len());
                    let prior: f64 = ds.iter().map(|d| law.probs()[*d]).product();
                    if prior == 0.0 {
                        return acc;
                    }
                    let eta = pad(lambda_n, &alphabet, &config_from_digits(&support, &alphabet, &ds));
                    let table = exact_gibbs(pot, lambda_n, bc, &eta).unwrap();
                    let mut inner_key = 0;
                    for p in inner_pos.iter().rev() {
                        inner_key = inner_key * k + ds[*p];
                    }
                    let a = x_dis.map(|i| ds[i]).unwrap_or(0);
                    for sigma in 0..table.len() as u64 {
                        let mut w = 0usize;
                        for (b, p) in spin_pos.iter().enumerate() {
                            w |= ((sigma >> p & 1) as usize) << b;
                        }
                        let s = (sigma >> x_pos & 1) as usize;
                        let key = w + (inner_key << w_bits);
                        acc[key * 2 * k + 2 * a + s] += prior * table.prob(sigma);
                    }
                    acc
                },
            )
            .reduce(|| vec![0.0; keys * 2 * k], |a, b| a.iter().zip(&b).map(|(p, q)| p + q).collect());
        assert!(x_in_support, "the varied site must carry disorder");
        BruteConditionals { window, inner, outer, alphabet, mass, support }
    }

    pub fn n_inner(&self) -> usize {
        self.alphabet.len().pow(self.inner.len() as u32)
    }

    pub fn n_window(&self) -> usize {
        1 << self.window.len()
    }

    /// `P(s_x, eta_x = alphabet[a] | window spins w, inner disorder e)` as
    /// `[a][s]`, or `None` when the conditioning has zero mass.
    pub fn conditional(&self, w: usize, e: usize) -> Option<Vec<[f64; 2]>> {
        let k = self.alphabet.len();
        let key = w + (e << self.window.len());
        let cell = &self.mass[key * 2 * k..(key + 1) * 2 * k];
        let total: f64 = cell.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some((0..k).map(|a| [cell[2 * a] / total, cell[2 * a + 1] / total]).collect())
    }

    pub fn inner_config(&self, e: usize) -> DisorderConfig {
        config_from_digits(&self.inner, &self.alphabet, &digits(e, self.alphabet.len(), self.inner.len()))
    }

    pub fn window_spins(&self, w: usize) -> SpinConfig {
        SpinConfig::from_index(&self.window, w as u64)
    }
}

/// Relative difference with an absolute floor.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
