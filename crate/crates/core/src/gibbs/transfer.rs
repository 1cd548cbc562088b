//! Forward-backward transfer matrices for one-dimensional chains.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Volume;
use crate::model::{DisorderConfig, DisorderedPotential};

use super::local::LocalHamiltonian;
use super::BoundaryCondition;

#[derive(Clone, Debug, Serialize)]
pub struct ChainMarginals {
    pub log_z: f64,
    /// `site[i] = [P(s_i = -1), P(s_i = +1)]`.
    pub site: Vec<[f64; 2]>,
    /// `pair[i]` is the law of `(s_i, s_{i+1})`, indexed `b_i + 2 b_{i+1}`
    /// with `b = 1` for `+1`.
    pub pair: Vec<[f64; 4]>,
}

impl ChainMarginals {
    pub fn prob_plus(&self, i: usize) -> f64 {
        self.site[i][1]
    }

    /// Joint law of the `len` consecutive sites starting at `first`, from the
    /// Markov property of the chain; bit `k` set means site `first + k` is `+1`.
    pub fn window(&self, first: usize, len: usize) -> Vec<f64> {
        (0..1usize << len)
            .map(|a| {
                let bit = |k: usize| a >> k & 1;
                let mut p = self.site[first][bit(0)];
                for k in 1..len {
                    let (s, t) = (bit(k - 1), bit(k));
                    let prev = self.site[first + k - 1][s];
                    p *= if prev > 0.0 { self.pair[first + k - 1][s + 2 * t] / prev } else { 0.0 };
                }
                p
            })
            .collect()
    }
}

pub fn transfer_matrix_1d(
    pot: &DisorderedPotential,
    chain: &Volume,
    bc: &BoundaryCondition,
    eta: &DisorderConfig,
) -> Result<ChainMarginals> {
    if chain.dim() != 1 {
        return Err(Error::Geometry(format!("transfer matrices need d = 1, got d = {}", chain.dim())));
    }
    if !chain.is_box() {
        return Err(Error::Geometry("transfer matrices need an interval".into()));
    }
    let h = LocalHamiltonian::compile(pot, chain, bc, eta)?;
    let n = h.len();
    let u: Vec<[f64; 2]> = h.unary().iter().map(|e| [(-e[0]).exp(), (-e[1]).exp()]).collect();
    let mut link = vec![[1.0; 4]; n.saturating_sub(1)];
    for p in h.pairs() {
        debug_assert_eq!(p.j, p.i + 1, "interval pairs are consecutive");
        for (k, w) in link[p.i].iter_mut().enumerate() {
            *w *= (-p.energy[k]).exp();
        }
    }

    let mut alpha = vec![[0.0; 2]; n];
    let mut log_scale = 0.0;
    alpha[0] = u[0];
    log_scale += normalize(&mut alpha[0]);
    for i in 0..n - 1 {
        for t in 0..2 {
            alpha[i + 1][t] = (0..2).map(|s| alpha[i][s] * link[i][s + 2 * t]).sum::<f64>() * u[i + 1][t];
        }
        log_scale += normalize(&mut alpha[i + 1]);
    }
    let log_z = log_scale + (alpha[n - 1][0] + alpha[n - 1][1]).ln() - h.constant();

    let mut beta = vec![[1.0; 2]; n];
    for i in (0..n - 1).rev() {
        for s in 0..2 {
            beta[i][s] = (0..2).map(|t| link[i][s + 2 * t] * u[i + 1][t] * beta[i + 1][t]).sum();
        }
        normalize(&mut beta[i]);
    }

    let site = (0..n)
        .map(|i| {
            let mut p = [alpha[i][0] * beta[i][0], alpha[i][1] * beta[i][1]];
            normalize(&mut p);
            p
        })
        .collect();
    let pair = (0..n - 1)
        .map(|i| {
            let mut p = [0.0; 4];
            for (k, v) in p.iter_mut().enumerate() {
                let (s, t) = (k & 1, k >> 1);
                *v = alpha[i][s] * link[i][k] * u[i + 1][t] * beta[i + 1][t];
            }
            let total: f64 = p.iter().sum();
            p.map(|v| v / total)
        })
        .collect();
    Ok(ChainMarginals { log_z, site, pair })
}

fn normalize(v: &mut [f64; 2]) -> f64 {
    let total = v[0] + v[1];
    v[0] /= total;
    v[1] /= total;
    total.ln()
}
