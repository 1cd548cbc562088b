//! Exact marginals by eliminating spins one at a time in lattice order.
//!
//! The state after processing site `k` is a table over the "frontier": the
//! processed sites that still have an unprocessed neighbour. For a box with
//! side lengths `L_1 >= ... >= L_d` in lattice order the frontier holds about
//! `L_2 * ... * L_d` sites, so a 12x12 volume costs a few thousand table
//! entries per site. In one dimension this is the transfer-matrix method.
//!
//! Sites listed in `keep` are never summed out, so a single pass returns
//! their joint marginal.

use crate::error::{Error, Result};
use crate::model::Spin;

use super::local::{spin_bit, LocalHamiltonian};

pub const MAX_FRONTIER: usize = 24;

#[derive(Clone, Debug)]
pub struct SweepResult {
    /// Joint law of the kept sites; entry `a` has bit `j` set when
    /// `keep[j]` is `+1`.
    pub probs: Vec<f64>,
    /// Log of the total (clamped) Boltzmann weight.
    pub log_z: f64,
}

/// Runs the elimination with the spins in `clamp` held fixed.
pub fn sweep(h: &LocalHamiltonian, keep: &[usize], clamp: &[(usize, Spin)]) -> Result<SweepResult> {
    let n = h.len();
    for (a, &k) in keep.iter().enumerate() {
        if k >= n || keep[..a].contains(&k) {
            return Err(Error::InvalidParameter(format!("bad or repeated site index {k} in marginal request")));
        }
    }
    let mut unary: Vec<[f64; 2]> = h.unary().iter().map(|u| [(-u[0]).exp(), (-u[1]).exp()]).collect();
    for &(i, s) in clamp {
        if i >= n {
            return Err(Error::InvalidParameter(format!("clamp index {i} out of range")));
        }
        unary[i][1 - spin_bit(s)] = 0.0;
    }
    let pair_w: Vec<[f64; 4]> = h
        .pairs()
        .iter()
        .map(|p| [(-p.energy[0]).exp(), (-p.energy[1]).exp(), (-p.energy[2]).exp(), (-p.energy[3]).exp()])
        .collect();

    let mut last_use: Vec<usize> = (0..n)
        .map(|i| h.neighbors(i).iter().map(|&(j, _)| j).fold(i, usize::max))
        .collect();
    for &k in keep {
        last_use[k] = usize::MAX;
    }

    let mut active: Vec<usize> = Vec::new();
    let mut table: Vec<f64> = vec![1.0];
    let mut log_scale = 0.0;

    #[allow(clippy::needless_range_loop)]
    for k in 0..n {
        if active.len() + 1 > MAX_FRONTIER {
            return Err(Error::Infeasible {
                what: "exact sweep",
                count: 2f64.powi(active.len() as i32 + 1),
                cap: 2f64.powi(MAX_FRONTIER as i32),
                advice: "use Monte Carlo for this volume",
            });
        }
        let links: Vec<(usize, usize)> = h
            .neighbors(k)
            .iter()
            .filter(|&&(j, _)| j < k)
            .map(|&(j, p)| (active.iter().position(|&a| a == j).expect("earlier neighbour stays active"), p))
            .collect();
        let m = active.len();
        let mut next = vec![0.0; table.len() * 2];
        for (idx, &v) in table.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for s in 0..2 {
                let mut w = v * unary[k][s];
                for &(pos, p) in &links {
                    w *= pair_w[p][(idx >> pos & 1) + 2 * s];
                }
                next[idx | s << m] = w;
            }
        }
        active.push(k);
        table = next;

        let mut pos = 0;
        while pos < active.len() {
            if last_use[active[pos]] <= k {
                table = sum_out(&table, pos);
                active.remove(pos);
            } else {
                pos += 1;
            }
        }

        let max = table.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return Ok(SweepResult { probs: vec![0.0; 1 << keep.len()], log_z: f64::NEG_INFINITY });
        }
        for v in table.iter_mut() {
            *v /= max;
        }
        log_scale += max.ln();
    }

    let total: f64 = table.iter().sum();
    let log_z = log_scale + total.ln() - h.constant();
    // active now lists the kept sites in increasing index order
    let mut probs = vec![0.0; 1 << keep.len()];
    for (idx, &v) in table.iter().enumerate() {
        let mut out = 0;
        for (pos, &site) in active.iter().enumerate() {
            if idx >> pos & 1 == 1 {
                out |= 1 << keep.iter().position(|&k| k == site).expect("kept site");
            }
        }
        probs[out] = v / total;
    }
    Ok(SweepResult { probs, log_z })
}

fn sum_out(table: &[f64], pos: usize) -> Vec<f64> {
    let low_mask = (1usize << pos) - 1;
    let mut out = vec![0.0; table.len() / 2];
    for (idx, &v) in table.iter().enumerate() {
        out[(idx & low_mask) | (idx >> (pos + 1)) << pos] += v;
    }
    out
}
