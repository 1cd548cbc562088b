//! Single-spin-flip Monte Carlo for volumes beyond exact enumeration.
//!
//! Sites are updated in lattice order, one sweep at a time. Each chain draws
//! from its own ChaCha8 stream `rng::stream(seed, chain)`, so the output is a
//! function of the inputs and the seed only. Error bars come from batch means
//! over all chains; convergence is judged by the split-chain potential scale
//! reduction. Cluster moves are not offered: the disorder removes the spin-flip
//! symmetry they rely on.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{logistic, BoundaryCondition, LocalHamiltonian};
use crate::lattice::{Site, Volume};
use crate::model::{DisorderConfig, DisorderedPotential, Spin};
use crate::rng;

pub const RHAT_LIMIT: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Metropolis,
    HeatBath,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub seed: u64,
    pub dynamics: Dynamics,
    /// Sweeps between two measurements.
    pub stride: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { sweeps: 20_000, burn_in: 2_000, chains: 4, seed: 1, dynamics: Dynamics::HeatBath, stride: 1 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.sweeps <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "need sweeps > burn_in (got sweeps = {}, burn_in = {})",
                self.sweeps, self.burn_in
            )));
        }
        if self.chains < 2 {
            return Err(Error::InvalidParameter("at least two chains are needed for the split-chain diagnostic".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be positive".into()));
        }
        if self.measurements() < 4 {
            return Err(Error::InvalidParameter("fewer than four measurements per chain".into()));
        }
        Ok(())
    }

    pub fn measurements(&self) -> usize {
        self.sweeps.saturating_sub(self.burn_in).div_ceil(self.stride)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: f64,
    pub samples: usize,
    pub batch_size: usize,
    /// Split-chain potential scale reduction.
    pub rhat: f64,
    pub converged: bool,
    pub chain_means: Vec<f64>,
}

impl McEstimate {
    /// `|mean - exact| <= k * std_error`.
    pub fn agrees_with(&self, exact: f64, k: f64) -> bool {
        (self.mean - exact).abs() <= k * self.std_error
    }
}

/// Functions of a few spins. Sites outside the volume read the boundary
/// condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LocalObservable {
    Spin { site: Site },
    /// `1{s_x = +1}`.
    Plus { site: Site },
    Product { sites: Vec<Site> },
    /// `1{s_x = s_y}`.
    Agree { a: Site, b: Site },
}

impl LocalObservable {
    pub fn sites(&self) -> Vec<Site> {
        match self {
            LocalObservable::Spin { site } | LocalObservable::Plus { site } => vec![site.clone()],
            LocalObservable::Product { sites } => sites.clone(),
            LocalObservable::Agree { a, b } => vec![a.clone(), b.clone()],
        }
    }

    pub fn eval(&self, spins: &[Spin]) -> f64 {
        match self {
            LocalObservable::Spin { .. } => f64::from(spins[0]),
            LocalObservable::Plus { .. } => f64::from(u8::from(spins[0] == 1)),
            LocalObservable::Product { .. } => f64::from(spins.iter().product::<Spin>()),
            LocalObservable::Agree { .. } => f64::from(u8::from(spins[0] == spins[1])),
        }
    }
}

/// Probability that an update of site `i` leaves it at `+1`, given `spins`.
pub fn site_kernel(h: &LocalHamiltonian, i: usize, spins: &[Spin], dynamics: Dynamics) -> f64 {
    let gap = h.flip_gap(i, spins);
    match dynamics {
        Dynamics::HeatBath => logistic(-gap),
        // from +1 the energy changes by -gap, from -1 by +gap
        Dynamics::Metropolis => {
            if spins[i] == 1 {
                1.0 - gap.exp().min(1.0)
            } else {
                (-gap).exp().min(1.0)
            }
        }
    }
}

fn update(h: &LocalHamiltonian, i: usize, spins: &mut [Spin], u: f64, dynamics: Dynamics) {
    let p = site_kernel(h, i, spins, dynamics);
    match dynamics {
        Dynamics::HeatBath => spins[i] = if u < p { 1 } else { -1 },
        Dynamics::Metropolis => {
            let flip = if spins[i] == 1 { 1.0 - p } else { p };
            if u < flip {
                spins[i] = -spins[i];
            }
        }
    }
}

/// Transition matrix of one full lexicographic sweep, indexed by bit-packed
/// configurations. Only for tiny volumes.
pub fn sweep_transition_matrix(h: &LocalHamiltonian, dynamics: Dynamics) -> Result<Vec<Vec<f64>>> {
    let n = h.len();
    if n > 12 {
        return Err(Error::Infeasible {
            what: "sweep transition matrix",
            count: (n as f64).exp2(),
            cap: 4096.0,
            advice: "use a volume with at most 12 sites",
        });
    }
    let size = 1usize << n;
    let decode = |k: usize| -> Vec<Spin> { (0..n).map(|i| if k >> i & 1 == 1 { 1 } else { -1 }).collect() };
    let mut sweep = identity(size);
    for i in 0..n {
        let mut step = vec![vec![0.0; size]; size];
        for (from, row) in step.iter_mut().enumerate() {
            let p = site_kernel(h, i, &decode(from), dynamics);
            row[from | 1 << i] += p;
            row[from & !(1 << i)] += 1.0 - p;
        }
        sweep = matmul(&sweep, &step);
    }
    Ok(sweep)
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = b[0].len();
    a.iter()
        .map(|row| (0..n).map(|j| row.iter().zip(b).map(|(x, r)| x * r[j]).sum()).collect())
        .collect()
}

enum Slot {
    Inner(usize),
    Fixed(Spin),
}

fn slots(h: &LocalHamiltonian, sites: &[Site]) -> Result<Vec<Slot>> {
    sites
        .iter()
        .map(|s| match h.volume().index_of(s) {
            Some(i) => Ok(Slot::Inner(i)),
            None => h.boundary().and_then(|b| b.get(s)).map(|v| Slot::Fixed(*v)).ok_or_else(|| Error::MissingSite(s.clone())),
        })
        .collect()
}

/// One member of a coupled run: a compiled Hamiltonian and its starting spin.
struct Member {
    h: LocalHamiltonian,
    start: Spin,
    slots: Vec<Slot>,
}

/// Runs every member of `members` with the same stream of uniforms; returns
/// one measurement series per member.
fn run_coupled(members: &[Member], obs: &LocalObservable, cfg: &McConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = members[0].h.len();
    let mut states: Vec<Vec<Spin>> = members.iter().map(|m| vec![m.start; n]).collect();
    let mut series = vec![Vec::with_capacity(cfg.measurements()); members.len()];
    let mut buf = vec![0; obs.sites().len()];
    for t in 0..cfg.sweeps {
        for i in 0..n {
            let u: f64 = rng.gen();
            for (m, s) in members.iter().zip(states.iter_mut()) {
                update(&m.h, i, s, u, cfg.dynamics);
            }
        }
        if t >= cfg.burn_in && (t - cfg.burn_in).is_multiple_of(cfg.stride) {
            for ((m, s), out) in members.iter().zip(&states).zip(series.iter_mut()) {
                for (b, slot) in buf.iter_mut().zip(&m.slots) {
                    *b = match slot {
                        Slot::Inner(j) => s[*j],
                        Slot::Fixed(v) => *v,
                    };
                }
                out.push(obs.eval(&buf));
            }
        }
    }
    series
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64], centre: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    xs.iter().map(|x| (x - centre).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Split-chain potential scale reduction over equally long chains.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let half = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if half < 2 {
        return f64::NAN;
    }
    let parts: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[half..2 * half]]).collect();
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let within = mean(&parts.iter().zip(&means).map(|(p, m)| variance(p, *m)).collect::<Vec<_>>());
    let between = variance(&means, mean(&means));
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let n = half as f64;
    (((n - 1.0) / n * within + between) / within).sqrt()
}

/// Batch-means estimate pooled over chains, batch size `floor(sqrt(len))`.
pub fn estimate(chains: &[Vec<f64>]) -> Result<McEstimate> {
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    if chains.is_empty() || len < 4 {
        return Err(Error::InvalidParameter("too few measurements for an estimate".into()));
    }
    let batch = (len as f64).sqrt().floor() as usize;
    let batches = len / batch;
    let used: Vec<&[f64]> = chains.iter().map(|c| &c[..batch * batches]).collect();
    let all: Vec<f64> = used.iter().flat_map(|c| c.iter().copied()).collect();
    let total = all.len();
    let grand = mean(&all);
    let batch_means: Vec<f64> = used.iter().flat_map(|c| c.chunks(batch).map(mean)).collect();
    let var_batch = variance(&batch_means, grand);
    let var_sample = variance(&all, grand);
    let std_error = (var_batch / batch_means.len() as f64).sqrt();
    let n_effective = if var_batch > 0.0 { (total as f64 * var_sample / (batch as f64 * var_batch)).min(total as f64) } else { total as f64 };
    let rhat = split_rhat(chains);
    Ok(McEstimate {
        mean: grand,
        std_error,
        n_effective,
        samples: total,
        batch_size: batch,
        rhat,
        converged: rhat <= RHAT_LIMIT,
        chain_means: used.iter().map(|c| mean(c)).collect(),
    })
}

/// Raw measurement series, one per chain. Chains alternate between an
/// all-plus and an all-minus start.
pub fn mc_series(
    pot: &DisorderedPotential,
    eta: &DisorderConfig,
    lambda: &Volume,
    bc: &BoundaryCondition,
    obs: &LocalObservable,
    cfg: &McConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let h = LocalHamiltonian::compile(pot, lambda, bc, eta)?;
    slots(&h, &obs.sites())?;
    (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let start = if c % 2 == 0 { 1 } else { -1 };
            let member = Member { slots: slots(&h, &obs.sites())?, h: h.clone(), start };
            let mut r = rng::stream(cfg.seed, c as u64);
            Ok(run_coupled(std::slice::from_ref(&member), obs, cfg, &mut r).remove(0))
        })
        .collect()
}

/// Estimate of `mu_Λ^{bc}[eta](obs)`.
pub fn mc_expectation(
    pot: &DisorderedPotential,
    eta: &DisorderConfig,
    lambda: &Volume,
    bc: &BoundaryCondition,
    obs: &LocalObservable,
    cfg: &McConfig,
) -> Result<McEstimate> {
    estimate(&mc_series(pot, eta, lambda, bc, obs, cfg)?)
}

/// One side of a gap: a boundary condition and an optional disorder overlay
/// (typically an annulus) that replaces the base disorder where it is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSide {
    pub bc: BoundaryCondition,
    #[serde(default)]
    pub annulus: Option<DisorderConfig>,
}

impl GapSide {
    pub fn plus() -> Self {
        GapSide { bc: BoundaryCondition::Plus, annulus: None }
    }

    pub fn minus() -> Self {
        GapSide { bc: BoundaryCondition::Minus, annulus: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct McGap {
    pub gap: McEstimate,
    pub upper: McEstimate,
    pub lower: McEstimate,
}

/// Estimates `mu_V^{upper}(s_x = 1) - mu_V^{lower}(s_x = 1)`. Both sides are
/// driven by the same uniforms, the upper side starting from all plus and the
/// lower from all minus; with heat-bath updates and attractive couplings the
/// coupled chains stay ordered and the difference has small variance.
pub fn mc_gap_probe(
    pot: &DisorderedPotential,
    eta: &DisorderConfig,
    x: &Site,
    v: &Volume,
    upper: &GapSide,
    lower: &GapSide,
    cfg: &McConfig,
) -> Result<McGap> {
    cfg.validate()?;
    if !v.contains(x) {
        return Err(Error::MissingSite(x.clone()));
    }
    let obs = LocalObservable::Plus { site: x.clone() };
    let compile = |side: &GapSide, start: Spin| -> Result<Member> {
        let e = match &side.annulus {
            Some(a) => eta.overlay(a),
            None => eta.clone(),
        };
        let h = LocalHamiltonian::compile(pot, v, &side.bc, &e)?;
        Ok(Member { slots: slots(&h, &obs.sites())?, h, start })
    };
    let members = [compile(upper, 1)?, compile(lower, -1)?];
    let runs: Vec<Vec<Vec<f64>>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_coupled(&members, &obs, cfg, &mut rng::stream(cfg.seed, c as u64)))
        .collect();
    let side = |k: usize| -> Vec<Vec<f64>> { runs.iter().map(|r| r[k].clone()).collect() };
    let diff: Vec<Vec<f64>> = runs.iter().map(|r| r[0].iter().zip(&r[1]).map(|(a, b)| a - b).collect()).collect();
    Ok(McGap { gap: estimate(&diff)?, upper: estimate(&side(0))?, lower: estimate(&side(1))? })
}
