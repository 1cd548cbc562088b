//! Joint spin-disorder measures `K(sigma, eta) = IP(eta) mu[eta](sigma)` on a
//! finite volume, and the conditional law of the disorder at one site given
//! spins and disorder on a surrounding window.
//!
//! The conditional of `eta_x` is assembled from three pieces: the a-priori
//! weight, a local factor built from the one-site specification at a
//! reference symbol, and an outer average over the disorder `eta~` outside
//! the window of inverse Gibbs expectations of `exp(-ΔH_x)`. The outer
//! average is an exact sum when the outside disorder can be enumerated and a
//! self-normalized importance-sampling estimate (draws from `IP`) otherwise;
//! every result records which one was used.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::disorder::{ProductLaw, SingleSiteLaw};
use crate::error::{Error, Result};
use crate::gibbs::{log_sum_exp, one_site_spec, BoundaryCondition, ExactGibbs};
use crate::lattice::{closure, r_boundary, Site, Volume};
use crate::model::{DisorderConfig, DisorderedPotential, Spin, SpinConfig, Symbol};

pub const DEFAULT_OUTER_CAP: f64 = 16384.0;
pub const DEFAULT_OUTER_SAMPLES: usize = 2048;

/// Largest conditioning window whose spin marginal is tabulated in one pass.
const TABULATED_WINDOW: usize = 16;

/// How the average over the disorder outside the conditioning window was taken.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OuterEstimate {
    Exact { configurations: usize },
    Sampled { samples: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct JointMeasureFinite {
    pot: DisorderedPotential,
    lambda_n: Volume,
    bc: BoundaryCondition,
    law: SingleSiteLaw,
    outer_cap: f64,
    samples: usize,
    seed: u64,
}

/// A distribution over the single-site alphabet.
#[derive(Clone, Debug, Serialize)]
pub struct DisorderConditional {
    pub alphabet: Vec<Symbol>,
    pub probs: Vec<f64>,
    pub outer: OuterEstimate,
}

impl DisorderConditional {
    pub fn prob_of(&self, s: &Symbol) -> Result<f64> {
        self.alphabet
            .iter()
            .position(|a| a == s)
            .map(|i| self.probs[i])
            .ok_or_else(|| Error::InvalidSymbol(s.to_string()))
    }
}

/// The largest outer expectation over the outside disorder, with the first
/// maximizer in enumeration order.
#[derive(Clone, Debug, Serialize)]
pub struct QUpper {
    pub value: f64,
    pub argmax: usize,
    pub maximizer: DisorderConfig,
    pub minimum: f64,
    pub lambda_n: Volume,
    pub outer: OuterEstimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct QReport {
    pub q_local: f64,
    pub q_nonloc: f64,
    pub q_upper: Option<f64>,
    pub q_upper_swapped: Option<f64>,
    pub site: Site,
    pub eta1: Symbol,
    pub eta2: Symbol,
    pub lambda: Volume,
    pub lambda_n: Volume,
    pub bc: String,
    pub model: DisorderedPotential,
    pub law: SingleSiteLaw,
    pub sigma: SpinConfig,
    pub eta: DisorderConfig,
    pub outer: OuterEstimate,
    pub version: String,
}

impl JointMeasureFinite {
    pub fn new(pot: &DisorderedPotential, lambda_n: &Volume, bc: &BoundaryCondition, law: &SingleSiteLaw) -> Result<Self> {
        if lambda_n.is_empty() {
            return Err(Error::EmptyVolume);
        }
        if lambda_n.dim() != pot.dim() {
            return Err(Error::DimensionMismatch { expected: pot.dim(), got: lambda_n.dim() });
        }
        for s in law.alphabet() {
            pot.accepts(s)?;
        }
        bc.boundary_spins(lambda_n)?;
        Ok(JointMeasureFinite {
            pot: pot.clone(),
            lambda_n: lambda_n.clone(),
            bc: bc.clone(),
            law: law.clone(),
            outer_cap: DEFAULT_OUTER_CAP,
            samples: DEFAULT_OUTER_SAMPLES,
            seed: 0,
        })
    }

    /// Outside disorder is enumerated up to `cap` configurations.
    pub fn with_outer_cap(mut self, cap: f64) -> Self {
        self.outer_cap = cap;
        self
    }

    /// Importance-sampling budget used beyond the enumeration cap.
    pub fn with_sampling(mut self, samples: usize, seed: u64) -> Self {
        self.samples = samples.max(1);
        self.seed = seed;
        self
    }

    pub fn potential(&self) -> &DisorderedPotential {
        &self.pot
    }

    pub fn lambda_n(&self) -> &Volume {
        &self.lambda_n
    }

    pub fn bc(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn law(&self) -> &SingleSiteLaw {
        &self.law
    }

    /// The closure of the volume, where the disorder of `K` lives.
    pub fn disorder_region(&self) -> Result<Volume> {
        closure(&self.lambda_n, 1)
    }

    /// Sites whose disorder actually enters the volume Hamiltonian.
    pub fn disorder_support(&self) -> Volume {
        self.pot.disorder_support(&self.lambda_n, self.bc.is_open())
    }

    /// `IP(eta) mu[eta](sigma)` with `IP` over the closure of the volume.
    pub fn joint_prob(&self, sigma: &SpinConfig, eta: &DisorderConfig) -> Result<f64> {
        let region = self.disorder_region()?;
        let weight = ProductLaw::new(region.clone(), self.law.clone()).weight(&eta.restrict(&region)?)?;
        let sigma = sigma.restrict(&self.lambda_n)?;
        let gibbs = ExactGibbs::new(&self.pot, &self.lambda_n, &self.bc, eta)?;
        Ok(weight * gibbs.prob_config(&sigma)?)
    }

    /// Law of `sigma_x` given everything else: the one-site specification.
    pub fn cond_spin_given_all(&self, x: &Site, sigma: &SpinConfig, eta: &DisorderConfig) -> Result<[f64; 2]> {
        let around = Volume::singleton(x.clone());
        if let Some(s) = closure(&around, 1)?.iter().find(|s| !self.lambda_n.contains(s)) {
            return Err(Error::NotContained(s.clone()));
        }
        one_site_spec(&self.pot, x, &sigma.restrict(&r_boundary(&around, 1)?)?, eta)
    }

    /// Precomputes everything that does not depend on the spin conditioning.
    /// `eta_rest` must cover the disorder support inside `lambda`, except `x`.
    pub fn conditioner(&self, x: &Site, lambda: &Volume, eta_rest: &DisorderConfig) -> Result<DisorderConditioner<'_>> {
        DisorderConditioner::new(self, x, lambda, eta_rest)
    }

    /// `K(eta_x | sigma_{lambda \ x}, eta_{lambda \ x})` by the three-factor
    /// assembly with reference symbol `eta_ref`.
    pub fn cond_disorder_lemma1(
        &self,
        x: &Site,
        lambda: &Volume,
        sigma_rest: &SpinConfig,
        eta_rest: &DisorderConfig,
        eta_ref: &Symbol,
    ) -> Result<DisorderConditional> {
        self.conditioner(x, lambda, eta_rest)?.lemma1(sigma_rest, eta_ref)
    }

    pub fn q_nonloc(
        &self,
        x: &Site,
        lambda: &Volume,
        eta1: &Symbol,
        eta2: &Symbol,
        eta_rest: &DisorderConfig,
        sigma_rest: &SpinConfig,
    ) -> Result<f64> {
        self.conditioner(x, lambda, eta_rest)?.q_nonloc(sigma_rest, eta1, eta2)
    }

    pub fn q_upper(&self, x: &Site, lambda: &Volume, eta1: &Symbol, eta2: &Symbol, eta_rest: &DisorderConfig) -> Result<QUpper> {
        self.conditioner(x, lambda, eta_rest)?.q_upper(eta1, eta2)
    }
}

/// `q_upper` along an increasing family of outer volumes.
#[allow(clippy::too_many_arguments)]
pub fn q_upper_ladder(
    pot: &DisorderedPotential,
    law: &SingleSiteLaw,
    bc: &BoundaryCondition,
    ladder: &[Volume],
    x: &Site,
    lambda: &Volume,
    eta1: &Symbol,
    eta2: &Symbol,
    eta_rest: &DisorderConfig,
) -> Result<Vec<QUpper>> {
    ladder
        .iter()
        .map(|lambda_n| JointMeasureFinite::new(pot, lambda_n, bc, law)?.q_upper(x, lambda, eta1, eta2, eta_rest))
        .collect()
}

/// `(nu(eta1) / nu(eta2)) * E exp(-ΔH_x(eta1, eta2))` under the one-site
/// specification at `eta2`. `eta` must cover the disorder of the terms at `x`
/// (its value at `x` is ignored), `sigma_boundary` the boundary of `x`.
pub fn q_local(
    pot: &DisorderedPotential,
    law: &SingleSiteLaw,
    x: &Site,
    eta1: &Symbol,
    eta2: &Symbol,
    sigma_boundary: &SpinConfig,
    eta: &DisorderConfig,
) -> Result<f64> {
    let nu2 = law.prob_of(eta2)?;
    if nu2 == 0.0 {
        return Err(Error::NullSymbol(eta2.to_string()));
    }
    let nu1 = law.prob_of(eta1)?;
    Ok(nu1 / nu2 * local_expectation(pot, x, eta1, eta2, sigma_boundary, eta, -1.0)?)
}

/// `E exp(sign * ΔH_x(a, b))` under the one-site specification at `b`.
fn local_expectation(
    pot: &DisorderedPotential,
    x: &Site,
    a: &Symbol,
    b: &Symbol,
    sigma_boundary: &SpinConfig,
    eta: &DisorderConfig,
    sign: f64,
) -> Result<f64> {
    let spec = one_site_spec(pot, x, sigma_boundary, &eta.with_site(x, b.clone()))?;
    let mut total = 0.0;
    for (bit, p) in spec.iter().enumerate() {
        let s: Spin = if bit == 1 { 1 } else { -1 };
        let sigma = sigma_boundary.with_site(x, s);
        total += p * (sign * pot.delta_h_x(x, &sigma, a, b, eta)?).exp();
    }
    Ok(total)
}

/// Per-symbol Gibbs data for every outside disorder configuration.
struct Prepared {
    gibbs: ExactGibbs,
    /// Joint law of the sites `ΔH_x` depends on.
    local: Vec<f64>,
    /// Joint law of the window minus `x`, when small enough to tabulate.
    window: Option<Vec<f64>>,
}

/// Conditional-probability machinery for one site, window and inside
/// disorder; spin conditionings and symbol pairs are supplied per call.
pub struct DisorderConditioner<'a> {
    joint: &'a JointMeasureFinite,
    x: Site,
    lambda: Volume,
    inner: DisorderConfig,
    outer: Vec<DisorderConfig>,
    outer_log_weight: Vec<f64>,
    estimate: OuterEstimate,
    delta_sites: Vec<Site>,
    window: Volume,
    prepared: Mutex<Vec<(Symbol, Arc<Vec<Prepared>>)>>,
}

impl<'a> DisorderConditioner<'a> {
    fn new(joint: &'a JointMeasureFinite, x: &Site, lambda: &Volume, eta_rest: &DisorderConfig) -> Result<Self> {
        if let Some(s) = lambda.iter().find(|s| !joint.lambda_n.contains(s)) {
            return Err(Error::NotContained(s.clone()));
        }
        if let Some(s) = closure(&Volume::singleton(x.clone()), 1)?.iter().find(|s| !lambda.contains(s)) {
            return Err(Error::NotContained(s.clone()));
        }
        let support = joint.disorder_support();
        let inner_region = support.intersection(lambda).without(x);
        let inner = eta_rest.restrict(&inner_region)?;
        for (_, s) in inner.iter() {
            joint.pot.accepts(s)?;
        }
        let outer_region = support.difference(lambda);
        let outer_law = ProductLaw::new(outer_region.clone(), joint.law.clone());
        let (outer, outer_log_weight, estimate) = if outer_law.count() <= joint.outer_cap {
            let (configs, weights): (Vec<_>, Vec<_>) = outer_law.enumerate(joint.outer_cap)?.filter(|(_, w)| *w > 0.0).unzip();
            let n = configs.len();
            (configs, weights.iter().map(|w: &f64| w.ln()).collect(), OuterEstimate::Exact { configurations: n })
        } else {
            let configs = outer_law.sample(joint.seed, joint.samples);
            let n = configs.len();
            (configs, vec![0.0; n], OuterEstimate::Sampled { samples: n, seed: joint.seed })
        };
        Ok(DisorderConditioner {
            joint,
            x: x.clone(),
            lambda: lambda.clone(),
            inner,
            outer,
            outer_log_weight,
            estimate,
            delta_sites: joint.pot.delta_h_support(x),
            window: lambda.without(x),
            prepared: Mutex::new(Vec::new()),
        })
    }

    pub fn outer_estimate(&self) -> &OuterEstimate {
        &self.estimate
    }

    /// Outside disorder configurations in enumeration (or sampling) order.
    pub fn outer_configs(&self) -> &[DisorderConfig] {
        &self.outer
    }

    fn full_eta(&self, symbol: &Symbol, outer: &DisorderConfig) -> DisorderConfig {
        self.inner.overlay(outer).with_site(&self.x, symbol.clone())
    }

    fn prepared(&self, symbol: &Symbol) -> Result<Arc<Vec<Prepared>>> {
        if let Some((_, p)) = self.prepared.lock().expect("unpoisoned").iter().find(|(s, _)| s == symbol) {
            return Ok(p.clone());
        }
        self.joint.pot.accepts(symbol)?;
        let j = self.joint;
        let built: Vec<Prepared> = self
            .outer
            .par_iter()
            .map(|o| {
                let gibbs = ExactGibbs::new(&j.pot, &j.lambda_n, &j.bc, &self.full_eta(symbol, o))?;
                let local = gibbs.marginal(&self.delta_sites)?;
                let window = if self.window.len() <= TABULATED_WINDOW {
                    Some(gibbs.marginal(self.window.sites())?)
                } else {
                    None
                };
                Ok(Prepared { gibbs, local, window })
            })
            .collect::<Result<_>>()?;
        let built = Arc::new(built);
        self.prepared.lock().expect("unpoisoned").push((symbol.clone(), built.clone()));
        Ok(built)
    }

    /// `ΔH_x(a, b)` for every assignment of the sites it depends on.
    fn delta_table(&self, a: &Symbol, b: &Symbol) -> Result<Vec<f64>> {
        let j = self.joint;
        let open = j.bc.is_open();
        (0..1usize << self.delta_sites.len())
            .map(|assign| {
                let spin = |s: &Site| -> Result<Spin> {
                    let k = self.delta_sites.iter().position(|t| t == s).ok_or_else(|| Error::MissingSite(s.clone()))?;
                    Ok(if assign >> k & 1 == 1 { 1 } else { -1 })
                };
                j.pot.delta_h_in_volume(&j.lambda_n, open, &self.x, &spin, a, b, &self.inner)
            })
            .collect()
    }

    /// `mu[sym, eta~](exp(sign * ΔH_x(a, b)))` for every outside configuration.
    fn outer_expectations(&self, sym: &Symbol, a: &Symbol, b: &Symbol, sign: f64) -> Result<Vec<f64>> {
        let table = self.delta_table(a, b)?;
        let factors: Vec<f64> = table.iter().map(|d| (sign * d).exp()).collect();
        Ok(self
            .prepared(sym)?
            .iter()
            .map(|p| p.local.iter().zip(&factors).map(|(q, f)| q * f).sum())
            .collect())
    }

    /// Normalized weights `IP(eta~) mu[sym, eta~](sigma_{lambda \ x})`.
    fn outer_weights(&self, sym: &Symbol, sigma_rest: &SpinConfig) -> Result<Vec<f64>> {
        let sigma = sigma_rest.restrict(&self.window)?;
        sigma.validate()?;
        let index = sigma.index() as usize;
        let logs: Vec<f64> = self
            .prepared(sym)?
            .iter()
            .zip(&self.outer_log_weight)
            .map(|(p, lw)| {
                let log_p = match &p.window {
                    Some(t) if t[index] > 1e-250 => t[index].ln(),
                    _ => p.gibbs.log_prob_config(&sigma)?,
                };
                Ok(lw + log_p)
            })
            .collect::<Result<_>>()?;
        let total = log_sum_exp(&logs);
        if total == f64::NEG_INFINITY {
            return Err(Error::Model("spin conditioning has zero probability".into()));
        }
        Ok(logs.iter().map(|l| (l - total).exp()).collect())
    }

    fn boundary_spins(&self, sigma_rest: &SpinConfig) -> Result<SpinConfig> {
        sigma_rest.restrict(&r_boundary(&Volume::singleton(self.x.clone()), 1)?)
    }

    /// The conditional law of `eta_x` over the law's alphabet.
    pub fn lemma1(&self, sigma_rest: &SpinConfig, eta_ref: &Symbol) -> Result<DisorderConditional> {
        let pot = &self.joint.pot;
        let law = &self.joint.law;
        let boundary = self.boundary_spins(sigma_rest)?;
        let weights = self.outer_weights(eta_ref, sigma_rest)?;
        let mut probs = Vec::with_capacity(law.len());
        for (a, nu) in law.alphabet().iter().zip(law.probs()) {
            if *nu == 0.0 {
                probs.push(0.0);
                continue;
            }
            let local = local_expectation(pot, &self.x, a, eta_ref, &boundary, &self.inner, -1.0)?;
            let inner = self.outer_expectations(eta_ref, a, eta_ref, -1.0)?;
            let outer: f64 = weights.iter().zip(&inner).map(|(w, e)| w / e).sum();
            probs.push(nu * local * outer);
        }
        let total: f64 = probs.iter().sum();
        Ok(DisorderConditional {
            alphabet: law.alphabet().to_vec(),
            probs: probs.iter().map(|p| p / total).collect(),
            outer: self.estimate.clone(),
        })
    }

    pub fn q_local(&self, sigma_rest: &SpinConfig, eta1: &Symbol, eta2: &Symbol) -> Result<f64> {
        q_local(&self.joint.pot, &self.joint.law, &self.x, eta1, eta2, &self.boundary_spins(sigma_rest)?, &self.inner)
    }

    /// Outer average, over the outside disorder conditioned at `eta2`, of
    /// `mu[eta1, eta~](exp(ΔH_x(eta1, eta2)))`.
    pub fn q_nonloc(&self, sigma_rest: &SpinConfig, eta1: &Symbol, eta2: &Symbol) -> Result<f64> {
        let weights = self.outer_weights(eta2, sigma_rest)?;
        let inner = self.outer_expectations(eta1, eta1, eta2, 1.0)?;
        Ok(weights.iter().zip(&inner).map(|(w, e)| w * e).sum())
    }

    /// Largest (and smallest) `mu[eta1, eta~](exp(ΔH_x(eta1, eta2)))` over
    /// the outside configurations.
    pub fn q_upper(&self, eta1: &Symbol, eta2: &Symbol) -> Result<QUpper> {
        let values = self.outer_expectations(eta1, eta1, eta2, 1.0)?;
        let mut argmax = 0;
        for (i, v) in values.iter().enumerate() {
            if *v > values[argmax] {
                argmax = i;
            }
        }
        Ok(QUpper {
            value: values[argmax],
            argmax,
            maximizer: self.outer[argmax].clone(),
            minimum: values.iter().cloned().fold(f64::INFINITY, f64::min),
            lambda_n: self.joint.lambda_n.clone(),
            outer: self.estimate.clone(),
        })
    }

    pub fn report(&self, sigma_rest: &SpinConfig, eta1: &Symbol, eta2: &Symbol) -> Result<QReport> {
        let j = self.joint;
        Ok(QReport {
            q_local: self.q_local(sigma_rest, eta1, eta2)?,
            q_nonloc: self.q_nonloc(sigma_rest, eta1, eta2)?,
            q_upper: Some(self.q_upper(eta1, eta2)?.value),
            q_upper_swapped: Some(self.q_upper(eta2, eta1)?.value),
            site: self.x.clone(),
            eta1: eta1.clone(),
            eta2: eta2.clone(),
            lambda: self.lambda.clone(),
            lambda_n: j.lambda_n.clone(),
            bc: j.bc.label().to_string(),
            model: j.pot.clone(),
            law: j.law.clone(),
            sigma: sigma_rest.restrict(&self.window)?,
            eta: self.inner.clone(),
            outer: self.estimate.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}
