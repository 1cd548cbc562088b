//! Finite-volume probes of good and bad configurations.
//!
//! Goodness and badness are statements about limits over ever larger
//! volumes. Every probe here evaluates a finite ladder of volumes and reports
//! the sequence together with a [`Verdict`] that is a reporting convention,
//! not a proof; [`FINITE_VOLUME_CAVEAT`] is attached to every scan.

pub mod continuity;
pub mod decoupling;
pub mod rfim;
pub mod witness;

use rayon::prelude::*;
use serde::Serialize;

use crate::disorder::{ProductLaw, SingleSiteLaw};
use crate::error::{Error, Result};
use crate::gibbs::{transfer_matrix_1d, BoundaryCondition, ExactGibbs};
use crate::lattice::{Site, Volume};
use crate::model::{DisorderConfig, DisorderedPotential, Spin, Symbol};

pub use continuity::{boundary_variation_bound, prop4_surrogate, r_vx, r_vx_scan, theorem2_goodness_scan, Prop4Result, RvxResult};
pub use decoupling::{decoupling_detect, verify_decoupling, ClusterStatus, DecouplingReport};
pub use rfim::{badness_gap, rfim_relation_sides, rfim_theorem1_probe, BadnessGap, Theorem1Probe};
pub use witness::{grising_probe, randombond_invariance, randombond_probe, GrisingProbe, RandomBondProbe};

pub const FINITE_VOLUME_CAVEAT: &str =
    "finite-volume surrogate: values on a finite ladder of volumes and a finite family of exterior configurations; the good/bad dichotomy is asymptotic and is not decided here";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    EvidenceGood,
    EvidenceBad,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    /// A sequence above `delta` at the two largest volumes counts as badness evidence.
    pub delta: f64,
    /// A last value below `good` counts as goodness evidence.
    pub good: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { delta: 0.05, good: 1e-3 }
    }
}

/// Classifies a nonnegative defect or gap sequence ordered by volume.
///
/// Badness evidence: the two last values exceed `delta` and the sequence
/// changes direction at most once. Goodness evidence: the last value is below
/// `good`, or every value `k` lies below `delta * 2^-k`.
pub fn classify(values: &[f64], th: &Thresholds) -> Verdict {
    let n = values.len();
    if n == 0 {
        return Verdict::Inconclusive;
    }
    let turns = direction_changes(values);
    if n >= 2 && values[n - 1] > th.delta && values[n - 2] > th.delta && turns <= 1 {
        return Verdict::EvidenceBad;
    }
    let decays = values.iter().enumerate().all(|(k, v)| *v < th.delta * 0.5f64.powi(k as i32));
    if values[n - 1] < th.good || decays {
        return Verdict::EvidenceGood;
    }
    Verdict::Inconclusive
}

fn direction_changes(values: &[f64]) -> usize {
    let signs: Vec<f64> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.abs() > 1e-12)
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// A defect or gap sequence over a volume ladder.
#[derive(Clone, Debug, Serialize)]
pub struct GoodnessScan {
    pub probe: String,
    pub site: Site,
    pub symbols: Option<(Symbol, Symbol)>,
    pub ladder: Vec<Volume>,
    pub values: Vec<f64>,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
    pub caveat: String,
}

impl GoodnessScan {
    pub fn new(
        probe: &str,
        site: &Site,
        symbols: Option<(Symbol, Symbol)>,
        ladder: Vec<Volume>,
        values: Vec<f64>,
        thresholds: Thresholds,
    ) -> Self {
        GoodnessScan {
            probe: probe.to_string(),
            site: site.clone(),
            symbols,
            verdict: classify(&values, &thresholds),
            ladder,
            values,
            thresholds,
            caveat: FINITE_VOLUME_CAVEAT.to_string(),
        }
    }
}

/// Rejects ladders that are not strictly increasing.
pub fn check_ladder(ladder: &[Volume]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidParameter("empty volume ladder".into()));
    }
    for w in ladder.windows(2) {
        if !(w[0].is_subset(&w[1]) && w[0].len() < w[1].len()) {
            return Err(Error::InvalidParameter(format!("ladder is not strictly increasing at {:?}", w[1])));
        }
    }
    Ok(())
}

/// The cube of half-width `radius` centred at `x`.
pub fn box_around(x: &Site, radius: i64) -> Volume {
    let lo: Vec<i64> = x.coords().iter().map(|c| c - radius).collect();
    let hi: Vec<i64> = x.coords().iter().map(|c| c + radius).collect();
    Volume::cuboid(&lo, &hi)
}

/// Exterior disorder configurations: every alphabet symbol repeated over the
/// region, followed by `samples` draws from the product law.
#[derive(Clone, Debug, Serialize)]
pub struct AnnulusFamily {
    pub law: SingleSiteLaw,
    pub constants: bool,
    pub extra_constants: Vec<Symbol>,
    pub samples: usize,
    pub seed: u64,
}

impl AnnulusFamily {
    pub fn new(law: &SingleSiteLaw, samples: usize, seed: u64) -> Self {
        AnnulusFamily { law: law.clone(), constants: true, extra_constants: Vec::new(), samples, seed }
    }

    pub fn configs(&self, region: &Volume) -> Vec<DisorderConfig> {
        let mut out = Vec::new();
        if self.constants {
            for s in self.law.alphabet().iter().chain(&self.extra_constants) {
                out.push(DisorderConfig::constant(region, s.clone()));
            }
        }
        out.extend(ProductLaw::new(region.clone(), self.law.clone()).sample(self.seed, self.samples));
        out
    }
}

/// `mu_Λ^{bc}[eta](exp(sign * ΔH_x(a, b)))`; chains use the transfer matrix,
/// everything else the elimination sweep.
#[allow(clippy::too_many_arguments)]
pub fn delta_expectation(
    pot: &DisorderedPotential,
    lambda: &Volume,
    bc: &BoundaryCondition,
    eta: &DisorderConfig,
    x: &Site,
    a: &Symbol,
    b: &Symbol,
    sign: f64,
) -> Result<f64> {
    let sites = pot.delta_h_support(x);
    let on_chain = lambda.dim() == 1 && lambda.is_box() && sites.iter().all(|s| lambda.contains(s));
    if !on_chain {
        return ExactGibbs::new(pot, lambda, bc, eta)?.exp_delta_h(x, a, b, sign);
    }
    let chain = transfer_matrix_1d(pot, lambda, bc, eta)?;
    let first = lambda.index_of(&sites[0]).expect("inside");
    let joint = chain.window(first, sites.len());
    let open = bc.is_open();
    let mut total = 0.0;
    for (assign, p) in joint.iter().enumerate() {
        let spin = |s: &Site| -> Result<Spin> {
            let k = sites.iter().position(|t| t == s).ok_or_else(|| Error::MissingSite(s.clone()))?;
            Ok(if assign >> k & 1 == 1 { 1 } else { -1 })
        };
        total += p * (sign * pot.delta_h_in_volume(lambda, open, x, &spin, a, b, eta)?).exp();
    }
    Ok(total)
}

/// Evaluates `f` on every item in parallel, keeping input order.
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    items.par_iter().map(f).collect()
}
