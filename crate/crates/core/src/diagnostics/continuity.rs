//! Continuity defects of Gibbs expectations with respect to far-away disorder.

use serde::Serialize;

use crate::disorder::{ProductLaw, SingleSiteLaw};
use crate::error::{Error, Result};
use crate::gibbs::{BoundaryCondition, ExactGibbs};
use crate::lattice::{closure, grow, interior, r_boundary, Bond, Site, Volume};
use crate::model::{DisorderConfig, DisorderedPotential, ModelKind, SpinConfig, Symbol};

use super::{check_ladder, delta_expectation, par_map, AnnulusFamily, GoodnessScan, Thresholds, FINITE_VOLUME_CAVEAT};

const BOUNDARY_ENUMERATION_CAP: usize = 20;

#[derive(Clone, Debug, Serialize)]
pub struct RvxResult {
    /// Largest difference over the family, one entry per outer volume.
    pub per_lambda: Vec<f64>,
    pub sup: f64,
    pub family_size: usize,
}

/// `eta` equal to `base` on `v`, to `exterior` elsewhere, and to `symbol` at `x`.
fn assemble(base: &DisorderConfig, v: &Volume, exterior: &DisorderConfig, x: &Site, symbol: &Symbol) -> Result<DisorderConfig> {
    Ok(exterior.overlay(&base.restrict(v)?).with_site(x, symbol.clone()))
}

/// Largest difference of `mu_Λ[eta1, eta_{V\x}, eta±](exp(ΔH_x(eta1, eta2)))`
/// over pairs of exterior configurations from `family`, for each `Λ ⊇ V`.
#[allow(clippy::too_many_arguments)]
pub fn r_vx(
    pot: &DisorderedPotential,
    bc: &BoundaryCondition,
    base: &DisorderConfig,
    x: &Site,
    eta1: &Symbol,
    eta2: &Symbol,
    v: &Volume,
    lambdas: &[Volume],
    family: &[DisorderConfig],
) -> Result<RvxResult> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty exterior family".into()));
    }
    if !v.contains(x) {
        return Err(Error::NotContained(x.clone()));
    }
    let mut per_lambda = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        if let Some(s) = v.iter().find(|s| !lambda.contains(s)) {
            return Err(Error::NotContained(s.clone()));
        }
        let values = par_map(family, |ext| {
            delta_expectation(pot, lambda, bc, &assemble(base, v, ext, x, eta1)?, x, eta1, eta2, 1.0)
        })?;
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        per_lambda.push(max - min);
    }
    let sup = per_lambda.iter().cloned().fold(0.0, f64::max);
    Ok(RvxResult { per_lambda, sup, family_size: family.len() })
}

/// `r_vx` along a ladder of inner volumes, all compared inside the outer
/// volumes of `lambdas` that contain them.
#[allow(clippy::too_many_arguments)]
pub fn r_vx_scan(
    pot: &DisorderedPotential,
    bc: &BoundaryCondition,
    base: &DisorderConfig,
    x: &Site,
    eta1: &Symbol,
    eta2: &Symbol,
    ladder: &[Volume],
    lambdas: &[Volume],
    family: &AnnulusFamily,
    th: &Thresholds,
) -> Result<GoodnessScan> {
    check_ladder(ladder)?;
    let region = lambdas
        .iter()
        .try_fold(Volume::empty(pot.dim()), |acc, l| Ok::<_, Error>(acc.union(&closure(l, 1)?)))?;
    let configs = family.configs(&region);
    let mut values = Vec::with_capacity(ladder.len());
    for v in ladder {
        let outer: Vec<Volume> = lambdas.iter().filter(|l| v.is_subset(l)).cloned().collect();
        if outer.is_empty() {
            return Err(Error::Geometry(format!("no outer volume contains {v:?}")));
        }
        values.push(r_vx(pot, bc, base, x, eta1, eta2, v, &outer, &configs)?.sup);
    }
    Ok(GoodnessScan::new("r_vx", x, Some((eta1.clone(), eta2.clone())), ladder.to_vec(), values, *th))
}

/// Variation of the same expectation over all boundary spins of the interior
/// of `v`, an upper bound for `r_vx` with the inner volume `v`.
pub fn boundary_variation_bound(
    pot: &DisorderedPotential,
    base: &DisorderConfig,
    x: &Site,
    eta1: &Symbol,
    eta2: &Symbol,
    v: &Volume,
) -> Result<f64> {
    let core = interior(v, 1)?;
    if let Some(s) = pot.delta_h_support(x).iter().find(|s| !core.contains(s)) {
        return Err(Error::NotContained(s.clone()));
    }
    let shell = r_boundary(&core, 1)?;
    if shell.len() > BOUNDARY_ENUMERATION_CAP {
        return Err(Error::Infeasible {
            what: "boundary enumeration",
            count: 2f64.powi(shell.len() as i32),
            cap: 2f64.powi(BOUNDARY_ENUMERATION_CAP as i32),
            advice: "use a smaller inner volume",
        });
    }
    let eta = base.restrict(v)?.with_site(x, eta1.clone());
    let indices: Vec<u64> = (0..1u64 << shell.len()).collect();
    let values = par_map(&indices, |&i| {
        let bc = BoundaryCondition::Fixed(SpinConfig::from_index(&shell, i));
        delta_expectation(pot, &core, &bc, &eta, x, eta1, eta2, 1.0)
    })?;
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Defect of `mu_Λ[J_V, J±](s_x = s_y)` over exterior coupling
/// configurations, per inner volume `V`, with `Λ = V` grown by `annulus_width`.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_goodness_scan(
    pot: &DisorderedPotential,
    bc: &BoundaryCondition,
    base: &DisorderConfig,
    bond: &Bond,
    ladder: &[Volume],
    annulus_width: u32,
    family: &AnnulusFamily,
    th: &Thresholds,
) -> Result<GoodnessScan> {
    if !matches!(pot.kind(), ModelKind::RandomCoupling { .. }) {
        return Err(Error::Model("coupling scans need a random-coupling model".into()));
    }
    check_ladder(ladder)?;
    let (x, y) = bond.endpoints();
    let mut values = Vec::with_capacity(ladder.len());
    for v in ladder {
        if !(v.contains(&x) && v.contains(&y)) {
            return Err(Error::Geometry(format!("bond {bond} is not inside {v:?}")));
        }
        let lambda = grow(v, annulus_width)?;
        let region = closure(&lambda, 1)?.difference(v);
        let probs = par_map(&family.configs(&region), |ext| {
            let eta = ext.overlay(&base.restrict(v)?);
            let m = ExactGibbs::new(pot, &lambda, bc, &eta)?.marginal(&[x.clone(), y.clone()])?;
            Ok(m[0] + m[3])
        })?;
        let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = probs.iter().cloned().fold(f64::INFINITY, f64::min);
        values.push(max - min);
    }
    Ok(GoodnessScan::new("theorem2", &x, None, ladder.to_vec(), values, *th))
}

#[derive(Clone, Debug, Serialize)]
pub struct Prop4Point {
    pub volume: Volume,
    pub bar_min: f64,
    pub bar_max: f64,
    pub plain_min: f64,
    pub plain_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Prop4Result {
    pub points: Vec<Prop4Point>,
    /// Smallest barred-branch value at the two largest volumes.
    pub liminf_estimate: f64,
    /// Largest plain-branch value at the two largest volumes.
    pub limsup_estimate: f64,
    pub separated: bool,
    pub tails: usize,
    pub seed: u64,
    pub caveat: String,
}

/// An annulus builder that puts `symbol` on every annulus site.
pub fn constant_annulus(symbol: Symbol) -> impl Fn(&Volume) -> DisorderConfig + Sync {
    move |region: &Volume| DisorderConfig::constant(region, symbol.clone())
}

/// Sampled-tail envelopes of `mu_W[eta1, eta_{V\x}, annulus, eta~](exp(ΔH_x))`
/// for a barred and a plain annulus, `W` being `V` grown by
/// `annulus_width + tail_width` and `eta~` drawn from the product law.
#[allow(clippy::too_many_arguments)]
pub fn prop4_surrogate(
    pot: &DisorderedPotential,
    bc: &BoundaryCondition,
    law: &SingleSiteLaw,
    base: &DisorderConfig,
    x: &Site,
    eta1: &Symbol,
    eta2: &Symbol,
    ladder: &[Volume],
    annulus_width: u32,
    tail_width: u32,
    plain: &(dyn Fn(&Volume) -> DisorderConfig + Sync),
    bar: &(dyn Fn(&Volume) -> DisorderConfig + Sync),
    n_tail: usize,
    seed: u64,
) -> Result<Prop4Result> {
    check_ladder(ladder)?;
    if n_tail == 0 {
        return Err(Error::InvalidParameter("need at least one tail sample".into()));
    }
    let mut points = Vec::with_capacity(ladder.len());
    for (k, v) in ladder.iter().enumerate() {
        let lambda = grow(v, annulus_width)?;
        let window = grow(&lambda, tail_width)?;
        let ring = lambda.difference(v);
        let tails = ProductLaw::new(closure(&window, 1)?.difference(&lambda), law.clone()).sample(seed.wrapping_add(k as u64), n_tail);
        let branch = |annulus: &DisorderConfig| -> Result<(f64, f64)> {
            let values = par_map(&tails, |tail| {
                let eta = assemble(base, v, &tail.overlay(annulus), x, eta1)?;
                delta_expectation(pot, &window, bc, &eta, x, eta1, eta2, 1.0)
            })?;
            Ok((
                values.iter().cloned().fold(f64::INFINITY, f64::min),
                values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ))
        };
        let (bar_min, bar_max) = branch(&bar(&ring))?;
        let (plain_min, plain_max) = branch(&plain(&ring))?;
        points.push(Prop4Point { volume: v.clone(), bar_min, bar_max, plain_min, plain_max });
    }
    let last = &points[points.len().saturating_sub(2)..];
    let liminf_estimate = last.iter().map(|p| p.bar_min).fold(f64::INFINITY, f64::min);
    let limsup_estimate = last.iter().map(|p| p.plain_max).fold(f64::NEG_INFINITY, f64::max);
    Ok(Prop4Result {
        points,
        liminf_estimate,
        limsup_estimate,
        separated: liminf_estimate > limsup_estimate,
        tails: n_tail,
        seed,
        caveat: FINITE_VOLUME_CAVEAT.to_string(),
    })
}
