//! Random-field probes: plus/minus magnetization gaps and the upper-envelope
//! badness gap.

use serde::Serialize;

use crate::disorder::SingleSiteLaw;
use crate::error::{Error, Result};
use crate::gibbs::{magnetization_pm, BoundaryCondition, ExactGibbs};
use crate::joint::JointMeasureFinite;
use crate::lattice::{grow, Site, Volume};
use crate::model::{DisorderConfig, DisorderedPotential, ModelKind, Symbol};

use super::{check_ladder, par_map, GoodnessScan, Thresholds};

const MONOTONE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Probe {
    pub m_plus: Vec<f64>,
    pub m_minus: Vec<f64>,
    pub gap: Vec<f64>,
    /// `m_plus` nonincreasing along the ladder.
    pub plus_monotone: bool,
    /// `m_minus` nondecreasing along the ladder.
    pub minus_monotone: bool,
    pub scan: GoodnessScan,
}

fn field_strength(pot: &DisorderedPotential) -> Result<f64> {
    match pot.kind() {
        ModelKind::Rfim { field, .. } => Ok(*field),
        other => Err(Error::Model(format!("random-field probe called with model {}", other.tag()))),
    }
}

/// `mu^±_V[eta](s_x = 1)` along the ladder and their difference.
pub fn rfim_theorem1_probe(
    pot: &DisorderedPotential,
    eta: &DisorderConfig,
    x: &Site,
    ladder: &[Volume],
    th: &Thresholds,
) -> Result<Theorem1Probe> {
    field_strength(pot)?;
    check_ladder(ladder)?;
    let pm = par_map(ladder, |v| magnetization_pm(pot, eta, v, x))?;
    let m_plus: Vec<f64> = pm.iter().map(|p| p.0).collect();
    let m_minus: Vec<f64> = pm.iter().map(|p| p.1).collect();
    let gap: Vec<f64> = pm.iter().map(|p| p.0 - p.1).collect();
    let plus_monotone = m_plus.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL);
    let minus_monotone = m_minus.windows(2).all(|w| w[1] + MONOTONE_TOL >= w[0]);
    let scan = GoodnessScan::new("rfim_theorem1", x, None, ladder.to_vec(), gap.clone(), *th);
    Ok(Theorem1Probe { m_plus, m_minus, gap, plus_monotone, minus_monotone, scan })
}

/// Both sides of `e^{h(a-b)} (1/m(a) - 1) = e^{h(b-a)} (1/m(b) - 1)` where
/// `m(s) = mu_Λ^{bc}[eta_x = s, eta_{Λ\x}](s_x = 1)`.
pub fn rfim_relation_sides(
    pot: &DisorderedPotential,
    eta: &DisorderConfig,
    lambda: &Volume,
    bc: &BoundaryCondition,
    x: &Site,
    a: &Symbol,
    b: &Symbol,
) -> Result<(f64, f64)> {
    let h = field_strength(pot)?;
    let (va, vb) = match (a.as_scalar(), b.as_scalar()) {
        (Some(p), Some(q)) => (p, q),
        _ => return Err(Error::InvalidSymbol(format!("{a} / {b} for a random-field model"))),
    };
    // 1/m - 1 as the odds P(-1)/P(+1), without cancellation near m = 1
    let odds = |s: &Symbol| -> Result<f64> {
        let m = ExactGibbs::new(pot, lambda, bc, &eta.with_site(x, s.clone()))?.marginal(std::slice::from_ref(x))?;
        Ok(m[0] / m[1])
    };
    let lhs = (h * (va - vb)).exp() * odds(a)?;
    let rhs = (h * (vb - va)).exp() * odds(b)?;
    Ok((lhs, rhs))
}

#[derive(Clone, Debug, Serialize)]
pub struct BadnessPoint {
    pub volume: Volume,
    pub lambda: Volume,
    pub lambda_n: Volume,
    /// `q_upper(eta2, eta1)` with the plus annulus.
    pub q_upper_swapped: f64,
    /// `q_upper(eta1, eta2)` with the minus annulus.
    pub q_upper: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BadnessGap {
    pub points: Vec<BadnessPoint>,
    pub scan: GoodnessScan,
}

/// `1 / q_upper(eta2, eta1; plus annulus) - q_upper(eta1, eta2; minus annulus)`
/// per inner volume `V`, with `Λ = V` grown by `annulus_width` and the outer
/// volume `Λ` grown by `outer_width`. The annulus symbols fill `Λ \ V`.
#[allow(clippy::too_many_arguments)]
pub fn badness_gap(
    pot: &DisorderedPotential,
    law: &SingleSiteLaw,
    bc: &BoundaryCondition,
    base: &DisorderConfig,
    x: &Site,
    eta1: &Symbol,
    eta2: &Symbol,
    ladder: &[Volume],
    annulus_width: u32,
    outer_width: u32,
    plus_annulus: &Symbol,
    minus_annulus: &Symbol,
    th: &Thresholds,
) -> Result<BadnessGap> {
    check_ladder(ladder)?;
    let points = par_map(ladder, |v| {
        let lambda = grow(v, annulus_width)?;
        let lambda_n = grow(&lambda, outer_width)?;
        let ring = lambda.difference(v);
        let inside = base.restrict(v)?;
        let plus = DisorderConfig::constant(&ring, plus_annulus.clone()).overlay(&inside);
        let minus = DisorderConfig::constant(&ring, minus_annulus.clone()).overlay(&inside);
        let joint = JointMeasureFinite::new(pot, &lambda_n, bc, law)?;
        let q_upper_swapped = joint.q_upper(x, &lambda, eta2, eta1, &plus)?.value;
        let q_upper = joint.q_upper(x, &lambda, eta1, eta2, &minus)?.value;
        Ok(BadnessPoint {
            volume: v.clone(),
            lambda,
            lambda_n,
            q_upper_swapped,
            q_upper,
            gap: 1.0 / q_upper_swapped - q_upper,
        })
    })?;
    let gaps: Vec<f64> = points.iter().map(|p| p.gap.max(0.0)).collect();
    let scan = GoodnessScan::new("badness_gap", x, Some((eta1.clone(), eta2.clone())), ladder.to_vec(), gaps, *th);
    Ok(BadnessGap { points, scan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::logistic;

    fn s(c: &[i64]) -> Site {
        Site::new(c.to_vec())
    }

    #[test]
    fn strong_field_dominates_at_one_site() {
        let pot = DisorderedPotential::rfim(2, 1.0, 30.0).unwrap();
        let x = s(&[0, 0]);
        let v = Volume::singleton(x.clone());
        let eta = DisorderConfig::constant(&v, Symbol::scalar(1.0));
        let p = rfim_theorem1_probe(&pot, &eta, &x, &[v], &Thresholds::default()).unwrap();
        assert!(p.gap[0] < 1e-20);
        assert!((p.gap[0] - (logistic(2.0 * 34.0) - logistic(2.0 * 26.0))).abs() < 1e-15);
    }

    #[test]
    fn relation_holds_on_a_small_box() {
        let pot = DisorderedPotential::rfim(2, 0.9, 0.7).unwrap();
        let lam = Volume::cube(2, 0, 2);
        let x = s(&[1, 1]);
        let eta = DisorderConfig::from_fn(&lam, |y| Symbol::scalar(if y.coords()[0] == 0 { -1.0 } else { 1.0 }));
        let (a, b) = rfim_relation_sides(&pot, &eta, &lam, &BoundaryCondition::Plus, &x, &Symbol::scalar(1.0), &Symbol::scalar(-1.0))
            .unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn equal_symbols_give_no_gap() {
        let pot = DisorderedPotential::rfim(1, 1.0, 1.0).unwrap();
        let law = SingleSiteLaw::bernoulli_pm(0.5).unwrap();
        let x = s(&[0]);
        let ladder = [Volume::cube(1, -1, 1), Volume::cube(1, -2, 2)];
        let base = DisorderConfig::constant(&Volume::cube(1, -2, 2), Symbol::scalar(1.0));
        let one = Symbol::scalar(1.0);
        let g = badness_gap(
            &pot,
            &law,
            &BoundaryCondition::Plus,
            &base,
            &x,
            &one,
            &one,
            &ladder,
            1,
            0,
            &one,
            &Symbol::scalar(-1.0),
            &Thresholds::default(),
        )
        .unwrap();
        assert!(g.points.iter().all(|p| p.gap.abs() < 1e-12));
    }

    #[test]
    fn non_random_field_models_are_rejected() {
        let pot = DisorderedPotential::grising(2, 1.0).unwrap();
        let v = Volume::cube(2, -1, 1);
        let eta = DisorderConfig::constant(&v, Symbol::scalar(1.0));
        assert!(rfim_theorem1_probe(&pot, &eta, &s(&[0, 0]), &[v], &Thresholds::default()).is_err());
    }
}
