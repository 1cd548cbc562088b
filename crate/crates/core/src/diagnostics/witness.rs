//! Explicit discontinuity witnesses built from decoupled half-spaces that a
//! single extra occupied site or bond reconnects.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{BoundaryCondition, ExactGibbs};
use crate::lattice::{closure, Bond, Site, Volume};
use crate::model::{DisorderConfig, DisorderedPotential, Symbol};

#[derive(Clone, Debug, Serialize)]
pub struct GrisingProbe {
    pub coupling: f64,
    pub volume: Volume,
    pub bridge: Site,
    pub upper: Site,
    pub lower: Site,
    /// `<s_upper s_lower>` with the two half-spaces occupied.
    pub corr_without: f64,
    /// Same correlation with the bridge site occupied as well.
    pub corr_with: f64,
}

fn centred_box(v: &Volume) -> Result<(Vec<i64>, Vec<i64>)> {
    let (lo, hi) = v.bounds().ok_or(Error::EmptyVolume)?;
    if !v.is_box() || lo.iter().zip(&hi).any(|(a, b)| a + b != 0) {
        return Err(Error::Geometry("expected a box centred at the origin".into()));
    }
    if v.dim() < 2 {
        return Err(Error::Geometry("half-space constructions need d >= 2".into()));
    }
    Ok((lo, hi))
}

fn unit(dim: usize, axis: usize, step: i64) -> Site {
    Site::origin(dim).shifted(axis, step)
}

/// Free-boundary correlation of the occupied sites above and below the
/// origin for the site-diluted ferromagnet on `v` with an empty base plane,
/// without and with the base-plane site `bridge` occupied.
pub fn grising_probe(coupling: f64, v: &Volume, bridge: &Site) -> Result<GrisingProbe> {
    centred_box(v)?;
    let d = v.dim();
    let last = d - 1;
    if bridge.dim() != d || bridge.coords()[last] != 0 || !v.contains(bridge) {
        return Err(Error::Geometry(format!("bridge {bridge} must lie on the base plane inside the box")));
    }
    if *bridge == Site::origin(d) {
        return Err(Error::Geometry("the bridge cannot be the origin".into()));
    }
    let (upper, lower) = (unit(d, last, 1), unit(d, last, -1));
    for s in [&upper, &lower] {
        if !v.contains(s) {
            return Err(Error::Geometry(format!("box too small: {s} is missing")));
        }
    }
    let pot = DisorderedPotential::grising(d, coupling)?;
    let halves: Vec<Site> = v.iter().filter(|s| s.coords()[last] != 0).cloned().collect();
    let corr = |occupied: Vec<Site>| -> Result<f64> {
        let w = Volume::new(d, occupied)?;
        let eta = DisorderConfig::from_fn(&closure(&w, 1)?, |s| Symbol::scalar(if w.contains(s) { 1.0 } else { 0.0 }));
        let m = ExactGibbs::new(&pot, &w, &BoundaryCondition::Open, &eta)?.marginal(&[upper.clone(), lower.clone()])?;
        Ok(m[0] + m[3] - m[1] - m[2])
    };
    let corr_without = corr(halves.clone())?;
    let mut bridged = halves;
    bridged.push(bridge.clone());
    let corr_with = corr(bridged)?;
    Ok(GrisingProbe { coupling, volume: v.clone(), bridge: bridge.clone(), upper, lower, corr_without, corr_with })
}

#[derive(Clone, Debug, Serialize)]
pub struct RandomBondProbe {
    pub coupling: f64,
    pub window: Volume,
    pub bridge: Bond,
    pub probed: Bond,
    pub probed_coupling: f64,
    /// `P(s_0 = s_{e_d})` with every plane bond empty.
    pub p_without: f64,
    /// Same probability with the bridge bond at full strength.
    pub p_with: f64,
}

/// Free-boundary probability that the two ends of the bond `<0, e_d>` agree
/// when all bonds inside `window` carry `coupling` except those crossing
/// between `x_d = 0` and `x_d = 1`, which are empty; then again with `bridge`
/// (a crossing bond other than `<0, e_d>`) switched on. The probed bond itself
/// carries `probed_coupling`.
pub fn randombond_probe(coupling: f64, window: &Volume, bridge: &Bond, probed_coupling: f64) -> Result<RandomBondProbe> {
    centred_box(window).or_else(|e| if window.is_box() && window.dim() >= 2 { Ok((vec![], vec![])) } else { Err(e) })?;
    let d = window.dim();
    let last = d - 1;
    let crosses = |b: &Bond| b.axis == last && b.base.coords()[last] == 0;
    let probed = Bond::new(Site::origin(d), last)?;
    if !crosses(bridge) || *bridge == probed {
        return Err(Error::Geometry(format!("bridge {bridge} must cross the plane and differ from {probed}")));
    }
    let bonds = window.internal_bonds();
    for b in [bridge, &probed] {
        if !bonds.contains(b) {
            return Err(Error::Geometry(format!("bond {b} is not inside the window")));
        }
    }
    let mut alphabet = vec![0.0, coupling, probed_coupling];
    alphabet.retain(|v| v.is_finite());
    let pot = DisorderedPotential::random_coupling(d, &alphabet)?;
    let agree = |with_bridge: bool| -> Result<f64> {
        let strength = |b: &Bond| -> f64 {
            if *b == probed {
                probed_coupling
            } else if !bonds.contains(b) {
                0.0
            } else if crosses(b) {
                if with_bridge && b == bridge {
                    coupling
                } else {
                    0.0
                }
            } else {
                coupling
            }
        };
        let eta = DisorderConfig::from_fn(&closure(window, 1)?, |s| {
            Symbol::tuple((0..d).map(|axis| strength(&Bond { base: s.clone(), axis })).collect::<Vec<_>>())
        });
        let m = ExactGibbs::new(&pot, window, &BoundaryCondition::Open, &eta)?.marginal(&[probed.base.clone(), probed.head()])?;
        Ok(m[0] + m[3])
    };
    Ok(RandomBondProbe {
        coupling,
        window: window.clone(),
        bridge: bridge.clone(),
        probed: probed.clone(),
        probed_coupling,
        p_without: agree(false)?,
        p_with: agree(true)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RandomBondInvariance {
    pub probes: Vec<RandomBondProbe>,
    /// `logit(p_with) - logit(p_without)` for each probed coupling.
    pub log_odds_gap: Vec<f64>,
    pub spread: f64,
}

/// Repeats [`randombond_probe`] for several values of the probed coupling.
/// Changing one coupling multiplies both odds by the same factor, so the
/// log-odds gap must not move.
pub fn randombond_invariance(coupling: f64, window: &Volume, bridge: &Bond, probed_values: &[f64]) -> Result<RandomBondInvariance> {
    let probes: Vec<RandomBondProbe> =
        probed_values.iter().map(|&j| randombond_probe(coupling, window, bridge, j)).collect::<Result<_>>()?;
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let log_odds_gap: Vec<f64> = probes.iter().map(|p| logit(p.p_with) - logit(p.p_without)).collect();
    let max = log_odds_gap.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = log_odds_gap.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RandomBondInvariance { probes, log_odds_gap, spread: max - min })
}
