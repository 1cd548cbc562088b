use gibbslab::disorder::{ProductLaw, SingleSiteLaw};
use gibbslab::gibbs::{exact_gibbs, magnetization_pm, BoundaryCondition};
use gibbslab::lattice::closure;
use gibbslab::mc::{mc_expectation, mc_gap_probe, Dynamics, GapSide, LocalObservable, McConfig};
use gibbslab::{DisorderConfig, DisorderedPotential, Site, Symbol, Volume};

fn s(c: &[i64]) -> Site {
    Site::new(c.to_vec())
}

fn cfg(dynamics: Dynamics, seed: u64) -> McConfig {
    McConfig { sweeps: 20_000, burn_in: 1_000, chains: 4, seed, dynamics, stride: 1 }
}

fn random_fields(v: &Volume, seed: u64) -> DisorderConfig {
    ProductLaw::new(closure(v, 1).unwrap(), SingleSiteLaw::bernoulli_pm(0.5).unwrap()).sample_one(seed, 0)
}

#[test]
fn spin_expectation_matches_enumeration() {
    let pot = DisorderedPotential::rfim(2, 1.0, 1.0).unwrap();
    let v = Volume::cube(2, -1, 1);
    let eta = random_fields(&v, 17);
    let x = s(&[0, 0]);
    let exact = 2.0 * exact_gibbs(&pot, &v, &BoundaryCondition::Open, &eta).unwrap().prob_plus(&x).unwrap() - 1.0;
    for dynamics in [Dynamics::HeatBath, Dynamics::Metropolis] {
        let est = mc_expectation(&pot, &eta, &v, &BoundaryCondition::Open, &LocalObservable::Spin { site: x.clone() }, &cfg(dynamics, 3)).unwrap();
        assert!(est.agrees_with(exact, 3.0), "{dynamics:?}: {} ± {} vs {exact}", est.mean, est.std_error);
        assert!(est.converged);
    }
}

#[test]
fn agreement_of_neighbours_matches_enumeration() {
    let pot = DisorderedPotential::rfim(2, 0.6, 0.8).unwrap();
    let v = Volume::cuboid(&[0, 0], &[3, 2]);
    let eta = random_fields(&v, 4);
    let (a, b) = (s(&[1, 1]), s(&[2, 1]));
    let table = exact_gibbs(&pot, &v, &BoundaryCondition::Minus, &eta).unwrap();
    let m = table.marginal(&[a.clone(), b.clone()]).unwrap();
    let exact = m[0] + m[3];
    let est = mc_expectation(&pot, &eta, &v, &BoundaryCondition::Minus, &LocalObservable::Agree { a, b }, &cfg(Dynamics::Metropolis, 8)).unwrap();
    assert!(est.agrees_with(exact, 3.0), "{} ± {} vs {exact}", est.mean, est.std_error);
}

#[test]
fn symmetric_free_system_is_unmagnetized() {
    let pot = DisorderedPotential::rfim(2, 0.5, 0.0).unwrap();
    let v = Volume::cube(2, -2, 2);
    let eta = DisorderConfig::constant(&closure(&v, 1).unwrap(), Symbol::scalar(0.0));
    let est = mc_expectation(&pot, &eta, &v, &BoundaryCondition::Open, &LocalObservable::Spin { site: s(&[0, 0]) }, &cfg(Dynamics::HeatBath, 5)).unwrap();
    assert!(est.agrees_with(0.0, 3.0), "{} ± {}", est.mean, est.std_error);
}

#[test]
fn coupled_gap_matches_the_exact_gap() {
    let pot = DisorderedPotential::rfim(2, 0.7, 0.5).unwrap();
    let v = Volume::cube(2, -1, 2);
    let eta = random_fields(&v, 21);
    let x = s(&[0, 0]);
    let (plus, minus) = magnetization_pm(&pot, &eta, &v, &x).unwrap();
    let gap = mc_gap_probe(&pot, &eta, &x, &v, &GapSide::plus(), &GapSide::minus(), &cfg(Dynamics::HeatBath, 9)).unwrap();
    assert!(gap.gap.agrees_with(plus - minus, 3.0), "{} ± {} vs {}", gap.gap.mean, gap.gap.std_error, plus - minus);
    assert!(gap.upper.agrees_with(plus, 3.0));
    assert!(gap.lower.agrees_with(minus, 3.0));
}

#[test]
fn identical_sides_have_no_gap() {
    let pot = DisorderedPotential::rfim(2, 1.0, 0.7).unwrap();
    let v = Volume::cube(2, -2, 2);
    let eta = random_fields(&v, 2);
    let ring = closure(&v, 1).unwrap().difference(&Volume::cube(2, -1, 1));
    let side = GapSide { bc: BoundaryCondition::Plus, annulus: Some(DisorderConfig::constant(&ring, Symbol::scalar(1.0))) };
    let short = McConfig { sweeps: 400, burn_in: 40, ..cfg(Dynamics::HeatBath, 1) };
    let gap = mc_gap_probe(&pot, &eta, &s(&[0, 0]), &v, &side, &side, &short).unwrap();
    // identical sides started apart coalesce under shared uniforms, after which the difference is exactly zero
    assert!(gap.gap.mean.abs() < 0.05, "{}", gap.gap.mean);
    assert_eq!(gap.upper.chain_means.len(), 4);
}

#[test]
fn reruns_are_bitwise_identical() {
    let pot = DisorderedPotential::rfim(2, 0.9, 0.4).unwrap();
    let v = Volume::cube(2, -1, 1);
    let eta = random_fields(&v, 6);
    let obs = LocalObservable::Product { sites: vec![s(&[0, 0]), s(&[1, 0])] };
    let short = McConfig { sweeps: 500, burn_in: 50, ..cfg(Dynamics::Metropolis, 77) };
    let a = mc_expectation(&pot, &eta, &v, &BoundaryCondition::Plus, &obs, &short).unwrap();
    let b = mc_expectation(&pot, &eta, &v, &BoundaryCondition::Plus, &obs, &short).unwrap();
    assert_eq!(a, b);
    let other = mc_expectation(&pot, &eta, &v, &BoundaryCondition::Plus, &obs, &McConfig { seed: 78, ..short }).unwrap();
    assert_ne!(a.mean, other.mean);
}
