use gibbslab::diagnostics::{
    badness_gap, boundary_variation_bound, decoupling_detect, r_vx, r_vx_scan, theorem2_goodness_scan, verify_decoupling,
    AnnulusFamily, ClusterStatus, Thresholds, Verdict, FINITE_VOLUME_CAVEAT,
};
use gibbslab::disorder::{ProductLaw, SingleSiteLaw};
use gibbslab::error::Error;
use gibbslab::gibbs::{exact_gibbs, BoundaryCondition, GibbsTable};
use gibbslab::lattice::closure;
use gibbslab::{Bond, DisorderConfig, DisorderedPotential, Site, Symbol, Volume};

fn s(c: &[i64]) -> Site {
    Site::new(c.to_vec())
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// `eta` as `r_vx` sees it: the exterior configuration, overwritten by the
/// base on `v` and by `a` at `x`.
fn assembled(ext: &DisorderConfig, base: &DisorderConfig, v: &Volume, x: &Site, a: &Symbol) -> DisorderConfig {
    ext.overlay(&base.restrict(v).unwrap()).with_site(x, a.clone())
}

/// `E exp(ΔH_x(a, b))` from the full table, summing the variation term by
/// term over every configuration.
fn table_expectation(pot: &DisorderedPotential, table: &GibbsTable, x: &Site, a: &Symbol, b: &Symbol) -> f64 {
    let lambda = table.volume().clone();
    let open = table.bc().is_open();
    let outside = match table.bc() {
        BoundaryCondition::Plus => 1,
        BoundaryCondition::Minus => -1,
        _ => 0,
    };
    (0..table.len() as u64)
        .map(|k| {
            let spin = |y: &Site| {
                Ok(match lambda.index_of(y) {
                    Some(i) => if k >> i & 1 == 1 { 1 } else { -1 },
                    None => outside,
                })
            };
            let dh = pot.delta_h_in_volume(&lambda, open, x, &spin, a, b, table.eta()).unwrap();
            table.prob(k) * dh.exp()
        })
        .sum()
}

#[test]
fn continuity_defect_matches_a_brute_force_oracle_for_random_fields() {
    let h = 0.9;
    let pot = DisorderedPotential::rfim(2, 0.8, h).unwrap();
    let law = SingleSiteLaw::bernoulli_pm(0.5).unwrap();
    let x = s(&[0, 0]);
    let v = Volume::cube(2, -1, 1);
    let lambdas = [Volume::cuboid(&[-1, -1], &[2, 2]), Volume::cube(2, -2, 2)];
    let base = ProductLaw::new(v.clone(), law.clone()).sample_one(5, 0);
    let family = AnnulusFamily::new(&law, 6, 9).configs(&closure(&lambdas[1], 1).unwrap());
    let (a, b) = (Symbol::scalar(1.0), Symbol::scalar(-1.0));
    for bc in [BoundaryCondition::Plus, BoundaryCondition::Open] {
        let got = r_vx(&pot, &bc, &base, &x, &a, &b, &v, &lambdas, &family).unwrap();
        for (lambda, value) in lambdas.iter().zip(&got.per_lambda) {
            // E exp(ΔH_x(+1, -1)) = e^{2h} + 2 sinh(-2h) P(s_x = +1)
            let oracle: Vec<f64> = family
                .iter()
                .map(|ext| {
                    let table = exact_gibbs(&pot, lambda, &bc, &assembled(ext, &base, &v, &x, &a)).unwrap();
                    (2.0 * h).exp() + 2.0 * (-2.0 * h).sinh() * table.prob_plus(&x).unwrap()
                })
                .collect();
            let expected = spread(&oracle);
            assert!(expected > 1e-6);
            assert!((value - expected).abs() < 1e-10 * expected.max(1.0), "{value} vs {expected}");
        }
        assert_eq!(got.sup, got.per_lambda.iter().cloned().fold(0.0, f64::max));
        assert_eq!(got.family_size, family.len());
    }
}

#[test]
fn continuity_defect_matches_a_brute_force_oracle_for_random_couplings() {
    let values = [-0.6, 0.4, 1.1];
    let pot = DisorderedPotential::random_coupling(2, &values).unwrap();
    let per_bond = SingleSiteLaw::new(values.iter().map(|v| Symbol::scalar(*v)).collect(), vec![0.3, 0.3, 0.4]).unwrap();
    let law = SingleSiteLaw::tuple_product(&per_bond, 2).unwrap();
    let x = s(&[0, 0]);
    let v = Volume::cube(2, -1, 1);
    let lambda = Volume::cuboid(&[-2, -1], &[2, 2]);
    let base = ProductLaw::new(v.clone(), law.clone()).sample_one(3, 0);
    let family = AnnulusFamily::new(&law, 5, 4).configs(&closure(&lambda, 1).unwrap());
    let (a, b) = (law.alphabet()[8].clone(), law.alphabet()[0].clone());
    let bc = BoundaryCondition::Minus;
    let got = r_vx(&pot, &bc, &base, &x, &a, &b, &v, std::slice::from_ref(&lambda), &family).unwrap();
    let oracle: Vec<f64> = family
        .iter()
        .map(|ext| {
            let table = exact_gibbs(&pot, &lambda, &bc, &assembled(ext, &base, &v, &x, &a)).unwrap();
            table_expectation(&pot, &table, &x, &a, &b)
        })
        .collect();
    let expected = spread(&oracle);
    assert!(expected > 1e-6);
    assert!((got.sup - expected).abs() < 1e-10 * expected.max(1.0), "{} vs {expected}", got.sup);
}

#[test]
fn uncoupled_spins_have_no_continuity_defect() {
    let pot = DisorderedPotential::rfim(1, 0.0, 1.3).unwrap();
    let law = SingleSiteLaw::bernoulli_pm(0.4).unwrap();
    let x = s(&[0]);
    let ladder = [Volume::cube(1, 0, 0), Volume::cube(1, -1, 1), Volume::cube(1, -2, 2)];
    let lambdas = [Volume::cube(1, -4, 4)];
    let base = DisorderConfig::constant(&Volume::cube(1, -2, 2), Symbol::scalar(-1.0));
    let th = Thresholds::default();
    let scan = r_vx_scan(
        &pot,
        &BoundaryCondition::Plus,
        &base,
        &x,
        &Symbol::scalar(1.0),
        &Symbol::scalar(-1.0),
        &ladder,
        &lambdas,
        &AnnulusFamily::new(&law, 8, 1),
        &th,
    )
    .unwrap();
    assert!(scan.values.iter().all(|r| r.abs() < 1e-14), "{:?}", scan.values);
    assert_eq!(scan.verdict, Verdict::EvidenceGood);
    assert_eq!(scan.caveat, FINITE_VOLUME_CAVEAT);
}

#[test]
fn boundary_enumeration_bounds_the_defect() {
    let pot = DisorderedPotential::rfim(2, 1.1, 0.6).unwrap();
    let law = SingleSiteLaw::bernoulli_pm(0.5).unwrap();
    let x = s(&[0, 0]);
    let v = Volume::cube(2, -1, 1);
    let (a, b) = (Symbol::scalar(-1.0), Symbol::scalar(1.0));
    for seed in 0..4 {
        let base = ProductLaw::new(v.clone(), law.clone()).sample_one(seed, 0);
        let lambda = Volume::cube(2, -2, 2);
        let family = AnnulusFamily::new(&law, 4, seed).configs(&closure(&lambda, 1).unwrap());
        let bound = boundary_variation_bound(&pot, &base, &x, &a, &b, &v).unwrap();
        let r = r_vx(&pot, &BoundaryCondition::Plus, &base, &x, &a, &b, &v, &[lambda], &family).unwrap();
        assert!(r.sup <= bound + 1e-12, "{} > {}", r.sup, bound);
    }
}

#[test]
fn opposite_annuli_separate_the_random_field_bounds() {
    let pot = DisorderedPotential::rfim(2, 1.5, 1.0).unwrap();
    let law = SingleSiteLaw::bernoulli_pm(0.5).unwrap();
    let x = s(&[0, 0]);
    let base = DisorderConfig::constant(&Volume::singleton(x.clone()), Symbol::scalar(1.0));
    let (plus, minus) = (Symbol::scalar(1.0), Symbol::scalar(-1.0));
    let run = |plus_annulus: &Symbol, minus_annulus: &Symbol| {
        badness_gap(
            &pot,
            &law,
            &BoundaryCondition::Open,
            &base,
            &x,
            &minus,
            &plus,
            &[Volume::singleton(x.clone())],
            2,
            1,
            plus_annulus,
            minus_annulus,
            &Thresholds::default(),
        )
        .unwrap()
    };
    let g = run(&plus, &minus);
    let p = &g.points[0];
    assert_eq!(p.lambda, Volume::cube(2, -2, 2));
    assert!(p.gap > 0.0, "{p:?}");
    assert_eq!(g.scan.values[0], p.gap);
    // with both annuli equal the two bounds sandwich the same ratio
    let same = run(&plus, &plus);
    assert!(same.points[0].gap <= 1e-12, "{:?}", same.points[0]);
}

#[test]
fn weak_couplings_are_reported_good() {
    let values = [0.0, 0.05];
    let pot = DisorderedPotential::random_coupling(2, &values).unwrap();
    let per_bond = SingleSiteLaw::new(values.iter().map(|v| Symbol::scalar(*v)).collect(), vec![0.5, 0.5]).unwrap();
    let law = SingleSiteLaw::tuple_product(&per_bond, 2).unwrap();
    let bond = Bond::new(s(&[0, 0]), 0).unwrap();
    let ladder = [Volume::cuboid(&[-1, -1], &[2, 1]), Volume::cuboid(&[-2, -2], &[3, 2])];
    let base = DisorderConfig::constant(&closure(&ladder[1], 1).unwrap(), law.alphabet()[3].clone());
    let scan = theorem2_goodness_scan(
        &pot,
        &BoundaryCondition::Plus,
        &base,
        &bond,
        &ladder,
        1,
        &AnnulusFamily::new(&law, 4, 2),
        &Thresholds::default(),
    )
    .unwrap();
    assert!(scan.values.iter().all(|v| *v < 1e-3), "{:?}", scan.values);
    assert!(scan.values[1] <= scan.values[0]);
    assert_eq!(scan.verdict, Verdict::EvidenceGood);
    let rfim = DisorderedPotential::rfim(2, 1.0, 1.0).unwrap();
    let refused = theorem2_goodness_scan(&rfim, &BoundaryCondition::Plus, &base, &bond, &ladder, 1, &AnnulusFamily::new(&law, 1, 0), &Thresholds::default());
    assert!(matches!(refused, Err(Error::Model(_))));
}

#[test]
fn finite_clusters_screen_off_outside_disorder() {
    let pot = DisorderedPotential::grising(2, 1.2).unwrap();
    let law = SingleSiteLaw::occupation(0.35).unwrap();
    let window = Volume::cube(2, -3, 3);
    let alphabet = law.alphabet().to_vec();
    let mut verified = 0;
    for seed in 0..6 {
        let eta = ProductLaw::new(closure(&window, 1).unwrap(), law.clone()).sample_one(seed, 0);
        let report = decoupling_detect(&pot, &eta, &window, &alphabet).unwrap();
        let x = s(&[0, 0]);
        let status = report.status(&x).unwrap().clone();
        let outcome = verify_decoupling(&pot, &law, &eta, &window, &BoundaryCondition::Plus, &x, &status, &alphabet[1], &alphabet[0], 3, seed);
        match status {
            ClusterStatus::Finite { .. } => {
                let dev = outcome.unwrap();
                assert!(dev < 1e-10, "seed {seed}: {dev}");
                verified += 1;
            }
            ClusterStatus::ReachesEdge => assert!(outcome.is_err()),
        }
    }
    assert!(verified > 0);
}
