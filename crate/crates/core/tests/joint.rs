use gibbslab::disorder::SingleSiteLaw;
use gibbslab::gibbs::BoundaryCondition;
use gibbslab::joint::{JointMeasureFinite, OuterEstimate};
use gibbslab::{DisorderConfig, DisorderedPotential, Site, SpinConfig, Symbol, Volume};
use proptest::prelude::*;

fn field_law() -> SingleSiteLaw {
    SingleSiteLaw::new(vec![Symbol::scalar(-1.0), Symbol::scalar(0.5), Symbol::scalar(1.0)], vec![0.3, 0.3, 0.4]).unwrap()
}

struct Setup {
    joint: JointMeasureFinite,
    x: Site,
    lambda: Volume,
    inner: DisorderConfig,
    spins: SpinConfig,
}

fn chain_setup(j: f64, h: f64, inner_bits: u64, spin_bits: u64) -> Setup {
    let pot = DisorderedPotential::rfim(1, j, h).unwrap();
    let law = field_law();
    let joint = JointMeasureFinite::new(&pot, &Volume::cube(1, -4, 4), &BoundaryCondition::Plus, &law).unwrap();
    let x = Site::new(vec![0]);
    let lambda = Volume::cube(1, -2, 2);
    let window = lambda.without(&x);
    let alphabet = law.alphabet();
    let inner = DisorderConfig::new(
        window.clone(),
        (0..window.len()).map(|k| alphabet[(inner_bits >> (2 * k) & 3) as usize % 3].clone()).collect(),
    )
    .unwrap();
    Setup { joint, x, lambda, inner, spins: SpinConfig::from_index(&window, spin_bits) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn odds_factors_are_antisymmetric(j in 0.0f64..1.5, h in 0.0f64..1.5, inner_bits in 0u64..256, spin_bits in 0u64..16) {
        let st = chain_setup(j, h, inner_bits, spin_bits);
        let cond = st.joint.conditioner(&st.x, &st.lambda, &st.inner).unwrap();
        let alphabet = st.joint.law().alphabet().to_vec();
        for a in &alphabet {
            for b in &alphabet {
                let local = cond.q_local(&st.spins, a, b).unwrap() * cond.q_local(&st.spins, b, a).unwrap();
                let nonloc = cond.q_nonloc(&st.spins, a, b).unwrap() * cond.q_nonloc(&st.spins, b, a).unwrap();
                prop_assert!((local - 1.0).abs() < 1e-12, "local {}", local);
                prop_assert!((nonloc - 1.0).abs() < 1e-12, "nonloc {}", nonloc);
                let (up, back) = (cond.q_upper(a, b).unwrap(), cond.q_upper(b, a).unwrap());
                let q = cond.q_nonloc(&st.spins, a, b).unwrap();
                prop_assert!(1.0 / back.value <= q * (1.0 + 1e-12));
                prop_assert!(q <= up.value * (1.0 + 1e-12));
                prop_assert!(up.minimum <= up.value);
            }
        }
    }

    #[test]
    fn conditional_disorder_law_is_normalized(j in 0.0f64..1.5, h in 0.0f64..1.5, inner_bits in 0u64..256, spin_bits in 0u64..16) {
        let st = chain_setup(j, h, inner_bits, spin_bits);
        let alphabet = st.joint.law().alphabet().to_vec();
        let first = st.joint.cond_disorder_lemma1(&st.x, &st.lambda, &st.spins, &st.inner, &alphabet[0]).unwrap();
        let last = st.joint.cond_disorder_lemma1(&st.x, &st.lambda, &st.spins, &st.inner, &alphabet[2]).unwrap();
        prop_assert!((first.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (p, q) in first.probs.iter().zip(&last.probs) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}

#[test]
fn ratio_of_conditionals_factorizes() {
    let st = chain_setup(0.9, 0.6, 0b10_01_00_10, 0b0110);
    let alphabet = st.joint.law().alphabet().to_vec();
    let k = st.joint.cond_disorder_lemma1(&st.x, &st.lambda, &st.spins, &st.inner, &alphabet[1]).unwrap();
    let cond = st.joint.conditioner(&st.x, &st.lambda, &st.inner).unwrap();
    for (i, a) in alphabet.iter().enumerate() {
        for (j, b) in alphabet.iter().enumerate() {
            let q = cond.q_local(&st.spins, a, b).unwrap() * cond.q_nonloc(&st.spins, a, b).unwrap();
            assert!((q - k.probs[i] / k.probs[j]).abs() < 1e-12 * q.max(1.0));
        }
    }
}

#[test]
fn conditioning_window_must_contain_the_neighbourhood() {
    let st = chain_setup(1.0, 1.0, 0, 0);
    let small = Volume::cube(1, 0, 1);
    assert!(st.joint.conditioner(&st.x, &small, &st.inner).is_err());
    assert!(st.joint.conditioner(&st.x, &Volume::cube(1, -6, 6), &st.inner).is_err());
}

#[test]
fn sampled_outer_disorder_tracks_the_enumeration() {
    let st = chain_setup(1.0, 0.8, 0b01_10_00_10, 0b1001);
    let (a, b) = (Symbol::scalar(1.0), Symbol::scalar(-1.0));
    let exact = st.joint.conditioner(&st.x, &st.lambda, &st.inner).unwrap();
    assert!(matches!(exact.outer_estimate(), OuterEstimate::Exact { .. }));
    let sampled_joint = st.joint.clone().with_outer_cap(10.0).with_sampling(4000, 11);
    let sampled = sampled_joint.conditioner(&st.x, &st.lambda, &st.inner).unwrap();
    assert_eq!(sampled.outer_estimate(), &OuterEstimate::Sampled { samples: 4000, seed: 11 });
    let (qe, qs) = (exact.q_nonloc(&st.spins, &a, &b).unwrap(), sampled.q_nonloc(&st.spins, &a, &b).unwrap());
    assert!((qe - qs).abs() < 0.05 * qe, "{qe} {qs}");
    let rerun = st.joint.clone().with_outer_cap(10.0).with_sampling(4000, 11);
    assert_eq!(qs, rerun.conditioner(&st.x, &st.lambda, &st.inner).unwrap().q_nonloc(&st.spins, &a, &b).unwrap());
}
