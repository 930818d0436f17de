use std::collections::BTreeSet;

use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fox_core::coupling::{
    arcoupl_maxflow, arcoupl_min_eps, arcoupl_subset_oracle, random_dist, random_rel,
};
use fox_core::dist::Rat;

fn instance(seed: u64) -> (fox_core::dist::Dist<u64>, fox_core::dist::Dist<u64>, BTreeSet<(u64, u64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu1 = random_dist(&mut rng, 6, 7);
    let mu2 = random_dist(&mut rng, 6, 7);
    let density = rng.gen_range(0.0..0.6);
    let rel = random_rel(&mut rng, 7, density);
    (mu1, mu2, rel)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn three_routes_agree(seed in any::<u64>()) {
        let (mu1, mu2, rel) = instance(seed);
        let lp = arcoupl_min_eps(&mu1, &mu2, &rel);
        prop_assert_eq!(&lp, &arcoupl_subset_oracle(&mu1, &mu2, &rel).unwrap());
        prop_assert_eq!(&lp, &arcoupl_maxflow(&mu1, &mu2, &rel));
    }

    #[test]
    fn eps_within_mass(seed in any::<u64>()) {
        let (mu1, mu2, rel) = instance(seed);
        let e = arcoupl_min_eps(&mu1, &mu2, &rel);
        prop_assert!(e >= Rat::zero());
        prop_assert!(e <= mu1.mass());
    }

    #[test]
    fn larger_relation_needs_less(seed in any::<u64>(), a in 0u64..7, b in 0u64..7) {
        let (mu1, mu2, rel) = instance(seed);
        let mut bigger = rel.clone();
        bigger.insert((a, b));
        prop_assert!(arcoupl_min_eps(&mu1, &mu2, &bigger) <= arcoupl_min_eps(&mu1, &mu2, &rel));
    }

    #[test]
    fn full_relation_pays_only_missing_mass(seed in any::<u64>()) {
        let (mu1, mu2, _) = instance(seed);
        let full: BTreeSet<(u64, u64)> = (0..7).flat_map(|a| (0..7).map(move |b| (a, b))).collect();
        let gap = mu1.mass() - mu2.mass();
        let want = if gap > Rat::zero() { gap } else { Rat::zero() };
        prop_assert_eq!(arcoupl_min_eps(&mu1, &mu2, &full), want);
    }

    #[test]
    fn empty_relation_pays_everything(seed in any::<u64>()) {
        let (mu1, mu2, _) = instance(seed);
        prop_assert_eq!(arcoupl_min_eps(&mu1, &mu2, &BTreeSet::new()), mu1.mass());
    }
}
