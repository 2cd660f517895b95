mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reliefchain_core::relief::{check_plan, run_match};
use support::*;

proptest! {
    #![proptest_config(support::proptest_config(300))]

    #[test]
    fn plans_respect_invariants(seed in any::<u64>()) {
        let sq = random_square(&mut ChaCha8Rng::seed_from_u64(seed), 10);
        let plan = run_match(&sq);
        prop_assert_eq!(plan_invariants(&sq, &plan), Ok(()));
        prop_assert_eq!(check_plan(&sq, &plan), Ok(()));
        prop_assert!(plan.summary.shipped <= optimum_shipped(&sq));
    }

    #[test]
    fn min_cut_matches_brute_force(seed in any::<u64>()) {
        let sq = random_square(&mut ChaCha8Rng::seed_from_u64(seed), 3);
        prop_assert_eq!(optimum_shipped(&sq), brute_force_shipped(&sq));
    }
}

#[test]
fn greedy_reaches_the_optimum_on_most_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 200;
    let hits = (0..n)
        .filter(|_| {
            let sq = random_square(&mut rng, 10);
            run_match(&sq).summary.shipped == optimum_shipped(&sq)
        })
        .count();
    eprintln!("greedy optimal on {hits}/{n}");
    assert!(hits * 100 >= n * 95, "{hits}/{n}");
}
