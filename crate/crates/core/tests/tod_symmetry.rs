mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reliefchain_core::audit::order_dependency_check;
use reliefchain_core::ledger::{encode_words, Transaction};
use reliefchain_core::vm::{deploy, BlockContext, VmConfig, WorldState};
use reliefchain_core::Address;
use support::*;

fn case(seed: u64) -> (bool, bool, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prog = random_prog(&mut rng);
    let pre = random_storage(&mut rng);
    let (wa, wb) = (random_words(&mut rng), random_words(&mut rng));
    let (ga, gb) = (random_gas(&mut rng), random_gas(&mut rng));

    let cfg = VmConfig::default();
    let mut s = WorldState::new();
    let c = deploy(&mut s, Address::from_label("d"), 0, &assemble(&prog), &cfg).unwrap();
    s.contract_mut(&c).unwrap().storage = pre.clone();
    let a = Transaction::call(Address::from_label("a"), 0, c, encode_words(&wa), ga);
    let b = Transaction::call(Address::from_label("b"), 0, c, encode_words(&wb), gb);
    let ctx = BlockContext { timestamp: 100, height: 1 };
    let ab = order_dependency_check(&s, &a, &b, &ctx, &cfg).unwrap();
    let ba = order_dependency_check(&s, &b, &a, &ctx, &cfg).unwrap();
    let oracle = oracle_order_dependent(&pre, &prog, (&wa, ga), (&wb, gb));
    (ab, ba, oracle)
}

proptest! {
    #![proptest_config(support::proptest_config(500))]

    #[test]
    fn symmetric_and_matches_oracle(seed in any::<u64>()) {
        let (ab, ba, oracle) = case(seed);
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(ab, oracle);
    }
}

#[test]
fn oracle_sees_both_outcomes() {
    let results: Vec<bool> = (0..300).map(|s| case(s).2).collect();
    assert!(results.iter().any(|&x| x));
    assert!(results.iter().any(|&x| !x));
}
