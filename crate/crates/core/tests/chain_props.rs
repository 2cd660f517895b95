mod support;

use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;
use reliefchain_core::audit::VulnClass;
use reliefchain_core::forensics::MemStore;
use reliefchain_core::ledger::{encode_words, Block, Ledger, LedgerConfig, Transaction};
use reliefchain_core::scenario::{run_scenario, synthetic, AttackInsertion, RunOutput};
use reliefchain_core::vm::{Asm, Mnemonic::*};
use reliefchain_core::Address;

fn run(seed: u64, with_attacks: bool) -> RunOutput {
    let mut sc = synthetic(seed, 5, 4, 2);
    if with_attacks {
        sc.attack_insertions = VulnClass::ALL.iter().map(|&c| AttackInsertion { vuln_class: c, count: 1 }).collect();
    }
    run_scenario(&sc, Arc::new(MemStore::new())).unwrap()
}

fn integrity(blocks: &[Arc<Block>]) -> Result<(), String> {
    let mut seen = HashSet::new();
    for (h, b) in blocks.iter().enumerate() {
        if b.height != h as u64 || b.compute_hash() != b.block_hash {
            return Err(format!("block {h} hash or height"));
        }
        if h > 0 && (b.parent_hash != blocks[h - 1].block_hash || b.timestamp <= blocks[h - 1].timestamp) {
            return Err(format!("block {h} linkage"));
        }
        for tx in &b.transactions {
            if !seen.insert(tx.hash) {
                return Err(format!("tx {} included twice", tx.hash));
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(support::proptest_config(12))]

    #[test]
    fn scenario_chains_are_sound(seed in any::<u64>()) {
        let out = run(seed, seed % 2 == 0);
        let chain = out.ledger.canonical().chain();
        prop_assert_eq!(integrity(chain), Ok(()));
        for n in out.ledger.full_nodes() {
            prop_assert_eq!(n.tip().block_hash, out.ledger.tip().block_hash);
        }
        for l in out.ledger.light_nodes() {
            prop_assert_eq!(l.headers().len(), chain.len());
            prop_assert_eq!(l.tip_hash(), out.ledger.tip().block_hash);
        }
        let snap = out.ledger.snapshot();
        for b in chain.iter().skip(1) {
            for tx in &b.transactions {
                let recorded = out.ledger.recorded_trace(&tx.hash).unwrap();
                prop_assert_eq!(&snap.replay(&tx.hash).unwrap(), recorded);
            }
        }
    }

    /// Random calls into a key/value contract from several senders, sealed
    /// in random batch sizes.
    #[test]
    fn random_traffic(ops in prop::collection::vec((0usize..3, 0u64..4, 0u64..5, any::<bool>()), 1..40)) {
        let mut l = Ledger::new(LedgerConfig { max_txs: 5, ..LedgerConfig::default() }).unwrap();
        let d = Address::from_label("d");
        let c = l.deploy_contract(d, Asm::new().op(Sstore).op(Stop).assemble(), 1).unwrap().contract_address.unwrap();
        let senders: Vec<Address> = (0..3).map(|i| Address::from_label(&format!("s{i}"))).collect();
        let mut submitted = Vec::new();
        for (who, k, v, seal) in ops {
            let s = senders[who];
            let tx = Transaction::call(s, l.next_nonce(&s), c, encode_words(&[k, v]), 50);
            submitted.push(l.submit_transaction(tx).unwrap());
            if seal {
                l.produce_block().unwrap();
            }
        }
        l.settle().unwrap();
        prop_assert_eq!(integrity(l.canonical().chain()), Ok(()));
        prop_assert!(l.pool().next().is_none());
        for h in &submitted {
            prop_assert!(l.get_receipt(h).is_ok());
        }
        for s in &senders {
            prop_assert_eq!(l.canonical().confirmed_nonce(s), l.next_nonce(s));
        }
    }
}

#[test]
fn identical_inputs_give_identical_chains() {
    let a = run(77, true);
    let b = run(77, true);
    assert_eq!(a.ledger.chain_log(), b.ledger.chain_log());
    assert_eq!(a.report.to_json(), b.report.to_json());
    let c = run(78, true);
    assert_ne!(a.ledger.chain_log(), c.ledger.chain_log());
}
