//! Dynamic audit of confirmed contract executions.
//!
//! Mining replays each confirmed block from its historical pre-state, so the
//! traces analysed are regenerated rather than trusted from storage.
//! Filtering and querying are pure per trace; order-dependency checks run
//! on private state copies.

pub mod category;
pub mod detect;
pub mod query;
pub mod tod;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use category::{categorize, filter_trace, CategorizedEvent, CategorizedTrace, TraceCategory};
pub use detect::{detect, export_reports, Classifier, RuleClassifier, UnknownClass, VulnClass, VulnerabilityReport};
pub use query::{query_abnormal, AbnormalExecution, QueryId, SiblingWrites};
pub use tod::{order_dependency_check, InvalidTx};

use crate::ledger::{ChainSnapshot, TxKind};
use crate::types::{Address, TxHash};
use crate::vm::{BlockContext, Trace, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuditError {
    #[error("contract {0} was never deployed")]
    UnknownContract(Address),
    #[error(transparent)]
    InvalidTx(#[from] InvalidTx),
}

/// A replayed trace with its position in the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinedTrace {
    pub height: u64,
    pub index: usize,
    pub trace: Trace,
}

fn involves(t: &Trace, contract: &Address) -> bool {
    t.root_contract == *contract || t.touched.contains(contract)
}

fn was_deployed(snap: &ChainSnapshot, contract: &Address) -> bool {
    snap.state().contract(contract).is_some()
        || snap.blocks().iter().flat_map(|b| &b.transactions).any(|tx| {
            tx.kind == TxKind::ContractCreation
                && snap.receipt(&tx.hash).and_then(|r| r.contract_address) == Some(*contract)
        })
}

/// Replays calls only; creations run no code.
fn replay_from(snap: &ChainSnapshot, from_height: u64, mut f: impl FnMut(MinedTrace)) {
    for h in from_height.max(1)..=snap.height() {
        let executions = snap.replay_block(h).expect("height within chain");
        let txs = &snap.blocks()[h as usize].transactions;
        for (index, ex) in executions.into_iter().enumerate() {
            if txs[index].kind == TxKind::ContractCall {
                f(MinedTrace { height: h, index, trace: ex.trace });
            }
        }
    }
}

/// Traces of every confirmed call that ran `contract`'s code or targeted it,
/// from `from_height` on, in chain order.
pub fn mine_traces(snap: &ChainSnapshot, contract: &Address, from_height: u64) -> Result<Vec<MinedTrace>, AuditError> {
    if !was_deployed(snap, contract) {
        return Err(AuditError::UnknownContract(*contract));
    }
    let mut out = Vec::new();
    replay_from(snap, from_height, |m| {
        if involves(&m.trace, contract) {
            out.push(m);
        }
    });
    Ok(out)
}

/// A standing subscription: each poll yields traces from blocks accepted
/// since the previous poll.
#[derive(Debug, Clone)]
pub struct TraceMiner {
    contract: Address,
    next_height: u64,
}

impl TraceMiner {
    pub fn subscribe(snap: &ChainSnapshot, contract: Address, from_height: u64) -> Result<Self, AuditError> {
        if !was_deployed(snap, &contract) {
            return Err(AuditError::UnknownContract(contract));
        }
        Ok(TraceMiner { contract, next_height: from_height.max(1) })
    }

    pub fn poll(&mut self, snap: &ChainSnapshot) -> Vec<MinedTrace> {
        let mut out = Vec::new();
        if self.next_height > snap.height() {
            return out;
        }
        replay_from(snap, self.next_height, |m| {
            if involves(&m.trace, &self.contract) {
                out.push(m);
            }
        });
        self.next_height = snap.height() + 1;
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub reports: Vec<VulnerabilityReport>,
    /// Every query match, confirmed or not, in chain order.
    pub abnormal: Vec<AbnormalExecution>,
    pub traces_mined: usize,
}

impl AuditOutcome {
    pub fn reports_for(&self, contract: &Address) -> impl Iterator<Item = &VulnerabilityReport> {
        let c = *contract;
        self.reports.iter().filter(move |r| r.contract == c)
    }
}

/// Audits the chain from `from_height`, optionally restricted to transactions
/// whose root contract is in `only`. Reports are ordered by contract, then
/// class.
pub fn audit_chain(
    snap: &ChainSnapshot,
    from_height: u64,
    only: Option<&[Address]>,
    classifier: &dyn Classifier,
) -> AuditOutcome {
    let mut per_contract: BTreeMap<Address, Vec<(CategorizedTrace, Vec<AbnormalExecution>)>> = BTreeMap::new();
    let mut positions: HashMap<TxHash, (u64, usize)> = HashMap::new();
    let mut outcome = AuditOutcome::default();

    let mut block: Vec<(usize, CategorizedTrace)> = Vec::new();
    let flush = |block: &mut Vec<(usize, CategorizedTrace)>, per: &mut BTreeMap<_, Vec<_>>, out: &mut AuditOutcome| {
        let writes: Vec<(Address, SiblingWrites)> = block
            .iter()
            .map(|(_, ct)| (ct.contract, SiblingWrites { tx_hash: ct.tx_hash, keys: query::root_write_keys(ct) }))
            .collect();
        for (_, ct) in block.drain(..) {
            let siblings: Vec<SiblingWrites> =
                writes.iter().filter(|(c, _)| *c == ct.contract).map(|(_, s)| s.clone()).collect();
            let ab = query_abnormal(&ct, &siblings);
            out.abnormal.extend(ab.iter().cloned());
            per.entry(ct.contract).or_default().push((ct, ab));
        }
    };
    let mut current = None;
    replay_from(snap, from_height, |m| {
        if current != Some(m.height) {
            flush(&mut block, &mut per_contract, &mut outcome);
            current = Some(m.height);
        }
        if only.is_some_and(|o| !o.contains(&m.trace.root_contract)) {
            return;
        }
        outcome.traces_mined += 1;
        positions.insert(m.trace.tx_hash, (m.height, m.index));
        block.push((m.index, filter_trace(&m.trace)));
    });
    flush(&mut block, &mut per_contract, &mut outcome);

    let mut checked: HashMap<(TxHash, TxHash), bool> = HashMap::new();
    let mut pre_states: HashMap<(u64, usize), Option<WorldState>> = HashMap::new();
    let mut confirm = |a: &TxHash, b: &TxHash| -> bool {
        let key = if a < b { (*a, *b) } else { (*b, *a) };
        if let Some(&v) = checked.get(&key) {
            return v;
        }
        let (Some(&(ha, ia)), Some(&(hb, ib))) = (positions.get(a), positions.get(b)) else {
            return false;
        };
        if ha != hb {
            return false;
        }
        let at = (ha, ia.min(ib));
        let Some(pre) = pre_states.entry(at).or_insert_with(|| snap.state_at(at.0, at.1)) else {
            return false;
        };
        let block = &snap.blocks()[ha as usize];
        let ctx = BlockContext { timestamp: block.timestamp, height: ha };
        let (ta, tb) = (&block.transactions[ia], &block.transactions[ib]);
        let v = order_dependency_check(pre, ta, tb, &ctx, snap.vm_config()).unwrap_or(false);
        checked.insert(key, v);
        v
    };
    for (contract, items) in &per_contract {
        outcome.reports.extend(detect(*contract, items, classifier, &mut confirm));
    }
    outcome
}

/// Reports for one contract, from `from_height` on.
pub fn audit_contract(
    snap: &ChainSnapshot,
    contract: &Address,
    from_height: u64,
    classifier: &dyn Classifier,
) -> Result<Vec<VulnerabilityReport>, AuditError> {
    if !was_deployed(snap, contract) {
        return Err(AuditError::UnknownContract(*contract));
    }
    Ok(audit_chain(snap, from_height, Some(std::slice::from_ref(contract)), classifier).reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{encode_words, Ledger, LedgerConfig, Transaction};
    use crate::vm::{Asm, Mnemonic::*};

    #[test]
    fn mining_in_chain_order_and_live() {
        let mut l = Ledger::new(LedgerConfig::default()).unwrap();
        let u = Address::from_label("u");
        let c = l.deploy_contract(u, Asm::new().op(Sstore).op(Stop).assemble(), 10).unwrap().contract_address.unwrap();
        let mut hashes = Vec::new();
        for i in 0..3u64 {
            hashes.push(l.submit_transaction(Transaction::call(u, i + 1, c, encode_words(&[i, 1]), 100)).unwrap());
            l.settle().unwrap();
        }
        let snap = l.snapshot();
        let mined = mine_traces(&snap, &c, 0).unwrap();
        assert_eq!(mined.iter().map(|m| m.trace.tx_hash).collect::<Vec<_>>(), hashes);
        for m in &mined {
            assert_eq!(Some(&m.trace), snap.node().trace(&m.trace.tx_hash));
        }
        assert_eq!(
            mine_traces(&snap, &Address::from_label("nope"), 0),
            Err(AuditError::UnknownContract(Address::from_label("nope")))
        );

        let mut miner = TraceMiner::subscribe(&snap, c, 0).unwrap();
        assert_eq!(miner.poll(&snap).len(), 3);
        assert!(miner.poll(&snap).is_empty());
        let h = l.submit_transaction(Transaction::call(u, 4, c, encode_words(&[9, 1]), 100)).unwrap();
        l.settle().unwrap();
        let got = miner.poll(&l.snapshot());
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].trace.tx_hash, h);
    }

    #[test]
    fn tod_confirmed_from_block_pre_state() {
        let mut l = Ledger::new(LedgerConfig::default()).unwrap();
        let u = Address::from_label("u");
        let c = l.deploy_contract(u, Asm::new().op(Sstore).op(Stop).assemble(), 10).unwrap().contract_address.unwrap();
        let a = Address::from_label("a");
        let b = Address::from_label("b");
        l.submit_transaction(Transaction::call(a, 0, c, encode_words(&[1, 10]), 100)).unwrap();
        l.submit_transaction(Transaction::call(b, 0, c, encode_words(&[1, 20]), 100)).unwrap();
        l.settle().unwrap();
        let out = audit_chain(&l.snapshot(), 0, None, &RuleClassifier);
        assert_eq!(out.reports.len(), 1);
        assert_eq!(out.reports[0].vuln_class, VulnClass::TransactionOrderDependency);
        assert_eq!(out.reports[0].offending_txs.len(), 2);
        assert_eq!(audit_contract(&l.snapshot(), &c, 0, &RuleClassifier).unwrap(), out.reports);
    }
}
