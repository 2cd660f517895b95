//! Transaction forensics resistant to malleability.
//!
//! Every contract instance owns a cluster of the relief transactions that
//! targeted it. The cluster's forensics hash is
//! `SHA3-256(RLP([deployer, nonce]) ‖ h1 ‖ h2 ‖ …)`. Content is kept off-chain
//! under that hash; the TxFor contract anchors the hash with the deployer,
//! nonce, and content length.

pub mod rlp;
pub mod store;
pub mod txfor;

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha3::{Digest, Sha3_256};

pub use store::{DirStore, MemStore, OffChainStore, StoreError};
pub use txfor::TxForEntry;

use crate::ledger::{ChainSnapshot, Ledger, LedgerError, ReceiptStatus, Transaction, TxKind};
use crate::types::{Address, Hash32, TxHash};
use crate::vm::contract_address;
use rlp::RlpItem;

/// `RLP([deployer, minimal_be(nonce)])`.
pub fn identity_bytes(deployer: &Address, nonce: u64) -> Vec<u8> {
    rlp::encode(&RlpItem::List(vec![RlpItem::bytes(deployer.0.to_vec()), RlpItem::uint(nonce)]))
}

pub fn forensics_hash(deployer: &Address, nonce: u64, content: &[TxHash]) -> Hash32 {
    let mut h = Sha3_256::new();
    h.update(identity_bytes(deployer, nonce));
    for t in content {
        h.update(t.0);
    }
    Hash32(h.finalize().into())
}

/// 4-byte big-endian count, then the hashes.
pub fn encode_blob(content: &[TxHash]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 32 * content.len());
    out.extend_from_slice(&(content.len() as u32).to_be_bytes());
    for h in content {
        out.extend_from_slice(&h.0);
    }
    out
}

pub fn decode_blob(blob: &[u8]) -> Option<Vec<TxHash>> {
    let (count, rest) = blob.split_first_chunk::<4>()?;
    let count = u32::from_be_bytes(*count) as usize;
    if rest.len() != count.checked_mul(32)? {
        return None;
    }
    Some(rest.chunks_exact(32).map(|c| Hash32(c.try_into().unwrap())).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForensicsRecord {
    pub forensics_hash: Hash32,
    pub contract: Address,
    pub deployer: Address,
    pub nonce: u64,
    pub content: Vec<TxHash>,
}

impl ForensicsRecord {
    pub fn new(contract: Address, deployer: Address, nonce: u64, content: Vec<TxHash>) -> Self {
        let forensics_hash = forensics_hash(&deployer, nonce, &content);
        ForensicsRecord { forensics_hash, contract, deployer, nonce, content }
    }

    pub fn is_consistent(&self) -> bool {
        self.forensics_hash == forensics_hash(&self.deployer, self.nonce, &self.content)
            && self.contract == contract_address(&self.deployer, self.nonce)
    }

    pub fn entry(&self) -> TxForEntry {
        TxForEntry {
            forensics_hash: self.forensics_hash,
            deployer: self.deployer,
            nonce: self.nonce,
            content_length: self.content.len() as u64,
        }
    }
}

/// First check that failed during verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum TamperDetail {
    #[error("off-chain blob is not a well-formed hash list")]
    MalformedBlob,
    #[error("blob holds {found} hashes, anchor says {expected}")]
    LengthMismatch { expected: u64, found: u64 },
    #[error("recomputed forensics hash does not match the key")]
    ContentHashMismatch,
    #[error("content names unknown transaction {0}")]
    UnknownTx(TxHash),
    #[error("confirmed transaction {0} no longer hashes to its id")]
    TxHashMismatch(TxHash),
    #[error("transaction {0} did not target this contract instance")]
    ForeignTx(TxHash),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "detail")]
pub enum Verdict {
    Valid,
    Tampered(TamperDetail),
    Unavailable,
}

#[derive(Debug, thiserror::Error)]
pub enum ForensicsError {
    #[error("unknown contract {0}")]
    UnknownContract(Address),
    #[error("transaction {0} is not confirmed")]
    UnconfirmedTx(TxHash),
    #[error("transaction {tx} targets {target:?}, not {contract}")]
    ForeignTx { tx: TxHash, contract: Address, target: Option<Address> },
    #[error("transaction {0} is already in its cluster")]
    AlreadyRecorded(TxHash),
    #[error("forensics hash {0} is already anchored")]
    DuplicateHash(Hash32),
    #[error("record does not match its own hash or contract address")]
    InvalidRecord,
    #[error("forensics hash {0} was never anchored")]
    UnknownHash(Hash32),
    #[error("off-chain content for {0} is missing")]
    MissingContent(Hash32),
    #[error("TxFor contract is not deployed")]
    NotInstalled,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// A TxFor entry confirmed on-chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchoredEntry {
    pub entry: TxForEntry,
    pub anchor_tx: TxHash,
    pub height: u64,
    pub timestamp: u64,
}

/// Index of confirmed TxFor entries, rebuilt purely from chain data.
#[derive(Debug, Clone)]
pub struct TxForRegistry {
    contract: Address,
    entries: BTreeMap<Hash32, AnchoredEntry>,
    synced_height: u64,
}

impl TxForRegistry {
    pub fn new(contract: Address) -> Self {
        TxForRegistry { contract, entries: BTreeMap::new(), synced_height: 0 }
    }

    pub fn contract(&self) -> Address {
        self.contract
    }

    /// Indexes successful TxFor calls in blocks not yet seen.
    pub fn sync(&mut self, snap: &ChainSnapshot) {
        for b in snap.blocks().iter().skip(self.synced_height as usize + 1) {
            for tx in &b.transactions {
                if tx.kind != TxKind::ContractCall || tx.target != Some(self.contract) {
                    continue;
                }
                let ok = snap.receipt(&tx.hash).is_some_and(|r| r.status == ReceiptStatus::Success);
                if let (true, Some(entry)) = (ok, txfor::parse_payload(&tx.payload)) {
                    let anchored =
                        AnchoredEntry { entry, anchor_tx: tx.hash, height: b.height, timestamp: b.timestamp };
                    self.entries.insert(anchored.entry.forensics_hash, anchored);
                }
            }
        }
        self.synced_height = self.synced_height.max(snap.height());
    }

    pub fn get(&self, h: &Hash32) -> Option<&AnchoredEntry> {
        self.entries.get(h)
    }

    pub fn entries(&self) -> impl Iterator<Item = &AnchoredEntry> {
        self.entries.values()
    }
}

/// Clusters, anchoring and verification for one chain.
pub struct Forensics {
    operator: Address,
    registry: TxForRegistry,
    clusters: BTreeMap<Address, ForensicsRecord>,
    recorded: HashSet<TxHash>,
    /// Anchors submitted but not yet seen confirmed, by forensics hash.
    pending: BTreeMap<Hash32, TxHash>,
    store: Arc<dyn OffChainStore>,
}

impl Forensics {
    /// Submits the TxFor deployment; the address is usable right away since
    /// calls to pooled creations are accepted.
    pub fn install(
        ledger: &mut Ledger,
        operator: Address,
        store: Arc<dyn OffChainStore>,
    ) -> Result<Self, ForensicsError> {
        let nonce = ledger.next_nonce(&operator);
        ledger.submit_transaction(Transaction::creation(operator, nonce, txfor::code(), 1))?;
        Ok(Self::attach(operator, contract_address(&operator, nonce), store))
    }

    /// Binds to an existing TxFor contract; call [`Forensics::sync`] to index it.
    pub fn attach(operator: Address, txfor: Address, store: Arc<dyn OffChainStore>) -> Self {
        Forensics {
            operator,
            registry: TxForRegistry::new(txfor),
            clusters: BTreeMap::new(),
            recorded: HashSet::new(),
            pending: BTreeMap::new(),
            store,
        }
    }

    pub fn txfor_address(&self) -> Address {
        self.registry.contract
    }

    pub fn registry(&self) -> &TxForRegistry {
        &self.registry
    }

    pub fn store(&self) -> &Arc<dyn OffChainStore> {
        &self.store
    }

    pub fn record(&self, contract: &Address) -> Option<&ForensicsRecord> {
        self.clusters.get(contract)
    }

    pub fn records(&self) -> impl Iterator<Item = &ForensicsRecord> {
        self.clusters.values()
    }

    pub fn sync(&mut self, snap: &ChainSnapshot) {
        self.registry.sync(snap);
        let reg = &self.registry;
        self.pending.retain(|h, _| reg.get(h).is_none());
    }

    /// Appends a confirmed transaction to its target's cluster.
    pub fn record_forensics(
        &mut self,
        snap: &ChainSnapshot,
        contract: Address,
        tx_hash: TxHash,
    ) -> Result<ForensicsRecord, ForensicsError> {
        let instance = snap.state().contract(&contract).ok_or(ForensicsError::UnknownContract(contract))?;
        let tx = snap.transaction(&tx_hash).ok_or(ForensicsError::UnconfirmedTx(tx_hash))?;
        if tx.target != Some(contract) {
            return Err(ForensicsError::ForeignTx { tx: tx_hash, contract, target: tx.target });
        }
        if !self.recorded.insert(tx_hash) {
            return Err(ForensicsError::AlreadyRecorded(tx_hash));
        }
        let (deployer, nonce) = (instance.deployer, instance.nonce);
        let rec = self
            .clusters
            .entry(contract)
            .or_insert_with(|| ForensicsRecord::new(contract, deployer, nonce, Vec::new()));
        rec.content.push(tx_hash);
        rec.forensics_hash = forensics_hash(&rec.deployer, rec.nonce, &rec.content);
        Ok(rec.clone())
    }

    /// Writes the blob off-chain and submits the TxFor call. The entry counts
    /// as anchored once that call confirms and [`Forensics::sync`] runs.
    pub fn txfor_add(&mut self, ledger: &mut Ledger, record: &ForensicsRecord) -> Result<TxHash, ForensicsError> {
        if !record.is_consistent() {
            return Err(ForensicsError::InvalidRecord);
        }
        let key = record.forensics_hash;
        if self.registry.get(&key).is_some() || self.pending.contains_key(&key) {
            return Err(ForensicsError::DuplicateHash(key));
        }
        self.store.put(&key, &encode_blob(&record.content))?;
        let tx = Transaction::call(
            self.operator,
            ledger.next_nonce(&self.operator),
            self.registry.contract,
            txfor::payload(&record.entry()),
            txfor::CALL_GAS,
        );
        let h = ledger.submit_transaction(tx)?;
        self.pending.insert(key, h);
        Ok(h)
    }

    /// Joins the on-chain entry with its off-chain blob.
    pub fn txfor_query(&self, key: &Hash32) -> Result<ForensicsRecord, ForensicsError> {
        let a = self.registry.get(key).ok_or(ForensicsError::UnknownHash(*key))?;
        let blob = self.store.get(key)?.ok_or(ForensicsError::MissingContent(*key))?;
        let content = decode_blob(&blob).ok_or(ForensicsError::InvalidRecord)?;
        Ok(ForensicsRecord {
            forensics_hash: *key,
            contract: contract_address(&a.entry.deployer, a.entry.nonce),
            deployer: a.entry.deployer,
            nonce: a.entry.nonce,
            content,
        })
    }

    /// Checks, in order: blob well-formed, length matches the anchor, hash
    /// recomputes to the key, and every listed transaction is confirmed,
    /// hashes to its id, and targeted this instance.
    pub fn verify(&self, snap: &ChainSnapshot, key: &Hash32) -> Result<Verdict, ForensicsError> {
        let a = self.registry.get(key).ok_or(ForensicsError::UnknownHash(*key))?;
        let Some(blob) = self.store.get(key)? else {
            return Ok(Verdict::Unavailable);
        };
        Ok(check(snap, &a.entry, key, &blob).map_or(Verdict::Valid, Verdict::Tampered))
    }
}

fn check(snap: &ChainSnapshot, e: &TxForEntry, key: &Hash32, blob: &[u8]) -> Option<TamperDetail> {
    let Some(content) = decode_blob(blob) else {
        return Some(TamperDetail::MalformedBlob);
    };
    if content.len() as u64 != e.content_length {
        return Some(TamperDetail::LengthMismatch { expected: e.content_length, found: content.len() as u64 });
    }
    if forensics_hash(&e.deployer, e.nonce, &content) != *key {
        return Some(TamperDetail::ContentHashMismatch);
    }
    let contract = contract_address(&e.deployer, e.nonce);
    for h in &content {
        let Some(tx) = snap.transaction(h) else {
            return Some(TamperDetail::UnknownTx(*h));
        };
        if tx.compute_hash() != *h {
            return Some(TamperDetail::TxHashMismatch(*h));
        }
        if tx.target != Some(contract) {
            return Some(TamperDetail::ForeignTx(*h));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{encode_words, LedgerConfig};
    use crate::vm::{Asm, Mnemonic::*};

    #[test]
    fn hash_layout() {
        let d = Address::from_label("dep");
        let h1 = Hash32([1; 32]);
        let h2 = Hash32([2; 32]);
        let mut bytes = identity_bytes(&d, 1);
        bytes.extend_from_slice(&h1.0);
        bytes.extend_from_slice(&h2.0);
        assert_eq!(forensics_hash(&d, 1, &[h1, h2]), crate::types::sha3(&bytes));
        assert_eq!(forensics_hash(&d, 1, &[h1, h2]), forensics_hash(&d, 1, &[h1, h2]));
        assert_ne!(forensics_hash(&d, 0, &[h1, h2]), forensics_hash(&d, 1, &[h1, h2]));
        assert_ne!(forensics_hash(&d, 1, &[h2, h1]), forensics_hash(&d, 1, &[h1, h2]));
        // nonce 0 is the empty string
        assert_eq!(identity_bytes(&d, 0)[22..], [0x80]);
    }

    #[test]
    fn blob_roundtrip() {
        let c = vec![Hash32([3; 32]), Hash32([4; 32])];
        let b = encode_blob(&c);
        assert_eq!(&b[..4], &[0, 0, 0, 2]);
        assert_eq!(decode_blob(&b), Some(c));
        assert_eq!(decode_blob(&b[..40]), None);
        assert_eq!(decode_blob(&[0, 0]), None);
        assert_eq!(decode_blob(&[0, 0, 0, 0]), Some(vec![]));
    }

    struct Fixture {
        ledger: Ledger,
        fx: Forensics,
        store: Arc<MemStore>,
        contract: Address,
        other: Address,
        user: Address,
    }

    fn fixture() -> Fixture {
        let mut ledger = Ledger::new(LedgerConfig::default()).unwrap();
        let store = Arc::new(MemStore::new());
        let mut fx = Forensics::install(&mut ledger, Address::from_label("op"), store.clone()).unwrap();
        let user = Address::from_label("user");
        let code = Asm::new().op(Sstore).op(Stop).assemble();
        let contract = ledger.deploy_contract(user, code.clone(), 100).unwrap().contract_address.unwrap();
        let other = ledger.deploy_contract(user, code, 100).unwrap().contract_address.unwrap();
        fx.sync(&ledger.snapshot());
        Fixture { ledger, fx, store, contract, other, user }
    }

    fn call(f: &mut Fixture, target: Address, v: u64) -> TxHash {
        let n = f.ledger.next_nonce(&f.user);
        let h = f.ledger.submit_transaction(Transaction::call(f.user, n, target, encode_words(&[v, 1]), 100)).unwrap();
        f.ledger.settle().unwrap();
        h
    }

    #[test]
    fn record_anchor_query_verify() {
        let mut f = fixture();
        let c = f.contract;
        let t1 = call(&mut f, c, 5);
        let pending =
            f.ledger.submit_transaction(Transaction::call(f.user, 3, f.contract, encode_words(&[6, 1]), 100)).unwrap();
        let snap = f.ledger.snapshot();
        assert!(matches!(f.fx.record_forensics(&snap, f.contract, pending), Err(ForensicsError::UnconfirmedTx(_))));
        let rec = f.fx.record_forensics(&snap, f.contract, t1).unwrap();
        assert_eq!(rec.content, vec![t1]);
        assert!(matches!(f.fx.record_forensics(&snap, f.other, t1), Err(ForensicsError::ForeignTx { .. })));
        assert!(matches!(
            f.fx.record_forensics(&snap, Address::from_label("x"), t1),
            Err(ForensicsError::UnknownContract(_))
        ));

        let mut bad = rec.clone();
        bad.nonce += 1;
        assert!(matches!(f.fx.txfor_add(&mut f.ledger, &bad), Err(ForensicsError::InvalidRecord)));

        f.fx.txfor_add(&mut f.ledger, &rec).unwrap();
        assert!(matches!(f.fx.txfor_add(&mut f.ledger, &rec), Err(ForensicsError::DuplicateHash(_))));
        f.ledger.settle().unwrap();
        let snap = f.ledger.snapshot();
        f.fx.sync(&snap);
        assert!(matches!(f.fx.txfor_add(&mut f.ledger, &rec), Err(ForensicsError::DuplicateHash(_))));
        assert_eq!(f.fx.txfor_query(&rec.forensics_hash).unwrap(), rec);
        assert_eq!(f.fx.verify(&snap, &rec.forensics_hash).unwrap(), Verdict::Valid);
        let storage = snap.state().storage_of(&f.fx.txfor_address()).unwrap();
        assert_eq!(storage.get(&(rec.forensics_hash.to_word() + 2)), Some(&1));

        let unknown = Hash32([0xee; 32]);
        assert!(matches!(f.fx.txfor_query(&unknown), Err(ForensicsError::UnknownHash(_))));
        assert!(matches!(f.fx.verify(&snap, &unknown), Err(ForensicsError::UnknownHash(_))));

        let mut blob = f.store.get(&rec.forensics_hash).unwrap().unwrap();
        blob[10] ^= 0x20;
        f.store.overwrite(&rec.forensics_hash, blob);
        assert_eq!(
            f.fx.verify(&snap, &rec.forensics_hash).unwrap(),
            Verdict::Tampered(TamperDetail::ContentHashMismatch)
        );
        f.store.remove(&rec.forensics_hash).unwrap();
        assert_eq!(f.fx.verify(&snap, &rec.forensics_hash).unwrap(), Verdict::Unavailable);
        assert!(matches!(f.fx.txfor_query(&rec.forensics_hash), Err(ForensicsError::MissingContent(_))));
    }

    #[test]
    fn malleated_hash_is_unknown_tx() {
        let mut f = fixture();
        let c = f.contract;
        let t1 = call(&mut f, c, 5);
        let snap = f.ledger.snapshot();
        let original = snap.transaction(&t1).unwrap().clone();
        // Same semantics, different encoding: extra leading zero byte in the value word.
        let words = rlp::encode(&RlpItem::List(vec![RlpItem::bytes(vec![0, 5]), RlpItem::uint(1)]));
        let mutated = Transaction::call(original.sender, original.nonce, f.contract, words, original.gas_limit);
        assert_ne!(mutated.hash, t1);
        assert_eq!(crate::ledger::call_words(&mutated.payload), crate::ledger::call_words(&original.payload));

        let rec = ForensicsRecord::new(f.contract, f.user, 0, vec![mutated.hash]);
        f.fx.txfor_add(&mut f.ledger, &rec).unwrap();
        f.ledger.settle().unwrap();
        let snap = f.ledger.snapshot();
        f.fx.sync(&snap);
        assert_eq!(
            f.fx.verify(&snap, &rec.forensics_hash).unwrap(),
            Verdict::Tampered(TamperDetail::UnknownTx(mutated.hash))
        );
    }
}
