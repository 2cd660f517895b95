use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::block::{Block, BlockHeader, Receipt, ReceiptStatus};
use super::tx::{Transaction, TxKind};
use crate::types::{Address, Hash32, TxHash};
use crate::vm::{self, disassemble, BlockContext, Execution, Outcome, Trace, VmConfig, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    Full,
    Light,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum RejectReason {
    #[error("parent hash or height does not extend the tip")]
    BadParent,
    #[error("timestamp not after parent")]
    BadTimestamp,
    #[error("block or transaction hash does not match contents")]
    BadHash,
    #[error("invalid transaction {tx}: {reason}")]
    InvalidTx { tx: TxHash, reason: String },
    #[error("proposer {0} is not the leader for this height")]
    NotLeader(Address),
    #[error("only {valid} of {total} full nodes voted valid")]
    InsufficientVotes { valid: usize, total: usize },
}

/// Confirmed location of a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxLocation {
    pub height: u64,
    pub index: usize,
}

/// A replica holding blocks, state and per-transaction artifacts.
#[derive(Debug, Clone)]
pub struct FullNode {
    pub id: Address,
    /// Votes against every block when set; used to exercise the vote threshold.
    pub faulty: bool,
    chain: Vec<Arc<Block>>,
    state: Arc<WorldState>,
    /// `post_states[h]` is the world state after block `h`; genesis leaves it empty.
    post_states: Vec<Arc<WorldState>>,
    receipts: HashMap<TxHash, Receipt>,
    traces: HashMap<TxHash, Trace>,
    locations: HashMap<TxHash, TxLocation>,
    nonces: HashMap<Address, u64>,
}

/// What a node computed while validating a block; committing it is cheap.
pub struct Validated {
    state: WorldState,
    executions: Vec<Execution>,
}

impl FullNode {
    pub fn new(id: Address, genesis: Block) -> Self {
        let state = Arc::new(WorldState::new());
        FullNode {
            id,
            faulty: false,
            chain: vec![Arc::new(genesis)],
            post_states: vec![Arc::clone(&state)],
            state,
            receipts: HashMap::new(),
            traces: HashMap::new(),
            locations: HashMap::new(),
            nonces: HashMap::new(),
        }
    }

    pub fn tip(&self) -> &Block {
        self.chain.last().expect("genesis always present")
    }

    pub fn chain(&self) -> &[Arc<Block>] {
        &self.chain
    }

    pub fn state(&self) -> &Arc<WorldState> {
        &self.state
    }

    /// World state as it was before block `height` executed.
    pub fn pre_state(&self, height: u64) -> Option<&Arc<WorldState>> {
        let h = usize::try_from(height).ok()?.checked_sub(1)?;
        self.post_states.get(h)
    }

    pub fn confirmed_nonce(&self, a: &Address) -> u64 {
        self.nonces.get(a).copied().unwrap_or(0)
    }

    pub fn receipt(&self, h: &TxHash) -> Option<&Receipt> {
        self.receipts.get(h)
    }

    pub fn trace(&self, h: &TxHash) -> Option<&Trace> {
        self.traces.get(h)
    }

    pub fn location(&self, h: &TxHash) -> Option<TxLocation> {
        self.locations.get(h).copied()
    }

    pub fn transaction(&self, h: &TxHash) -> Option<&Transaction> {
        let loc = self.location(h)?;
        self.chain.get(loc.height as usize)?.transactions.get(loc.index)
    }

    /// Full validation: linkage, hashes, transaction validity, and execution.
    pub fn validate(&self, block: &Block, vm: &VmConfig) -> Result<Validated, RejectReason> {
        let tip = self.tip();
        if block.height != tip.height + 1 || block.parent_hash != tip.block_hash {
            return Err(RejectReason::BadParent);
        }
        if block.timestamp <= tip.timestamp {
            return Err(RejectReason::BadTimestamp);
        }
        if block.compute_hash() != block.block_hash {
            return Err(RejectReason::BadHash);
        }
        let mut next_nonce: HashMap<Address, u64> = HashMap::new();
        let mut seen = std::collections::HashSet::new();
        for tx in &block.transactions {
            if !tx.hash_is_valid() {
                return Err(RejectReason::BadHash);
            }
            let invalid = |reason: String| RejectReason::InvalidTx { tx: tx.hash, reason };
            if self.locations.contains_key(&tx.hash) || !seen.insert(tx.hash) {
                return Err(invalid("already included".into()));
            }
            tx.check_shape().map_err(|r| invalid(r.into()))?;
            if tx.gas_limit == 0 {
                return Err(invalid("zero gas limit".into()));
            }
            if tx.kind == TxKind::ContractCreation {
                disassemble(&tx.payload).map_err(|e| invalid(e.to_string()))?;
            }
            let expected = next_nonce.entry(tx.sender).or_insert_with(|| self.confirmed_nonce(&tx.sender));
            if tx.nonce != *expected {
                return Err(invalid(format!("nonce {} but expected {}", tx.nonce, expected)));
            }
            *expected += 1;
        }
        let ctx = BlockContext { timestamp: block.timestamp, height: block.height };
        let mut state = (*self.state).clone();
        let executions = block.transactions.iter().map(|tx| vm::execute(&mut state, tx, &ctx, vm)).collect();
        Ok(Validated { state, executions })
    }

    pub fn commit(&mut self, block: Arc<Block>, validated: Validated) {
        debug_assert_eq!(block.height as usize, self.chain.len());
        for (index, (tx, ex)) in block.transactions.iter().zip(validated.executions).enumerate() {
            *self.nonces.entry(tx.sender).or_default() += 1;
            self.locations.insert(tx.hash, TxLocation { height: block.height, index });
            self.receipts.insert(
                tx.hash,
                Receipt {
                    tx_hash: tx.hash,
                    status: match ex.outcome {
                        Outcome::Success => ReceiptStatus::Success,
                        Outcome::Reverted => ReceiptStatus::Reverted,
                    },
                    contract_address: ex.contract_address,
                    block_height: block.height,
                    tx_index: index,
                    gas_used: ex.gas_used,
                    halt: ex.halt,
                },
            );
            self.traces.insert(tx.hash, ex.trace);
        }
        self.state = Arc::new(validated.state);
        self.post_states.push(Arc::clone(&self.state));
        self.chain.push(block);
    }
}

/// Keeps headers only.
#[derive(Debug, Clone)]
pub struct LightNode {
    pub id: Address,
    headers: Vec<BlockHeader>,
}

impl LightNode {
    pub fn new(id: Address, genesis: &Block) -> Self {
        LightNode { id, headers: vec![genesis.header()] }
    }

    pub fn headers(&self) -> &[BlockHeader] {
        &self.headers
    }

    /// Appends a header if it links to the current tip and its hash checks out.
    pub fn receive(&mut self, h: BlockHeader) -> bool {
        let tip = self.headers.last().unwrap();
        let ok = h.height == tip.height + 1 && h.parent_hash == tip.block_hash && h.compute_hash() == h.block_hash;
        if ok {
            self.headers.push(h);
        }
        ok
    }

    pub fn tip_hash(&self) -> Hash32 {
        self.headers.last().unwrap().block_hash
    }
}
