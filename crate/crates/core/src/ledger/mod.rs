//! Deterministic consortium chain: transaction pool, round-robin leader
//! sealing, two-thirds validity voting among full nodes, and header-only
//! light nodes.
//!
//! All mutation goes through `&mut Ledger`, which is the single writer.
//! [`ChainSnapshot`] is an immutable, cheaply cloned view that can be handed
//! to other threads.

pub mod block;
pub mod node;
pub mod tx;

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use block::{Block, BlockHeader, Receipt, ReceiptStatus};
pub use node::{FullNode, LightNode, NodeRole, RejectReason, TxLocation};
pub use tx::{call_words, encode_words, Transaction, TxKind};

use crate::types::{Address, TxHash};
use crate::vm::{self, contract_address, disassemble, BlockContext, Execution, Trace, VmConfig, WorldState};

pub const DEFAULT_MAX_TXS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LedgerConfig {
    pub full_nodes: usize,
    pub light_nodes: usize,
    pub max_txs: usize,
    pub genesis_timestamp: u64,
    /// Simulated one-way message delay between nodes, in seconds.
    pub hop_delay_s: f64,
    pub vm: VmConfig,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            full_nodes: 4,
            light_nodes: 8,
            max_txs: DEFAULT_MAX_TXS,
            genesis_timestamp: 1_700_000_000,
            hop_delay_s: 0.0,
            vm: VmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("stale nonce for {sender}: expected {expected}, got {got}")]
    StaleNonce { sender: Address, expected: u64, got: u64 },
    #[error("nonce gap for {sender}: expected {expected}, got {got}")]
    NonceGap { sender: Address, expected: u64, got: u64 },
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("call target {0} is not deployed")]
    UnknownTarget(Address),
    #[error("transaction hash does not match its contents")]
    BadTxHash,
    #[error("{got} is not the leader; expected {expected}")]
    NotLeader { expected: Address, got: Address },
    #[error("transaction pool is empty")]
    EmptyPool,
    #[error("unknown or unconfirmed transaction {0}")]
    UnknownTx(TxHash),
    #[error("block rejected: {0}")]
    Rejected(RejectReason),
    #[error("at least one full node is required")]
    NoFullNodes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsensusOutcome {
    Accepted,
    Rejected(RejectReason),
}

pub struct Ledger {
    cfg: LedgerConfig,
    full: Vec<Arc<FullNode>>,
    light: Vec<LightNode>,
    pool: VecDeque<Transaction>,
    pooled: HashSet<TxHash>,
    /// Next nonce per sender counting pooled transactions.
    pool_nonce: HashMap<Address, u64>,
    /// Addresses that pooled creations will occupy.
    pending_creations: HashSet<Address>,
    clock: u64,
}

impl Ledger {
    pub fn new(cfg: LedgerConfig) -> Result<Self, LedgerError> {
        if cfg.full_nodes == 0 {
            return Err(LedgerError::NoFullNodes);
        }
        let genesis = Block::genesis(cfg.genesis_timestamp);
        let full = (0..cfg.full_nodes)
            .map(|i| Arc::new(FullNode::new(Address::from_label(&format!("full-node-{i}")), genesis.clone())))
            .collect();
        let light = (0..cfg.light_nodes)
            .map(|i| LightNode::new(Address::from_label(&format!("light-node-{i}")), &genesis))
            .collect();
        Ok(Ledger {
            clock: cfg.genesis_timestamp,
            cfg,
            full,
            light,
            pool: VecDeque::new(),
            pooled: HashSet::new(),
            pool_nonce: HashMap::new(),
            pending_creations: HashSet::new(),
        })
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.cfg
    }

    /// Node 0's replica; every honest replica holds the same data.
    pub fn canonical(&self) -> &FullNode {
        &self.full[0]
    }

    pub fn full_nodes(&self) -> &[Arc<FullNode>] {
        &self.full
    }

    pub fn light_nodes(&self) -> &[LightNode] {
        &self.light
    }

    pub fn set_faulty(&mut self, node: usize, faulty: bool) {
        Arc::make_mut(&mut self.full[node]).faulty = faulty;
    }

    pub fn tip(&self) -> &Block {
        self.canonical().tip()
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn state(&self) -> &WorldState {
        self.canonical().state()
    }

    pub fn pool(&self) -> impl Iterator<Item = &Transaction> {
        self.pool.iter()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Moves the logical clock forward; it never goes back.
    pub fn advance_clock_to(&mut self, t: u64) {
        self.clock = self.clock.max(t);
    }

    /// The nonce the next submission from `sender` must carry.
    pub fn next_nonce(&self, sender: &Address) -> u64 {
        self.pool_nonce.get(sender).copied().unwrap_or_else(|| self.canonical().confirmed_nonce(sender))
    }

    pub fn leader(&self) -> Address {
        let h = self.height() + 1;
        self.full[(h % self.full.len() as u64) as usize].id
    }

    /// Validates and pools a transaction, FIFO by arrival.
    pub fn submit_transaction(&mut self, tx: Transaction) -> Result<TxHash, LedgerError> {
        if !tx.hash_is_valid() {
            return Err(LedgerError::BadTxHash);
        }
        tx.check_shape().map_err(|r| LedgerError::MalformedPayload(r.into()))?;
        if tx.gas_limit == 0 {
            return Err(LedgerError::MalformedPayload("zero gas limit".into()));
        }
        let expected = self.next_nonce(&tx.sender);
        if tx.nonce < expected || self.pooled.contains(&tx.hash) {
            return Err(LedgerError::StaleNonce { sender: tx.sender, expected, got: tx.nonce });
        }
        if tx.nonce > expected {
            return Err(LedgerError::NonceGap { sender: tx.sender, expected, got: tx.nonce });
        }
        match tx.kind {
            TxKind::ContractCreation => {
                disassemble(&tx.payload).map_err(|e| LedgerError::MalformedPayload(e.to_string()))?;
                self.pending_creations.insert(contract_address(&tx.sender, tx.nonce));
            }
            TxKind::ContractCall => {
                let target = tx.target.expect("shape checked");
                if self.state().contract(&target).is_none() && !self.pending_creations.contains(&target) {
                    return Err(LedgerError::UnknownTarget(target));
                }
            }
        }
        self.pool_nonce.insert(tx.sender, expected + 1);
        self.pooled.insert(tx.hash);
        let hash = tx.hash;
        self.pool.push_back(tx);
        Ok(hash)
    }

    /// Builds the next block from up to `max_txs` pooled transactions in FIFO
    /// order. Transactions stay pooled until the block is accepted.
    pub fn seal_block(&self, proposer: Address, max_txs: usize) -> Result<Block, LedgerError> {
        let leader = self.leader();
        if proposer != leader {
            return Err(LedgerError::NotLeader { expected: leader, got: proposer });
        }
        if self.pool.is_empty() {
            return Err(LedgerError::EmptyPool);
        }
        let tip = self.tip();
        let txs: Vec<Transaction> = self.pool.iter().take(max_txs.max(1)).cloned().collect();
        let timestamp = self.clock.max(tip.timestamp + 1);
        Ok(Block::new(tip.height + 1, tip.block_hash, timestamp, proposer, txs))
    }

    /// Every full node validates; the block is appended everywhere iff at
    /// least two thirds vote valid. Light nodes receive the header.
    pub fn run_consensus(&mut self, block: Block) -> ConsensusOutcome {
        if block.proposer != self.leader() {
            return ConsensusOutcome::Rejected(RejectReason::NotLeader(block.proposer));
        }
        let votes: Vec<Result<node::Validated, RejectReason>> = self
            .full
            .iter()
            .map(|n| {
                let v = n.validate(&block, &self.cfg.vm);
                if n.faulty && v.is_ok() {
                    Err(RejectReason::InsufficientVotes { valid: 0, total: 0 })
                } else {
                    v
                }
            })
            .collect();
        let total = votes.len();
        let valid = votes.iter().filter(|v| v.is_ok()).count();
        if valid * 3 < total * 2 {
            let reason = votes
                .iter()
                .zip(&self.full)
                .find_map(|(v, n)| match v {
                    Err(e) if !n.faulty => Some(e.clone()),
                    _ => None,
                })
                .unwrap_or(RejectReason::InsufficientVotes { valid, total });
            return ConsensusOutcome::Rejected(reason);
        }
        // Nodes that voted against still follow the accepted chain.
        let block = Arc::new(block);
        let mut votes: Vec<Option<node::Validated>> = votes.into_iter().map(Result::ok).collect();
        for (node, vote) in self.full.iter_mut().zip(&mut votes) {
            let validated = match vote.take() {
                Some(v) => v,
                None => node.validate(&block, &self.cfg.vm).expect("replicas hold identical state"),
            };
            Arc::make_mut(node).commit(Arc::clone(&block), validated);
        }
        let header = block.header();
        for l in &mut self.light {
            let ok = l.receive(header.clone());
            debug_assert!(ok, "light node rejected an accepted header");
        }
        for tx in &block.transactions {
            self.pooled.remove(&tx.hash);
            if tx.kind == TxKind::ContractCreation {
                self.pending_creations.remove(&contract_address(&tx.sender, tx.nonce));
            }
        }
        self.pool.retain(|t| !block.transactions.iter().any(|b| b.hash == t.hash));
        let canonical = &self.full[0];
        self.pool_nonce.retain(|a, n| *n > canonical.confirmed_nonce(a));
        ConsensusOutcome::Accepted
    }

    /// Seals with the current leader and runs consensus. `Ok(None)` when
    /// there is nothing to seal.
    pub fn produce_block(&mut self) -> Result<Option<Arc<Block>>, LedgerError> {
        let block = match self.seal_block(self.leader(), self.cfg.max_txs) {
            Ok(b) => b,
            Err(LedgerError::EmptyPool) => return Ok(None),
            Err(e) => return Err(e),
        };
        match self.run_consensus(block) {
            ConsensusOutcome::Accepted => Ok(Some(Arc::clone(self.canonical().chain().last().unwrap()))),
            ConsensusOutcome::Rejected(r) => Err(LedgerError::Rejected(r)),
        }
    }

    /// Produces blocks until the pool is empty.
    pub fn settle(&mut self) -> Result<Vec<Arc<Block>>, LedgerError> {
        let mut out = Vec::new();
        while let Some(b) = self.produce_block()? {
            out.push(b);
        }
        Ok(out)
    }

    /// The creation pipeline end to end: build the creation transaction,
    /// pool it, seal, agree, and return the receipt carrying the address.
    pub fn deploy_contract(
        &mut self,
        deployer: Address,
        code: Vec<u8>,
        gas_limit: u64,
    ) -> Result<Receipt, LedgerError> {
        let tx = Transaction::creation(deployer, self.next_nonce(&deployer), code, gas_limit);
        let hash = self.submit_transaction(tx)?;
        self.settle()?;
        self.get_receipt(&hash)
    }

    pub fn get_receipt(&self, h: &TxHash) -> Result<Receipt, LedgerError> {
        self.canonical().receipt(h).cloned().ok_or(LedgerError::UnknownTx(*h))
    }

    /// The trace recorded when the transaction was confirmed.
    pub fn recorded_trace(&self, h: &TxHash) -> Result<&Trace, LedgerError> {
        self.canonical().trace(h).ok_or(LedgerError::UnknownTx(*h))
    }

    pub fn snapshot(&self) -> ChainSnapshot {
        ChainSnapshot { node: Arc::clone(&self.full[0]), vm: self.cfg.vm.clone() }
    }

    /// Newline-delimited `height\tblock_hash\ttx_count`.
    pub fn chain_log(&self) -> String {
        chain_log(self.canonical().chain().iter().map(|b| b.as_ref()))
    }
}

pub fn chain_log<'a>(blocks: impl IntoIterator<Item = &'a Block>) -> String {
    let mut s = String::new();
    for b in blocks {
        writeln!(s, "{}\t{}\t{}", b.height, b.block_hash, b.transactions.len()).unwrap();
    }
    s
}

/// Read-only view of a confirmed chain, including historical state. Taking
/// one is an `Arc` clone; the ledger copies on its next commit only while a
/// snapshot is still alive.
#[derive(Clone)]
pub struct ChainSnapshot {
    node: Arc<FullNode>,
    vm: VmConfig,
}

impl ChainSnapshot {
    pub fn node(&self) -> &FullNode {
        &self.node
    }

    pub fn vm_config(&self) -> &VmConfig {
        &self.vm
    }

    pub fn blocks(&self) -> &[Arc<Block>] {
        self.node.chain()
    }

    pub fn height(&self) -> u64 {
        self.node.tip().height
    }

    pub fn state(&self) -> &WorldState {
        self.node.state()
    }

    pub fn transaction(&self, h: &TxHash) -> Option<&Transaction> {
        self.node.transaction(h)
    }

    pub fn receipt(&self, h: &TxHash) -> Option<&Receipt> {
        self.node.receipt(h)
    }

    /// State after executing block `height`'s transactions up to, not
    /// including, `index`.
    pub fn state_at(&self, height: u64, index: usize) -> Option<WorldState> {
        let block = self.blocks().get(height as usize)?;
        let mut state = (**self.node.pre_state(height)?).clone();
        let ctx = BlockContext { timestamp: block.timestamp, height };
        for tx in block.transactions.iter().take(index) {
            vm::execute(&mut state, tx, &ctx, &self.vm);
        }
        Some(state)
    }

    /// Re-executes a confirmed transaction against the state its block
    /// position saw.
    pub fn replay(&self, h: &TxHash) -> Result<Trace, LedgerError> {
        let loc = self.node.location(h).ok_or(LedgerError::UnknownTx(*h))?;
        let mut state = self.state_at(loc.height, loc.index).ok_or(LedgerError::UnknownTx(*h))?;
        let block = &self.blocks()[loc.height as usize];
        let ctx = BlockContext { timestamp: block.timestamp, height: loc.height };
        Ok(vm::execute(&mut state, &block.transactions[loc.index], &ctx, &self.vm).trace)
    }

    /// Re-executes every transaction of a block in order.
    pub fn replay_block(&self, height: u64) -> Option<Vec<Execution>> {
        let block = self.blocks().get(height as usize)?;
        let mut state = (**self.node.pre_state(height)?).clone();
        let ctx = BlockContext { timestamp: block.timestamp, height };
        Some(block.transactions.iter().map(|tx| vm::execute(&mut state, tx, &ctx, &self.vm)).collect())
    }
}
