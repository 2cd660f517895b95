use serde::{Deserialize, Serialize};

use super::tx::Transaction;
use crate::forensics::rlp::{self, RlpItem};
use crate::types::{sha3, Address, Hash32, TxHash};
use crate::vm::VmError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub height: u64,
    pub parent_hash: Hash32,
    pub timestamp: u64,
    pub proposer: Address,
    /// Commitment to the ordered transaction hashes.
    pub tx_root: Hash32,
    pub tx_count: usize,
    pub block_hash: Hash32,
}

impl BlockHeader {
    pub fn compute_hash(&self) -> Hash32 {
        header_hash(self.height, &self.parent_hash, self.timestamp, &self.proposer, &self.tx_root)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub parent_hash: Hash32,
    pub timestamp: u64,
    pub proposer: Address,
    pub transactions: Vec<Transaction>,
    pub block_hash: Hash32,
}

pub fn tx_root<'a>(hashes: impl IntoIterator<Item = &'a TxHash>) -> Hash32 {
    let items = hashes.into_iter().map(|h| RlpItem::bytes(h.0.to_vec())).collect();
    sha3(&rlp::encode(&RlpItem::List(items)))
}

fn header_hash(height: u64, parent: &Hash32, timestamp: u64, proposer: &Address, root: &Hash32) -> Hash32 {
    sha3(&rlp::encode(&RlpItem::List(vec![
        RlpItem::uint(height),
        RlpItem::bytes(parent.0.to_vec()),
        RlpItem::uint(timestamp),
        RlpItem::bytes(proposer.0.to_vec()),
        RlpItem::bytes(root.0.to_vec()),
    ])))
}

impl Block {
    pub fn new(
        height: u64,
        parent_hash: Hash32,
        timestamp: u64,
        proposer: Address,
        transactions: Vec<Transaction>,
    ) -> Self {
        let mut b = Block { height, parent_hash, timestamp, proposer, transactions, block_hash: Hash32::default() };
        b.block_hash = b.compute_hash();
        b
    }

    pub fn genesis(timestamp: u64) -> Self {
        Self::new(0, Hash32::default(), timestamp, Address::default(), Vec::new())
    }

    /// Hash over header fields and the ordered transaction hashes as carried
    /// in the block (not recomputed from bodies).
    pub fn compute_hash(&self) -> Hash32 {
        let root = tx_root(self.transactions.iter().map(|t| &t.hash));
        header_hash(self.height, &self.parent_hash, self.timestamp, &self.proposer, &root)
    }

    pub fn header(&self) -> BlockHeader {
        BlockHeader {
            height: self.height,
            parent_hash: self.parent_hash,
            timestamp: self.timestamp,
            proposer: self.proposer,
            tx_root: tx_root(self.transactions.iter().map(|t| &t.hash)),
            tx_count: self.transactions.len(),
            block_hash: self.block_hash,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReceiptStatus {
    Success,
    Reverted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_hash: TxHash,
    pub status: ReceiptStatus,
    pub contract_address: Option<Address>,
    pub block_height: u64,
    pub tx_index: usize,
    pub gas_used: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halt: Option<VmError>,
}
