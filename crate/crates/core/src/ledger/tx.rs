use serde::{Deserialize, Serialize};

use crate::forensics::rlp::{self, RlpItem};
use crate::types::{sha3, Address, TxHash};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TxKind {
    ContractCreation,
    ContractCall,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub nonce: u64,
    pub kind: TxKind,
    pub target: Option<Address>,
    #[serde(with = "crate::serde_hex")]
    pub payload: Vec<u8>,
    pub gas_limit: u64,
    pub hash: TxHash,
}

impl Transaction {
    pub fn creation(sender: Address, nonce: u64, code: Vec<u8>, gas_limit: u64) -> Self {
        Self::build(sender, nonce, TxKind::ContractCreation, None, code, gas_limit)
    }

    pub fn call(sender: Address, nonce: u64, target: Address, payload: Vec<u8>, gas_limit: u64) -> Self {
        Self::build(sender, nonce, TxKind::ContractCall, Some(target), payload, gas_limit)
    }

    fn build(
        sender: Address,
        nonce: u64,
        kind: TxKind,
        target: Option<Address>,
        payload: Vec<u8>,
        gas_limit: u64,
    ) -> Self {
        let mut tx = Transaction { sender, nonce, kind, target, payload, gas_limit, hash: TxHash::default() };
        tx.hash = tx.compute_hash();
        tx
    }

    /// Canonical RLP of every field except the hash.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let kind = match self.kind {
            TxKind::ContractCreation => 0,
            TxKind::ContractCall => 1,
        };
        rlp::encode(&RlpItem::List(vec![
            RlpItem::bytes(self.sender.0.to_vec()),
            RlpItem::uint(self.nonce),
            RlpItem::uint(kind),
            RlpItem::bytes(self.target.map(|t| t.0.to_vec()).unwrap_or_default()),
            RlpItem::bytes(self.payload.clone()),
            RlpItem::uint(self.gas_limit),
        ]))
    }

    pub fn compute_hash(&self) -> TxHash {
        sha3(&self.signing_bytes())
    }

    pub fn hash_is_valid(&self) -> bool {
        self.hash == self.compute_hash()
    }

    /// Shape check independent of chain state.
    pub fn check_shape(&self) -> Result<(), &'static str> {
        match self.kind {
            TxKind::ContractCreation if self.target.is_some() => Err("creation must not name a target"),
            TxKind::ContractCreation if self.payload.is_empty() => Err("empty creation payload"),
            TxKind::ContractCall if self.target.is_none() => Err("call without target"),
            TxKind::ContractCall if call_words(&self.payload).is_none() => {
                Err("call data is not an RLP list of byte strings")
            }
            _ => Ok(()),
        }
    }
}

/// Call data as machine words: the payload must be an RLP list of byte strings;
/// each string contributes its trailing eight bytes, big-endian.
pub fn call_words(payload: &[u8]) -> Option<Vec<u64>> {
    let item = rlp::decode(payload).ok()?;
    item.as_list()
        .ok()?
        .iter()
        .map(|it| {
            let b = it.as_bytes().ok()?;
            let tail = &b[b.len().saturating_sub(8)..];
            Some(tail.iter().fold(0u64, |acc, &x| (acc << 8) | x as u64))
        })
        .collect()
}

/// Encodes words as canonical call data.
pub fn encode_words(words: &[u64]) -> Vec<u8> {
    rlp::encode(&RlpItem::List(words.iter().map(|&w| RlpItem::uint(w)).collect()))
}
