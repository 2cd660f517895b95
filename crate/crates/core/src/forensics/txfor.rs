//! The on-chain registry contract linking forensics hashes to their metadata.
//!
//! Call data is `RLP([forensics_hash, deployer, nonce, content_length])`. With
//! `k` the trailing word of the hash, the contract stores
//! `k -> deployer word`, `k+1 -> nonce`, `k+2 -> content_length`, and throws
//! if `k` is already set.

use serde::{Deserialize, Serialize};

use crate::forensics::rlp::{self, RlpItem};
use crate::types::{Address, Hash32};
use crate::vm::{Asm, Mnemonic::*};

/// Storage slot used to hold the entry key while the other fields are written.
const SCRATCH: u64 = u64::MAX;

pub const CALL_GAS: u64 = 1_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxForEntry {
    pub forensics_hash: Hash32,
    pub deployer: Address,
    pub nonce: u64,
    pub content_length: u64,
}

pub fn code() -> Vec<u8> {
    // stack on entry, top first: hash, deployer, nonce, length
    Asm::new()
        .op(Dup)
        .op(Sload)
        .jumpi("duplicate")
        .op(Dup)
        .push(SCRATCH)
        .op(Sstore)
        .op(Sstore)
        .push(SCRATCH)
        .op(Sload)
        .push(1)
        .op(Add)
        .op(Sstore)
        .push(SCRATCH)
        .op(Sload)
        .push(2)
        .op(Add)
        .op(Sstore)
        .push(0)
        .push(SCRATCH)
        .op(Sstore)
        .op(Stop)
        .label("duplicate")
        .op(Throw)
        .assemble()
}

pub fn payload(e: &TxForEntry) -> Vec<u8> {
    rlp::encode(&RlpItem::List(vec![
        RlpItem::bytes(e.forensics_hash.0.to_vec()),
        RlpItem::bytes(e.deployer.0.to_vec()),
        RlpItem::uint(e.nonce),
        RlpItem::uint(e.content_length),
    ]))
}

pub fn parse_payload(bytes: &[u8]) -> Option<TxForEntry> {
    let item = rlp::decode(bytes).ok()?;
    match item.as_list().ok()? {
        [h, d, n, l] => Some(TxForEntry {
            forensics_hash: Hash32::from_slice(h.as_bytes().ok()?).ok()?,
            deployer: Address::from_slice(d.as_bytes().ok()?).ok()?,
            nonce: n.as_uint().ok()?,
            content_length: l.as_uint().ok()?,
        }),
        _ => None,
    }
}
