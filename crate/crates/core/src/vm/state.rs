use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::forensics::rlp::{self, RlpItem};
use crate::types::{sha3, Address};

/// Contract address for the `nonce`-th transaction of `creator`: the last
/// 20 bytes of SHA3-256(RLP([creator, nonce])).
pub fn contract_address(creator: &Address, nonce: u64) -> Address {
    let enc = rlp::encode(&RlpItem::List(vec![RlpItem::bytes(creator.0.to_vec()), RlpItem::uint(nonce)]));
    let h = sha3(&enc);
    let mut a = [0u8; 20];
    a.copy_from_slice(&h.0[12..]);
    Address(a)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractInstance {
    pub address: Address,
    pub deployer: Address,
    pub nonce: u64,
    #[serde(with = "arc_code")]
    pub code: Arc<Vec<u8>>,
    pub storage: BTreeMap<u64, u64>,
    pub balance: u64,
}

mod arc_code {
    use std::sync::Arc;

    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(code: &Arc<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        crate::serde_hex::serialize(code, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Arc<Vec<u8>>, D::Error> {
        crate::serde_hex::deserialize(d).map(Arc::new)
    }
}

/// Everything execution can read or write. Cloning is the snapshot primitive,
/// so it stays cheap: code is shared, only storage maps are copied.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    contracts: BTreeMap<Address, ContractInstance>,
    by_word: BTreeMap<u64, Address>,
    /// Balances of non-contract recipients, keyed by their address word.
    external: BTreeMap<u64, u64>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contract(&self, a: &Address) -> Option<&ContractInstance> {
        self.contracts.get(a)
    }

    pub fn contract_mut(&mut self, a: &Address) -> Option<&mut ContractInstance> {
        self.contracts.get_mut(a)
    }

    pub fn contracts(&self) -> impl Iterator<Item = &ContractInstance> {
        self.contracts.values()
    }

    pub fn resolve_word(&self, w: u64) -> Option<Address> {
        self.by_word.get(&w).copied()
    }

    pub fn external_balance(&self, word: u64) -> u64 {
        self.external.get(&word).copied().unwrap_or(0)
    }

    /// Inserts a contract. Returns false without modifying state if the
    /// address, or its machine word, is already taken.
    pub fn insert(&mut self, c: ContractInstance) -> bool {
        let w = c.address.to_word();
        if self.contracts.contains_key(&c.address) || self.by_word.contains_key(&w) {
            return false;
        }
        self.by_word.insert(w, c.address);
        self.contracts.insert(c.address, c);
        true
    }

    pub fn remove(&mut self, a: &Address) -> Option<ContractInstance> {
        let c = self.contracts.remove(a)?;
        self.by_word.remove(&a.to_word());
        Some(c)
    }

    /// Credits `amount` to whatever `word` names: a contract if one has that
    /// word, otherwise an external account.
    pub fn credit(&mut self, word: u64, amount: u64) {
        match self.by_word.get(&word).copied() {
            Some(a) => {
                let c = self.contracts.get_mut(&a).expect("word index in sync");
                c.balance = c.balance.saturating_add(amount);
            }
            None => {
                let e = self.external.entry(word).or_default();
                *e = e.saturating_add(amount);
            }
        }
    }

    pub fn storage_of(&self, a: &Address) -> Option<&BTreeMap<u64, u64>> {
        self.contracts.get(a).map(|c| &c.storage)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_derivation_is_deterministic_and_nonce_separated() {
        let d = Address::from_label("deployer");
        assert_eq!(contract_address(&d, 0), contract_address(&d, 0));
        assert_ne!(contract_address(&d, 0), contract_address(&d, 1));
        assert_ne!(contract_address(&d, 0), contract_address(&Address::from_label("other"), 0));
    }

    #[test]
    fn credit_routes_by_word() {
        let mut s = WorldState::new();
        let a = Address::from_label("c");
        s.insert(ContractInstance {
            address: a,
            deployer: a,
            nonce: 0,
            code: Arc::new(vec![0]),
            storage: BTreeMap::new(),
            balance: 1,
        });
        s.credit(a.to_word(), 4);
        s.credit(99, 3);
        assert_eq!(s.contract(&a).unwrap().balance, 5);
        assert_eq!(s.external_balance(99), 3);
        assert!(s.remove(&a).is_some());
        assert_eq!(s.resolve_word(a.to_word()), None);
    }
}
