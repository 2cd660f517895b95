//! Relief workflow contracts.
//!
//! Demand, Supply and Transportation records live in per-entity contract
//! instances, each instance deployed by the entity that owns it. Square and
//! Match are shared and deployed by the desk operator. Every record call
//! writes its fields into its instance and registers a marker with Square;
//! [`square_snapshot`] reads the chain back into a [`SquareState`].
//! Matching runs natively and its plan is written one shipment per Match
//! call. Status updates go straight to Square.

pub mod codegen;
pub mod matching;
pub mod records;
pub mod square;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

pub use matching::{check_plan, run_match, summarize, MatchPlan, MatchSummary};
pub use records::*;
pub use square::{square_snapshot, ReliefLayout, SquareState};

use crate::ledger::{encode_words, ChainSnapshot, Ledger, LedgerError, Transaction};
use crate::types::{Address, TxHash};
use crate::vm::contract_address;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReliefError {
    #[error("invalid demand: {0}")]
    InvalidDemand(String),
    #[error("invalid supply: {0}")]
    InvalidSupply(String),
    #[error("invalid asset: {0}")]
    InvalidAsset(String),
    #[error("{kind} id {id} already submitted")]
    DuplicateId { kind: RecordKind, id: u64 },
    #[error("unknown shipment {0}")]
    UnknownShipment(u64),
    #[error("shipment {shipment} cannot move from {from:?} to {to:?}")]
    StatusRegression { shipment: u64, from: ShipmentStatus, to: ShipmentStatus },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// A submitted relief call, plus the instance deployment it needed, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReliefTx {
    pub hash: TxHash,
    pub contract: Address,
    pub deployment: Option<TxHash>,
}

pub struct ReliefDesk {
    layout: ReliefLayout,
    instances: BTreeMap<(RecordKind, Address), Address>,
    ids: HashSet<(RecordKind, u64)>,
}

impl ReliefDesk {
    /// Submits the Square and Match deployments from `operator`.
    pub fn install(ledger: &mut Ledger, operator: Address) -> Result<Self, ReliefError> {
        let n = ledger.next_nonce(&operator);
        let square = contract_address(&operator, n);
        ledger.submit_transaction(Transaction::creation(operator, n, codegen::square_code(), 1))?;
        let code = codegen::record_code(RecordKind::Shipment, square.to_word());
        ledger.submit_transaction(Transaction::creation(operator, n + 1, code, 1))?;
        let layout = ReliefLayout { operator, square, matcher: contract_address(&operator, n + 1) };
        Ok(ReliefDesk { layout, instances: BTreeMap::new(), ids: HashSet::new() })
    }

    pub fn layout(&self) -> &ReliefLayout {
        &self.layout
    }

    pub fn instance(&self, kind: RecordKind, entity: &Address) -> Option<Address> {
        self.instances.get(&(kind, *entity)).copied()
    }

    pub fn instances(&self) -> impl Iterator<Item = (RecordKind, Address, Address)> + '_ {
        self.instances.iter().map(|(&(k, e), &a)| (k, e, a))
    }

    fn submit_record(
        &mut self,
        ledger: &mut Ledger,
        kind: RecordKind,
        entity: Address,
        id: u64,
        payload: Vec<u8>,
    ) -> Result<ReliefTx, ReliefError> {
        if self.ids.contains(&(kind, id)) {
            return Err(ReliefError::DuplicateId { kind, id });
        }
        let mut deployment = None;
        let contract = match self.instance(kind, &entity) {
            Some(a) => a,
            None => {
                let n = ledger.next_nonce(&entity);
                let code = codegen::record_code(kind, self.layout.square.to_word());
                deployment = Some(ledger.submit_transaction(Transaction::creation(entity, n, code, 1))?);
                let a = contract_address(&entity, n);
                self.instances.insert((kind, entity), a);
                a
            }
        };
        let n = ledger.next_nonce(&entity);
        let hash = ledger.submit_transaction(Transaction::call(entity, n, contract, payload, codegen::RECORD_GAS))?;
        self.ids.insert((kind, id));
        Ok(ReliefTx { hash, contract, deployment })
    }

    pub fn submit_demand(&mut self, ledger: &mut Ledger, d: &ReliefDemand) -> Result<ReliefTx, ReliefError> {
        d.validate().map_err(ReliefError::InvalidDemand)?;
        self.submit_record(ledger, RecordKind::Demand, d.submitter, d.id, d.encode())
    }

    pub fn submit_supply(&mut self, ledger: &mut Ledger, s: &ReliefSupply) -> Result<ReliefTx, ReliefError> {
        s.validate().map_err(ReliefError::InvalidSupply)?;
        self.submit_record(ledger, RecordKind::Supply, s.supplier, s.id, s.encode())
    }

    pub fn register_transport(&mut self, ledger: &mut Ledger, a: &TransportAsset) -> Result<ReliefTx, ReliefError> {
        a.validate().map_err(ReliefError::InvalidAsset)?;
        self.submit_record(ledger, RecordKind::Asset, a.operator, a.id, a.encode())
    }

    pub fn square_snapshot(&self, snap: &ChainSnapshot) -> SquareState {
        square_snapshot(snap, &self.layout)
    }

    /// Plans against the snapshot; nothing is submitted.
    pub fn run_match(&self, snap: &ChainSnapshot) -> MatchPlan {
        run_match(&self.square_snapshot(snap))
    }

    /// Writes each planned shipment through the Match contract.
    pub fn commit_plan(&mut self, ledger: &mut Ledger, plan: &MatchPlan) -> Result<Vec<ReliefTx>, ReliefError> {
        let op = self.layout.operator;
        let mut out = Vec::with_capacity(plan.shipments.len());
        for s in &plan.shipments {
            if self.ids.contains(&(RecordKind::Shipment, s.shipment_id)) {
                return Err(ReliefError::DuplicateId { kind: RecordKind::Shipment, id: s.shipment_id });
            }
            let n = ledger.next_nonce(&op);
            let tx = Transaction::call(op, n, self.layout.matcher, s.encode(), codegen::RECORD_GAS);
            let hash = ledger.submit_transaction(tx)?;
            self.ids.insert((RecordKind::Shipment, s.shipment_id));
            out.push(ReliefTx { hash, contract: self.layout.matcher, deployment: None });
        }
        Ok(out)
    }

    /// Advances a confirmed shipment, sent by the operator of its asset.
    pub fn update_status(
        &mut self,
        ledger: &mut Ledger,
        snap: &ChainSnapshot,
        shipment_id: u64,
        to: ShipmentStatus,
    ) -> Result<ReliefTx, ReliefError> {
        let sq = self.square_snapshot(snap);
        let s = sq.shipment(shipment_id).ok_or(ReliefError::UnknownShipment(shipment_id))?;
        let from = sq.shipment_statuses.get(&shipment_id).copied().unwrap_or(ShipmentStatus::Planned);
        if to <= from {
            return Err(ReliefError::StatusRegression { shipment: shipment_id, from, to });
        }
        let sender = sq.assets.iter().find(|a| a.id == s.asset_id).map_or(self.layout.operator, |a| a.operator);
        let n = ledger.next_nonce(&sender);
        let words = encode_words(&[marker(to.tag(), shipment_id)]);
        let hash = ledger.submit_transaction(Transaction::call(sender, n, self.layout.square, words, 100))?;
        Ok(ReliefTx { hash, contract: self.layout.square, deployment: None })
    }
}
