use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::codegen::record_code;
use super::records::*;
use crate::ledger::{ChainSnapshot, ReceiptStatus, TxKind};
use crate::types::Address;
use crate::vm::ContractInstance;

/// Where the shared relief contracts live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReliefLayout {
    pub operator: Address,
    pub square: Address,
    pub matcher: Address,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SquareState {
    pub demands: Vec<ReliefDemand>,
    pub supplies: Vec<ReliefSupply>,
    pub assets: Vec<TransportAsset>,
    pub shipments: Vec<Shipment>,
    pub shipment_statuses: BTreeMap<u64, ShipmentStatus>,
    /// Contract instance that holds each record.
    #[serde(skip)]
    pub holders: HashMap<(RecordKind, u64), Address>,
}

impl SquareState {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.demands.len(), self.supplies.len(), self.assets.len())
    }

    pub fn demands_of(&self, t: ResourceType) -> impl Iterator<Item = &ReliefDemand> {
        self.demands.iter().filter(move |d| d.resource_type == t)
    }

    pub fn supplies_of(&self, t: ResourceType) -> impl Iterator<Item = &ReliefSupply> {
        self.supplies.iter().filter(move |s| s.resource_type == t)
    }

    pub fn shipment(&self, id: u64) -> Option<&Shipment> {
        self.shipments.iter().find(|s| s.shipment_id == id)
    }
}

/// Reads one record's fields from its holder's storage, id included.
fn fields(c: &ContractInstance, kind: RecordKind, id: u64) -> Option<Vec<u64>> {
    let base = id << 8;
    if c.storage.get(&base) != Some(&1) {
        return None;
    }
    let mut out = vec![id];
    out.extend((1..kind.field_count()).map(|i| c.storage.get(&(base | i)).copied().unwrap_or(0)));
    Some(out)
}

fn point(x: u64, y: u64) -> Point {
    Point::new(f64::from_bits(x), f64::from_bits(y))
}

/// The square as of the snapshot's tip. Records appear in the order their
/// calls confirmed; each one must also carry its marker in Square storage.
pub fn square_snapshot(snap: &ChainSnapshot, layout: &ReliefLayout) -> SquareState {
    let sw = layout.square.to_word();
    let codes: Vec<(RecordKind, Vec<u8>)> = [RecordKind::Demand, RecordKind::Supply, RecordKind::Asset]
        .into_iter()
        .map(|k| (k, record_code(k, sw)))
        .collect();
    let state = snap.state();
    let Some(square) = state.contract(&layout.square) else {
        return SquareState::default();
    };
    let marked = |tag: u64, id: u64| square.storage.contains_key(&marker(tag, id));

    let mut kinds: HashMap<Address, Option<RecordKind>> = HashMap::new();
    let mut sq = SquareState::default();
    for b in snap.blocks() {
        for tx in &b.transactions {
            let (TxKind::ContractCall, Some(target)) = (tx.kind, tx.target) else {
                continue;
            };
            if snap.receipt(&tx.hash).map(|r| r.status) != Some(ReceiptStatus::Success) {
                continue;
            }
            let Some(c) = state.contract(&target) else {
                continue;
            };
            let kind = *kinds.entry(target).or_insert_with(|| {
                if target == layout.matcher {
                    Some(RecordKind::Shipment)
                } else {
                    codes.iter().find(|(_, code)| code[..] == c.code[..]).map(|(k, _)| *k)
                }
            });
            let Some(kind) = kind else {
                continue;
            };
            let Some(id) = crate::ledger::call_words(&tx.payload).and_then(|w| w.first().copied()) else {
                continue;
            };
            if id >= MAX_ID || !marked(kind.tag(), id) || sq.holders.contains_key(&(kind, id)) {
                continue;
            }
            let Some(f) = fields(c, kind, id) else {
                continue;
            };
            let pushed = match kind {
                RecordKind::Demand => ResourceType::from_code(f[3]).map(|rt| {
                    sq.demands.push(ReliefDemand {
                        id,
                        location: point(f[1], f[2]),
                        resource_type: rt,
                        quantity: f[4],
                        urgency: f[5] as u8,
                        submitter: c.deployer,
                    })
                }),
                RecordKind::Supply => ResourceType::from_code(f[3]).map(|rt| {
                    sq.supplies.push(ReliefSupply {
                        id,
                        location: point(f[1], f[2]),
                        resource_type: rt,
                        quantity: f[4],
                        supplier: c.deployer,
                    })
                }),
                RecordKind::Asset => AssetKind::from_code(f[1]).map(|k| {
                    sq.assets.push(TransportAsset {
                        id,
                        kind: k,
                        location: point(f[2], f[3]),
                        payload_capacity: f[4],
                        range: f64::from_bits(f[5]),
                        speed: f64::from_bits(f[6]),
                        operator: c.deployer,
                    })
                }),
                RecordKind::Shipment => {
                    sq.shipments.push(Shipment {
                        shipment_id: id,
                        supply_id: f[1],
                        demand_id: f[2],
                        asset_id: f[3],
                        quantity: f[4],
                        leg_distance: f64::from_bits(f[5]),
                        est_time: f64::from_bits(f[6]),
                    });
                    Some(())
                }
            };
            if pushed.is_some() {
                sq.holders.insert((kind, id), target);
            }
        }
    }
    for s in &sq.shipments {
        let status = [ShipmentStatus::Delivered, ShipmentStatus::InTransit, ShipmentStatus::Planned]
            .into_iter()
            .find(|st| marked(st.tag(), s.shipment_id));
        if let Some(st) = status {
            sq.shipment_statuses.insert(s.shipment_id, st);
        }
    }
    sq
}
