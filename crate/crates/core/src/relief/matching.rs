//! Greedy supply-to-demand matching with transport assignment.
//!
//! Demands are served by urgency, highest first, then in submission order.
//! Each demand draws from same-type supplies nearest first. Every trip is
//! flown by the feasible asset with the shortest round trip
//! (home, supply, demand, home), lowest id on ties, and carries at most that
//! asset's payload. Quantities already committed to earlier shipments are
//! subtracted first, so matching a state that already holds its plan yields
//! nothing new.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::records::{ReliefDemand, ReliefSupply, Shipment, TransportAsset};
use super::square::SquareState;

/// Slack on the range check, in kilometres.
pub const RANGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub demanded: u64,
    pub shipped: u64,
    pub residual: u64,
    pub total_distance_km: f64,
    /// Demand ids left short after this plan, with the missing quantity.
    pub unmet: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchPlan {
    pub shipments: Vec<Shipment>,
    /// Totals over every shipment in the square plus this plan.
    pub summary: MatchSummary,
}

/// Round-trip distance for `a` serving `s -> d`.
pub fn trip_distance(a: &TransportAsset, s: &ReliefSupply, d: &ReliefDemand) -> f64 {
    a.location.distance(&s.location) + s.location.distance(&d.location) + d.location.distance(&a.location)
}

pub fn is_feasible(a: &TransportAsset, s: &ReliefSupply, d: &ReliefDemand) -> bool {
    trip_distance(a, s, d) <= a.range + RANGE_EPS
}

/// The asset that flies `s -> d`: shortest feasible trip, lowest id on ties.
pub fn best_asset<'a>(assets: &'a [TransportAsset], s: &ReliefSupply, d: &ReliefDemand) -> Option<&'a TransportAsset> {
    assets
        .iter()
        .filter(|a| is_feasible(a, s, d))
        .min_by(|a, b| trip_distance(a, s, d).total_cmp(&trip_distance(b, s, d)).then(a.id.cmp(&b.id)))
}

pub fn run_match(sq: &SquareState) -> MatchPlan {
    let mut shipped_from: HashMap<u64, u64> = HashMap::new();
    let mut received: HashMap<u64, u64> = HashMap::new();
    for s in &sq.shipments {
        *shipped_from.entry(s.supply_id).or_default() += s.quantity;
        *received.entry(s.demand_id).or_default() += s.quantity;
    }
    let mut rem_supply: Vec<u64> =
        sq.supplies.iter().map(|s| s.quantity.saturating_sub(shipped_from.get(&s.id).copied().unwrap_or(0))).collect();

    let mut order: Vec<usize> = (0..sq.demands.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(sq.demands[i].urgency), i));

    let mut next_id = sq.shipments.iter().map(|s| s.shipment_id + 1).max().unwrap_or(0);
    let mut shipments = Vec::new();
    let mut unmet = Vec::new();
    for &di in &order {
        let d = &sq.demands[di];
        let mut need = d.quantity.saturating_sub(received.get(&d.id).copied().unwrap_or(0));
        let mut candidates: Vec<usize> = (0..sq.supplies.len())
            .filter(|&si| sq.supplies[si].resource_type == d.resource_type && rem_supply[si] > 0)
            .collect();
        candidates.sort_by(|&a, &b| {
            let da = sq.supplies[a].location.distance(&d.location);
            let db = sq.supplies[b].location.distance(&d.location);
            da.total_cmp(&db).then(a.cmp(&b))
        });
        for si in candidates {
            if need == 0 {
                break;
            }
            let s = &sq.supplies[si];
            let Some(asset) = best_asset(&sq.assets, s, d) else {
                continue;
            };
            let leg = s.location.distance(&d.location);
            while need > 0 && rem_supply[si] > 0 {
                let q = need.min(rem_supply[si]).min(asset.payload_capacity);
                shipments.push(Shipment {
                    shipment_id: next_id,
                    supply_id: s.id,
                    demand_id: d.id,
                    asset_id: asset.id,
                    quantity: q,
                    leg_distance: leg,
                    est_time: leg / asset.speed,
                });
                next_id += 1;
                need -= q;
                rem_supply[si] -= q;
            }
        }
        if need > 0 {
            unmet.push((d.id, need));
        }
    }

    let all = || sq.shipments.iter().chain(&shipments);
    let demanded: u64 = sq.demands.iter().map(|d| d.quantity).sum();
    let shipped: u64 = all().map(|s| s.quantity).sum();
    let summary = MatchSummary {
        demanded,
        shipped,
        residual: demanded.saturating_sub(shipped),
        total_distance_km: all().map(|s| s.leg_distance).sum(),
        unmet,
    };
    MatchPlan { shipments, summary }
}

/// Totals over the square's existing shipments; `unmet` in demand order.
pub fn summarize(sq: &SquareState) -> MatchSummary {
    let mut received: HashMap<u64, u64> = HashMap::new();
    for s in &sq.shipments {
        *received.entry(s.demand_id).or_default() += s.quantity;
    }
    let demanded: u64 = sq.demands.iter().map(|d| d.quantity).sum();
    let shipped: u64 = sq.shipments.iter().map(|s| s.quantity).sum();
    MatchSummary {
        demanded,
        shipped,
        residual: demanded.saturating_sub(shipped),
        total_distance_km: sq.shipments.iter().map(|s| s.leg_distance).sum(),
        unmet: sq
            .demands
            .iter()
            .filter_map(|d| {
                let got = received.get(&d.id).copied().unwrap_or(0);
                (got < d.quantity).then(|| (d.id, d.quantity - got))
            })
            .collect(),
    }
}

/// Every conservation, capacity and range rule a plan must satisfy against
/// the square it was computed from. Returns the first violation.
pub fn check_plan(sq: &SquareState, plan: &MatchPlan) -> Result<(), String> {
    let mut out: HashMap<u64, u64> = HashMap::new();
    let mut inn: HashMap<u64, u64> = HashMap::new();
    for s in sq.shipments.iter().chain(&plan.shipments) {
        let sup = sq.supplies.iter().find(|x| x.id == s.supply_id).ok_or(format!("unknown supply {}", s.supply_id))?;
        let dem = sq.demands.iter().find(|x| x.id == s.demand_id).ok_or(format!("unknown demand {}", s.demand_id))?;
        let a = sq.assets.iter().find(|x| x.id == s.asset_id).ok_or(format!("unknown asset {}", s.asset_id))?;
        if sup.resource_type != dem.resource_type {
            return Err(format!("shipment {} mixes resource types", s.shipment_id));
        }
        if s.quantity == 0 || s.quantity > a.payload_capacity {
            return Err(format!(
                "shipment {} carries {} on capacity {}",
                s.shipment_id, s.quantity, a.payload_capacity
            ));
        }
        if !is_feasible(a, sup, dem) {
            return Err(format!("shipment {} exceeds range of asset {}", s.shipment_id, a.id));
        }
        *out.entry(sup.id).or_default() += s.quantity;
        *inn.entry(dem.id).or_default() += s.quantity;
    }
    for s in &sq.supplies {
        if out.get(&s.id).copied().unwrap_or(0) > s.quantity {
            return Err(format!("supply {} over-shipped", s.id));
        }
    }
    for d in &sq.demands {
        if inn.get(&d.id).copied().unwrap_or(0) > d.quantity {
            return Err(format!("demand {} over-served", d.id));
        }
    }
    Ok(())
}
