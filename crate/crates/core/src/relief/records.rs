use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::forensics::rlp::{self, RlpItem};
use crate::types::Address;

/// Record ids share a word with a 56-bit kind tag, so they must stay below this.
pub const MAX_ID: u64 = 1 << 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, o: &Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResourceType {
    Food,
    Water,
    Medical,
    Equipment,
}

impl ResourceType {
    pub const ALL: [ResourceType; 4] =
        [ResourceType::Food, ResourceType::Water, ResourceType::Medical, ResourceType::Equipment];

    pub fn code(self) -> u64 {
        self as u64
    }

    pub fn from_code(c: u64) -> Option<Self> {
        Self::ALL.get(usize::try_from(c).ok()?).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssetKind {
    #[serde(rename = "UAV")]
    Uav,
    GroundVehicle,
}

impl AssetKind {
    pub fn code(self) -> u64 {
        match self {
            AssetKind::Uav => 0,
            AssetKind::GroundVehicle => 1,
        }
    }

    pub fn from_code(c: u64) -> Option<Self> {
        match c {
            0 => Some(AssetKind::Uav),
            1 => Some(AssetKind::GroundVehicle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliefDemand {
    pub id: u64,
    pub location: Point,
    pub resource_type: ResourceType,
    pub quantity: u64,
    pub urgency: u8,
    pub submitter: Address,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliefSupply {
    pub id: u64,
    pub location: Point,
    pub resource_type: ResourceType,
    pub quantity: u64,
    pub supplier: Address,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportAsset {
    pub id: u64,
    pub kind: AssetKind,
    pub location: Point,
    pub payload_capacity: u64,
    /// Kilometres per round trip.
    pub range: f64,
    /// Kilometres per hour.
    pub speed: f64,
    pub operator: Address,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ShipmentStatus {
    Planned,
    InTransit,
    Delivered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shipment {
    pub shipment_id: u64,
    pub supply_id: u64,
    pub demand_id: u64,
    pub asset_id: u64,
    pub quantity: u64,
    pub leg_distance: f64,
    pub est_time: f64,
}

/// Tag carried in the high byte of every Square marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecordKind {
    Demand,
    Supply,
    Asset,
    Shipment,
}

impl RecordKind {
    pub fn tag(self) -> u64 {
        match self {
            RecordKind::Demand => 0,
            RecordKind::Supply => 1,
            RecordKind::Asset => 2,
            RecordKind::Shipment => 3,
        }
    }

    /// Word count of the call data, id first.
    pub fn field_count(self) -> u64 {
        match self {
            RecordKind::Demand => 7,
            RecordKind::Supply => 6,
            RecordKind::Asset => 8,
            RecordKind::Shipment => 7,
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Demand => "demand",
            RecordKind::Supply => "supply",
            RecordKind::Asset => "asset",
            RecordKind::Shipment => "shipment",
        })
    }
}

impl ShipmentStatus {
    pub fn tag(self) -> u64 {
        match self {
            ShipmentStatus::Planned => 3,
            ShipmentStatus::InTransit => 4,
            ShipmentStatus::Delivered => 5,
        }
    }

    pub fn from_tag(t: u64) -> Option<Self> {
        match t {
            3 => Some(ShipmentStatus::Planned),
            4 => Some(ShipmentStatus::InTransit),
            5 => Some(ShipmentStatus::Delivered),
            _ => None,
        }
    }
}

impl FromStr for ShipmentStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Planned" => Ok(ShipmentStatus::Planned),
            "InTransit" => Ok(ShipmentStatus::InTransit),
            "Delivered" => Ok(ShipmentStatus::Delivered),
            _ => Err(format!("unknown shipment status {s:?}")),
        }
    }
}

pub fn marker(tag: u64, id: u64) -> u64 {
    (tag << 56) | id
}

fn f(v: f64) -> RlpItem {
    RlpItem::uint(v.to_bits())
}

fn list(items: Vec<RlpItem>) -> Vec<u8> {
    rlp::encode(&RlpItem::List(items))
}

fn check_id(id: u64) -> Result<(), String> {
    if id >= MAX_ID {
        return Err(format!("id {id} exceeds 2^48"));
    }
    Ok(())
}

impl ReliefDemand {
    pub fn validate(&self) -> Result<(), String> {
        check_id(self.id)?;
        if self.quantity == 0 {
            return Err("quantity must be positive".into());
        }
        if !(1..=5).contains(&self.urgency) {
            return Err(format!("urgency {} outside 1..=5", self.urgency));
        }
        if !self.location.is_finite() {
            return Err("location must be finite".into());
        }
        Ok(())
    }

    /// Call data in field order.
    pub fn encode(&self) -> Vec<u8> {
        list(vec![
            RlpItem::uint(self.id),
            f(self.location.x),
            f(self.location.y),
            RlpItem::uint(self.resource_type.code()),
            RlpItem::uint(self.quantity),
            RlpItem::uint(self.urgency as u64),
            RlpItem::bytes(self.submitter.0.to_vec()),
        ])
    }
}

impl ReliefSupply {
    pub fn validate(&self) -> Result<(), String> {
        check_id(self.id)?;
        if self.quantity == 0 {
            return Err("quantity must be positive".into());
        }
        if !self.location.is_finite() {
            return Err("location must be finite".into());
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        list(vec![
            RlpItem::uint(self.id),
            f(self.location.x),
            f(self.location.y),
            RlpItem::uint(self.resource_type.code()),
            RlpItem::uint(self.quantity),
            RlpItem::bytes(self.supplier.0.to_vec()),
        ])
    }
}

impl TransportAsset {
    pub fn validate(&self) -> Result<(), String> {
        check_id(self.id)?;
        if self.payload_capacity == 0 {
            return Err("payload capacity must be positive".into());
        }
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err("range must be positive".into());
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err("speed must be positive".into());
        }
        if !self.location.is_finite() {
            return Err("location must be finite".into());
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        list(vec![
            RlpItem::uint(self.id),
            RlpItem::uint(self.kind.code()),
            f(self.location.x),
            f(self.location.y),
            RlpItem::uint(self.payload_capacity),
            f(self.range),
            f(self.speed),
            RlpItem::bytes(self.operator.0.to_vec()),
        ])
    }
}

impl Shipment {
    pub fn encode(&self) -> Vec<u8> {
        list(vec![
            RlpItem::uint(self.shipment_id),
            RlpItem::uint(self.supply_id),
            RlpItem::uint(self.demand_id),
            RlpItem::uint(self.asset_id),
            RlpItem::uint(self.quantity),
            f(self.leg_distance),
            f(self.est_time),
        ])
    }
}
