//! Oracles shared by the integration suites and the acceptance harness.
//! None of them call into the library code they check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::Config;
use rand::Rng;
use reliefchain_core::forensics::rlp::RlpItem;
use reliefchain_core::relief::{
    AssetKind, MatchPlan, Point, ReliefDemand, ReliefSupply, ResourceType, SquareState, TransportAsset,
};
use reliefchain_core::vm::{Asm, Mnemonic};
use reliefchain_core::Address;

/// Integration tests have no crate root for proptest to persist failures
/// next to, so persistence is off and failing seeds are printed instead.
pub fn proptest_config(cases: u32) -> Config {
    Config { cases, failure_persistence: None, ..Config::default() }
}

/// Byte strings straddling the 55-byte short/long boundary, integers, and
/// nested lists.
pub fn rlp_item() -> impl Strategy<Value = RlpItem> {
    let leaf = prop_oneof![
        prop::collection::vec(any::<u8>(), 0..3).prop_map(RlpItem::Bytes),
        prop::collection::vec(any::<u8>(), 50..60).prop_map(RlpItem::Bytes),
        any::<u64>().prop_map(RlpItem::uint),
    ];
    leaf.prop_recursive(3, 64, 8, |inner| prop::collection::vec(inner, 0..8).prop_map(RlpItem::List))
}

// ---------------------------------------------------------------------------
// Straight-line programs with forward skips, and an interpreter for them.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Push(u64),
    Dup,
    Pop,
    Add,
    Sub,
    Mul,
    Eq,
    Lt,
    Gt,
    Sload,
    Sstore,
    /// Pops a word; when non-zero, skips the next `n` ops.
    SkipIf(usize),
    Stop,
    Throw,
}

pub type Storage = BTreeMap<u64, u64>;

pub fn assemble(prog: &[Op]) -> Vec<u8> {
    let mut pending: Vec<(usize, String)> = Vec::new();
    let mut a = Asm::new();
    for (i, op) in prog.iter().enumerate() {
        for (_, l) in pending.iter().filter(|(at, _)| *at == i) {
            a = a.label(l);
        }
        a = match *op {
            Op::Push(v) => a.push(v),
            Op::Dup => a.op(Mnemonic::Dup),
            Op::Pop => a.op(Mnemonic::Pop),
            Op::Add => a.op(Mnemonic::Add),
            Op::Sub => a.op(Mnemonic::Sub),
            Op::Mul => a.op(Mnemonic::Mul),
            Op::Eq => a.op(Mnemonic::Eq),
            Op::Lt => a.op(Mnemonic::Lt),
            Op::Gt => a.op(Mnemonic::Gt),
            Op::Sload => a.op(Mnemonic::Sload),
            Op::Sstore => a.op(Mnemonic::Sstore),
            Op::Stop => a.op(Mnemonic::Stop),
            Op::Throw => a.op(Mnemonic::Throw),
            Op::SkipIf(n) => {
                let l = format!("L{i}");
                pending.push((i + 1 + n, l.clone()));
                a.jumpi(&l)
            }
        };
    }
    assert!(pending.iter().all(|(at, _)| *at < prog.len()), "skip past the last op");
    a.assemble()
}

/// Runs one call; any failure leaves `storage` as it was. Each executed op
/// costs one unit of gas, charged before it runs.
pub fn interpret(storage: &mut Storage, prog: &[Op], words: &[u64], gas: u64) {
    let mut s = storage.clone();
    let mut stack: Vec<u64> = words.iter().rev().copied().collect();
    let mut gas = gas;
    let mut pc = 0;
    macro_rules! pop {
        () => {
            match stack.pop() {
                Some(v) => v,
                None => return,
            }
        };
    }
    while pc < prog.len() {
        if gas == 0 {
            return;
        }
        gas -= 1;
        let mut next = pc + 1;
        match prog[pc] {
            Op::Push(v) => stack.push(v),
            Op::Dup => {
                let v = pop!();
                stack.push(v);
                stack.push(v);
            }
            Op::Pop => {
                pop!();
            }
            op @ (Op::Add | Op::Sub | Op::Mul | Op::Eq | Op::Lt | Op::Gt) => {
                if stack.len() < 2 {
                    return;
                }
                let r = pop!();
                let l = pop!();
                stack.push(match op {
                    Op::Add => l.wrapping_add(r),
                    Op::Sub => l.wrapping_sub(r),
                    Op::Mul => l.wrapping_mul(r),
                    Op::Eq => (l == r) as u64,
                    Op::Lt => (l < r) as u64,
                    _ => (l > r) as u64,
                });
            }
            Op::Sload => {
                let k = pop!();
                stack.push(s.get(&k).copied().unwrap_or(0));
            }
            Op::Sstore => {
                if stack.len() < 2 {
                    return;
                }
                let k = pop!();
                let v = pop!();
                if v == 0 {
                    s.remove(&k);
                } else {
                    s.insert(k, v);
                }
            }
            Op::SkipIf(n) => {
                if pop!() != 0 {
                    next = pc + 1 + n;
                }
            }
            Op::Stop => break,
            Op::Throw => return,
        }
        pc = next;
    }
    *storage = s;
}

/// Runs both orders from `pre` and compares the final storage.
pub fn oracle_order_dependent(pre: &Storage, prog: &[Op], a: (&[u64], u64), b: (&[u64], u64)) -> bool {
    let run = |x: (&[u64], u64), y: (&[u64], u64)| {
        let mut s = pre.clone();
        interpret(&mut s, prog, x.0, x.1);
        interpret(&mut s, prog, y.0, y.1);
        s
    };
    run(a, b) != run(b, a)
}

/// Short programs over a few keys so that writes collide often. Ops are
/// mostly chosen to fit the stack depth along the fall-through path, with
/// a few misfits to exercise reverts. The final STOP gives every skip a
/// landing instruction.
pub fn random_prog(rng: &mut impl Rng) -> Vec<Op> {
    let len = rng.gen_range(1..16);
    let mut prog = Vec::with_capacity(2 * len + 1);
    // Call data carries at least one word.
    let mut depth: usize = 1;
    for i in 0..len {
        let misfit = rng.gen_bool(0.05);
        let op = loop {
            let op = match rng.gen_range(0..20) {
                0..=3 => Op::Push(if rng.gen_bool(0.8) { rng.gen_range(0..4) } else { rng.gen() }),
                4 => Op::Dup,
                5 => Op::Pop,
                6 => Op::Add,
                7 => Op::Sub,
                8 => Op::Mul,
                9 => Op::Eq,
                10 => Op::Lt,
                11 => Op::Gt,
                12 | 13 => Op::Sload,
                14..=16 => Op::Sstore,
                17 => Op::SkipIf(rng.gen_range(0..len - i)),
                _ if rng.gen_bool(0.5) => Op::Stop,
                _ => Op::Throw,
            };
            let needs = match op {
                Op::Push(_) | Op::Stop | Op::Throw => 0,
                Op::Dup | Op::Pop | Op::Sload | Op::SkipIf(_) => 1,
                _ => 2,
            };
            if misfit || depth >= needs {
                break op;
            }
        };
        depth = match op {
            Op::Push(_) | Op::Dup => depth + 1,
            Op::Pop | Op::SkipIf(_) | Op::Add | Op::Sub | Op::Mul | Op::Eq | Op::Lt | Op::Gt => depth.saturating_sub(1),
            Op::Sstore => depth.saturating_sub(2),
            _ => depth,
        };
        prog.push(op);
    }
    prog.push(Op::Stop);
    prog
}

pub fn random_words(rng: &mut impl Rng) -> Vec<u64> {
    (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..5)).collect()
}

/// Usually enough for any program; sometimes tight enough to run out.
pub fn random_gas(rng: &mut impl Rng) -> u64 {
    if rng.gen_bool(0.8) {
        100
    } else {
        rng.gen_range(1..24)
    }
}

pub fn random_storage(rng: &mut impl Rng) -> Storage {
    (0..rng.gen_range(0..4)).map(|_| (rng.gen_range(0..4), rng.gen_range(1..5))).collect()
}

// ---------------------------------------------------------------------------
// Matching.

fn dist(a: &Point, b: &Point) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

fn servable(sq: &SquareState, s: &ReliefSupply, d: &ReliefDemand) -> bool {
    s.resource_type == d.resource_type
        && sq.assets.iter().any(|a| {
            dist(&a.location, &s.location) + dist(&s.location, &d.location) + dist(&d.location, &a.location)
                <= a.range + 1e-9
        })
}

/// Maximum deliverable quantity: assets fly any number of trips, so this is
/// a max flow from supplies to demands over servable pairs, computed per
/// resource type as the minimum over supply subsets `A` of
/// `sum(q_s, s not in A) + sum(q_d, d adjacent to A)`.
pub fn optimum_shipped(sq: &SquareState) -> u64 {
    let types = [ResourceType::Food, ResourceType::Water, ResourceType::Medical, ResourceType::Equipment];
    let mut total = 0;
    for t in types {
        let sup: Vec<&ReliefSupply> = sq.supplies.iter().filter(|s| s.resource_type == t).collect();
        let dem: Vec<&ReliefDemand> = sq.demands.iter().filter(|d| d.resource_type == t).collect();
        let mut best = u64::MAX;
        for mask in 0u32..(1 << sup.len()) {
            let outside: u64 = (0..sup.len()).filter(|i| mask & (1 << i) == 0).map(|i| sup[i].quantity).sum();
            let adjacent: u64 = dem
                .iter()
                .filter(|d| (0..sup.len()).any(|i| mask & (1 << i) != 0 && servable(sq, sup[i], d)))
                .map(|d| d.quantity)
                .sum();
            best = best.min(outside + adjacent);
        }
        total += best;
    }
    total
}

/// The same optimum by brute force over integral transfers; only viable for
/// tiny quantities.
pub fn brute_force_shipped(sq: &SquareState) -> u64 {
    let edges: Vec<(usize, usize)> = (0..sq.supplies.len())
        .flat_map(|s| (0..sq.demands.len()).map(move |d| (s, d)))
        .filter(|&(s, d)| servable(sq, &sq.supplies[s], &sq.demands[d]))
        .collect();
    fn go(edges: &[(usize, usize)], rem_s: &mut [u64], rem_d: &mut [u64]) -> u64 {
        let Some((&(s, d), rest)) = edges.split_first() else {
            return 0;
        };
        let mut best = 0;
        for q in 0..=rem_s[s].min(rem_d[d]) {
            rem_s[s] -= q;
            rem_d[d] -= q;
            best = best.max(q + go(rest, rem_s, rem_d));
            rem_s[s] += q;
            rem_d[d] += q;
        }
        best
    }
    let mut rs: Vec<u64> = sq.supplies.iter().map(|s| s.quantity).collect();
    let mut rd: Vec<u64> = sq.demands.iter().map(|d| d.quantity).collect();
    go(&edges, &mut rs, &mut rd)
}

/// Conservation, capacity, range, geometry and summary bookkeeping of a
/// plan computed from a square with no prior shipments.
pub fn plan_invariants(sq: &SquareState, plan: &MatchPlan) -> Result<(), String> {
    let mut from: BTreeMap<u64, u64> = BTreeMap::new();
    let mut to: BTreeMap<u64, u64> = BTreeMap::new();
    let mut dist_sum = 0.0;
    for sh in &plan.shipments {
        let s = sq.supplies.iter().find(|s| s.id == sh.supply_id).ok_or("unknown supply")?;
        let d = sq.demands.iter().find(|d| d.id == sh.demand_id).ok_or("unknown demand")?;
        let a = sq.assets.iter().find(|a| a.id == sh.asset_id).ok_or("unknown asset")?;
        if s.resource_type != d.resource_type {
            return Err(format!("shipment {} crosses resource types", sh.shipment_id));
        }
        if sh.quantity == 0 || sh.quantity > a.payload_capacity {
            return Err(format!(
                "shipment {} quantity {} vs capacity {}",
                sh.shipment_id, sh.quantity, a.payload_capacity
            ));
        }
        let trip = dist(&a.location, &s.location) + dist(&s.location, &d.location) + dist(&d.location, &a.location);
        if trip > a.range + 1e-9 {
            return Err(format!("shipment {} trip {trip} exceeds range {}", sh.shipment_id, a.range));
        }
        let leg = dist(&s.location, &d.location);
        if (sh.leg_distance - leg).abs() > 1e-9 {
            return Err(format!("shipment {} leg {} vs {leg}", sh.shipment_id, sh.leg_distance));
        }
        if (sh.est_time - leg / a.speed).abs() > 1e-9 {
            return Err(format!("shipment {} est_time", sh.shipment_id));
        }
        *from.entry(s.id).or_default() += sh.quantity;
        *to.entry(d.id).or_default() += sh.quantity;
        dist_sum += leg;
    }
    for s in &sq.supplies {
        if from.get(&s.id).copied().unwrap_or(0) > s.quantity {
            return Err(format!("supply {} over-drawn", s.id));
        }
    }
    for d in &sq.demands {
        if to.get(&d.id).copied().unwrap_or(0) > d.quantity {
            return Err(format!("demand {} over-served", d.id));
        }
    }
    let shipped: u64 = to.values().sum();
    let demanded: u64 = sq.demands.iter().map(|d| d.quantity).sum();
    let m = &plan.summary;
    if m.shipped != shipped || m.demanded != demanded || m.residual != demanded - shipped {
        return Err(format!("summary totals {m:?} vs shipped {shipped} demanded {demanded}"));
    }
    if (m.total_distance_km - dist_sum).abs() > 1e-9 {
        return Err(format!("summary distance {} vs {dist_sum}", m.total_distance_km));
    }
    let mut ids: Vec<u64> = plan.shipments.iter().map(|s| s.shipment_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != plan.shipments.len() {
        return Err("duplicate shipment ids".into());
    }
    Ok(())
}

/// Up to four demands and supplies and three assets on a 20 km square.
pub fn random_square(rng: &mut impl Rng, max_qty: u64) -> SquareState {
    let types = [ResourceType::Food, ResourceType::Water];
    let pt = |rng: &mut _| Point { x: Rng::gen_range(rng, 0.0..20.0), y: Rng::gen_range(rng, 0.0..20.0) };
    let nd = rng.gen_range(1..=4);
    let ns = rng.gen_range(1..=4);
    let na = rng.gen_range(1..=3);
    let who = Address::from_label("oracle");
    SquareState {
        demands: (0..nd)
            .map(|i| ReliefDemand {
                id: i + 1,
                location: pt(rng),
                resource_type: types[rng.gen_range(0..2)],
                quantity: rng.gen_range(1..=max_qty),
                urgency: rng.gen_range(1..=5),
                submitter: who,
            })
            .collect(),
        supplies: (0..ns)
            .map(|i| ReliefSupply {
                id: i + 1,
                location: pt(rng),
                resource_type: types[rng.gen_range(0..2)],
                quantity: rng.gen_range(1..=max_qty),
                supplier: who,
            })
            .collect(),
        assets: (0..na)
            .map(|i| TransportAsset {
                id: i + 1,
                kind: if i % 2 == 0 { AssetKind::Uav } else { AssetKind::GroundVehicle },
                location: pt(rng),
                payload_capacity: rng.gen_range(1..=10),
                range: rng.gen_range(10.0..60.0),
                speed: rng.gen_range(20.0..80.0),
                operator: who,
            })
            .collect(),
        ..Default::default()
    }
}
