//! The fixed query set over categorized traces.
//!
//! * Q1: an invocation whose callee ran, followed later by a storage write at
//!   the invoking depth or shallower.
//! * Q2: an invocation whose callee did not throw, where the first event
//!   back in the caller frame is not a conditional.
//! * Q3: a block-info value that reaches a conditional or transfer operand
//!   within the next [`TAINT_WINDOW`] same-frame events, directly or through
//!   arithmetic.
//! * Q4: a root-frame storage write to a key that a sibling transaction also
//!   writes.
//! * Q5: a throw at depth one or more, where the first event back in the
//!   caller frame is not a conditional.
//!
//! Q2 and Q5 split invocations by whether the callee threw, so a single
//! ignored failure matches exactly one of them.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::category::{CategorizedEvent, CategorizedTrace, TraceCategory as C};
use crate::types::TxHash;
use crate::vm::Mnemonic;

pub const TAINT_WINDOW: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryId {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
}

impl QueryId {
    pub const ALL: [QueryId; 5] = [QueryId::Q1, QueryId::Q2, QueryId::Q3, QueryId::Q4, QueryId::Q5];
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbnormalExecution {
    pub tx_hash: TxHash,
    pub pattern: QueryId,
    /// Strictly increasing indices into the categorized events.
    pub evidence: Vec<usize>,
    /// For Q4, the sibling transaction writing the same key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub related_tx: Option<TxHash>,
}

/// Root-frame storage keys written by one other transaction against the
/// same contract in the same block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiblingWrites {
    pub tx_hash: TxHash,
    pub keys: BTreeSet<u64>,
}

pub fn root_write_keys(ct: &CategorizedTrace) -> BTreeSet<u64> {
    ct.events
        .iter()
        .filter(|e| e.call_depth == 0 && e.mnemonic == Mnemonic::Sstore)
        .filter_map(|e| e.stack_top.first().copied())
        .collect()
}

/// Index of the first event after `i` back in frame depth `d`, provided the
/// frame has not returned before it.
fn next_in_frame(ev: &[CategorizedEvent], i: usize, d: u32) -> Option<usize> {
    ev.iter()
        .enumerate()
        .skip(i + 1)
        .take_while(|(_, e)| e.call_depth >= d)
        .find(|(_, e)| e.call_depth == d)
        .map(|(j, _)| j)
}

/// Events of the callee started by the invocation at `i`.
fn callee_span(ev: &[CategorizedEvent], i: usize) -> std::ops::Range<usize> {
    let d = ev[i].call_depth;
    let end = ev.iter().skip(i + 1).position(|e| e.call_depth <= d).map_or(ev.len(), |p| i + 1 + p);
    i + 1..end
}

fn q1(ct: &CategorizedTrace, out: &mut Vec<AbnormalExecution>) {
    let ev = &ct.events;
    for (i, e) in ev.iter().enumerate() {
        if e.category != C::Invocation {
            continue;
        }
        let span = callee_span(ev, i);
        if span.is_empty() {
            continue;
        }
        let write = ev[span.end..]
            .iter()
            .position(|w| w.mnemonic == Mnemonic::Sstore && w.call_depth <= e.call_depth)
            .map(|p| span.end + p);
        if let Some(j) = write {
            out.push(abnormal(ct, QueryId::Q1, vec![i, span.start, j]));
        }
    }
}

fn callee_threw(ev: &[CategorizedEvent], i: usize) -> Option<usize> {
    let d = ev[i].call_depth + 1;
    callee_span(ev, i).find(|&k| ev[k].call_depth == d && ev[k].category == C::ExceptionThrow)
}

fn q2(ct: &CategorizedTrace, out: &mut Vec<AbnormalExecution>) {
    let ev = &ct.events;
    for (i, e) in ev.iter().enumerate() {
        if e.category != C::Invocation || callee_threw(ev, i).is_some() {
            continue;
        }
        match next_in_frame(ev, i, e.call_depth) {
            Some(j) if ev[j].category == C::Conditional => {}
            Some(j) => out.push(abnormal(ct, QueryId::Q2, vec![i, j])),
            None => out.push(abnormal(ct, QueryId::Q2, vec![i])),
        }
    }
}

fn q3(ct: &CategorizedTrace, out: &mut Vec<AbnormalExecution>) {
    let ev = &ct.events;
    for (i, e) in ev.iter().enumerate() {
        if e.category != C::BlockInfo {
            continue;
        }
        let Some(v) = e.produced else {
            continue;
        };
        let d = e.call_depth;
        let mut tainted = vec![v];
        let mut path = vec![i];
        let window = ev[i + 1..]
            .iter()
            .enumerate()
            .take_while(|(_, n)| n.call_depth >= d)
            .filter(|(_, n)| n.call_depth == d)
            .take(TAINT_WINDOW);
        for (off, n) in window {
            let j = i + 1 + off;
            if !n.operands().iter().any(|x| tainted.contains(x)) {
                continue;
            }
            match n.category {
                C::Conditional | C::Transfer => {
                    path.push(j);
                    out.push(abnormal(ct, QueryId::Q3, path));
                    break;
                }
                C::Arithmetic => {
                    if let Some(p) = n.produced {
                        tainted.push(p);
                        path.push(j);
                    }
                }
                _ => {}
            }
        }
    }
}

fn q4(ct: &CategorizedTrace, siblings: &[SiblingWrites], out: &mut Vec<AbnormalExecution>) {
    for (i, e) in ct.events.iter().enumerate() {
        if e.call_depth != 0 || e.mnemonic != Mnemonic::Sstore {
            continue;
        }
        let Some(&key) = e.stack_top.first() else {
            continue;
        };
        for s in siblings.iter().filter(|s| s.tx_hash != ct.tx_hash && s.keys.contains(&key)) {
            let mut a = abnormal(ct, QueryId::Q4, vec![i]);
            a.related_tx = Some(s.tx_hash);
            out.push(a);
        }
    }
}

fn q5(ct: &CategorizedTrace, out: &mut Vec<AbnormalExecution>) {
    let ev = &ct.events;
    for (t, e) in ev.iter().enumerate() {
        if e.category != C::ExceptionThrow || e.call_depth == 0 {
            continue;
        }
        if let Some(j) = next_in_frame(ev, t, e.call_depth - 1) {
            if ev[j].category != C::Conditional {
                out.push(abnormal(ct, QueryId::Q5, vec![t, j]));
            }
        }
    }
}

fn abnormal(ct: &CategorizedTrace, pattern: QueryId, evidence: Vec<usize>) -> AbnormalExecution {
    AbnormalExecution { tx_hash: ct.tx_hash, pattern, evidence, related_tx: None }
}

/// Every match of Q1 through Q5, in query order.
pub fn query_abnormal(ct: &CategorizedTrace, siblings: &[SiblingWrites]) -> Vec<AbnormalExecution> {
    let mut out = Vec::new();
    q1(ct, &mut out);
    q2(ct, &mut out);
    q3(ct, &mut out);
    q4(ct, siblings, &mut out);
    q5(ct, &mut out);
    out
}
