use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::{Address, TxHash};
use crate::vm::{Mnemonic, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TraceCategory {
    Arithmetic,
    Storage,
    Conditional,
    Transfer,
    Invocation,
    ExceptionThrow,
    SelfDestruct,
    BlockInfo,
}

impl TraceCategory {
    pub const ALL: [TraceCategory; 8] = [
        TraceCategory::Arithmetic,
        TraceCategory::Storage,
        TraceCategory::Conditional,
        TraceCategory::Transfer,
        TraceCategory::Invocation,
        TraceCategory::ExceptionThrow,
        TraceCategory::SelfDestruct,
        TraceCategory::BlockInfo,
    ];
}

impl fmt::Display for TraceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// `None` exactly for plumbing mnemonics.
pub fn categorize(m: Mnemonic) -> Option<TraceCategory> {
    use Mnemonic::*;
    use TraceCategory as C;
    Some(match m {
        Add | Sub | Mul | Div => C::Arithmetic,
        Sload | Sstore => C::Storage,
        Jumpi | Eq | Lt | Gt => C::Conditional,
        Transfer => C::Transfer,
        Call => C::Invocation,
        Throw => C::ExceptionThrow,
        Selfdestruct => C::SelfDestruct,
        Timestamp | Blocknumber => C::BlockInfo,
        Push | Pop | Dup | Jump | Return | Stop => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorizedEvent {
    pub category: TraceCategory,
    pub mnemonic: Mnemonic,
    pub call_depth: u32,
    /// Stack before the instruction, top first.
    pub stack_top: Vec<u64>,
    /// Top of stack once the instruction finished, read from the next raw
    /// event in the same frame. `None` when the frame ended first.
    pub produced: Option<u64>,
}

impl CategorizedEvent {
    /// The operands this instruction consumed.
    pub fn operands(&self) -> &[u64] {
        &self.stack_top[..self.mnemonic.pops().min(self.stack_top.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorizedTrace {
    pub tx_hash: TxHash,
    pub contract: Address,
    pub events: Vec<CategorizedEvent>,
}

/// Drops plumbing events along with pc and gas, keeping order.
pub fn filter_trace(t: &Trace) -> CategorizedTrace {
    let raw = &t.events;
    let events = raw
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let category = categorize(e.opcode.mnemonic)?;
            let d = e.call_depth;
            let produced = raw[i + 1..]
                .iter()
                .take_while(|n| n.call_depth >= d)
                .find(|n| n.call_depth == d)
                .and_then(|n| n.stack_top.first().copied());
            Some(CategorizedEvent {
                category,
                mnemonic: e.opcode.mnemonic,
                call_depth: d,
                stack_top: e.stack_top.clone(),
                produced,
            })
        })
        .collect();
    CategorizedTrace { tx_hash: t.tx_hash, contract: t.root_contract, events }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{encode_words, Transaction};
    use crate::vm::{deploy, execute, Asm, BlockContext, Mnemonic::*, VmConfig, WorldState};

    fn run(code: Asm) -> Trace {
        let cfg = VmConfig::default();
        let mut s = WorldState::new();
        let d = Address::from_label("d");
        let a = deploy(&mut s, d, 0, &code.assemble(), &cfg).unwrap();
        let tx = Transaction::call(d, 1, a, encode_words(&[]), 1000);
        execute(&mut s, &tx, &BlockContext { timestamp: 50, height: 2 }, &cfg).trace
    }

    #[test]
    fn totality() {
        for m in Mnemonic::ALL {
            assert_eq!(categorize(m).is_none(), m.is_plumbing(), "{m}");
        }
    }

    #[test]
    fn push_push_add_stop() {
        let ct = filter_trace(&run(Asm::new().push(2).push(3).op(Add).op(Stop)));
        assert_eq!(ct.events.len(), 1);
        assert_eq!(ct.events[0].category, TraceCategory::Arithmetic);
        assert_eq!(ct.events[0].mnemonic, Add);
        assert_eq!(ct.events[0].produced, Some(5));
        assert_eq!(ct.events[0].operands(), &[3, 2]);
    }

    #[test]
    fn plumbing_only_is_empty() {
        let ct = filter_trace(&run(Asm::new().push(1).op(Dup).op(Pop).op(Pop).jump("e").label("e").op(Stop)));
        assert!(ct.events.is_empty());
    }

    #[test]
    fn produced_ends_with_frame() {
        let ct = filter_trace(&run(Asm::new().op(Timestamp)));
        assert_eq!(ct.events[0].produced, None);
        let ct = filter_trace(&run(Asm::new().op(Timestamp).op(Stop)));
        assert_eq!(ct.events[0].produced, Some(50));
    }
}
