use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::opcode::{Mnemonic, Opcode};
use crate::types::{Address, TxHash};

/// Number of stack words captured per event.
pub const STACK_WINDOW: usize = 4;

/// One executed instruction. `stack_top` is the stack *before* the
/// instruction ran, top first; `gas_remaining` is after its cost was charged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub opcode: Opcode,
    pub pc: usize,
    pub call_depth: u32,
    pub stack_top: Vec<u64>,
    pub gas_remaining: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Reverted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub tx_hash: TxHash,
    pub root_contract: Address,
    pub events: Vec<TraceEvent>,
    pub outcome: Outcome,
    /// Contracts whose code ran during the transaction, in first-entry order.
    pub touched: Vec<Address>,
}

impl Trace {
    /// Tab-separated export, one event per line:
    /// `pc depth mnemonic operand stack_top_csv gas`. Absent operands and
    /// empty stacks are written as `-`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let operand = e.opcode.operand.map(|o| o.to_string()).unwrap_or_else(|| "-".into());
            let stack = if e.stack_top.is_empty() {
                "-".to_owned()
            } else {
                e.stack_top.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                e.pc, e.call_depth, e.opcode.mnemonic, operand, stack, e.gas_remaining
            )
            .unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {msg}")]
pub struct TraceParseError {
    pub line: usize,
    pub msg: String,
}

/// Parses the export format back into events.
pub fn parse_export(text: &str) -> Result<Vec<TraceEvent>, TraceParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let err = |msg: String| TraceParseError { line: i + 1, msg };
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != 6 {
                return Err(err(format!("expected 6 columns, got {}", cols.len())));
            }
            let num = |s: &str| s.parse::<u64>().map_err(|e| err(format!("{s:?}: {e}")));
            let mnemonic: Mnemonic = cols[2].parse().map_err(err)?;
            let operand = if cols[3] == "-" { None } else { Some(num(cols[3])?) };
            let stack_top =
                if cols[4] == "-" { Vec::new() } else { cols[4].split(',').map(num).collect::<Result<_, _>>()? };
            Ok(TraceEvent {
                opcode: Opcode { mnemonic, operand },
                pc: num(cols[0])? as usize,
                call_depth: num(cols[1])? as u32,
                stack_top,
                gas_remaining: num(cols[5])?,
            })
        })
        .collect()
}
