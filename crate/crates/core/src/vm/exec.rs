//! The interpreter.
//!
//! Gas is a single counter shared by every frame of a transaction. A failing
//! callee frame (THROW, stack fault, failed TRANSFER) rolls back its own writes
//! and leaves 0 on the caller's stack; running out of gas aborts the whole
//! transaction.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::opcode::{disassemble, CodeError, Mnemonic, Opcode};
use super::state::{contract_address, ContractInstance, WorldState};
use super::trace::{Outcome, Trace, TraceEvent, STACK_WINDOW};
use crate::ledger::tx::{call_words, Transaction, TxKind};
use crate::types::Address;

pub const GAS_PER_OP: u64 = 1;
pub const GAS_PER_CALL: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockContext {
    pub timestamp: u64,
    pub height: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmConfig {
    pub max_call_depth: u32,
    pub stack_limit: usize,
    /// Balance credited to every newly deployed contract.
    pub initial_contract_balance: u64,
}

impl Default for VmConfig {
    fn default() -> Self {
        Self { max_call_depth: 64, stack_limit: 1024, initial_contract_balance: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum VmError {
    #[error("out of gas")]
    OutOfGas,
    #[error("stack underflow")]
    StackUnderflow,
    #[error("stack overflow")]
    StackOverflow,
    #[error("unknown target {0}")]
    UnknownTarget(Address),
    #[error("explicit throw")]
    Throw,
    #[error("insufficient balance for transfer")]
    InsufficientBalance,
    #[error("malformed code: {0}")]
    MalformedCode(String),
    #[error("derived address {0} already in use")]
    AddressCollision(Address),
    #[error("call data is not an RLP list of byte strings")]
    BadCallData,
}

impl From<CodeError> for VmError {
    fn from(e: CodeError) -> Self {
        VmError::MalformedCode(e.to_string())
    }
}

/// Result of running one transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub outcome: Outcome,
    pub gas_used: u64,
    pub contract_address: Option<Address>,
    /// Why the root frame stopped, when it did not finish normally.
    pub halt: Option<VmError>,
    pub trace: Trace,
}

/// Validates `code` and stores it at the address derived from `(creator, nonce)`.
pub fn deploy(
    state: &mut WorldState,
    creator: Address,
    nonce: u64,
    code: &[u8],
    cfg: &VmConfig,
) -> Result<Address, VmError> {
    disassemble(code)?;
    let address = contract_address(&creator, nonce);
    let inserted = state.insert(ContractInstance {
        address,
        deployer: creator,
        nonce,
        code: Arc::new(code.to_vec()),
        storage: BTreeMap::new(),
        balance: cfg.initial_contract_balance,
    });
    if !inserted {
        return Err(VmError::AddressCollision(address));
    }
    Ok(address)
}

/// Executes `tx` against `state`, committing its effects only on success.
pub fn execute(state: &mut WorldState, tx: &Transaction, ctx: &BlockContext, cfg: &VmConfig) -> Execution {
    match tx.kind {
        TxKind::ContractCreation => {
            let res = deploy(state, tx.sender, tx.nonce, &tx.payload, cfg);
            let address = res.as_ref().ok().copied();
            Execution {
                outcome: if res.is_ok() { Outcome::Success } else { Outcome::Reverted },
                gas_used: 0,
                contract_address: address,
                halt: res.err(),
                trace: Trace {
                    tx_hash: tx.hash,
                    root_contract: address.unwrap_or_default(),
                    events: Vec::new(),
                    outcome: if address.is_some() { Outcome::Success } else { Outcome::Reverted },
                    touched: Vec::new(),
                },
            }
        }
        TxKind::ContractCall => {
            let target = tx.target.unwrap_or_default();
            let mut m = Machine { ctx, cfg, gas: tx.gas_limit, events: Vec::new(), touched: Vec::new() };
            let halt = match (state.contract(&target), call_words(&tx.payload)) {
                (None, _) => Some(VmError::UnknownTarget(target)),
                (_, None) => Some(VmError::BadCallData),
                (Some(_), Some(mut words)) => {
                    words.reverse();
                    let mut working = state.clone();
                    match m.run(&mut working, target, 0, words) {
                        Ok(()) => {
                            *state = working;
                            None
                        }
                        Err(h) => Some(h.into_error()),
                    }
                }
            };
            let outcome = if halt.is_none() { Outcome::Success } else { Outcome::Reverted };
            Execution {
                outcome,
                gas_used: tx.gas_limit - m.gas,
                contract_address: None,
                halt,
                trace: Trace { tx_hash: tx.hash, root_contract: target, events: m.events, outcome, touched: m.touched },
            }
        }
    }
}

enum Halt {
    /// Confined to the frame that raised it.
    Fail(VmError),
    /// Aborts the transaction.
    Fatal(VmError),
}

impl Halt {
    fn into_error(self) -> VmError {
        match self {
            Halt::Fail(e) | Halt::Fatal(e) => e,
        }
    }
}

struct Machine<'a> {
    ctx: &'a BlockContext,
    cfg: &'a VmConfig,
    gas: u64,
    events: Vec<TraceEvent>,
    touched: Vec<Address>,
}

impl Machine<'_> {
    fn run(&mut self, state: &mut WorldState, addr: Address, depth: u32, mut stack: Vec<u64>) -> Result<(), Halt> {
        let code = match state.contract(&addr) {
            Some(c) => Arc::clone(&c.code),
            None => return Err(Halt::Fail(VmError::UnknownTarget(addr))),
        };
        if !self.touched.contains(&addr) {
            self.touched.push(addr);
        }
        let mut pc = 0usize;
        while pc < code.len() {
            let mnemonic = Mnemonic::from_byte(code[pc]).expect("code validated at deploy");
            let width = mnemonic.immediate_len();
            let operand =
                (width > 0).then(|| code[pc + 1..pc + 1 + width].iter().fold(0u64, |acc, &b| (acc << 8) | b as u64));
            let cost = if mnemonic == Mnemonic::Call { GAS_PER_CALL } else { GAS_PER_OP };
            if self.gas < cost {
                return Err(Halt::Fatal(VmError::OutOfGas));
            }
            self.gas -= cost;
            self.events.push(TraceEvent {
                opcode: Opcode { mnemonic, operand },
                pc,
                call_depth: depth,
                stack_top: stack.iter().rev().take(STACK_WINDOW).copied().collect(),
                gas_remaining: self.gas,
            });
            if stack.len() < mnemonic.pops() {
                return Err(Halt::Fail(VmError::StackUnderflow));
            }
            let mut next = pc + 1 + width;
            use Mnemonic::*;
            match mnemonic {
                Add | Sub | Mul | Div | Eq | Lt | Gt => {
                    let right = stack.pop().unwrap();
                    let left = stack.pop().unwrap();
                    stack.push(match mnemonic {
                        Add => left.wrapping_add(right),
                        Sub => left.wrapping_sub(right),
                        Mul => left.wrapping_mul(right),
                        Div => left.checked_div(right).unwrap_or(0),
                        Eq => (left == right) as u64,
                        Lt => (left < right) as u64,
                        Gt => (left > right) as u64,
                        _ => unreachable!(),
                    });
                }
                Sload => {
                    let key = stack.pop().unwrap();
                    let v = state.storage_of(&addr).and_then(|s| s.get(&key)).copied().unwrap_or(0);
                    stack.push(v);
                }
                Sstore => {
                    let key = stack.pop().unwrap();
                    let value = stack.pop().unwrap();
                    let c = state.contract_mut(&addr).ok_or(Halt::Fail(VmError::UnknownTarget(addr)))?;
                    if value == 0 {
                        c.storage.remove(&key);
                    } else {
                        c.storage.insert(key, value);
                    }
                }
                Jumpi => {
                    if stack.pop().unwrap() != 0 {
                        next = operand.unwrap() as usize;
                    }
                }
                Jump => next = operand.unwrap() as usize,
                Transfer => {
                    let recipient = stack.pop().unwrap();
                    let amount = stack.pop().unwrap();
                    let c = state.contract_mut(&addr).ok_or(Halt::Fail(VmError::UnknownTarget(addr)))?;
                    if c.balance < amount {
                        return Err(Halt::Fail(VmError::InsufficientBalance));
                    }
                    c.balance -= amount;
                    state.credit(recipient, amount);
                }
                Call => {
                    let target = stack.pop().unwrap();
                    let arg = stack.pop().unwrap();
                    let flag = match state.resolve_word(target) {
                        Some(callee) if depth < self.cfg.max_call_depth => {
                            let mut child = state.clone();
                            match self.run(&mut child, callee, depth + 1, vec![arg]) {
                                Ok(()) => {
                                    *state = child;
                                    1
                                }
                                Err(Halt::Fail(_)) => 0,
                                Err(fatal) => return Err(fatal),
                            }
                        }
                        _ => 0,
                    };
                    stack.push(flag);
                }
                Throw => return Err(Halt::Fail(VmError::Throw)),
                Selfdestruct => {
                    let beneficiary = stack.pop().unwrap();
                    let c = state.remove(&addr).ok_or(Halt::Fail(VmError::UnknownTarget(addr)))?;
                    state.credit(beneficiary, c.balance);
                    return Ok(());
                }
                Timestamp => stack.push(self.ctx.timestamp),
                Blocknumber => stack.push(self.ctx.height),
                Push => stack.push(operand.unwrap()),
                Pop => {
                    stack.pop();
                }
                Dup => {
                    let top = *stack.last().unwrap();
                    stack.push(top);
                }
                Return | Stop => return Ok(()),
            }
            if stack.len() > self.cfg.stack_limit {
                return Err(Halt::Fail(VmError::StackOverflow));
            }
            pc = next;
        }
        Ok(())
    }
}
