//! Stack machine that hosts contracts and records a per-instruction trace.
//!
//! Words are 64-bit. Bytecode is one byte per opcode; `PUSH` carries an
//! 8-byte big-endian immediate, `JUMP`/`JUMPI` a 2-byte target. Call data is
//! an RLP list of byte strings, loaded onto the root frame's stack with the
//! first word on top. `CALL` pops the callee's address word and one argument,
//! which becomes the callee's entire initial stack, and pushes 1 on success or
//! 0 on callee failure.

pub mod asm;
pub mod exec;
pub mod opcode;
pub mod state;
pub mod trace;

pub use asm::Asm;
pub use exec::{deploy, execute, BlockContext, Execution, VmConfig, VmError, GAS_PER_CALL, GAS_PER_OP};
pub use opcode::{disassemble, CodeError, Mnemonic, Opcode};
pub use state::{contract_address, ContractInstance, WorldState};
pub use trace::{parse_export, Outcome, Trace, TraceEvent};
