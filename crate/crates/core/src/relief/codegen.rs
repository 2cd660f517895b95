//! Bytecode for the relief contracts.
//!
//! A record contract receives its fields as call data, id on top. It writes
//! field `i` to key `(id << 8) | i`, a presence flag at `id << 8`, then calls
//! Square with the marker `(tag << 56) | id` and throws unless that call
//! succeeded. A repeated id throws before any write.
//!
//! The machine has no swap, so the id is parked in [`SCRATCH`] while the
//! fields below it are stored. The slot is cleared before the Square call.
//!
//! Square stores each marker it receives under itself.

use super::records::RecordKind;
use crate::vm::{Asm, Mnemonic::*};

pub const SCRATCH: u64 = u64::MAX;

fn scratch_key(a: Asm, field: u64) -> Asm {
    let a = a.push(SCRATCH).op(Sload).push(256).op(Mul);
    if field == 0 {
        a
    } else {
        a.push(field).op(Add)
    }
}

pub fn record_code(kind: RecordKind, square_word: u64) -> Vec<u8> {
    let mut a = Asm::new().op(Dup).push(SCRATCH).op(Sstore);
    a = scratch_key(a, 0).op(Sload).jumpi("duplicate");
    a = scratch_key(a.push(1), 0).op(Sstore).op(Pop);
    for i in 1..kind.field_count() {
        a = scratch_key(a, i).op(Sstore);
    }
    a.push(kind.tag() << 56)
        .push(SCRATCH)
        .op(Sload)
        .op(Add)
        .push(0)
        .push(SCRATCH)
        .op(Sstore)
        .push(square_word)
        .op(Call)
        .jumpi("ok")
        .op(Throw)
        .label("ok")
        .op(Stop)
        .label("duplicate")
        .op(Throw)
        .assemble()
}

/// Stores the argument word under itself.
pub fn square_code() -> Vec<u8> {
    Asm::new().op(Dup).op(Sstore).op(Stop).assemble()
}

/// Gas sufficient for any record call, including the nested Square call.
pub const RECORD_GAS: u64 = 400;
