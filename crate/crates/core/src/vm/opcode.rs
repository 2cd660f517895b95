use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Every instruction the machine understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mnemonic {
    Add,
    Sub,
    Mul,
    Div,
    Sload,
    Sstore,
    Jumpi,
    Eq,
    Lt,
    Gt,
    Transfer,
    Call,
    Throw,
    Selfdestruct,
    Timestamp,
    Blocknumber,
    Push,
    Pop,
    Dup,
    Jump,
    Return,
    Stop,
}

impl Mnemonic {
    pub const ALL: [Mnemonic; 22] = [
        Mnemonic::Add,
        Mnemonic::Sub,
        Mnemonic::Mul,
        Mnemonic::Div,
        Mnemonic::Sload,
        Mnemonic::Sstore,
        Mnemonic::Jumpi,
        Mnemonic::Eq,
        Mnemonic::Lt,
        Mnemonic::Gt,
        Mnemonic::Transfer,
        Mnemonic::Call,
        Mnemonic::Throw,
        Mnemonic::Selfdestruct,
        Mnemonic::Timestamp,
        Mnemonic::Blocknumber,
        Mnemonic::Push,
        Mnemonic::Pop,
        Mnemonic::Dup,
        Mnemonic::Jump,
        Mnemonic::Return,
        Mnemonic::Stop,
    ];

    pub fn byte(self) -> u8 {
        use Mnemonic::*;
        match self {
            Stop => 0x00,
            Add => 0x01,
            Mul => 0x02,
            Sub => 0x03,
            Div => 0x04,
            Lt => 0x10,
            Gt => 0x11,
            Eq => 0x14,
            Timestamp => 0x42,
            Blocknumber => 0x43,
            Pop => 0x50,
            Sload => 0x54,
            Sstore => 0x55,
            Jump => 0x56,
            Jumpi => 0x57,
            Push => 0x67,
            Dup => 0x80,
            Transfer => 0xe0,
            Call => 0xf1,
            Return => 0xf3,
            Throw => 0xfd,
            Selfdestruct => 0xff,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|m| m.byte() == b)
    }

    /// Width in bytes of the immediate that follows the opcode byte.
    pub fn immediate_len(self) -> usize {
        match self {
            Mnemonic::Push => 8,
            Mnemonic::Jump | Mnemonic::Jumpi => 2,
            _ => 0,
        }
    }

    /// Stack words the instruction consumes.
    pub fn pops(self) -> usize {
        use Mnemonic::*;
        match self {
            Add | Sub | Mul | Div | Eq | Lt | Gt | Sstore | Transfer | Call => 2,
            Sload | Jumpi | Pop | Selfdestruct | Dup => 1,
            Throw | Timestamp | Blocknumber | Push | Jump | Return | Stop => 0,
        }
    }

    /// Stack plumbing and control flow that carries no audit signal.
    pub fn is_plumbing(self) -> bool {
        use Mnemonic::*;
        matches!(self, Push | Pop | Dup | Jump | Return | Stop)
    }

    pub fn name(self) -> &'static str {
        use Mnemonic::*;
        match self {
            Add => "ADD",
            Sub => "SUB",
            Mul => "MUL",
            Div => "DIV",
            Sload => "SLOAD",
            Sstore => "SSTORE",
            Jumpi => "JUMPI",
            Eq => "EQ",
            Lt => "LT",
            Gt => "GT",
            Transfer => "TRANSFER",
            Call => "CALL",
            Throw => "THROW",
            Selfdestruct => "SELFDESTRUCT",
            Timestamp => "TIMESTAMP",
            Blocknumber => "BLOCKNUMBER",
            Push => "PUSH",
            Pop => "POP",
            Dup => "DUP",
            Jump => "JUMP",
            Return => "RETURN",
            Stop => "STOP",
        }
    }
}

impl fmt::Display for Mnemonic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mnemonic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.iter().copied().find(|m| m.name() == s).ok_or_else(|| format!("unknown mnemonic {s:?}"))
    }
}

/// A decoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Opcode {
    pub mnemonic: Mnemonic,
    pub operand: Option<u64>,
}

impl Opcode {
    pub fn width(&self) -> usize {
        1 + self.mnemonic.immediate_len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodeError {
    #[error("empty code")]
    Empty,
    #[error("unknown opcode byte {byte:#04x} at {pc}")]
    UnknownOpcode { pc: usize, byte: u8 },
    #[error("truncated immediate at {pc}")]
    Truncated { pc: usize },
    #[error("jump at {pc} targets {target}, which is not an instruction boundary")]
    BadJumpTarget { pc: usize, target: u64 },
}

/// Decodes the whole program, returning `(pc, opcode)` pairs, and checks that
/// every immediate is complete and every jump lands on an instruction.
pub fn disassemble(code: &[u8]) -> Result<Vec<(usize, Opcode)>, CodeError> {
    if code.is_empty() {
        return Err(CodeError::Empty);
    }
    let mut out = Vec::new();
    let mut pc = 0;
    while pc < code.len() {
        let byte = code[pc];
        let mnemonic = Mnemonic::from_byte(byte).ok_or(CodeError::UnknownOpcode { pc, byte })?;
        let n = mnemonic.immediate_len();
        let imm = code.get(pc + 1..pc + 1 + n).ok_or(CodeError::Truncated { pc })?;
        let operand = (n > 0).then(|| imm.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64));
        out.push((pc, Opcode { mnemonic, operand }));
        pc += 1 + n;
    }
    for &(pc, op) in &out {
        if matches!(op.mnemonic, Mnemonic::Jump | Mnemonic::Jumpi) {
            let target = op.operand.unwrap_or_default();
            if out.binary_search_by_key(&(target as usize), |&(p, _)| p).is_err() {
                return Err(CodeError::BadJumpTarget { pc, target });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_are_unique_and_roundtrip() {
        let mut seen = std::collections::HashSet::new();
        for m in Mnemonic::ALL {
            assert!(seen.insert(m.byte()), "{m} shares a byte");
            assert_eq!(Mnemonic::from_byte(m.byte()), Some(m));
            assert_eq!(m.name().parse::<Mnemonic>(), Ok(m));
        }
    }

    #[test]
    fn six_plumbing_mnemonics() {
        assert_eq!(Mnemonic::ALL.iter().filter(|m| m.is_plumbing()).count(), 6);
    }

    #[test]
    fn disassemble_rejects_bad_code() {
        assert_eq!(disassemble(&[]), Err(CodeError::Empty));
        assert_eq!(disassemble(&[0x67, 0, 0]), Err(CodeError::Truncated { pc: 0 }));
        assert_eq!(disassemble(&[0x0c]), Err(CodeError::UnknownOpcode { pc: 0, byte: 0x0c }));
        // JUMP 0x0009 in a 4-byte program
        assert_eq!(disassemble(&[0x56, 0x00, 0x09, 0x00]), Err(CodeError::BadJumpTarget { pc: 0, target: 9 }));
        // JUMP into the middle of a PUSH immediate
        let mut code = vec![0x56, 0x00, 0x05, 0x67];
        code.extend_from_slice(&[0; 8]);
        assert!(matches!(disassemble(&code), Err(CodeError::BadJumpTarget { .. })));
    }
}
