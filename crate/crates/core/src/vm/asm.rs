//! A tiny label-resolving assembler for building contract bytecode.

use std::collections::HashMap;

use super::opcode::Mnemonic;

#[derive(Debug, Clone)]
enum Item {
    Op(Mnemonic),
    Push(u64),
    Jump(Mnemonic, String),
    Label(String),
}

#[derive(Debug, Clone, Default)]
pub struct Asm {
    items: Vec<Item>,
}

impl Asm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn op(mut self, m: Mnemonic) -> Self {
        assert!(m.immediate_len() == 0, "{m} takes an immediate");
        self.items.push(Item::Op(m));
        self
    }

    pub fn push(mut self, v: u64) -> Self {
        self.items.push(Item::Push(v));
        self
    }

    pub fn jump(mut self, label: &str) -> Self {
        self.items.push(Item::Jump(Mnemonic::Jump, label.to_owned()));
        self
    }

    pub fn jumpi(mut self, label: &str) -> Self {
        self.items.push(Item::Jump(Mnemonic::Jumpi, label.to_owned()));
        self
    }

    pub fn label(mut self, label: &str) -> Self {
        self.items.push(Item::Label(label.to_owned()));
        self
    }

    /// Appends each mnemonic in turn.
    pub fn ops(self, ms: &[Mnemonic]) -> Self {
        ms.iter().fold(self, |a, &m| a.op(m))
    }

    pub fn then(mut self, other: Asm) -> Self {
        self.items.extend(other.items);
        self
    }

    /// Resolves labels and emits bytecode. Panics on an undefined or duplicate
    /// label: programs are built in code, so that is a programming error.
    pub fn assemble(&self) -> Vec<u8> {
        let mut labels = HashMap::new();
        let mut pc = 0usize;
        for item in &self.items {
            match item {
                Item::Label(l) => {
                    assert!(labels.insert(l.clone(), pc).is_none(), "duplicate label {l}");
                }
                Item::Op(_) => pc += 1,
                Item::Push(_) => pc += 9,
                Item::Jump(..) => pc += 3,
            }
        }
        let mut out = Vec::with_capacity(pc);
        for item in &self.items {
            match item {
                Item::Label(_) => {}
                Item::Op(m) => out.push(m.byte()),
                Item::Push(v) => {
                    out.push(Mnemonic::Push.byte());
                    out.extend_from_slice(&v.to_be_bytes());
                }
                Item::Jump(m, l) => {
                    let target = *labels.get(l).unwrap_or_else(|| panic!("undefined label {l}"));
                    let target = u16::try_from(target).expect("program too large for 16-bit jumps");
                    out.push(m.byte());
                    out.extend_from_slice(&target.to_be_bytes());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::opcode::disassemble;

    #[test]
    fn labels_resolve_to_instruction_offsets() {
        let code = Asm::new().push(1).jumpi("end").op(Mnemonic::Throw).label("end").op(Mnemonic::Stop).assemble();
        let ops = disassemble(&code).unwrap();
        assert_eq!(ops[1].1.operand, Some(13));
        assert_eq!(ops[3].0, 13);
    }
}
