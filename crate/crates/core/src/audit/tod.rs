use crate::ledger::{Transaction, TxKind};
use crate::types::{Address, TxHash};
use crate::vm::{execute, BlockContext, VmConfig, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvalidTx {
    #[error("transaction {0} is not a contract call")]
    NotACall(TxHash),
    #[error("transaction {0} does not hash to its id")]
    BadHash(TxHash),
    #[error("transactions target different contracts")]
    DifferentTargets,
    #[error("target {0} is not deployed")]
    UnknownTarget(Address),
}

/// Runs `a; b` and `b; a` from the same pre-state and reports whether the
/// target contract's storage ends up different. `pre` is left untouched.
pub fn order_dependency_check(
    pre: &WorldState,
    a: &Transaction,
    b: &Transaction,
    ctx: &BlockContext,
    cfg: &VmConfig,
) -> Result<bool, InvalidTx> {
    for t in [a, b] {
        if t.kind != TxKind::ContractCall {
            return Err(InvalidTx::NotACall(t.hash));
        }
        if !t.hash_is_valid() {
            return Err(InvalidTx::BadHash(t.hash));
        }
    }
    let target = a.target.expect("calls carry a target");
    if b.target != Some(target) {
        return Err(InvalidTx::DifferentTargets);
    }
    if pre.contract(&target).is_none() {
        return Err(InvalidTx::UnknownTarget(target));
    }
    let run = |first: &Transaction, second: &Transaction| {
        let mut s = pre.clone();
        execute(&mut s, first, ctx, cfg);
        execute(&mut s, second, ctx, cfg);
        s.storage_of(&target).cloned()
    };
    Ok(run(a, b) != run(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::encode_words;
    use crate::vm::{deploy, Asm, Mnemonic::*};

    const CTX: BlockContext = BlockContext { timestamp: 10, height: 1 };

    fn setup(code: Asm) -> (WorldState, Address) {
        let mut s = WorldState::new();
        let a = deploy(&mut s, Address::from_label("d"), 0, &code.assemble(), &VmConfig::default()).unwrap();
        (s, a)
    }

    /// storage[word0] += 1
    fn increment() -> Asm {
        let scratch = u64::MAX;
        Asm::new()
            .op(Dup)
            .push(scratch)
            .op(Sstore)
            .op(Sload)
            .push(1)
            .op(Add)
            .push(scratch)
            .op(Sload)
            .op(Sstore)
            .push(0)
            .push(scratch)
            .op(Sstore)
            .op(Stop)
    }

    #[test]
    fn increments_commute() {
        let (s, c) = setup(increment());
        let a = Transaction::call(Address::from_label("x"), 0, c, encode_words(&[1]), 100);
        let b = Transaction::call(Address::from_label("y"), 0, c, encode_words(&[2]), 100);
        assert_eq!(order_dependency_check(&s, &a, &b, &CTX, &VmConfig::default()), Ok(false));
        let b = Transaction::call(Address::from_label("y"), 0, c, encode_words(&[1]), 100);
        assert_eq!(order_dependency_check(&s, &a, &b, &CTX, &VmConfig::default()), Ok(false));
        let mut after = s.clone();
        execute(&mut after, &a, &CTX, &VmConfig::default());
        execute(&mut after, &b, &CTX, &VmConfig::default());
        assert_eq!(after.storage_of(&c).unwrap().get(&1), Some(&2));
    }

    #[test]
    fn same_key_last_writer_wins() {
        // storage[word0] = word1
        let (s, c) = setup(Asm::new().op(Sstore).op(Stop));
        let a = Transaction::call(Address::from_label("x"), 0, c, encode_words(&[1, 10]), 100);
        let b = Transaction::call(Address::from_label("y"), 0, c, encode_words(&[1, 20]), 100);
        assert_eq!(order_dependency_check(&s, &a, &b, &CTX, &VmConfig::default()), Ok(true));
        assert_eq!(order_dependency_check(&s, &b, &a, &CTX, &VmConfig::default()), Ok(true));
        let b = Transaction::call(Address::from_label("y"), 0, c, encode_words(&[2, 20]), 100);
        assert_eq!(order_dependency_check(&s, &a, &b, &CTX, &VmConfig::default()), Ok(false));
        let before = s.clone();
        let _ = order_dependency_check(&s, &a, &b, &CTX, &VmConfig::default());
        assert_eq!(s, before);
        let other = Transaction::call(Address::from_label("y"), 0, Address::from_label("z"), encode_words(&[]), 100);
        assert_eq!(
            order_dependency_check(&s, &a, &other, &CTX, &VmConfig::default()),
            Err(InvalidTx::DifferentTargets)
        );
    }
}
