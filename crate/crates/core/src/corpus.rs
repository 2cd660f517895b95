//! Labeled attack corpus: randomized contracts for each vulnerability class,
//! each paired with a benign twin of the same shape.
//!
//! Every instance has its own deployer, so contract addresses follow from
//! deployer nonces and can be baked into the code before deployment.
//! Deployments go in one block and triggers in a later one; the two TOD
//! triggers of an instance always share a block.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{AuditOutcome, VulnClass};
use crate::ledger::{encode_words, Ledger, LedgerError, Transaction};
use crate::types::{Address, TxHash};
use crate::vm::{contract_address, Asm, Mnemonic::*};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Attack,
    Benign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub sender: Address,
    /// Index into the instance's contracts.
    pub contract: usize,
    pub words: Vec<u64>,
    pub gas: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusInstance {
    pub class: VulnClass,
    pub label: Label,
    pub index: usize,
    pub deployer: Address,
    /// Deployed in order at deployer nonces 0, 1, ...
    #[serde(with = "hex_codes")]
    pub contracts: Vec<Vec<u8>>,
    /// The contract under audit.
    pub target: usize,
    pub triggers: Vec<Trigger>,
}

mod hex_codes {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(codes: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        codes.iter().map(hex::encode).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        Vec::<String>::deserialize(d)?.into_iter().map(|h| hex::decode(h).map_err(serde::de::Error::custom)).collect()
    }
}

impl CorpusInstance {
    pub fn address(&self, i: usize) -> Address {
        contract_address(&self.deployer, i as u64)
    }

    pub fn addresses(&self) -> Vec<Address> {
        (0..self.contracts.len()).map(|i| self.address(i)).collect()
    }

    pub fn target_address(&self) -> Address {
        self.address(self.target)
    }

    pub fn file_stem(&self) -> String {
        let label = match self.label {
            Label::Attack => "attack",
            Label::Benign => "benign",
        };
        format!("{}-{:03}-{}", self.class, self.index, label)
    }
}

const TRIGGER_GAS: u64 = 2_000;

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    deployer: Address,
    class: VulnClass,
    index: usize,
    label: Label,
}

impl Gen<'_> {
    fn word(&self, nonce: u64) -> u64 {
        contract_address(&self.deployer, nonce).to_word()
    }

    fn user(&self, k: usize) -> Address {
        Address::from_label(&format!("{}/user{k}", self.deployer))
    }

    /// Stack-neutral filler so instances of one template differ byte-wise.
    fn noise(&mut self) -> Asm {
        let n = self.rng.gen_range(0..3);
        let mut a = Asm::new();
        for _ in 0..n {
            a = a.push(self.rng.gen_range(1..1 << 20)).op(Pop);
        }
        a
    }

    fn key(&mut self) -> u64 {
        self.rng.gen_range(1..1 << 32)
    }

    fn amount(&mut self) -> u64 {
        self.rng.gen_range(1..1000)
    }

    /// An external recipient word that no contract uses.
    fn recipient(&mut self) -> u64 {
        self.rng.gen_range(1 << 40..1 << 48)
    }

    fn finish(self, contracts: Vec<Vec<u8>>, triggers: Vec<Trigger>) -> CorpusInstance {
        CorpusInstance {
            class: self.class,
            label: self.label,
            index: self.index,
            deployer: self.deployer,
            contracts,
            target: 0,
            triggers,
        }
    }

    fn trigger(&self, k: usize, words: Vec<u64>) -> Trigger {
        Trigger { sender: self.user(k), contract: 0, words, gas: TRIGGER_GAS }
    }

    /// Victim pays out by calling the receiver, guarded by a paid flag. The
    /// vulnerable form sets the flag only after the call returns.
    fn reentrancy(mut self) -> CorpusInstance {
        let paid = self.key();
        let guard = self.key();
        let amt = self.amount();
        let (victim_w, receiver_w) = (self.word(0), self.word(1));
        let head = self.noise().push(paid).op(Sload).jumpi("done");
        let set_flag = Asm::new().push(1).push(paid).op(Sstore);
        let call = Asm::new().push(amt).push(receiver_w).op(Call).jumpi("ok").op(Throw).label("ok");
        let victim = match self.label {
            Label::Attack => head.then(call).then(set_flag),
            Label::Benign => head.then(set_flag).then(call),
        }
        .label("done")
        .op(Stop)
        .assemble();
        let receiver = self
            .noise()
            .push(guard)
            .op(Sload)
            .jumpi("end")
            .push(1)
            .push(guard)
            .op(Sstore)
            .push(0)
            .push(victim_w)
            .op(Call)
            .jumpi("end")
            .label("end")
            .op(Stop)
            .assemble();
        let t = self.trigger(0, vec![]);
        self.finish(vec![victim, receiver], vec![t])
    }

    /// Calls a helper that succeeds, then pays. The vulnerable form drops the
    /// call's result unread.
    fn unchecked_call(mut self) -> CorpusInstance {
        let (a, b) = (self.amount(), self.amount());
        let helper = self.noise().push(a).push(b).op(Add).op(Pop).op(Stop).assemble();
        self.with_helper(helper)
    }

    /// Calls a helper that throws, then pays. The benign twin branches on
    /// the result.
    fn unhandled_exception(mut self) -> CorpusInstance {
        let k = self.key();
        let helper = self.noise().push(1).push(k).op(Sstore).op(Throw).assemble();
        self.with_helper(helper)
    }

    fn with_helper(mut self, helper: Vec<u8>) -> CorpusInstance {
        let arg = self.amount();
        let amt = self.amount();
        let to = self.recipient();
        let helper_w = self.word(1);
        let call = self.noise().push(arg).push(helper_w).op(Call);
        let pay = Asm::new().push(amt).push(to).op(Transfer).op(Stop);
        let caller = match self.label {
            Label::Attack => call.op(Pop).then(pay),
            Label::Benign => call.jumpi("ok").op(Stop).label("ok").then(pay),
        }
        .assemble();
        let t = self.trigger(0, vec![]);
        self.finish(vec![caller, helper], vec![t])
    }

    /// Pays out when the block timestamp passes a threshold. The benign
    /// twin only records the timestamp and branches on call data.
    fn timestamp(mut self) -> CorpusInstance {
        let threshold = self.rng.gen_range(1..1_000_000);
        let k = self.key();
        let amt = self.amount();
        let to = self.recipient();
        let pay = Asm::new().label("win").push(amt).push(to).op(Transfer).op(Stop);
        let code = match self.label {
            Label::Attack => self.noise().op(Timestamp).push(threshold).op(Gt).jumpi("win").op(Stop),
            Label::Benign => self.noise().op(Timestamp).push(k).op(Sstore).jumpi("win").op(Stop),
        }
        .then(pay)
        .assemble();
        let t = self.trigger(0, vec![1]);
        self.finish(vec![code], vec![t])
    }

    /// Two senders write one slot in the same block. The vulnerable form
    /// overwrites, so the last writer wins; the benign twin adds.
    fn tod(mut self) -> CorpusInstance {
        let k = self.key();
        let v1 = self.amount();
        let v2 = v1 + self.rng.gen_range(1..1000);
        let code = match self.label {
            Label::Attack => self.noise().push(k).op(Sstore).op(Stop),
            Label::Benign => self.noise().push(k).op(Sload).op(Add).push(k).op(Sstore).op(Stop),
        }
        .assemble();
        let t = vec![self.trigger(0, vec![v1]), self.trigger(1, vec![v2])];
        self.finish(vec![code], t)
    }
}

/// `count` attack/benign pairs for `class`, fully determined by `seed`.
pub fn generate_corpus(class: VulnClass, count: usize, seed: u64) -> Vec<CorpusInstance> {
    let class_salt = VulnClass::ALL.iter().position(|c| *c == class).unwrap() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (class_salt << 56) ^ 0x636f_7270_7573);
    let mut out = Vec::with_capacity(count * 2);
    for index in 0..count {
        for label in [Label::Attack, Label::Benign] {
            let deployer = Address::from_label(&format!("corpus/{seed}/{class}/{index}/{label:?}"));
            let g = Gen { rng: &mut rng, deployer, class, index, label };
            out.push(match class {
                VulnClass::Reentrancy => g.reentrancy(),
                VulnClass::UncheckedCall => g.unchecked_call(),
                VulnClass::TimestampDependency => g.timestamp(),
                VulnClass::TransactionOrderDependency => g.tod(),
                VulnClass::UnhandledException => g.unhandled_exception(),
            });
        }
    }
    out
}

/// Instances of every class, class by class.
pub fn generate_all(count: usize, seed: u64) -> Vec<CorpusInstance> {
    VulnClass::ALL.iter().flat_map(|&c| generate_corpus(c, count, seed)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeployedCorpus {
    pub instances: Vec<CorpusInstance>,
    /// Trigger hashes per instance, same order as `instances`.
    pub trigger_txs: Vec<Vec<TxHash>>,
}

/// Deploys every instance in one batch of blocks, then submits triggers,
/// sealing before an instance's triggers would straddle a block boundary.
pub fn deploy_corpus(ledger: &mut Ledger, instances: Vec<CorpusInstance>) -> Result<DeployedCorpus, LedgerError> {
    for inst in &instances {
        for (i, code) in inst.contracts.iter().enumerate() {
            let n = ledger.next_nonce(&inst.deployer);
            debug_assert_eq!(n, i as u64, "corpus deployers must be fresh");
            ledger.submit_transaction(Transaction::creation(inst.deployer, n, code.clone(), 1))?;
        }
    }
    ledger.settle()?;
    let cap = ledger.config().max_txs;
    let mut trigger_txs = Vec::with_capacity(instances.len());
    for inst in &instances {
        if ledger.pool().count() + inst.triggers.len() > cap {
            ledger.settle()?;
        }
        let mut hs = Vec::new();
        for t in &inst.triggers {
            let n = ledger.next_nonce(&t.sender);
            let tx = Transaction::call(t.sender, n, inst.address(t.contract), encode_words(&t.words), t.gas);
            hs.push(ledger.submit_transaction(tx)?);
        }
        trigger_txs.push(hs);
    }
    ledger.settle()?;
    Ok(DeployedCorpus { instances, trigger_txs })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDetection {
    pub injected: usize,
    pub detected: usize,
    pub false_positives: usize,
}

impl ClassDetection {
    pub fn recall(&self) -> f64 {
        if self.injected == 0 {
            1.0
        } else {
            self.detected as f64 / self.injected as f64
        }
    }
}

/// Scores audit reports against corpus labels. An attack counts as detected
/// when its target carries a report of its class. Any other report on an
/// instance's contracts is a false positive for the reported class.
pub fn score(instances: &[CorpusInstance], audit: &AuditOutcome) -> BTreeMap<VulnClass, ClassDetection> {
    let mut out: BTreeMap<VulnClass, ClassDetection> =
        VulnClass::ALL.iter().map(|&c| (c, Default::default())).collect();
    for inst in instances {
        if inst.label == Label::Attack {
            out.get_mut(&inst.class).unwrap().injected += 1;
        }
        let addrs = inst.addresses();
        let target = inst.target_address();
        let mut seen_hit = false;
        for r in audit.reports.iter().filter(|r| addrs.contains(&r.contract)) {
            let hit = inst.label == Label::Attack && r.vuln_class == inst.class && r.contract == target;
            if hit {
                if !seen_hit {
                    out.get_mut(&inst.class).unwrap().detected += 1;
                    seen_hit = true;
                }
            } else {
                out.get_mut(&r.vuln_class).unwrap().false_positives += 1;
            }
        }
    }
    out
}
