//! Scenario files and the end-to-end driver.
//!
//! A run installs the relief desk and TxFor on a fresh ledger, walks the
//! schedule on the logical clock, and after every accepted block records
//! each confirmed relief call into its instance's forensics cluster,
//! anchors every touched cluster, and replays the block for the audit
//! miner. Attack corpora are deployed on the same chain and scored after a
//! final audit pass.
//!
//! Latency per relief call is split into confirmation (submit to block
//! acceptance), forensics (acceptance to the anchor covering the call being
//! accepted) and mining (trace replay of its block). Simulated timing uses
//! block timestamps plus `hop_delay_s` per message hop, so reports are
//! reproducible byte for byte; wall timing measures host time instead.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::audit::{audit_chain, AuditOutcome, RuleClassifier, VulnClass};
use crate::corpus::{self, ClassDetection, DeployedCorpus};
use crate::forensics::{Forensics, ForensicsError, OffChainStore, Verdict};
use crate::ledger::{Block, Ledger, LedgerConfig, LedgerError, TxKind};
use crate::relief::{
    summarize, AssetKind, MatchPlan, MatchSummary, Point, ReliefDemand, ReliefDesk, ReliefError, ReliefLayout,
    ReliefSupply, ResourceType, ShipmentStatus, TransportAsset,
};
use crate::types::{Address, Hash32, TxHash};

pub const SCENARIO_VERSION: u32 = 1;

/// A named actor or a literal address. Names map through
/// [`Address::from_label`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Entity(pub Address);

impl Entity {
    pub fn named(name: &str) -> Self {
        Entity(Address::from_label(name))
    }
}

impl Serialize for Entity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Entity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let hexlike = s.strip_prefix("0x").unwrap_or(&s);
        if hexlike.len() == 40 {
            if let Ok(a) = hexlike.parse() {
                return Ok(Entity(a));
            }
        }
        Ok(Entity::named(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub id: u64,
    pub location: Point,
    pub resource_type: ResourceType,
    pub quantity: u64,
    pub urgency: u8,
    pub submitter: Entity,
}

impl DemandSpec {
    pub fn record(&self) -> ReliefDemand {
        ReliefDemand {
            id: self.id,
            location: self.location,
            resource_type: self.resource_type,
            quantity: self.quantity,
            urgency: self.urgency,
            submitter: self.submitter.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplySpec {
    pub id: u64,
    pub location: Point,
    pub resource_type: ResourceType,
    pub quantity: u64,
    pub supplier: Entity,
}

impl SupplySpec {
    pub fn record(&self) -> ReliefSupply {
        ReliefSupply {
            id: self.id,
            location: self.location,
            resource_type: self.resource_type,
            quantity: self.quantity,
            supplier: self.supplier.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetSpec {
    pub id: u64,
    pub kind: AssetKind,
    pub location: Point,
    pub payload_capacity: u64,
    pub range: f64,
    pub speed: f64,
    pub operator: Entity,
}

impl AssetSpec {
    pub fn record(&self) -> TransportAsset {
        TransportAsset {
            id: self.id,
            kind: self.kind,
            location: self.location,
            payload_capacity: self.payload_capacity,
            range: self.range,
            speed: self.speed,
            operator: self.operator.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeCounts {
    pub full_count: usize,
    pub light_count: usize,
}

impl Default for NodeCounts {
    fn default() -> Self {
        let d = LedgerConfig::default();
        NodeCounts { full_count: d.full_nodes, light_count: d.light_nodes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackInsertion {
    pub vuln_class: VulnClass,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    #[default]
    Simulated,
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    SubmitDemand {
        id: u64,
    },
    SubmitSupply {
        id: u64,
    },
    RegisterAsset {
        id: u64,
    },
    /// Produces blocks until the pool is empty.
    Seal,
    /// Plans against the confirmed square and submits the shipments.
    Match,
    UpdateStatus {
        shipment: u64,
        to: ShipmentStatus,
    },
    /// Deploys and triggers the attack corpus.
    Attacks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    /// Logical seconds after genesis.
    pub at: u64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub nodes: NodeCounts,
    #[serde(default)]
    pub hop_delay_s: f64,
    #[serde(default = "default_max_txs")]
    pub max_txs: usize,
    #[serde(default)]
    pub timing: TimingMode,
    #[serde(default)]
    pub demands: Vec<DemandSpec>,
    #[serde(default)]
    pub supplies: Vec<SupplySpec>,
    #[serde(default)]
    pub assets: Vec<AssetSpec>,
    #[serde(default)]
    pub attack_insertions: Vec<AttackInsertion>,
    /// Empty means [`Scenario::default_schedule`].
    #[serde(default)]
    pub schedule: Vec<ScheduleEvent>,
}

fn default_max_txs() -> usize {
    crate::ledger::DEFAULT_MAX_TXS
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Forensics(#[from] ForensicsError),
}

impl From<ReliefError> for ScenarioError {
    fn from(e: ReliefError) -> Self {
        match e {
            ReliefError::Ledger(l) => ScenarioError::Ledger(l),
            other => ScenarioError::Invalid(other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = serde_json::from_str(s).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn ledger_config(&self) -> LedgerConfig {
        LedgerConfig {
            full_nodes: self.nodes.full_count,
            light_nodes: self.nodes.light_count,
            max_txs: self.max_txs,
            hop_delay_s: self.hop_delay_s,
            ..LedgerConfig::default()
        }
    }

    /// Assets, supplies, then demands one second apart; seal; match; seal;
    /// attacks.
    pub fn default_schedule(&self) -> Vec<ScheduleEvent> {
        let mut out = Vec::new();
        let mut t = 0;
        let mut ev = |action| {
            out.push(ScheduleEvent { at: t, action });
            t += 1;
        };
        for a in &self.assets {
            ev(Action::RegisterAsset { id: a.id });
        }
        for s in &self.supplies {
            ev(Action::SubmitSupply { id: s.id });
        }
        for d in &self.demands {
            ev(Action::SubmitDemand { id: d.id });
        }
        ev(Action::Seal);
        ev(Action::Match);
        ev(Action::Seal);
        ev(Action::Attacks);
        out
    }

    pub fn effective_schedule(&self) -> Vec<ScheduleEvent> {
        if self.schedule.is_empty() {
            self.default_schedule()
        } else {
            self.schedule.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCENARIO_VERSION {
            return Err(invalid(format!("unsupported version {}, expected {SCENARIO_VERSION}", self.version)));
        }
        if self.nodes.full_count == 0 {
            return Err(invalid("at least one full node is required"));
        }
        if self.max_txs == 0 {
            return Err(invalid("max_txs must be positive"));
        }
        if !(self.hop_delay_s.is_finite() && self.hop_delay_s >= 0.0) {
            return Err(invalid("hop_delay_s must be finite and non-negative"));
        }
        for d in &self.demands {
            d.record().validate().map_err(|e| invalid(format!("demand {}: {e}", d.id)))?;
        }
        for s in &self.supplies {
            s.record().validate().map_err(|e| invalid(format!("supply {}: {e}", s.id)))?;
        }
        for a in &self.assets {
            a.record().validate().map_err(|e| invalid(format!("asset {}: {e}", a.id)))?;
        }
        unique("demand", self.demands.iter().map(|d| d.id))?;
        unique("supply", self.supplies.iter().map(|s| s.id))?;
        unique("asset", self.assets.iter().map(|a| a.id))?;
        for a in &self.attack_insertions {
            if a.count == 0 {
                return Err(invalid(format!("attack insertion for {} has count 0", a.vuln_class)));
            }
        }
        if self.schedule.is_empty() {
            return Ok(());
        }
        let mut last = 0;
        let mut seen: HashSet<(&str, u64)> = HashSet::new();
        for (i, e) in self.schedule.iter().enumerate() {
            if e.at < last {
                return Err(invalid(format!("schedule event {i} at {} precedes {last}", e.at)));
            }
            last = e.at;
            let (kind, id, known) = match e.action {
                Action::SubmitDemand { id } => ("demand", id, self.demands.iter().any(|d| d.id == id)),
                Action::SubmitSupply { id } => ("supply", id, self.supplies.iter().any(|s| s.id == id)),
                Action::RegisterAsset { id } => ("asset", id, self.assets.iter().any(|a| a.id == id)),
                _ => continue,
            };
            if !known {
                return Err(invalid(format!("schedule event {i} names unknown {kind} {id}")));
            }
            if !seen.insert((kind, id)) {
                return Err(invalid(format!("{kind} {id} is scheduled twice")));
            }
        }
        let missing = self
            .demands
            .iter()
            .map(|d| ("demand", d.id))
            .chain(self.supplies.iter().map(|s| ("supply", s.id)))
            .chain(self.assets.iter().map(|a| ("asset", a.id)))
            .find(|k| !seen.contains(k));
        if let Some((kind, id)) = missing {
            return Err(invalid(format!("{kind} {id} is never scheduled")));
        }
        Ok(())
    }
}

fn unique(kind: &str, ids: impl Iterator<Item = u64>) -> Result<(), ScenarioError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(invalid(format!("duplicate {kind} id {id}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyParts {
    pub confirmation_s: f64,
    pub forensics_s: f64,
    pub mining_s: f64,
    pub total_s: f64,
}

impl LatencyParts {
    fn new(confirmation_s: f64, forensics_s: f64, mining_s: f64) -> Self {
        LatencyParts { confirmation_s, forensics_s, mining_s, total_s: confirmation_s + forensics_s + mining_s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReliefTxKind {
    Demand,
    Supply,
    Asset,
    Shipment,
    Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxLatency {
    pub tx_hash: TxHash,
    pub kind: ReliefTxKind,
    pub height: u64,
    #[serde(flatten)]
    pub parts: LatencyParts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub tx_count: usize,
    pub avg: LatencyParts,
    /// Each field is its own maximum over transactions.
    pub max: LatencyParts,
    pub per_tx: Vec<TxLatency>,
}

impl LatencyReport {
    fn from_txs(per_tx: Vec<TxLatency>) -> Self {
        let n = per_tx.len();
        let mut sum = LatencyParts::default();
        let mut max = LatencyParts::default();
        for t in &per_tx {
            let p = &t.parts;
            sum.confirmation_s += p.confirmation_s;
            sum.forensics_s += p.forensics_s;
            sum.mining_s += p.mining_s;
            sum.total_s += p.total_s;
            max.confirmation_s = max.confirmation_s.max(p.confirmation_s);
            max.forensics_s = max.forensics_s.max(p.forensics_s);
            max.mining_s = max.mining_s.max(p.mining_s);
            max.total_s = max.total_s.max(p.total_s);
        }
        let avg = if n == 0 {
            LatencyParts::default()
        } else {
            let k = n as f64;
            LatencyParts {
                confirmation_s: sum.confirmation_s / k,
                forensics_s: sum.forensics_s / k,
                mining_s: sum.mining_s / k,
                total_s: sum.total_s / k,
            }
        };
        LatencyReport { tx_count: n, avg, max, per_tx }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForensicsSummary {
    pub anchored: usize,
    pub verified_valid: usize,
    pub verified_tampered: usize,
    pub verified_unavailable: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub traces_mined: usize,
    pub abnormal: usize,
    pub reports: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub height: u64,
    pub tip_hash: Hash32,
    pub transactions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub seed: u64,
    pub timing: TimingMode,
    pub latency: LatencyReport,
    pub detection: BTreeMap<VulnClass, ClassDetection>,
    pub match_summary: MatchSummary,
    pub forensics: ForensicsSummary,
    pub audit: AuditSummary,
    pub chain: ChainSummary,
}

impl RunReport {
    /// Pretty JSON with a trailing newline; stable for a given report.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Everything a run leaves behind.
pub struct RunOutput {
    pub report: RunReport,
    pub ledger: Ledger,
    pub desk: ReliefDesk,
    pub forensics: Forensics,
    pub plans: Vec<MatchPlan>,
    pub corpora: Vec<DeployedCorpus>,
    pub audit: AuditOutcome,
}

impl RunOutput {
    pub fn layout(&self) -> &ReliefLayout {
        self.desk.layout()
    }
}

pub fn relief_operator() -> Address {
    Address::from_label("relief-operator")
}

pub fn forensics_operator() -> Address {
    Address::from_label("forensics-operator")
}

struct Tracked {
    hash: TxHash,
    kind: ReliefTxKind,
    contract: Address,
    submitted: (u64, Instant),
    confirmed: Option<(u64, Instant, u64)>,
    anchored: Option<(u64, Instant)>,
    mined: Option<Duration>,
}

struct Driver {
    ledger: Ledger,
    desk: ReliefDesk,
    forensics: Forensics,
    tracked: Vec<Tracked>,
    by_hash: HashMap<TxHash, usize>,
    /// Anchor tx to the tracked entries it covers.
    anchors: HashMap<TxHash, Vec<usize>>,
    processed: u64,
    genesis: u64,
}

impl Driver {
    fn track(&mut self, hash: TxHash, kind: ReliefTxKind, contract: Address) {
        let i = self.tracked.len();
        self.tracked.push(Tracked {
            hash,
            kind,
            contract,
            submitted: (self.ledger.clock(), Instant::now()),
            confirmed: None,
            anchored: None,
            mined: None,
        });
        self.by_hash.insert(hash, i);
    }

    /// Produces blocks until the pool drains, handling each as it lands.
    /// Anchors submitted while handling a block go into the next one.
    fn seal(&mut self) -> Result<(), ScenarioError> {
        while self.ledger.produce_block()?.is_some() {
            self.catch_up()?;
        }
        self.catch_up()
    }

    fn catch_up(&mut self) -> Result<(), ScenarioError> {
        while self.processed < self.ledger.height() {
            self.processed += 1;
            let block = Arc::clone(&self.ledger.canonical().chain()[self.processed as usize]);
            self.handle_block(&block)?;
        }
        Ok(())
    }

    fn handle_block(&mut self, block: &Block) -> Result<(), ScenarioError> {
        let accepted = Instant::now();
        let snap = self.ledger.snapshot();
        self.forensics.sync(&snap);
        for tx in &block.transactions {
            if let Some(covered) = self.anchors.remove(&tx.hash) {
                if snap.receipt(&tx.hash).is_some_and(|r| r.status == crate::ledger::ReceiptStatus::Success) {
                    for i in covered {
                        self.tracked[i].anchored.get_or_insert((block.timestamp, accepted));
                    }
                }
            }
        }

        let t0 = Instant::now();
        snap.replay_block(block.height).expect("accepted block replays");
        let mining = t0.elapsed();

        let mut touched: Vec<(Address, Vec<usize>)> = Vec::new();
        for tx in block.transactions.iter().filter(|t| t.kind == TxKind::ContractCall) {
            let Some(&i) = self.by_hash.get(&tx.hash) else {
                continue;
            };
            let t = &mut self.tracked[i];
            t.confirmed = Some((block.timestamp, accepted, block.height));
            t.mined = Some(mining);
            let contract = t.contract;
            self.forensics.record_forensics(&snap, contract, tx.hash)?;
            match touched.iter_mut().find(|(c, _)| *c == contract) {
                Some((_, v)) => v.push(i),
                None => touched.push((contract, vec![i])),
            }
        }
        for (contract, covered) in touched {
            let rec = self.forensics.record(&contract).expect("cluster just recorded").clone();
            let h = self.forensics.txfor_add(&mut self.ledger, &rec)?;
            self.anchors.insert(h, covered);
        }
        Ok(())
    }
}

/// Runs `sc` against a fresh chain; blobs go to `store`.
pub fn run_scenario(sc: &Scenario, store: Arc<dyn OffChainStore>) -> Result<RunOutput, ScenarioError> {
    sc.validate()?;
    let cfg = sc.ledger_config();
    let genesis = cfg.genesis_timestamp;
    let hop = cfg.hop_delay_s;
    let mut ledger = Ledger::new(cfg)?;
    let desk = ReliefDesk::install(&mut ledger, relief_operator())?;
    let forensics = Forensics::install(&mut ledger, forensics_operator(), store)?;
    let mut d = Driver {
        ledger,
        desk,
        forensics,
        tracked: Vec::new(),
        by_hash: HashMap::new(),
        anchors: HashMap::new(),
        processed: 0,
        genesis,
    };
    d.seal()?;

    let demands: BTreeMap<u64, &DemandSpec> = sc.demands.iter().map(|x| (x.id, x)).collect();
    let supplies: BTreeMap<u64, &SupplySpec> = sc.supplies.iter().map(|x| (x.id, x)).collect();
    let assets: BTreeMap<u64, &AssetSpec> = sc.assets.iter().map(|x| (x.id, x)).collect();
    let mut plans = Vec::new();
    let mut corpora = Vec::new();
    let mut attacks_done = false;

    for ev in sc.effective_schedule() {
        d.ledger.advance_clock_to(d.genesis + ev.at);
        match ev.action {
            Action::SubmitDemand { id } => {
                let r = d.desk.submit_demand(&mut d.ledger, &demands[&id].record())?;
                d.track(r.hash, ReliefTxKind::Demand, r.contract);
            }
            Action::SubmitSupply { id } => {
                let r = d.desk.submit_supply(&mut d.ledger, &supplies[&id].record())?;
                d.track(r.hash, ReliefTxKind::Supply, r.contract);
            }
            Action::RegisterAsset { id } => {
                let r = d.desk.register_transport(&mut d.ledger, &assets[&id].record())?;
                d.track(r.hash, ReliefTxKind::Asset, r.contract);
            }
            Action::Seal => d.seal()?,
            Action::Match => {
                let plan = d.desk.run_match(&d.ledger.snapshot());
                for r in d.desk.commit_plan(&mut d.ledger, &plan)? {
                    d.track(r.hash, ReliefTxKind::Shipment, r.contract);
                }
                plans.push(plan);
            }
            Action::UpdateStatus { shipment, to } => {
                let snap = d.ledger.snapshot();
                let r = d.desk.update_status(&mut d.ledger, &snap, shipment, to)?;
                d.track(r.hash, ReliefTxKind::Status, r.contract);
            }
            Action::Attacks => {
                if !attacks_done {
                    d.seal()?;
                    corpora = deploy_attacks(&mut d.ledger, sc)?;
                    d.catch_up()?;
                    attacks_done = true;
                }
            }
        }
    }
    d.seal()?;
    if !attacks_done && !sc.attack_insertions.is_empty() {
        corpora = deploy_attacks(&mut d.ledger, sc)?;
        d.catch_up()?;
    }

    let snap = d.ledger.snapshot();
    let mut per_tx = Vec::with_capacity(d.tracked.len());
    for t in &d.tracked {
        let (Some((cts, cwall, height)), Some((ats, awall)), Some(mined)) = (t.confirmed, t.anchored, t.mined) else {
            return Err(invalid(format!("relief transaction {} was not confirmed and anchored", t.hash)));
        };
        let parts = match sc.timing {
            TimingMode::Simulated => {
                LatencyParts::new((cts - t.submitted.0) as f64 + 2.0 * hop, (ats - cts) as f64 + 2.0 * hop, hop)
            }
            TimingMode::Wall => LatencyParts::new(
                cwall.duration_since(t.submitted.1).as_secs_f64(),
                awall.duration_since(cwall).as_secs_f64(),
                mined.as_secs_f64(),
            ),
        };
        per_tx.push(TxLatency { tx_hash: t.hash, kind: t.kind, height, parts });
    }

    let audit = audit_chain(&snap, 0, None, &RuleClassifier);
    let instances: Vec<_> = corpora.iter().flat_map(|c| c.instances.iter().cloned()).collect();
    let detection = corpus::score(&instances, &audit);

    let mut fs = ForensicsSummary::default();
    for e in d.forensics.registry().entries() {
        fs.anchored += 1;
        match d.forensics.verify(&snap, &e.entry.forensics_hash)? {
            Verdict::Valid => fs.verified_valid += 1,
            Verdict::Tampered(_) => fs.verified_tampered += 1,
            Verdict::Unavailable => fs.verified_unavailable += 1,
        }
    }

    let report = RunReport {
        version: SCENARIO_VERSION,
        seed: sc.seed,
        timing: sc.timing,
        latency: LatencyReport::from_txs(per_tx),
        detection,
        match_summary: summarize(&d.desk.square_snapshot(&snap)),
        forensics: fs,
        audit: AuditSummary {
            traces_mined: audit.traces_mined,
            abnormal: audit.abnormal.len(),
            reports: audit.reports.len(),
        },
        chain: ChainSummary {
            height: snap.height(),
            tip_hash: d.ledger.tip().block_hash,
            transactions: snap.blocks().iter().map(|b| b.transactions.len()).sum(),
        },
    };
    Ok(RunOutput { report, ledger: d.ledger, desk: d.desk, forensics: d.forensics, plans, corpora, audit })
}

fn deploy_attacks(ledger: &mut Ledger, sc: &Scenario) -> Result<Vec<DeployedCorpus>, ScenarioError> {
    let mut out = Vec::new();
    for (i, a) in sc.attack_insertions.iter().enumerate() {
        let instances = corpus::generate_corpus(a.vuln_class, a.count, sc.seed.wrapping_add(i as u64));
        out.push(corpus::deploy_corpus(ledger, instances)?);
    }
    Ok(out)
}

/// A random scenario over a 50 km square with two resource types.
pub fn synthetic(seed: u64, demands: usize, supplies: usize, assets: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| Point { x: rng.gen_range(0.0..50.0), y: rng.gen_range(0.0..50.0) };
    let types = [ResourceType::Food, ResourceType::Water];
    let ds = (0..demands)
        .map(|i| DemandSpec {
            id: i as u64 + 1,
            location: point(&mut rng),
            resource_type: types[rng.gen_range(0..2)],
            quantity: rng.gen_range(1..=20),
            urgency: rng.gen_range(1..=5),
            submitter: Entity::named(&format!("district-{}", i % 5)),
        })
        .collect();
    let ss = (0..supplies)
        .map(|i| SupplySpec {
            id: i as u64 + 1,
            location: point(&mut rng),
            resource_type: types[i % 2],
            quantity: rng.gen_range(5..=40),
            supplier: Entity::named(&format!("ngo-{}", i % 3)),
        })
        .collect();
    let as_ = (0..assets)
        .map(|i| AssetSpec {
            id: i as u64 + 1,
            kind: if i % 2 == 0 { AssetKind::Uav } else { AssetKind::GroundVehicle },
            location: point(&mut rng),
            payload_capacity: rng.gen_range(5..=20),
            range: rng.gen_range(80.0..200.0),
            speed: rng.gen_range(30.0..90.0),
            operator: Entity::named(&format!("fleet-{}", i % 2)),
        })
        .collect();
    Scenario {
        version: SCENARIO_VERSION,
        seed,
        nodes: NodeCounts::default(),
        hop_delay_s: 0.0,
        max_txs: crate::ledger::DEFAULT_MAX_TXS,
        timing: TimingMode::Simulated,
        demands: ds,
        supplies: ss,
        assets: as_,
        attack_insertions: Vec::new(),
        schedule: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forensics::MemStore;

    fn minimal() -> Scenario {
        Scenario::from_json(
            r#"{
              "version": 1,
              "seed": 1,
              "demands": [{"id": 1, "location": {"x": 3, "y": 4}, "resource_type": "Water",
                           "quantity": 5, "urgency": 3, "submitter": "district-1"}],
              "supplies": [{"id": 1, "location": {"x": 0, "y": 0}, "resource_type": "Water",
                            "quantity": 8, "supplier": "ngo-1"}],
              "assets": [{"id": 1, "kind": "UAV", "location": {"x": 0, "y": 0}, "payload_capacity": 10,
                          "range": 20, "speed": 50, "operator": "fleet-1"}]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn minimal_ships_everything() {
        let out = run_scenario(&minimal(), Arc::new(MemStore::new())).unwrap();
        let r = &out.report;
        assert_eq!(r.match_summary.demanded, 5);
        assert_eq!(r.match_summary.shipped, 5);
        assert_eq!(r.match_summary.total_distance_km, 5.0);
        assert!(r.detection.values().all(|c| *c == ClassDetection::default()));
        assert_eq!(r.audit.reports, 0);
        assert_eq!(r.latency.tx_count, 4);
        assert_eq!(r.forensics.anchored, r.forensics.verified_valid);
        assert!(r.forensics.anchored >= 4);
        for t in &r.latency.per_tx {
            let p = t.parts;
            assert_eq!(p.total_s, p.confirmation_s + p.forensics_s + p.mining_s);
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let mut sc = synthetic(5, 6, 4, 2);
        sc.hop_delay_s = 0.25;
        sc.attack_insertions = vec![AttackInsertion { vuln_class: VulnClass::Reentrancy, count: 2 }];
        let a = run_scenario(&sc, Arc::new(MemStore::new())).unwrap();
        let b = run_scenario(&sc, Arc::new(MemStore::new())).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(a.ledger.chain_log(), b.ledger.chain_log());
        assert_eq!(
            a.report.detection[&VulnClass::Reentrancy],
            ClassDetection { injected: 2, detected: 2, false_positives: 0 }
        );
        assert!(a.report.latency.per_tx.iter().all(|t| t.parts.mining_s == 0.25));
    }

    #[test]
    fn validation_errors() {
        let mut sc = minimal();
        sc.version = 2;
        assert!(matches!(sc.validate(), Err(ScenarioError::Invalid(_))));
        let mut sc = minimal();
        sc.demands.push(sc.demands[0].clone());
        assert!(matches!(sc.validate(), Err(ScenarioError::Invalid(_))));
        let mut sc = minimal();
        sc.schedule = vec![ScheduleEvent { at: 0, action: Action::SubmitDemand { id: 1 } }];
        assert!(matches!(sc.validate(), Err(ScenarioError::Invalid(m)) if m.contains("never scheduled")));
        let mut sc = minimal();
        sc.attack_insertions = vec![AttackInsertion { vuln_class: VulnClass::Reentrancy, count: 0 }];
        assert!(sc.validate().is_err());
        assert!(matches!(Scenario::from_json("{"), Err(ScenarioError::Parse(_))));
        assert!(matches!(Scenario::from_json(r#"{"version":1,"seed":1,"bogus":1}"#), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn explicit_schedule_with_status_updates() {
        let mut sc = minimal();
        sc.schedule = serde_json::from_str(
            r#"[
              {"at": 0, "action": "register_asset", "id": 1},
              {"at": 0, "action": "submit_supply", "id": 1},
              {"at": 5, "action": "submit_demand", "id": 1},
              {"at": 6, "action": "seal"},
              {"at": 10, "action": "match"},
              {"at": 11, "action": "seal"},
              {"at": 20, "action": "update_status", "shipment": 0, "to": "InTransit"},
              {"at": 30, "action": "update_status", "shipment": 0, "to": "Delivered"}
            ]"#,
        )
        .unwrap();
        sc.validate().unwrap();
        let out = run_scenario(&sc, Arc::new(MemStore::new())).unwrap();
        let sq = out.desk.square_snapshot(&out.ledger.snapshot());
        assert_eq!(sq.shipment_statuses.get(&0), Some(&ShipmentStatus::Delivered));
        assert_eq!(out.report.latency.tx_count, 6);
        let status: Vec<_> = out.report.latency.per_tx.iter().filter(|t| t.kind == ReliefTxKind::Status).collect();
        assert_eq!(status.len(), 2);

        sc.schedule.truncate(5);
        sc.schedule.push(ScheduleEvent {
            at: 20,
            action: Action::UpdateStatus { shipment: 0, to: ShipmentStatus::InTransit },
        });
        assert!(matches!(run_scenario(&sc, Arc::new(MemStore::new())), Err(ScenarioError::Invalid(_))));
    }
}
