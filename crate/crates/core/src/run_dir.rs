//! Persisted runs.
//!
//! Layout: `chain.json` (ledger config, contract addresses, every block),
//! `blocks.log` (one summary line per block), `report.json`, `reports.tsv`
//! (the audit report export), `anchors.tsv` (one anchored forensics record
//! per line: hash, deployer, nonce, height), and
//! `offchain/` holding forensics blobs named by hash. Loading replays every
//! block through consensus on a fresh ledger, so a tampered chain file
//! fails to load rather than verifying against altered history.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audit::export_reports;
use crate::forensics::{DirStore, Forensics, ForensicsError, StoreError, Verdict};
use crate::ledger::{Block, ConsensusOutcome, Ledger, LedgerConfig, LedgerError};
use crate::relief::ReliefLayout;
use crate::scenario::{RunOutput, RunReport};
use crate::types::{Address, Hash32};

pub const CHAIN_FILE: &str = "chain.json";
pub const REPORT_FILE: &str = "report.json";
pub const BLOCKS_LOG: &str = "blocks.log";
pub const AUDIT_REPORTS: &str = "reports.tsv";
pub const ANCHORS: &str = "anchors.tsv";
pub const OFFCHAIN_DIR: &str = "offchain";

#[derive(Debug, thiserror::Error)]
pub enum RunDirError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} is not a valid run file: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("block {height} was rejected on reload: {reason}")]
    Replay { height: u64, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub ledger: LedgerConfig,
    pub relief: ReliefLayout,
    pub txfor: Address,
    pub forensics_operator: Address,
    pub blocks: Vec<Block>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunDirError + '_ {
    move |source| RunDirError::Io { path: path.to_owned(), source }
}

/// Creates `root` and its blob store; pass the store to the run.
pub fn create(root: &Path) -> Result<Arc<DirStore>, RunDirError> {
    fs::create_dir_all(root).map_err(io(root))?;
    Ok(Arc::new(DirStore::open(root.join(OFFCHAIN_DIR))?))
}

/// Writes the chain, block log and report next to the blobs.
pub fn save(root: &Path, out: &RunOutput, forensics_operator: Address) -> Result<(), RunDirError> {
    let chain = ChainFile {
        ledger: out.ledger.config().clone(),
        relief: *out.layout(),
        txfor: out.forensics.txfor_address(),
        forensics_operator,
        blocks: out.ledger.canonical().chain().iter().map(|b| (**b).clone()).collect(),
    };
    let write = |name: &str, body: String| {
        let p = root.join(name);
        fs::write(&p, body).map_err(io(&p))
    };
    write(CHAIN_FILE, serde_json::to_string(&chain).expect("chain serializes"))?;
    write(BLOCKS_LOG, out.ledger.chain_log())?;
    write(AUDIT_REPORTS, export_reports(&out.audit.reports))?;
    let anchors: String = out
        .forensics
        .registry()
        .entries()
        .map(|a| format!("{}\t{}\t{}\t{}\n", a.entry.forensics_hash, a.entry.deployer, a.entry.nonce, a.height))
        .collect();
    write(ANCHORS, anchors)?;
    write(REPORT_FILE, out.report.to_json())
}

/// A run reloaded from disk.
pub struct LoadedRun {
    pub root: PathBuf,
    pub chain: ChainFile,
    pub ledger: Ledger,
    pub forensics: Forensics,
}

impl LoadedRun {
    pub fn verify(&self, key: &Hash32) -> Result<Verdict, ForensicsError> {
        self.forensics.verify(&self.ledger.snapshot(), key)
    }

    pub fn report(&self) -> Result<RunReport, RunDirError> {
        let p = self.root.join(REPORT_FILE);
        let s = fs::read_to_string(&p).map_err(io(&p))?;
        serde_json::from_str(&s).map_err(|e| RunDirError::Format { path: p, msg: e.to_string() })
    }
}

pub fn load(root: &Path) -> Result<LoadedRun, RunDirError> {
    let p = root.join(CHAIN_FILE);
    let s = fs::read_to_string(&p).map_err(io(&p))?;
    let chain: ChainFile =
        serde_json::from_str(&s).map_err(|e| RunDirError::Format { path: p.clone(), msg: e.to_string() })?;
    let mut ledger = Ledger::new(chain.ledger.clone())?;
    match chain.blocks.first() {
        Some(g) if *g == *ledger.tip() => {}
        _ => return Err(RunDirError::Format { path: p, msg: "genesis block does not match the ledger config".into() }),
    }
    for b in &chain.blocks[1..] {
        if let ConsensusOutcome::Rejected(r) = ledger.run_consensus(b.clone()) {
            return Err(RunDirError::Replay { height: b.height, reason: format!("{r:?}") });
        }
    }
    let store = Arc::new(DirStore::open(root.join(OFFCHAIN_DIR))?);
    let mut forensics = Forensics::attach(chain.forensics_operator, chain.txfor, store);
    forensics.sync(&ledger.snapshot());
    Ok(LoadedRun { root: root.to_owned(), chain, ledger, forensics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{forensics_operator, run_scenario, synthetic};

    #[test]
    fn save_load_verify_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        let store = create(dir.path()).unwrap();
        let out = run_scenario(&synthetic(3, 3, 2, 1), store).unwrap();
        save(dir.path(), &out, forensics_operator()).unwrap();

        let run = load(dir.path()).unwrap();
        assert_eq!(run.ledger.chain_log(), out.ledger.chain_log());
        assert_eq!(run.report().unwrap(), out.report);
        let keys: Vec<Hash32> = run.forensics.registry().entries().map(|e| e.entry.forensics_hash).collect();
        assert_eq!(keys.len(), out.report.forensics.anchored);
        for k in &keys {
            assert_eq!(run.verify(k).unwrap(), Verdict::Valid);
        }

        let blob = dir.path().join(OFFCHAIN_DIR).join(keys[0].to_hex());
        let mut bytes = fs::read(&blob).unwrap();
        bytes[5] ^= 0x10;
        fs::write(&blob, bytes).unwrap();
        assert!(matches!(load(dir.path()).unwrap().verify(&keys[0]).unwrap(), Verdict::Tampered(_)));
        fs::remove_file(&blob).unwrap();
        assert_eq!(load(dir.path()).unwrap().verify(&keys[0]).unwrap(), Verdict::Unavailable);
        assert!(matches!(run.verify(&Hash32([7; 32])), Err(ForensicsError::UnknownHash(_))));

        let mut chain: ChainFile =
            serde_json::from_str(&fs::read_to_string(dir.path().join(CHAIN_FILE)).unwrap()).unwrap();
        chain.blocks[2].timestamp += 1;
        fs::write(dir.path().join(CHAIN_FILE), serde_json::to_string(&chain).unwrap()).unwrap();
        assert!(matches!(load(dir.path()), Err(RunDirError::Replay { height: 2, .. })));
    }
}
