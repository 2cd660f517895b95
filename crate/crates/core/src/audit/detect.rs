use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::category::CategorizedTrace;
use super::query::{AbnormalExecution, QueryId};
use crate::types::{Address, TxHash};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VulnClass {
    Reentrancy,
    UncheckedCall,
    TimestampDependency,
    TransactionOrderDependency,
    UnhandledException,
}

impl VulnClass {
    pub const ALL: [VulnClass; 5] = [
        VulnClass::Reentrancy,
        VulnClass::UncheckedCall,
        VulnClass::TimestampDependency,
        VulnClass::TransactionOrderDependency,
        VulnClass::UnhandledException,
    ];

    /// The query whose matches evidence this class.
    pub fn query(self) -> QueryId {
        match self {
            VulnClass::Reentrancy => QueryId::Q1,
            VulnClass::UncheckedCall => QueryId::Q2,
            VulnClass::TimestampDependency => QueryId::Q3,
            VulnClass::TransactionOrderDependency => QueryId::Q4,
            VulnClass::UnhandledException => QueryId::Q5,
        }
    }

    pub fn for_query(q: QueryId) -> Self {
        match q {
            QueryId::Q1 => VulnClass::Reentrancy,
            QueryId::Q2 => VulnClass::UncheckedCall,
            QueryId::Q3 => VulnClass::TimestampDependency,
            QueryId::Q4 => VulnClass::TransactionOrderDependency,
            QueryId::Q5 => VulnClass::UnhandledException,
        }
    }
}

impl fmt::Display for VulnClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown vulnerability class {0:?}")]
pub struct UnknownClass(pub String);

impl FromStr for VulnClass {
    type Err = UnknownClass;

    /// Accepts the variant name in any case, with or without `_`/`-`, plus
    /// the short forms `tod`, `timestamp`, `unchecked`, `unhandled`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_ascii_lowercase();
        Ok(match norm.as_str() {
            "reentrancy" => VulnClass::Reentrancy,
            "uncheckedcall" | "unchecked" => VulnClass::UncheckedCall,
            "timestampdependency" | "timestamp" => VulnClass::TimestampDependency,
            "transactionorderdependency" | "tod" => VulnClass::TransactionOrderDependency,
            "unhandledexception" | "unhandled" => VulnClass::UnhandledException,
            _ => return Err(UnknownClass(s.to_owned())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnerabilityReport {
    pub contract: Address,
    pub vuln_class: VulnClass,
    /// Non-empty, in chain order.
    pub offending_txs: Vec<TxHash>,
    pub evidence: Vec<AbnormalExecution>,
}

/// One line per report: `contract  class  tx_count  first_tx`, tab-separated.
pub fn export_reports(reports: &[VulnerabilityReport]) -> String {
    let mut s = String::new();
    for r in reports {
        writeln!(s, "{}\t{}\t{}\t{}", r.contract, r.vuln_class, r.offending_txs.len(), r.offending_txs[0]).unwrap();
    }
    s
}

pub type ClassScores = BTreeMap<VulnClass, f64>;

/// Scores at or above this flag a class.
pub const SCORE_THRESHOLD: f64 = 0.5;

/// Scores one transaction's abnormal executions. A learned backend can be
/// swapped in behind this trait.
pub trait Classifier: Send + Sync {
    fn name(&self) -> &'static str;
    fn classify(&self, trace: &CategorizedTrace, abnormal: &[AbnormalExecution]) -> ClassScores;
}

/// Each query maps to its class with certainty.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleClassifier;

impl Classifier for RuleClassifier {
    fn name(&self) -> &'static str {
        "rules"
    }

    fn classify(&self, _trace: &CategorizedTrace, abnormal: &[AbnormalExecution]) -> ClassScores {
        abnormal.iter().map(|a| (VulnClass::for_query(a.pattern), 1.0)).collect()
    }
}

/// Turns per-transaction abnormal executions into reports for `contract`.
///
/// `items` holds each trace with its matches, in chain order. Q4 matches
/// only count once `confirm_order(tx, related)` says the pair really is
/// order dependent.
pub fn detect(
    contract: Address,
    items: &[(CategorizedTrace, Vec<AbnormalExecution>)],
    classifier: &dyn Classifier,
    confirm_order: &mut dyn FnMut(&TxHash, &TxHash) -> bool,
) -> Vec<VulnerabilityReport> {
    let mut by_class: BTreeMap<VulnClass, VulnerabilityReport> = BTreeMap::new();
    for (trace, abnormal) in items {
        if trace.contract != contract || abnormal.is_empty() {
            continue;
        }
        let scores = classifier.classify(trace, abnormal);
        for (class, score) in scores {
            if score < SCORE_THRESHOLD {
                continue;
            }
            let evidence: Vec<AbnormalExecution> = abnormal
                .iter()
                .filter(|a| a.pattern == class.query())
                .filter(|a| match (a.pattern, a.related_tx) {
                    (QueryId::Q4, Some(other)) => confirm_order(&a.tx_hash, &other),
                    (QueryId::Q4, None) => false,
                    _ => true,
                })
                .cloned()
                .collect();
            if evidence.is_empty() {
                continue;
            }
            let r = by_class.entry(class).or_insert_with(|| VulnerabilityReport {
                contract,
                vuln_class: class,
                offending_txs: Vec::new(),
                evidence: Vec::new(),
            });
            if !r.offending_txs.contains(&trace.tx_hash) {
                r.offending_txs.push(trace.tx_hash);
            }
            r.evidence.extend(evidence);
        }
    }
    by_class.into_values().collect()
}
