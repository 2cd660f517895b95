//! Consortium-chain toolkit for coordinating disaster relief logistics.
//!
//! The crate is layered bottom-up: [`vm`] executes contract bytecode with a
//! per-instruction trace, [`ledger`] orders transactions into agreed blocks,
//! [`relief`] deploys the relief workflow contracts and matches supply to
//! demand, [`audit`] mines confirmed traces for the five vulnerability
//! classes, and [`forensics`] anchors tamper-evident transaction clusters.
//! [`scenario`] drives all of it from a JSON description.

pub mod api;
pub mod audit;
pub mod corpus;
pub mod forensics;
pub mod ledger;
pub mod relief;
pub mod run_dir;
pub mod scenario;
pub mod serde_hex;
pub mod types;
pub mod vm;

pub use types::{sha3, Address, Hash32, TxHash};
