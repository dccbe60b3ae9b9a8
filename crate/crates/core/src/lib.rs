//! Deterministic permissioned-ledger simulator for IoT smart-contract
//! patterns: a hash-chained ledger with a native contract runtime, a
//! standard library of contracts, a name resolver over zone contracts, a
//! datagram gateway that custodies device keys, and a scenario driver.

pub mod codec;
pub mod crypto;
pub mod gateway;
pub mod hash;
pub mod ledger;
pub mod resolver;
pub mod runtime;
pub mod scenario;
pub mod state;
pub mod stdlib;

pub use codec::{Args, Canonical, DecodeError, Value};
pub use crypto::{PublicKey, Signature, Signer};
pub use hash::{AccountId, ContractAddress, Hash};
pub use ledger::{Block, ChainParams, Event, Ledger, LedgerError, Receipt, Status, Target, Transaction};
pub use runtime::{Behavior, CodeRegistry, ContractError, Ctx};
pub use stdlib::Milli;
