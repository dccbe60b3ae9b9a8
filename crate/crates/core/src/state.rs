//! World state: accounts and contract instances.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::codec::Encoder;
use crate::crypto::PublicKey;
use crate::hash::{AccountId, ContractAddress, Hash};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Account {
    pub key: PublicKey,
    pub balance: u64,
    /// Nonce of the last accepted transaction; zero before the first one.
    pub nonce: u64,
}

/// One committed write to a storage key. `None` records a removal.
pub type HistoryEntry = (u64, Option<Vec<u8>>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractInstance {
    pub address: ContractAddress,
    pub code_id: String,
    pub owner: AccountId,
    pub deployed_at: u64,
    pub storage: BTreeMap<Vec<u8>, Vec<u8>>,
    pub history: BTreeMap<Vec<u8>, Vec<HistoryEntry>>,
    pub balance: u64,
    pub killed: bool,
}

impl ContractInstance {
    pub fn new(address: ContractAddress, code_id: &str, owner: AccountId, height: u64) -> Self {
        Self {
            address,
            code_id: code_id.to_string(),
            owner,
            deployed_at: height,
            storage: BTreeMap::new(),
            history: BTreeMap::new(),
            balance: 0,
            killed: false,
        }
    }

    pub fn write(&mut self, key: &[u8], value: Option<Vec<u8>>, height: u64) {
        match &value {
            Some(v) => {
                self.storage.insert(key.to_vec(), v.clone());
            }
            None => {
                self.storage.remove(key);
            }
        }
        self.history.entry(key.to_vec()).or_default().push((height, value));
    }

    fn encode_into(&self, enc: &mut Encoder) {
        enc.put(&self.address)
            .str(&self.code_id)
            .put(&self.owner)
            .u64(self.deployed_at)
            .u64(self.balance)
            .bool(self.killed);
        enc.u32(self.storage.len() as u32);
        for (k, v) in &self.storage {
            enc.bytes(k).bytes(v);
        }
        enc.u32(self.history.len() as u32);
        for (k, entries) in &self.history {
            enc.bytes(k);
            enc.seq(entries, |e, (h, v)| {
                e.u64(*h);
                match v {
                    Some(v) => e.u8(1).bytes(v),
                    None => e.u8(0),
                };
            });
        }
    }
}

/// Contracts sit behind `Arc` so that snapshots are cheap and only the
/// contracts a call touches get copied.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldState {
    pub accounts: BTreeMap<AccountId, Account>,
    pub contracts: BTreeMap<ContractAddress, Arc<ContractInstance>>,
}

impl WorldState {
    pub fn account(&self, id: &AccountId) -> Option<&Account> {
        self.accounts.get(id)
    }

    pub fn contract(&self, addr: &ContractAddress) -> Option<&ContractInstance> {
        self.contracts.get(addr).map(|c| c.as_ref())
    }

    pub fn contract_mut(&mut self, addr: &ContractAddress) -> Option<&mut ContractInstance> {
        self.contracts.get_mut(addr).map(Arc::make_mut)
    }

    /// Sum of all account and contract balances.
    pub fn total_supply(&self) -> u128 {
        let accounts: u128 = self.accounts.values().map(|a| a.balance as u128).sum();
        let contracts: u128 = self.contracts.values().map(|c| c.balance as u128).sum();
        accounts + contracts
    }

    /// Digest over the canonical encoding of the full state, including
    /// per-key write history.
    pub fn digest(&self) -> Hash {
        let mut enc = Encoder::new();
        enc.raw(b"thingledger/state/v1");
        enc.u32(self.accounts.len() as u32);
        for (id, acct) in &self.accounts {
            enc.put(id).put(&acct.key).u64(acct.balance).u64(acct.nonce);
        }
        enc.u32(self.contracts.len() as u32);
        for c in self.contracts.values() {
            c.encode_into(&mut enc);
        }
        Hash::of(&enc.finish())
    }
}
